//! Command-line surface for the execution-guided decoding harness: evaluate
//! problem sets against a Prolog interpreter, compare paired runs, debug the
//! failure classifier, and QA/mix training corpora.
//!
//! Exit status separates method results from harness health: a completed
//! evaluation exits 0 regardless of accuracy, infrastructure failures exit 2,
//! and `validate-dataset` exits 1 when entries fail QA.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use neuroprolog::backends::{
    DecodingParams, HttpBackend, ModelBackend, RecordingBackend, ReplayBackend, ScriptedBackend,
};
use neuroprolog::core::{load_problems, parse_answer, parse_number, ExactNumber, RawExecution};
use neuroprolog::dataset::{
    corpus_stats, load_corpus, mix_cocktail, split_train_val, validate_corpus, write_corpus_jsonl,
    MixSpec, QaVerdict,
};
use neuroprolog::diagnostics::{classify, classify_execution, repair_strategy, Diagnosis};
use neuroprolog::executor::{ExecutorConfig, SwiplExecutor, DEFAULT_TIMEOUT_MS};
use neuroprolog::metrics::{
    compute_run_report, histogram_jsonl, mcnemar, report_csv, report_markdown,
};
use neuroprolog::pipeline::{load_traces_jsonl, run_benchmark, write_traces_jsonl};

#[derive(Parser)]
#[command(
    name = "neuroprolog",
    version,
    about = "Execution-guided decoding harness: math word problems to Prolog with interpreter-feedback repair"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a problem set end to end and write run artifacts.
    Run(RunArgs),
    /// McNemar significance between two paired runs.
    Compare(CompareArgs),
    /// Classify a captured interpreter failure (classifier debug frontend).
    Classify(ClassifyArgs),
    /// Two-stage QA over a training corpus.
    ValidateDataset(ValidateArgs),
    /// Mix KB and SOLVE corpora into cocktail train/validation files.
    Mix(MixArgs),
    /// Descriptive statistics for a corpus file.
    Stats(StatsArgs),
    /// Evaluate while recording every model call to a transcript.
    Record(RecordArgs),
    /// Re-run a recorded evaluation from its transcript, no network.
    Replay(ReplayArgs),
}

/// Flags shared by every evaluation-shaped subcommand. Optional knobs fall
/// back to the config file, then to built-in defaults.
#[derive(Args)]
struct SharedRunArgs {
    /// Problems file (JSON Lines with id, question, answer).
    #[arg(long)]
    problems: PathBuf,
    /// JSON config file; explicit flags win over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repair budget k: total attempts per problem (default 3).
    #[arg(long)]
    max_iterations: Option<u32>,
    /// Wall-clock budget per execution in milliseconds (default 5000).
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Parallel problem workers (default 4).
    #[arg(long)]
    workers: Option<usize>,
    /// Prolog interpreter executable (default: swipl on PATH).
    #[arg(long)]
    swipl: Option<PathBuf>,
    /// Score without gold answers: any clean execution ends the loop.
    #[arg(long)]
    gold_free: bool,
    /// Directory receiving traces.jsonl, report.csv, report.md,
    /// histogram.jsonl, and run_config.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Row label used in report.md (default: problems file stem).
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    shared: SharedRunArgs,
    /// Scripted backend: JSON Lines of {problem_id, attempt, response}.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Replay backend: transcript from a previous recorded run.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// HTTP backend: base URL of an OpenAI-compatible endpoint.
    #[arg(long)]
    base_url: Option<String>,
    /// Model name sent to the HTTP backend.
    #[arg(long)]
    model: Option<String>,
    /// Also record every model call to this transcript.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Args)]
struct RecordArgs {
    #[command(flatten)]
    shared: SharedRunArgs,
    /// Base URL of an OpenAI-compatible endpoint.
    #[arg(long)]
    base_url: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long)]
    model: Option<String>,
    /// Transcript file capturing every model call.
    #[arg(long)]
    transcript: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    shared: SharedRunArgs,
    /// Transcript captured by a previous record run.
    #[arg(long)]
    transcript: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// First run: a traces.jsonl file or a directory holding one.
    run_a: PathBuf,
    /// Second run: a traces.jsonl file or a directory holding one.
    run_b: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// File holding the captured stderr text.
    stderr_file: PathBuf,
    /// File holding the captured stdout text.
    #[arg(long)]
    stdout_file: Option<PathBuf>,
    /// Exit code of the captured run.
    #[arg(long, default_value_t = 0)]
    exit_code: i32,
    /// The run was killed at the timeout.
    #[arg(long)]
    timed_out: bool,
    /// Produced answer; defaults to the last stdout line.
    #[arg(long)]
    produced: Option<String>,
    /// Gold answer; enables wrong-answer detection.
    #[arg(long)]
    gold: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Corpus file: JSON Lines or a JSON array of entries.
    #[arg(long)]
    corpus: PathBuf,
    /// Prolog interpreter executable (default: swipl on PATH).
    #[arg(long)]
    swipl: Option<PathBuf>,
    /// Wall-clock budget per entry execution in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Stop after the parse stage (corpora too large to execute).
    #[arg(long)]
    skip_execution: bool,
    /// Write per-entry verdicts as JSON Lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MixArgs {
    /// KB corpus file.
    #[arg(long)]
    kb: PathBuf,
    /// SOLVE corpus file.
    #[arg(long)]
    solve: PathBuf,
    /// Shuffle seed; identical seeds reproduce identical files.
    #[arg(long)]
    seed: u64,
    /// KB mixing weight (default: natural corpus proportions).
    #[arg(long)]
    lambda_kb: Option<f64>,
    /// SOLVE mixing weight (default: natural corpus proportions).
    #[arg(long)]
    lambda_solve: Option<f64>,
    /// Train share of the train/validation split.
    #[arg(long, default_value_t = 0.9)]
    split_ratio: f64,
    /// Directory receiving cocktail_train.jsonl, cocktail_val.jsonl,
    /// and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Corpus file: JSON Lines or a JSON array of entries.
    #[arg(long)]
    corpus: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Classify(args) => cmd_classify(args),
        Command::ValidateDataset(args) => cmd_validate_dataset(args),
        Command::Mix(args) => cmd_mix(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Record(args) => cmd_record(args),
        Command::Replay(args) => cmd_replay(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Values accepted from a JSON config file; any explicit flag overrides the
/// matching field. Unknown keys are rejected to catch typos.
#[derive(Default)]
struct FileConfig {
    script: Option<PathBuf>,
    replay: Option<PathBuf>,
    base_url: Option<String>,
    model: Option<String>,
    max_iterations: Option<u32>,
    timeout_ms: Option<u64>,
    workers: Option<usize>,
    swipl: Option<PathBuf>,
    gold_free: Option<bool>,
    label: Option<String>,
}

const CONFIG_KEYS: [&str; 10] = [
    "script",
    "replay",
    "base_url",
    "model",
    "max_iterations",
    "timeout_ms",
    "workers",
    "swipl",
    "gold_free",
    "label",
];

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&raw)
        .with_context(|| format!("config file {} is not valid JSON", path.display()))?;
    let obj = value
        .as_object()
        .context("config file must hold a JSON object")?;
    for key in obj.keys() {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            bail!("unknown config key {key:?} (expected one of {CONFIG_KEYS:?})");
        }
    }
    let str_field = |key: &str| -> Result<Option<String>> {
        match obj.get(key) {
            None => Ok(None),
            Some(v) => Ok(Some(
                v.as_str()
                    .with_context(|| format!("config key {key:?} must be a string"))?
                    .to_string(),
            )),
        }
    };
    let uint_field = |key: &str| -> Result<Option<u64>> {
        match obj.get(key) {
            None => Ok(None),
            Some(v) => Ok(Some(v.as_u64().with_context(|| {
                format!("config key {key:?} must be a non-negative integer")
            })?)),
        }
    };
    let gold_free = match obj.get("gold_free") {
        None => None,
        Some(v) => Some(
            v.as_bool()
                .context("config key \"gold_free\" must be a boolean")?,
        ),
    };
    Ok(FileConfig {
        script: str_field("script")?.map(PathBuf::from),
        replay: str_field("replay")?.map(PathBuf::from),
        base_url: str_field("base_url")?,
        model: str_field("model")?,
        max_iterations: uint_field("max_iterations")?.map(|v| v as u32),
        timeout_ms: uint_field("timeout_ms")?,
        workers: uint_field("workers")?.map(|v| v as usize),
        swipl: str_field("swipl")?.map(PathBuf::from),
        gold_free,
        label: str_field("label")?,
    })
}

enum BackendChoice {
    Scripted(PathBuf),
    Replay(PathBuf),
    Http { base_url: String, model: String },
}

impl BackendChoice {
    fn describe(&self) -> serde_json::Value {
        match self {
            BackendChoice::Scripted(path) => serde_json::json!({
                "kind": "scripted", "script": path,
            }),
            BackendChoice::Replay(path) => serde_json::json!({
                "kind": "replay", "transcript": path,
            }),
            BackendChoice::Http { base_url, model } => serde_json::json!({
                "kind": "http", "base_url": base_url, "model": model,
            }),
        }
    }
}

/// Fully resolved evaluation configuration: flags over config file over
/// defaults, with exactly one backend selected.
struct ResolvedRun {
    problems: PathBuf,
    backend: BackendChoice,
    record: Option<PathBuf>,
    k: u32,
    timeout_ms: u64,
    workers: usize,
    swipl: PathBuf,
    gold_free: bool,
    out_dir: PathBuf,
    label: String,
}

fn resolve_run(
    shared: SharedRunArgs,
    script: Option<PathBuf>,
    replay: Option<PathBuf>,
    base_url: Option<String>,
    model: Option<String>,
    record: Option<PathBuf>,
) -> Result<ResolvedRun> {
    let file = load_file_config(shared.config.as_deref())?;

    let script = script.or(file.script);
    let replay = replay.or(file.replay);
    let base_url = base_url.or(file.base_url);
    let model = model.or(file.model);
    let backend = match (script, replay, &base_url) {
        (Some(path), None, None) => BackendChoice::Scripted(path),
        (None, Some(path), None) => BackendChoice::Replay(path),
        (None, None, Some(url)) => BackendChoice::Http {
            base_url: url.clone(),
            model: model.context("--base-url requires --model")?,
        },
        (None, None, None) => {
            bail!("select a backend: --script FILE, --replay FILE, or --base-url URL --model NAME")
        }
        _ => bail!("--script, --replay, and --base-url are mutually exclusive"),
    };

    let k = shared.max_iterations.or(file.max_iterations).unwrap_or(3);
    if k < 1 {
        bail!("--max-iterations must be at least 1");
    }
    let workers = shared.workers.or(file.workers).unwrap_or(4);
    if workers < 1 {
        bail!("--workers must be at least 1");
    }
    let label = shared.label.or(file.label).unwrap_or_else(|| {
        shared
            .problems
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".to_string())
    });
    Ok(ResolvedRun {
        problems: shared.problems,
        backend,
        record,
        k,
        timeout_ms: shared
            .timeout_ms
            .or(file.timeout_ms)
            .unwrap_or(DEFAULT_TIMEOUT_MS),
        workers,
        swipl: shared
            .swipl
            .or(file.swipl)
            .unwrap_or_else(|| PathBuf::from("swipl")),
        gold_free: shared.gold_free || file.gold_free.unwrap_or(false),
        out_dir: shared.out_dir,
        label,
    })
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let resolved = resolve_run(
        args.shared,
        args.script,
        args.replay,
        args.base_url,
        args.model,
        args.record,
    )?;
    execute_run(resolved)
}

fn cmd_record(args: RecordArgs) -> Result<ExitCode> {
    let resolved = resolve_run(
        args.shared,
        None,
        None,
        args.base_url,
        args.model,
        Some(args.transcript),
    )?;
    if !matches!(resolved.backend, BackendChoice::Http { .. }) {
        bail!("record runs against a live endpoint: pass --base-url and --model");
    }
    execute_run(resolved)
}

fn cmd_replay(args: ReplayArgs) -> Result<ExitCode> {
    let resolved = resolve_run(args.shared, None, Some(args.transcript), None, None, None)?;
    execute_run(resolved)
}

fn execute_run(cfg: ResolvedRun) -> Result<ExitCode> {
    let executor_cfg = ExecutorConfig::new(&cfg.swipl).with_timeout_ms(cfg.timeout_ms);
    let executor = SwiplExecutor::new(executor_cfg).context("cannot start the interpreter")?;
    let problems = load_problems(&cfg.problems, cfg.gold_free)
        .with_context(|| format!("cannot load problems from {}", cfg.problems.display()))?;
    if problems.is_empty() {
        bail!("problem set {} is empty", cfg.problems.display());
    }

    let inner: Box<dyn ModelBackend> = match &cfg.backend {
        BackendChoice::Scripted(path) => Box::new(
            ScriptedBackend::load(path)
                .with_context(|| format!("cannot load script {}", path.display()))?,
        ),
        BackendChoice::Replay(path) => Box::new(
            ReplayBackend::load(path)
                .with_context(|| format!("cannot load transcript {}", path.display()))?,
        ),
        BackendChoice::Http { base_url, model } => Box::new(HttpBackend::new(base_url, model)),
    };
    let backend: Box<dyn ModelBackend> = match &cfg.record {
        Some(path) => Box::new(
            RecordingBackend::create(inner, path)
                .with_context(|| format!("cannot create transcript {}", path.display()))?,
        ),
        None => inner,
    };

    let params = DecodingParams::default();
    let outcome = run_benchmark(
        &problems,
        &backend,
        &executor,
        cfg.k,
        cfg.workers,
        &params,
    );
    let report = compute_run_report(&outcome);

    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.out_dir.display()))?;
    write_traces_jsonl(&cfg.out_dir.join("traces.jsonl"), &outcome.traces)
        .context("cannot write traces.jsonl")?;
    std::fs::write(cfg.out_dir.join("report.csv"), report_csv(&report))
        .context("cannot write report.csv")?;
    std::fs::write(
        cfg.out_dir.join("report.md"),
        report_markdown(&cfg.label, &report, None),
    )
    .context("cannot write report.md")?;
    std::fs::write(cfg.out_dir.join("histogram.jsonl"), histogram_jsonl(&report))
        .context("cannot write histogram.jsonl")?;
    let provenance = serde_json::json!({
        "problems": cfg.problems,
        "backend": cfg.backend.describe(),
        "record": cfg.record,
        "max_iterations": cfg.k,
        "timeout_ms": cfg.timeout_ms,
        "workers": cfg.workers,
        "gold_free": cfg.gold_free,
        "interpreter": cfg.swipl,
        "interpreter_version": executor.version(),
        "label": cfg.label,
        "decoding": { "temperature": params.temperature, "max_tokens": params.max_tokens },
    });
    std::fs::write(
        cfg.out_dir.join("run_config.json"),
        format!("{:#}\n", provenance),
    )
    .context("cannot write run_config.json")?;

    println!("n: {} (infra failures: {})", report.n, report.infra_failures);
    println!("accuracy: {:.2}", report.accuracy);
    println!("executability: {:.2}", report.executability);
    println!("first-try: {:.2}", report.first_try);
    println!("correction: {}", fmt_opt(report.correction_rate));
    println!("avg iterations: {:.2}", report.avg_iterations);
    println!("efficiency: {:.2}", report.efficiency);
    println!("artifacts: {}", cfg.out_dir.display());

    if !outcome.run_valid || !outcome.infra_failures.is_empty() {
        for failure in &outcome.infra_failures {
            eprintln!(
                "infrastructure failure: problem {} attempt {}: {}",
                failure.problem_id, failure.attempt, failure.detail
            );
        }
        if !outcome.run_valid {
            eprintln!("run invalid: no problem produced a trace");
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.2}"),
        None => "-".to_string(),
    }
}

fn traces_path(run: &Path) -> PathBuf {
    if run.is_dir() {
        run.join("traces.jsonl")
    } else {
        run.to_path_buf()
    }
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let path_a = traces_path(&args.run_a);
    let path_b = traces_path(&args.run_b);
    let traces_a = load_traces_jsonl(&path_a)
        .with_context(|| format!("cannot load traces from {}", path_a.display()))?;
    let traces_b = load_traces_jsonl(&path_b)
        .with_context(|| format!("cannot load traces from {}", path_b.display()))?;
    let result = mcnemar(&traces_a, &traces_b).context("paired comparison failed")?;
    println!("problems: {}", traces_a.len());
    println!("solved by A only (b): {}", result.b);
    println!("solved by B only (c): {}", result.c);
    println!("p-value: {:.6}", result.p_value);
    let symbol = result.marker.symbol();
    println!(
        "significance: {}",
        if symbol.is_empty() { "ns" } else { symbol }
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode> {
    let stderr = std::fs::read_to_string(&args.stderr_file)
        .with_context(|| format!("cannot read {}", args.stderr_file.display()))?;
    let stdout = match &args.stdout_file {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?,
        None => String::new(),
    };
    let raw = RawExecution {
        stdout,
        stderr,
        exit_code: if args.timed_out {
            None
        } else {
            Some(args.exit_code)
        },
        duration_ms: 0,
        timed_out: args.timed_out,
    };

    let diagnosis = match &args.gold {
        Some(gold_text) => {
            let gold = parse_gold_flag(gold_text)?;
            let produced: Option<ExactNumber> = match &args.produced {
                Some(text) => Some(
                    parse_number(text)
                        .with_context(|| format!("--produced {text:?} is not numeric"))?,
                ),
                None => parse_answer(&raw.stdout),
            };
            classify(&raw, produced.as_ref(), &gold)
        }
        None => classify_execution(&raw),
    };

    match diagnosis {
        None => println!("OK"),
        Some(Diagnosis {
            class,
            line,
            raw_message,
        }) => {
            match line {
                Some(line) => println!("{} (line {line})", class.name()),
                None => println!("{}", class.name()),
            }
            println!("message: {raw_message}");
            println!("repair: {}", repair_strategy(class).fix_instruction);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_gold_flag(text: &str) -> Result<ExactNumber> {
    parse_number(text).with_context(|| format!("--gold {text:?} is not numeric"))
}

fn cmd_validate_dataset(args: ValidateArgs) -> Result<ExitCode> {
    let entries = load_corpus(&args.corpus)
        .with_context(|| format!("cannot load corpus {}", args.corpus.display()))?;
    let swipl = args.swipl.unwrap_or_else(|| PathBuf::from("swipl"));
    let executor_cfg = ExecutorConfig::new(&swipl)
        .with_timeout_ms(args.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS));
    let executor = SwiplExecutor::new(executor_cfg).context("cannot start the interpreter")?;

    let verdicts = validate_corpus(&entries, &executor, args.skip_execution)
        .context("QA execution failed")?;

    let mut failures = 0usize;
    for verdict in &verdicts {
        if verdict.passed() || (args.skip_execution && verdict.parse_ok) {
            println!("entry {}: PASS ({} ms)", verdict.entry_index, verdict.duration_ms);
        } else {
            failures += 1;
            println!(
                "entry {}: FAIL stage={} {}",
                verdict.entry_index,
                failed_stage(verdict),
                verdict
                    .failure_detail
                    .as_ref()
                    .map(|d| format!("[{}] {}", d.class.name(), d.raw_message))
                    .unwrap_or_default()
            );
        }
    }
    println!("{}/{} entries passed", verdicts.len() - failures, verdicts.len());

    if let Some(out) = &args.out {
        let mut text = String::new();
        for verdict in &verdicts {
            text.push_str(&serde_json::to_string(verdict)?);
            text.push('\n');
        }
        std::fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn failed_stage(verdict: &QaVerdict) -> &'static str {
    if !verdict.parse_ok {
        "parse"
    } else if !verdict.executed_ok {
        "execution"
    } else if !verdict.deterministic {
        "determinism"
    } else {
        "answer-format"
    }
}

fn cmd_mix(args: MixArgs) -> Result<ExitCode> {
    let kb = load_corpus(&args.kb)
        .with_context(|| format!("cannot load KB corpus {}", args.kb.display()))?;
    let solve = load_corpus(&args.solve)
        .with_context(|| format!("cannot load SOLVE corpus {}", args.solve.display()))?;

    let mut spec = MixSpec::natural(kb.len(), solve.len(), args.seed);
    if let Some(lambda) = args.lambda_kb {
        spec.lambda_kb = lambda;
    }
    if let Some(lambda) = args.lambda_solve {
        spec.lambda_solve = lambda;
    }
    spec.split_ratio = args.split_ratio;

    let output = mix_cocktail(&kb, &solve, &spec).context("mixing failed")?;
    let (train, val) = split_train_val(&output.records, spec.split_ratio, spec.seed);

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create output directory {}", args.out_dir.display()))?;
    write_corpus_jsonl(&args.out_dir.join("cocktail_train.jsonl"), &train)
        .context("cannot write cocktail_train.jsonl")?;
    write_corpus_jsonl(&args.out_dir.join("cocktail_val.jsonl"), &val)
        .context("cannot write cocktail_val.jsonl")?;
    let manifest = serde_json::json!({
        "mix": output.manifest,
        "split": { "ratio": spec.split_ratio, "train": train.len(), "val": val.len() },
    });
    std::fs::write(
        args.out_dir.join("manifest.json"),
        format!("{:#}\n", manifest),
    )
    .context("cannot write manifest.json")?;

    println!(
        "mixed {} records ({} KB, {} SOLVE); split {}/{}",
        output.manifest.total_emitted,
        output.manifest.kb_emitted,
        output.manifest.solve_emitted,
        train.len(),
        val.len()
    );
    println!("artifacts: {}", args.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(args: StatsArgs) -> Result<ExitCode> {
    let entries = load_corpus(&args.corpus)
        .with_context(|| format!("cannot load corpus {}", args.corpus.display()))?;
    let stats = corpus_stats(&entries);
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(ExitCode::SUCCESS)
}
