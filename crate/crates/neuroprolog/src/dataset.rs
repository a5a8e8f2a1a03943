//! Training-corpus tooling: load KB/SOLVE entries, run the two-stage
//! quality-assurance pipeline (parse check, then sandboxed execution with
//! determinism and answer-format checks), mix weighted cocktail training
//! files, split train/validation, and report corpus statistics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

use crate::core::{parse_number, PrologProgram};
use crate::diagnostics::{classify_execution, Diagnosis, ErrorClass};
use crate::executor::{ExecutorError, ProgramExecutor};

pub const KB_PREFIX: &str = "[KNOWLEDGE]";
pub const SOLVE_PREFIX: &str = "[SOLVE]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TaskKind {
    Kb,
    Solve,
}

/// One training example: an instruction (carrying the task prefix), an
/// optional natural-language input, and a Prolog program as the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub task: TaskKind,
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    pub output: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("corpus with positive mixing weight is empty")]
    EmptyCorpus,
    #[error("invalid mix specification: {0}")]
    InvalidSpec(String),
    #[error("corpus entry {index}: {detail}")]
    BadEntry { index: usize, detail: String },
    #[error("corpus file is neither a JSON array nor JSON Lines: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    instruction: String,
    #[serde(default)]
    input: String,
    output: String,
}

fn entry_from_record(index: usize, record: RawRecord) -> Result<CorpusEntry, DatasetError> {
    let task = if record.instruction.starts_with(KB_PREFIX) {
        TaskKind::Kb
    } else if record.instruction.starts_with(SOLVE_PREFIX) {
        TaskKind::Solve
    } else {
        return Err(DatasetError::BadEntry {
            index,
            detail: format!(
                "instruction must begin with {KB_PREFIX:?} or {SOLVE_PREFIX:?}"
            ),
        });
    };
    if record.output.trim().is_empty() {
        return Err(DatasetError::BadEntry {
            index,
            detail: "output Prolog source is empty".into(),
        });
    }
    Ok(CorpusEntry {
        task,
        instruction: record.instruction,
        input: record.input,
        output: record.output,
    })
}

/// Load a corpus file. Accepts a JSON array of records or JSON Lines; the
/// task is inferred from the instruction prefix.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusEntry>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let records: Vec<RawRecord> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| DatasetError::Malformed(e.to_string()))?
    } else {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: RawRecord = serde_json::from_str(line)
                .map_err(|e| DatasetError::Malformed(format!("line {}: {e}", lineno + 1)))?;
            records.push(record);
        }
        records
    };
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| entry_from_record(i, r))
        .collect()
}

/// Outcome of the two-stage QA pipeline for one entry. `executed_ok`
/// implies `parse_ok`; an entry passes overall only when all four flags
/// hold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaVerdict {
    pub entry_index: usize,
    pub parse_ok: bool,
    pub executed_ok: bool,
    pub deterministic: bool,
    pub answer_format_ok: bool,
    pub duration_ms: u64,
    pub failure_detail: Option<Diagnosis>,
}

impl QaVerdict {
    pub fn passed(&self) -> bool {
        self.parse_ok && self.executed_ok && self.deterministic && self.answer_format_ok
    }
}

/// Stage 1: read every term of the entry without executing anything, so
/// unparseable code never runs.
const PARSE_DRIVER: &str = r#"main :-
    catch(read_all('entry.pl'), Error,
          ( print_message(error, Error),
            halt(2)
          )),
    halt(0).

read_all(File) :-
    open(File, read, Stream),
    read_loop(Stream),
    close(Stream).

read_loop(Stream) :-
    read_term(Stream, Term, []),
    (   Term == end_of_file
    ->  true
    ;   read_loop(Stream)
    ).

:- initialization(main).
"#;

/// Stage 2 harness for entries without their own entry point: consult the
/// entry, call solve/1 once, print the single answer.
const EXEC_HARNESS: &str = r#":- consult(entry).

main :-
    catch(run_solve, Error,
          ( print_message(error, Error),
            halt(2)
          )).

run_solve :-
    (   solve(Result)
    ->  format("~w~n", [Result]),
        halt(0)
    ;   halt(3)
    ).

:- initialization(main).
"#;

fn last_line(stdout: &str) -> Option<&str> {
    stdout.lines().rev().find(|l| !l.trim().is_empty()).map(str::trim)
}

fn qa_diagnosis(class: ErrorClass, message: &str) -> Diagnosis {
    Diagnosis {
        class,
        line: None,
        raw_message: message.to_string(),
    }
}

/// Run the QA pipeline on one entry: parse check, execution under the
/// configured timeout, a second execution to confirm determinism, and an
/// answer-format check (numeric, or the literal `ok` used by knowledge-base
/// entries).
pub fn validate_entry(
    entry_index: usize,
    entry: &CorpusEntry,
    executor: &dyn ProgramExecutor,
) -> Result<QaVerdict, ExecutorError> {
    let mut verdict = QaVerdict {
        entry_index,
        parse_ok: false,
        executed_ok: false,
        deterministic: false,
        answer_format_ok: false,
        duration_ms: 0,
        failure_detail: None,
    };

    let parse_driver = PrologProgram {
        source: PARSE_DRIVER.to_string(),
        extracted_from: String::new(),
    };
    let parse_raw =
        executor.execute_with_aux(&parse_driver, &[("entry.pl", entry.output.as_str())])?;
    verdict.duration_ms = parse_raw.duration_ms;
    if !parse_raw.succeeded() {
        verdict.failure_detail = classify_execution(&parse_raw);
        return Ok(verdict);
    }
    verdict.parse_ok = true;

    let self_contained = entry.output.contains("initialization(");
    let run = |executor: &dyn ProgramExecutor| {
        if self_contained {
            let program = PrologProgram {
                source: entry.output.clone(),
                extracted_from: String::new(),
            };
            executor.execute(&program)
        } else {
            let harness = PrologProgram {
                source: EXEC_HARNESS.to_string(),
                extracted_from: String::new(),
            };
            executor.execute_with_aux(&harness, &[("entry.pl", entry.output.as_str())])
        }
    };

    let first = run(executor)?;
    verdict.duration_ms = first.duration_ms;
    if !first.succeeded() {
        verdict.failure_detail = classify_execution(&first);
        return Ok(verdict);
    }
    verdict.executed_ok = true;

    let second = run(executor)?;
    if second.stdout != first.stdout || !second.succeeded() {
        verdict.failure_detail = Some(qa_diagnosis(
            ErrorClass::UnknownError,
            "nondeterministic output: two executions differed",
        ));
        return Ok(verdict);
    }
    verdict.deterministic = true;

    match last_line(&first.stdout) {
        Some(line) if line == "ok" || parse_number(line).is_some() => {
            verdict.answer_format_ok = true;
        }
        Some(line) => {
            verdict.failure_detail = Some(qa_diagnosis(
                ErrorClass::UnknownError,
                &format!("answer is neither numeric nor \"ok\": {line:?}"),
            ));
        }
        None => {
            verdict.failure_detail = Some(qa_diagnosis(
                ErrorClass::UnknownError,
                "program printed no answer",
            ));
        }
    }
    Ok(verdict)
}

/// Validate every entry in order. `skip_execution` stops after stage 1 for
/// corpora too large to execute, recording the later flags as failed.
pub fn validate_corpus(
    entries: &[CorpusEntry],
    executor: &dyn ProgramExecutor,
    skip_execution: bool,
) -> Result<Vec<QaVerdict>, ExecutorError> {
    let mut verdicts = Vec::with_capacity(entries.len());
    for (index, entry) in entries.iter().enumerate() {
        if skip_execution {
            let parse_driver = PrologProgram {
                source: PARSE_DRIVER.to_string(),
                extracted_from: String::new(),
            };
            let raw = executor
                .execute_with_aux(&parse_driver, &[("entry.pl", entry.output.as_str())])?;
            let parse_ok = raw.succeeded();
            verdicts.push(QaVerdict {
                entry_index: index,
                parse_ok,
                executed_ok: false,
                deterministic: false,
                answer_format_ok: false,
                duration_ms: raw.duration_ms,
                failure_detail: if parse_ok {
                    None
                } else {
                    classify_execution(&raw)
                },
            });
        } else {
            verdicts.push(validate_entry(index, entry, executor)?);
        }
    }
    Ok(verdicts)
}

/// Mixing weights and split controls for cocktail training files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub lambda_kb: f64,
    pub lambda_solve: f64,
    pub seed: u64,
    pub split_ratio: f64,
}

impl MixSpec {
    /// Weights proportional to the corpus sizes, 90/10 split: emits every
    /// entry of both corpora exactly once.
    pub fn natural(kb_len: usize, solve_len: usize, seed: u64) -> Self {
        let total = (kb_len + solve_len).max(1) as f64;
        MixSpec {
            lambda_kb: kb_len as f64 / total,
            lambda_solve: solve_len as f64 / total,
            seed,
            split_ratio: 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.lambda_kb < 0.0 || self.lambda_solve < 0.0 {
            return Err(DatasetError::InvalidSpec(
                "mixing weights must be non-negative".into(),
            ));
        }
        if (self.lambda_kb + self.lambda_solve - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSpec(format!(
                "weights must sum to 1, got {}",
                self.lambda_kb + self.lambda_solve
            )));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(DatasetError::InvalidSpec(format!(
                "split ratio must lie in (0,1), got {}",
                self.split_ratio
            )));
        }
        Ok(())
    }
}

/// Per-epoch weight schedule hook. The published recipe uses one static
/// mix; a curriculum over the weights can replace this without touching the
/// mixer itself.
pub fn static_lambda_schedule(spec: &MixSpec, epochs: usize) -> Vec<MixSpec> {
    vec![spec.clone(); epochs]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixManifest {
    pub seed: u64,
    pub lambda_kb: f64,
    pub lambda_solve: f64,
    pub kb_input: usize,
    pub solve_input: usize,
    pub kb_emitted: usize,
    pub solve_emitted: usize,
    pub total_emitted: usize,
    pub kb_digest: String,
    pub solve_digest: String,
    pub output_digest: String,
}

#[derive(Debug, Clone)]
pub struct MixOutput {
    pub records: Vec<CorpusEntry>,
    pub manifest: MixManifest,
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Serialize entries as JSON Lines (the training-file format).
pub fn corpus_jsonl(entries: &[CorpusEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).expect("corpus entries serialize"));
        out.push('\n');
    }
    out
}

pub fn write_corpus_jsonl(path: &Path, entries: &[CorpusEntry]) -> std::io::Result<()> {
    std::fs::write(path, corpus_jsonl(entries))
}

/// Draw `m` entries using replacement-free passes: repeated full shuffled
/// passes over the corpus plus one truncated pass, so per-entry counts never
/// differ by more than one.
fn draw(entries: &[CorpusEntry], m: usize, rng: &mut ChaCha8Rng) -> Vec<CorpusEntry> {
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let mut pass: Vec<usize> = (0..entries.len()).collect();
        pass.shuffle(rng);
        for idx in pass {
            if out.len() == m {
                break;
            }
            out.push(entries[idx].clone());
        }
    }
    out
}

/// Build a cocktail training sequence whose KB share matches `lambda_kb`.
/// Output size equals the combined input size; with natural weights every
/// input entry appears exactly once. Seeded, so equal inputs and seed give
/// byte-identical files.
pub fn mix_cocktail(
    kb: &[CorpusEntry],
    solve: &[CorpusEntry],
    spec: &MixSpec,
) -> Result<MixOutput, DatasetError> {
    spec.validate()?;
    let total = kb.len() + solve.len();
    if total == 0 {
        return Err(DatasetError::EmptyCorpus);
    }
    let kb_target = (spec.lambda_kb * total as f64).round() as usize;
    let kb_target = kb_target.min(total);
    let solve_target = total - kb_target;
    if kb_target > 0 && kb.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    if solve_target > 0 && solve.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = draw(kb, kb_target, &mut rng);
    records.extend(draw(solve, solve_target, &mut rng));
    records.shuffle(&mut rng);

    let kb_emitted = records.iter().filter(|e| e.task == TaskKind::Kb).count();
    let output_text = corpus_jsonl(&records);
    let manifest = MixManifest {
        seed: spec.seed,
        lambda_kb: spec.lambda_kb,
        lambda_solve: spec.lambda_solve,
        kb_input: kb.len(),
        solve_input: solve.len(),
        kb_emitted,
        solve_emitted: records.len() - kb_emitted,
        total_emitted: records.len(),
        kb_digest: sha256_hex(&corpus_jsonl(kb)),
        solve_digest: sha256_hex(&corpus_jsonl(solve)),
        output_digest: sha256_hex(&output_text),
    };
    Ok(MixOutput { records, manifest })
}

/// Seeded shuffle-and-partition; the train side gets round(ratio * n)
/// entries, and the two sides are disjoint and covering.
pub fn split_train_val(
    entries: &[CorpusEntry],
    ratio: f64,
    seed: u64,
) -> (Vec<CorpusEntry>, Vec<CorpusEntry>) {
    assert!(ratio > 0.0 && ratio < 1.0, "split ratio must lie in (0,1)");
    let mut shuffled: Vec<CorpusEntry> = entries.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let train_len = ((ratio * entries.len() as f64).round() as usize).min(entries.len());
    let val = shuffled.split_off(train_len);
    (shuffled, val)
}

/// Corpus-level descriptive statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    pub kb_count: usize,
    pub solve_count: usize,
    pub mean_input_chars: Option<f64>,
    pub mean_output_chars: Option<f64>,
    pub mean_output_lines: Option<f64>,
    /// Share (percent) of entries importing the rational-constraint library.
    pub clpq_share: Option<f64>,
}

pub fn corpus_stats(entries: &[CorpusEntry]) -> CorpusStats {
    let count = entries.len();
    if count == 0 {
        return CorpusStats {
            count: 0,
            kb_count: 0,
            solve_count: 0,
            mean_input_chars: None,
            mean_output_chars: None,
            mean_output_lines: None,
            clpq_share: None,
        };
    }
    let kb_count = entries.iter().filter(|e| e.task == TaskKind::Kb).count();
    let total_input: usize = entries.iter().map(|e| e.input.chars().count()).sum();
    let total_output: usize = entries.iter().map(|e| e.output.chars().count()).sum();
    let total_lines: usize = entries.iter().map(|e| e.output.lines().count()).sum();
    let clpq = entries
        .iter()
        .filter(|e| e.output.contains("library(clpq)"))
        .count();
    CorpusStats {
        count,
        kb_count,
        solve_count: count - kb_count,
        mean_input_chars: Some(total_input as f64 / count as f64),
        mean_output_chars: Some(total_output as f64 / count as f64),
        mean_output_lines: Some(total_lines as f64 / count as f64),
        clpq_share: Some(clpq as f64 * 100.0 / count as f64),
    }
}
