//! The execution-guided decoding loop: generate a program, run it, classify
//! any failure, and feed the diagnosis back through a repair prompt for up to
//! k attempts, stopping early on the first verified-correct execution.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, DecodingParams, ModelBackend};
use crate::core::{parse_answer, ExactNumber, Problem, PrologProgram, RawExecution};
use crate::diagnostics::{classify, classify_execution, Diagnosis, ErrorClass};
use crate::executor::{ExecutorError, ProgramExecutor};
use crate::prompts::{extract_program, initial_prompt, repair_prompt, PromptKind};

/// Trace file schema version, bumped on any incompatible field change.
pub const SCHEMA_VERSION: u32 = 1;

/// Default iteration budget.
pub const DEFAULT_MAX_ITERATIONS: u32 = 3;

/// What a single generate-execute round concluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttemptOutcome {
    /// Ran cleanly and matched the gold answer.
    SuccessCorrect { produced: ExactNumber },
    /// Ran cleanly with no gold answer to check against (gold-free mode).
    SuccessUnverified { produced: Option<ExactNumber> },
    /// Ran cleanly but the answer was wrong or unreadable.
    SuccessWrong {
        produced: Option<ExactNumber>,
        diagnosis: Diagnosis,
    },
    /// The interpreter rejected or aborted the program (or no program could
    /// be extracted from the model response).
    Error { diagnosis: Diagnosis },
}

impl AttemptOutcome {
    /// True when the interpreter accepted and ran the program without error,
    /// regardless of answer correctness.
    pub fn executed_cleanly(&self) -> bool {
        !matches!(self, AttemptOutcome::Error { .. })
    }

    pub fn diagnosis(&self) -> Option<&Diagnosis> {
        match self {
            AttemptOutcome::SuccessWrong { diagnosis, .. }
            | AttemptOutcome::Error { diagnosis } => Some(diagnosis),
            _ => None,
        }
    }
}

/// One generate-execute-classify round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attempt {
    pub index: u32,
    pub prompt_kind: PromptKind,
    /// Absent when no program could be extracted from the model response.
    pub program: Option<PrologProgram>,
    pub execution: RawExecution,
    pub outcome: AttemptOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    /// Clean execution with a verified-correct answer.
    Solved,
    /// Clean execution in gold-free mode; correctness unknowable.
    SolvedUnverified,
    Failed,
}

/// The full per-problem record of the decoding loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemTrace {
    pub schema_version: u32,
    pub problem: Problem,
    pub attempts: Vec<Attempt>,
    pub final_status: FinalStatus,
    pub iterations_used: u32,
}

impl ProblemTrace {
    pub fn solved(&self) -> bool {
        self.final_status == FinalStatus::Solved
    }

    /// First attempt that ended in an error or wrong answer, if any.
    pub fn first_error_class(&self) -> Option<ErrorClass> {
        self.attempts
            .iter()
            .find_map(|a| a.outcome.diagnosis().map(|d| d.class))
    }

    /// Diagnosis class of the last attempt when the trace failed.
    pub fn final_error_class(&self) -> Option<ErrorClass> {
        if self.final_status == FinalStatus::Failed {
            self.attempts
                .last()
                .and_then(|a| a.outcome.diagnosis().map(|d| d.class))
        } else {
            None
        }
    }
}

/// Infrastructure failure: the backend or executor broke, so the problem has
/// no trace. These are reported separately and never enter metric
/// denominators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfraFailure {
    pub problem_id: String,
    pub attempt: u32,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("backend failed on problem {problem_id:?} attempt {attempt}: {source}")]
    Backend {
        problem_id: String,
        attempt: u32,
        #[source]
        source: BackendError,
    },
    #[error("executor failed on problem {problem_id:?} attempt {attempt}: {source}")]
    Executor {
        problem_id: String,
        attempt: u32,
        #[source]
        source: ExecutorError,
    },
}

impl PipelineError {
    pub fn attempt(&self) -> u32 {
        match self {
            PipelineError::Backend { attempt, .. } | PipelineError::Executor { attempt, .. } => {
                *attempt
            }
        }
    }
}

/// Run the decoding loop for a single problem.
///
/// Attempt 1 uses the initial prompt; each later attempt uses a repair
/// prompt built from the immediately preceding attempt's program and
/// diagnosis. The loop stops at the first clean, verified execution or when
/// the budget `k` is spent. A response with no extractable program still
/// consumes an attempt, recorded as an UNKNOWN_ERROR outcome.
pub fn solve_problem(
    problem: &Problem,
    backend: &dyn ModelBackend,
    executor: &dyn ProgramExecutor,
    k: u32,
    params: &DecodingParams,
) -> Result<ProblemTrace, PipelineError> {
    assert!(k >= 1, "iteration budget must be at least 1");
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut previous_program: Option<PrologProgram> = None;
    let mut previous_diagnosis: Option<Diagnosis> = None;
    let mut final_status = FinalStatus::Failed;

    for index in 1..=k {
        let bundle = if index == 1 {
            initial_prompt(&problem.id, &problem.question)
        } else {
            let diagnosis = previous_diagnosis
                .as_ref()
                .expect("repair attempts always follow a diagnosed failure");
            let previous = previous_program
                .as_ref()
                .expect("repair attempts always follow a generated response");
            repair_prompt(&problem.id, index, &problem.question, previous, diagnosis)
        };
        let response = backend
            .generate(&bundle, params)
            .map_err(|source| PipelineError::Backend {
                problem_id: problem.id.clone(),
                attempt: index,
                source,
            })?;

        let attempt = match extract_program(&response) {
            Err(err) => {
                let diagnosis = Diagnosis {
                    class: ErrorClass::UnknownError,
                    line: None,
                    raw_message: format!("program extraction failed: {err}"),
                };
                previous_program = Some(PrologProgram {
                    source: response.trim().to_string(),
                    extracted_from: response.clone(),
                });
                previous_diagnosis = Some(diagnosis.clone());
                Attempt {
                    index,
                    prompt_kind: bundle.kind,
                    program: None,
                    execution: extraction_failure_execution(),
                    outcome: AttemptOutcome::Error { diagnosis },
                }
            }
            Ok(program) => {
                let raw = executor.execute(&program).map_err(|source| {
                    PipelineError::Executor {
                        problem_id: problem.id.clone(),
                        attempt: index,
                        source,
                    }
                })?;
                let produced = parse_answer(&raw.stdout);
                let outcome = match &problem.gold_answer {
                    Some(gold) => match classify(&raw, produced.as_ref(), gold) {
                        None => AttemptOutcome::SuccessCorrect {
                            produced: produced.clone().expect("verified answers parse"),
                        },
                        Some(diagnosis) if diagnosis.class == ErrorClass::WrongAnswer => {
                            AttemptOutcome::SuccessWrong {
                                produced: produced.clone(),
                                diagnosis,
                            }
                        }
                        Some(diagnosis) => AttemptOutcome::Error { diagnosis },
                    },
                    None => match classify_execution(&raw) {
                        None => AttemptOutcome::SuccessUnverified {
                            produced: produced.clone(),
                        },
                        Some(diagnosis) => AttemptOutcome::Error { diagnosis },
                    },
                };
                previous_program = Some(program.clone());
                previous_diagnosis = outcome.diagnosis().cloned();
                Attempt {
                    index,
                    prompt_kind: bundle.kind,
                    program: Some(program),
                    execution: raw,
                    outcome,
                }
            }
        };

        let stop = match attempt.outcome {
            AttemptOutcome::SuccessCorrect { .. } => {
                final_status = FinalStatus::Solved;
                true
            }
            AttemptOutcome::SuccessUnverified { .. } => {
                final_status = FinalStatus::SolvedUnverified;
                true
            }
            _ => false,
        };
        attempts.push(attempt);
        if stop {
            break;
        }
    }

    let iterations_used = attempts.len() as u32;
    Ok(ProblemTrace {
        schema_version: SCHEMA_VERSION,
        problem: problem.clone(),
        attempts,
        final_status,
        iterations_used,
    })
}

fn extraction_failure_execution() -> RawExecution {
    RawExecution {
        stdout: String::new(),
        stderr: "program extraction failed: model response held no Prolog clause".to_string(),
        exit_code: Some(1),
        duration_ms: 0,
        timed_out: false,
    }
}

/// Result of a full benchmark sweep: one trace per problem that completed
/// the loop, plus any problems lost to infrastructure failures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub traces: Vec<ProblemTrace>,
    pub infra_failures: Vec<InfraFailure>,
    /// False when no problem produced a trace (e.g. backend fully down).
    pub run_valid: bool,
}

/// Run every problem through `solve_problem`, up to `workers` in parallel.
/// Attempts inside one problem stay sequential (each repair depends on the
/// previous diagnosis). Traces come back sorted by problem id regardless of
/// completion order, so equal inputs give byte-equal reports at any worker
/// count.
pub fn run_benchmark(
    problems: &[Problem],
    backend: &dyn ModelBackend,
    executor: &dyn ProgramExecutor,
    k: u32,
    workers: usize,
    params: &DecodingParams,
) -> BenchmarkOutcome {
    assert!(workers >= 1, "worker count must be at least 1");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool construction");
    let results: Vec<Result<ProblemTrace, PipelineError>> = pool.install(|| {
        use rayon::prelude::*;
        problems
            .par_iter()
            .map(|p| solve_problem(p, backend, executor, k, params))
            .collect()
    });

    let mut traces = Vec::new();
    let mut infra_failures = Vec::new();
    for (problem, result) in problems.iter().zip(results) {
        match result {
            Ok(trace) => traces.push(trace),
            Err(err) => infra_failures.push(InfraFailure {
                problem_id: problem.id.clone(),
                attempt: err.attempt(),
                detail: err.to_string(),
            }),
        }
    }
    traces.sort_by(|a, b| a.problem.id.cmp(&b.problem.id));
    infra_failures.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    let run_valid = !traces.is_empty();
    BenchmarkOutcome {
        traces,
        infra_failures,
        run_valid,
    }
}

/// Persist traces as JSON Lines, one trace per line, sorted order preserved.
pub fn write_traces_jsonl(path: &Path, traces: &[ProblemTrace]) -> std::io::Result<()> {
    let mut out = String::new();
    for trace in traces {
        let line = serde_json::to_string(trace)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn load_traces_jsonl(path: &Path) -> std::io::Result<Vec<ProblemTrace>> {
    let text = std::fs::read_to_string(path)?;
    let mut traces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let trace: ProblemTrace = serde_json::from_str(line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("trace line {}: {e}", lineno + 1),
            )
        })?;
        traces.push(trace);
    }
    Ok(traces)
}

/// Structural soundness check used by tests: budget respected, early stop
/// honored, prompt kinds consistent, status consistent with the last
/// outcome.
pub fn verify_trace_invariants(trace: &ProblemTrace, k: u32) -> Result<(), String> {
    let n = trace.attempts.len();
    if n == 0 {
        return Err("trace has no attempts".into());
    }
    if n as u32 > k {
        return Err(format!("trace used {n} attempts with budget {k}"));
    }
    if trace.iterations_used as usize != n {
        return Err("iterations_used disagrees with attempt count".into());
    }
    for (i, attempt) in trace.attempts.iter().enumerate() {
        let expected_index = (i + 1) as u32;
        if attempt.index != expected_index {
            return Err(format!(
                "attempt at position {i} has index {}",
                attempt.index
            ));
        }
        let expected_kind = if expected_index == 1 {
            PromptKind::Initial
        } else {
            PromptKind::Repair
        };
        if attempt.prompt_kind != expected_kind {
            return Err(format!("attempt {expected_index} has wrong prompt kind"));
        }
        let terminal = matches!(
            attempt.outcome,
            AttemptOutcome::SuccessCorrect { .. } | AttemptOutcome::SuccessUnverified { .. }
        );
        if terminal && i + 1 != n {
            return Err(format!(
                "attempt {expected_index} succeeded but later attempts exist"
            ));
        }
    }
    let last = trace.attempts.last().expect("non-empty");
    let expected_status = match last.outcome {
        AttemptOutcome::SuccessCorrect { .. } => FinalStatus::Solved,
        AttemptOutcome::SuccessUnverified { .. } => FinalStatus::SolvedUnverified,
        _ => FinalStatus::Failed,
    };
    if trace.final_status != expected_status {
        return Err("final status disagrees with last outcome".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{ScriptEntry, ScriptedBackend};
    use crate::executor::ScriptedExecutor;

    fn problem(id: &str, gold: i64) -> Problem {
        Problem {
            id: id.to_string(),
            question: "What is the answer?".to_string(),
            gold_answer: Some(ExactNumber::from_integer(gold)),
        }
    }

    fn program_text(answer: &str) -> String {
        format!(
            "solve(X) :- X = {answer}.\nmain :- solve(X), format(\"~w~n\", [X]), halt.\n:- initialization(main).\n"
        )
    }

    fn success(stdout: &str) -> RawExecution {
        RawExecution {
            stdout: stdout.to_string(),
            stderr: String::new(),
            exit_code: Some(0),
            duration_ms: 10,
            timed_out: false,
        }
    }

    fn failure(stderr: &str) -> RawExecution {
        RawExecution {
            stdout: String::new(),
            stderr: stderr.to_string(),
            exit_code: Some(1),
            duration_ms: 10,
            timed_out: false,
        }
    }

    fn executor_for(entries: &[(&str, RawExecution)]) -> ScriptedExecutor {
        let mut executor = ScriptedExecutor::new();
        for (source, raw) in entries {
            let program = extract_program(source).expect("test program extracts");
            executor.insert(&program.source, raw.clone());
        }
        executor
    }

    #[test]
    fn first_try_success_stops_after_one_attempt() {
        let prog = program_text("42");
        let backend = ScriptedBackend::new([ScriptEntry {
            problem_id: "p1".into(),
            attempt: 1,
            response: prog.clone(),
        }]);
        let executor = executor_for(&[(prog.as_str(), success("42\n"))]);
        let trace = solve_problem(
            &problem("p1", 42),
            &backend,
            &executor,
            3,
            &DecodingParams::default(),
        )
        .unwrap();
        assert_eq!(trace.attempts.len(), 1);
        assert_eq!(trace.final_status, FinalStatus::Solved);
        assert_eq!(trace.iterations_used, 1);
        verify_trace_invariants(&trace, 3).unwrap();
    }

    #[test]
    fn repair_prompt_carries_previous_program_and_error_class() {
        let broken = program_text("undefined_thing");
        let fixed = program_text("7");
        let backend = ScriptedBackend::new([
            ScriptEntry {
                problem_id: "p1".into(),
                attempt: 1,
                response: broken.clone(),
            },
            ScriptEntry {
                problem_id: "p1".into(),
                attempt: 2,
                response: fixed.clone(),
            },
        ]);
        let executor = executor_for(&[
            (
                broken.as_str(),
                failure("ERROR: prog.pl:1: Syntax error: Operator expected"),
            ),
            (fixed.as_str(), success("7\n")),
        ]);
        let trace = solve_problem(
            &problem("p1", 7),
            &backend,
            &executor,
            3,
            &DecodingParams::default(),
        )
        .unwrap();
        assert_eq!(trace.attempts.len(), 2);
        assert_eq!(trace.final_status, FinalStatus::Solved);
        assert_eq!(trace.attempts[1].prompt_kind, PromptKind::Repair);
        assert_eq!(
            trace.attempts[0].outcome.diagnosis().unwrap().class,
            ErrorClass::SyntaxOperatorExpected
        );
        verify_trace_invariants(&trace, 3).unwrap();
    }

    #[test]
    fn budget_exhaustion_marks_failed() {
        let wrong = program_text("1");
        let backend = ScriptedBackend::new((1..=3).map(|attempt| ScriptEntry {
            problem_id: "p1".into(),
            attempt,
            response: wrong.clone(),
        }));
        let executor = executor_for(&[(wrong.as_str(), success("1\n"))]);
        let trace = solve_problem(
            &problem("p1", 2),
            &backend,
            &executor,
            3,
            &DecodingParams::default(),
        )
        .unwrap();
        assert_eq!(trace.attempts.len(), 3);
        assert_eq!(trace.final_status, FinalStatus::Failed);
        for attempt in &trace.attempts {
            assert_eq!(
                attempt.outcome.diagnosis().unwrap().class,
                ErrorClass::WrongAnswer
            );
        }
        verify_trace_invariants(&trace, 3).unwrap();
    }

    #[test]
    fn extraction_failure_consumes_an_attempt() {
        let fixed = program_text("5");
        let backend = ScriptedBackend::new([
            ScriptEntry {
                problem_id: "p1".into(),
                attempt: 1,
                response: "I cannot write Prolog for this.".into(),
            },
            ScriptEntry {
                problem_id: "p1".into(),
                attempt: 2,
                response: fixed.clone(),
            },
        ]);
        let executor = executor_for(&[(fixed.as_str(), success("5\n"))]);
        let trace = solve_problem(
            &problem("p1", 5),
            &backend,
            &executor,
            3,
            &DecodingParams::default(),
        )
        .unwrap();
        assert_eq!(trace.attempts.len(), 2);
        assert!(trace.attempts[0].program.is_none());
        assert_eq!(
            trace.attempts[0].outcome.diagnosis().unwrap().class,
            ErrorClass::UnknownError
        );
        assert_eq!(trace.final_status, FinalStatus::Solved);
    }

    #[test]
    fn gold_free_mode_stops_on_clean_execution() {
        let prog = program_text("9");
        let backend = ScriptedBackend::new([ScriptEntry {
            problem_id: "p1".into(),
            attempt: 1,
            response: prog.clone(),
        }]);
        let executor = executor_for(&[(prog.as_str(), success("9\n"))]);
        let p = Problem {
            id: "p1".into(),
            question: "q".into(),
            gold_answer: None,
        };
        let trace =
            solve_problem(&p, &backend, &executor, 3, &DecodingParams::default()).unwrap();
        assert_eq!(trace.final_status, FinalStatus::SolvedUnverified);
        assert_eq!(trace.attempts.len(), 1);
        verify_trace_invariants(&trace, 3).unwrap();
    }

    #[test]
    fn backend_miss_is_an_infrastructure_failure() {
        let backend = ScriptedBackend::new([]);
        let executor = ScriptedExecutor::new();
        let outcome = run_benchmark(
            &[problem("p1", 1), problem("p2", 2)],
            &backend,
            &executor,
            3,
            2,
            &DecodingParams::default(),
        );
        assert!(outcome.traces.is_empty());
        assert_eq!(outcome.infra_failures.len(), 2);
        assert!(!outcome.run_valid);
    }

    #[test]
    fn benchmark_sorts_traces_by_problem_id() {
        let prog = program_text("3");
        let entries: Vec<ScriptEntry> = ["p9", "p1", "p5"]
            .iter()
            .map(|id| ScriptEntry {
                problem_id: (*id).into(),
                attempt: 1,
                response: prog.clone(),
            })
            .collect();
        let backend = ScriptedBackend::new(entries);
        let executor = executor_for(&[(prog.as_str(), success("3\n"))]);
        let problems = vec![problem("p9", 3), problem("p1", 3), problem("p5", 3)];
        let outcome = run_benchmark(&problems, &backend, &executor, 3, 4, &DecodingParams::default());
        let ids: Vec<&str> = outcome
            .traces
            .iter()
            .map(|t| t.problem.id.as_str())
            .collect();
        assert_eq!(ids, vec!["p1", "p5", "p9"]);
        assert!(outcome.run_valid);
    }

    #[test]
    fn traces_round_trip_through_jsonl() {
        let prog = program_text("4");
        let backend = ScriptedBackend::new([ScriptEntry {
            problem_id: "p1".into(),
            attempt: 1,
            response: prog.clone(),
        }]);
        let executor = executor_for(&[(prog.as_str(), success("4\n"))]);
        let trace = solve_problem(
            &problem("p1", 4),
            &backend,
            &executor,
            3,
            &DecodingParams::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traces.jsonl");
        write_traces_jsonl(&path, std::slice::from_ref(&trace)).unwrap();
        let loaded = load_traces_jsonl(&path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].problem.id, "p1");
        assert_eq!(loaded[0].final_status, FinalStatus::Solved);
        assert_eq!(loaded[0].schema_version, SCHEMA_VERSION);
    }
}
