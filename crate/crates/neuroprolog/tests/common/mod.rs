use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard, PoisonError};

use neuroprolog::executor::{ExecutorConfig, SwiplExecutor};

static LIVE_INTERPRETER: Mutex<()> = Mutex::new(());

/// Serialize tests that spawn live interpreter processes. The test host may
/// expose a single CPU, where concurrent interpreter startups starve each
/// other past the execution timeout.
#[allow(dead_code)]
pub fn live_guard() -> MutexGuard<'static, ()> {
    LIVE_INTERPRETER
        .lock()
        .unwrap_or_else(PoisonError::into_inner)
}

/// Locate the repository's Prolog interpreter. Override with the
/// NEUROPROLOG_SWIPL environment variable to test against another build.
pub fn shim_path() -> PathBuf {
    if let Ok(path) = std::env::var("NEUROPROLOG_SWIPL") {
        return PathBuf::from(path);
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../tools/swipl-shim/swipl")
        .canonicalize()
        .expect("interpreter shim present in repository")
}

/// Executor with a generous timeout: wasm interpreter startup is slow on
/// loaded single-CPU hosts, and these tests exercise logic, not latency.
#[allow(dead_code)]
pub fn live_executor() -> SwiplExecutor {
    SwiplExecutor::new(ExecutorConfig::new(shim_path()).with_timeout_ms(15_000))
        .expect("interpreter launches")
}

#[allow(dead_code)]
pub fn live_executor_with_timeout(ms: u64) -> SwiplExecutor {
    SwiplExecutor::new(ExecutorConfig::new(shim_path()).with_timeout_ms(ms))
        .expect("interpreter launches")
}

#[allow(dead_code)]
pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Scripted repair-loop scenarios: a per-attempt outcome plan compiled into
/// a backend script and canned executions, for hermetic pipeline tests.
#[allow(dead_code)]
pub mod scenario {
    use neuroprolog::backends::{ScriptEntry, ScriptedBackend};
    use neuroprolog::core::{ExactNumber, Problem};
    use neuroprolog::executor::ScriptedExecutor;
    use neuroprolog::prompts::extract_program;

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Step {
        /// Clean execution printing the gold answer.
        Correct,
        /// Clean execution printing a wrong answer.
        Wrong,
        /// Interpreter rejects the program with a syntax error.
        Syntax,
        /// Runtime division by zero.
        Domain,
        /// Model response holds no extractable program.
        Miss,
    }

    fn scenario_source(value: i64) -> String {
        format!(
            ":- use_module(library(clpq)).\n\
             :- initialization(main).\n\
             \n\
             solve(Result) :-\n    \
             {{ Result = {value} }}.\n\
             \n\
             main :-\n    \
             solve(Result),\n    \
             format(\"~w~n\", [Result]),\n    \
             halt.\n"
        )
    }

    /// Whether `step` ends the repair loop for a problem with or without a
    /// gold answer.
    pub fn stops(step: Step, gold_free: bool) -> bool {
        match step {
            Step::Correct => true,
            Step::Wrong => gold_free,
            _ => false,
        }
    }

    /// Compile per-problem plans into problems, a backend script, and a
    /// scripted executor. Plan index `p`, attempt `a` get unique programs so
    /// canned executions never collide across problems.
    pub fn build_batch(plans: &[(Vec<Step>, bool)]) -> (Vec<Problem>, ScriptedBackend, ScriptedExecutor) {
        let mut problems = Vec::new();
        let mut script = Vec::new();
        let mut executor = ScriptedExecutor::new();
        for (p, (steps, gold_free)) in plans.iter().enumerate() {
            let id = format!("p{p:03}");
            let gold = 1_000_000 + p as i64 * 100;
            problems.push(Problem {
                id: id.clone(),
                question: format!("Problem {p}: compute the value."),
                gold_answer: (!gold_free).then(|| ExactNumber::from_integer(gold)),
            });
            for (i, step) in steps.iter().enumerate() {
                let attempt = i as u32 + 1;
                let response = match step {
                    Step::Correct => scenario_source(gold),
                    Step::Wrong => scenario_source(gold + 1),
                    Step::Syntax | Step::Domain => {
                        scenario_source(p as i64 * 100 + attempt as i64)
                    }
                    Step::Miss => format!("No usable clause for {id} attempt {attempt}."),
                };
                if *step != Step::Miss {
                    let source = extract_program(&response)
                        .expect("scenario programs extract")
                        .source;
                    match step {
                        Step::Correct => executor.insert_success(source, &gold.to_string()),
                        Step::Wrong => executor.insert_success(source, &(gold + 1).to_string()),
                        Step::Syntax => executor.insert_error(
                            source,
                            "ERROR: program.pl:5:19: Syntax error: Operator expected",
                        ),
                        Step::Domain => executor.insert_error(
                            source,
                            "ERROR: program.pl:5:\nERROR:    Arithmetic: evaluation error: `zero_divisor'",
                        ),
                        Step::Miss => unreachable!(),
                    }
                }
                script.push(ScriptEntry {
                    problem_id: id.clone(),
                    attempt,
                    response,
                });
            }
        }
        (problems, ScriptedBackend::new(script), executor)
    }
}
