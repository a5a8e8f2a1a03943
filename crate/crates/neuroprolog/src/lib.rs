//! Execution-guided decoding for math word problems: a language-model
//! backend proposes a Prolog program, a sandboxed SWI-Prolog subprocess runs
//! it, failures are classified against a sixteen-class error taxonomy, and a
//! targeted repair prompt feeds the diagnosis back for up to k attempts.
//!
//! The crate also carries the training-data side of the same system:
//! corpus QA (parse check, sandboxed execution, determinism and answer
//! format), weighted KB/SOLVE cocktail mixing, and train/validation splits.
//!
//! Modules:
//! - [`core`]: problems, exact rational answers, answer parsing/comparison.
//! - [`executor`]: sandboxed interpreter subprocess with timeout enforcement.
//! - [`diagnostics`]: the error taxonomy, stderr classification, repair
//!   strategies.
//! - [`prompts`]: prompt templates and program extraction from model text.
//! - [`backends`]: scripted, HTTP, recording, and replay model backends.
//! - [`pipeline`]: the generate-execute-classify-repair loop and benchmark
//!   driver.
//! - [`metrics`]: the metric suite, error histograms, McNemar significance.
//! - [`dataset`]: corpus loading, QA, cocktail mixing, splits, statistics.

pub mod backends;
pub mod core;
pub mod dataset;
pub mod diagnostics;
pub mod executor;
pub mod metrics;
pub mod pipeline;
pub mod prompts;

pub use crate::core::{answers_equal, parse_answer, parse_number, ExactNumber, Problem};
pub use crate::diagnostics::{classify, Diagnosis, ErrorClass};
pub use crate::executor::{ExecutorConfig, ProgramExecutor, SwiplExecutor};
pub use crate::pipeline::{run_benchmark, solve_problem, ProblemTrace};
