//! Aggregate metrics over benchmark traces: accuracy, executability,
//! first-try rate, correction rate, average iterations, pipeline efficiency,
//! error histograms with per-class fixability, and McNemar significance
//! between paired runs.
//!
//! First-try and correction come in two readings. The execution-based
//! reading (attempt 1 produced no interpreter error; an initial failure
//! counts as corrected once any later attempt executes cleanly) is primary:
//! it is the one that satisfies the identity
//! `executability = first_try + (100 - first_try) * correction / 100`.
//! The correctness-based reading (attempt 1 solved; corrected means
//! eventually solved) is reported alongside as a secondary column.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::diagnostics::ErrorClass;
use crate::pipeline::{BenchmarkOutcome, ProblemTrace};

/// Aggregated results of one benchmark run. Percentages are in [0, 100].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    /// % of problems solved with a verified-correct answer.
    pub accuracy: f64,
    /// % of problems with at least one error-free execution.
    pub executability: f64,
    /// % of problems whose first attempt executed without error.
    pub first_try: f64,
    /// Among problems whose first attempt errored, % later executing
    /// cleanly. Absent when no first attempt errored.
    pub correction_rate: Option<f64>,
    /// Secondary, correctness-based reading: % solved on attempt 1.
    pub first_try_correct: f64,
    /// Secondary: among problems not solved on attempt 1, % eventually
    /// solved. Absent when every problem was solved on attempt 1.
    pub correction_rate_correct: Option<f64>,
    /// Mean attempts consumed per problem.
    pub avg_iterations: f64,
    /// accuracy * (executability / 100) / avg_iterations.
    pub efficiency: f64,
    /// Final-attempt diagnosis classes of failed problems.
    pub error_histogram: BTreeMap<ErrorClass, usize>,
    /// Per first-error class, % of those problems that ended solved.
    pub fixability: BTreeMap<ErrorClass, f64>,
    /// Problems lost to backend/executor infrastructure failures; excluded
    /// from every denominator above.
    pub infra_failures: usize,
    /// False when the run produced no usable traces at all.
    pub run_valid: bool,
    /// True when any problem lacked a gold answer, making accuracy and the
    /// correctness-based columns partial.
    pub gold_free: bool,
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 * 100.0 / total as f64
    }
}

/// Pipeline efficiency: correct-answer throughput per iteration spent.
pub fn efficiency(accuracy: f64, exec_rate: f64, avg_iter: f64) -> f64 {
    assert!(avg_iter >= 1.0, "average iterations cannot be below 1");
    accuracy * (exec_rate / 100.0) / avg_iter
}

/// The algebraic executability implied by a first-try rate and a correction
/// rate (both in percent).
pub fn executability_identity(first_try: f64, correction_rate: f64) -> f64 {
    first_try + (100.0 - first_try) * correction_rate / 100.0
}

/// Compute the full metric suite over completed traces.
pub fn compute_metrics(traces: &[ProblemTrace]) -> RunReport {
    report_with_infrastructure(traces, 0, !traces.is_empty())
}

/// Compute metrics for a benchmark outcome, carrying its infrastructure
/// failure count and validity flag through to the report.
pub fn compute_run_report(outcome: &BenchmarkOutcome) -> RunReport {
    report_with_infrastructure(
        &outcome.traces,
        outcome.infra_failures.len(),
        outcome.run_valid,
    )
}

fn report_with_infrastructure(
    traces: &[ProblemTrace],
    infra_failures: usize,
    run_valid: bool,
) -> RunReport {
    let n = traces.len();
    let solved = traces.iter().filter(|t| t.solved()).count();
    let executable = traces
        .iter()
        .filter(|t| t.attempts.iter().any(|a| a.outcome.executed_cleanly()))
        .count();
    let first_clean = |t: &&ProblemTrace| {
        t.attempts
            .first()
            .is_some_and(|a| a.outcome.executed_cleanly())
    };
    let first_try_exec = traces.iter().filter(first_clean).count();
    let first_failures: Vec<&ProblemTrace> =
        traces.iter().filter(|t| !first_clean(t)).collect();
    let corrected = first_failures
        .iter()
        .filter(|t| t.attempts.iter().skip(1).any(|a| a.outcome.executed_cleanly()))
        .count();

    let first_try_solved = traces
        .iter()
        .filter(|t| t.attempts.len() == 1 && t.solved())
        .count();
    let not_first_solved: Vec<&ProblemTrace> = traces
        .iter()
        .filter(|t| !(t.attempts.len() == 1 && t.solved()))
        .collect();
    let corrected_solved = not_first_solved.iter().filter(|t| t.solved()).count();

    let total_iterations: u64 = traces.iter().map(|t| t.iterations_used as u64).sum();
    let avg_iterations = if n == 0 {
        0.0
    } else {
        total_iterations as f64 / n as f64
    };

    let accuracy = percent(solved, n);
    let executability = percent(executable, n);
    let efficiency_value = if n == 0 || avg_iterations < 1.0 {
        0.0
    } else {
        efficiency(accuracy, executability, avg_iterations)
    };

    let (error_histogram, fixability) = error_distribution(traces);
    let gold_free = traces.iter().any(|t| t.problem.gold_answer.is_none());

    RunReport {
        n,
        accuracy,
        executability,
        first_try: percent(first_try_exec, n),
        correction_rate: if first_failures.is_empty() {
            None
        } else {
            Some(percent(corrected, first_failures.len()))
        },
        first_try_correct: percent(first_try_solved, n),
        correction_rate_correct: if not_first_solved.is_empty() {
            None
        } else {
            Some(percent(corrected_solved, not_first_solved.len()))
        },
        avg_iterations,
        efficiency: efficiency_value,
        error_histogram,
        fixability,
        infra_failures,
        run_valid,
        gold_free,
    }
}

/// Histogram of final-attempt error classes over failed traces, plus
/// fixability: for each class observed as a trace's FIRST error, the share
/// of those traces that ended solved.
pub fn error_distribution(
    traces: &[ProblemTrace],
) -> (BTreeMap<ErrorClass, usize>, BTreeMap<ErrorClass, f64>) {
    let mut histogram: BTreeMap<ErrorClass, usize> = BTreeMap::new();
    for trace in traces {
        if let Some(class) = trace.final_error_class() {
            *histogram.entry(class).or_insert(0) += 1;
        }
    }

    let mut first_error_totals: BTreeMap<ErrorClass, (usize, usize)> = BTreeMap::new();
    for trace in traces {
        if let Some(class) = trace.first_error_class() {
            let slot = first_error_totals.entry(class).or_insert((0, 0));
            slot.0 += 1;
            if trace.solved() {
                slot.1 += 1;
            }
        }
    }
    let fixability = first_error_totals
        .into_iter()
        .map(|(class, (total, fixed))| (class, percent(fixed, total)))
        .collect();
    (histogram, fixability)
}

/// Discordant-pair significance between two paired runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// Problems solved by run A only.
    pub b: usize,
    /// Problems solved by run B only.
    pub c: usize,
    pub p_value: f64,
    pub marker: SignificanceMarker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignificanceMarker {
    NotSignificant,
    PBelow05,
    PBelow01,
}

impl SignificanceMarker {
    pub fn symbol(&self) -> &'static str {
        match self {
            SignificanceMarker::NotSignificant => "",
            SignificanceMarker::PBelow05 => "†",
            SignificanceMarker::PBelow01 => "‡",
        }
    }

    pub fn from_p(p: f64) -> Self {
        if p < 0.01 {
            SignificanceMarker::PBelow01
        } else if p < 0.05 {
            SignificanceMarker::PBelow05
        } else {
            SignificanceMarker::NotSignificant
        }
    }
}

#[derive(Debug, Error)]
pub enum McnemarError {
    #[error("paired runs cover different problem sets: {only_a} ids only in A, {only_b} only in B")]
    IdMismatch { only_a: usize, only_b: usize },
}

/// McNemar's test on paired solved/unsolved outcomes. Uses the exact
/// two-sided binomial p-value for fewer than 50 discordant pairs and the
/// continuity-corrected chi-square approximation otherwise.
pub fn mcnemar(
    traces_a: &[ProblemTrace],
    traces_b: &[ProblemTrace],
) -> Result<SignificanceResult, McnemarError> {
    let solved_a: BTreeMap<&str, bool> = traces_a
        .iter()
        .map(|t| (t.problem.id.as_str(), t.solved()))
        .collect();
    let solved_b: BTreeMap<&str, bool> = traces_b
        .iter()
        .map(|t| (t.problem.id.as_str(), t.solved()))
        .collect();
    let ids_a: BTreeSet<&str> = solved_a.keys().copied().collect();
    let ids_b: BTreeSet<&str> = solved_b.keys().copied().collect();
    if ids_a != ids_b {
        return Err(McnemarError::IdMismatch {
            only_a: ids_a.difference(&ids_b).count(),
            only_b: ids_b.difference(&ids_a).count(),
        });
    }

    let mut b = 0usize;
    let mut c = 0usize;
    for (id, &a_ok) in &solved_a {
        let b_ok = solved_b[id];
        if a_ok && !b_ok {
            b += 1;
        } else if !a_ok && b_ok {
            c += 1;
        }
    }
    let p_value = mcnemar_p(b, c);
    Ok(SignificanceResult {
        b,
        c,
        p_value,
        marker: SignificanceMarker::from_p(p_value),
    })
}

/// Discordant-pair p-value used by [`mcnemar`], exposed for callers that
/// already hold the counts.
pub fn mcnemar_p_value(b: usize, c: usize) -> f64 {
    mcnemar_p(b, c)
}

fn mcnemar_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    if n < 50 {
        exact_binomial_two_sided(b.max(c) as u32, n as u32)
    } else {
        let diff = b.abs_diff(c) as f64;
        let statistic = (diff - 1.0).max(0.0).powi(2) / n as f64;
        let dist = ChiSquared::new(1.0).expect("one degree of freedom");
        // Survival function rather than 1 - cdf: keeps extreme tails positive
        // instead of underflowing to an exact zero p-value.
        dist.sf(statistic)
    }
}

/// Two-sided exact p under Binomial(n, 1/2): twice the upper tail from k,
/// capped at 1. Exact integer arithmetic; n < 50 keeps every term in u128.
fn exact_binomial_two_sided(k: u32, n: u32) -> f64 {
    debug_assert!(n < 50 && k <= n && 2 * k >= n);
    let mut tail: u128 = 0;
    for i in k..=n {
        tail += binomial(n, i);
    }
    let denom: u128 = 1u128 << n;
    let p = 2.0 * (tail as f64) / (denom as f64);
    p.min(1.0)
}

fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}

fn fmt_opt_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.2}"),
        None => "-".to_string(),
    }
}

/// One-row CSV rendering (header + data row).
pub fn report_csv(report: &RunReport) -> String {
    let header = "n,accuracy,executability,first_try,correction_rate,first_try_correct,correction_rate_correct,avg_iterations,efficiency,infra_failures,run_valid,gold_free";
    let row = format!(
        "{},{:.2},{:.2},{:.2},{},{:.2},{},{:.2},{:.2},{},{},{}",
        report.n,
        report.accuracy,
        report.executability,
        report.first_try,
        fmt_opt_percent(report.correction_rate),
        report.first_try_correct,
        fmt_opt_percent(report.correction_rate_correct),
        report.avg_iterations,
        report.efficiency,
        report.infra_failures,
        report.run_valid,
        report.gold_free,
    );
    format!("{header}\n{row}\n")
}

/// Markdown table row in the published column layout
/// (Acc. / Exec. / 1st-Try / Corr. / Avg Iter / Sig.).
pub fn report_markdown(
    label: &str,
    report: &RunReport,
    significance: Option<&SignificanceResult>,
) -> String {
    let mut out = String::new();
    out.push_str("| Configuration | Acc. | Exec. | 1st-Try | Corr. | Avg Iter | Sig. |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    let sig = significance.map(|s| s.marker.symbol()).unwrap_or("");
    out.push_str(&format!(
        "| {label} | {:.2} | {:.2} | {:.2} | {} | {:.2} | {sig} |\n",
        report.accuracy,
        report.executability,
        report.first_try,
        fmt_opt_percent(report.correction_rate),
        report.avg_iterations,
    ));
    out
}

/// Error histogram as JSON Lines, one class per line with count and share
/// of failures.
pub fn histogram_jsonl(report: &RunReport) -> String {
    let total: usize = report.error_histogram.values().sum();
    let mut out = String::new();
    for (class, count) in &report.error_histogram {
        let record = serde_json::json!({
            "class": class.name(),
            "count": count,
            "share_of_failures": percent(*count, total),
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}
