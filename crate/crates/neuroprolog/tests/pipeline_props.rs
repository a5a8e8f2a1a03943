//! Property tests for the parsing, classification, extraction, pipeline, and
//! metric layers. Everything here is hermetic: scripted backends and canned
//! executions, no subprocesses.

mod common;

use common::scenario::{build_batch, stops, Step};
use neuroprolog::backends::DecodingParams;
use neuroprolog::core::{answers_equal, parse_answer, parse_number, RawExecution};
use neuroprolog::diagnostics::{classify_execution, ErrorClass};
use neuroprolog::metrics::{self, executability_identity};
use neuroprolog::pipeline::{self, FinalStatus};
use neuroprolog::prompts::extract_program;
use proptest::prelude::*;

fn step_strategy() -> impl Strategy<Value = Step> {
    prop_oneof![
        Just(Step::Correct),
        Just(Step::Wrong),
        Just(Step::Syntax),
        Just(Step::Domain),
        Just(Step::Miss),
    ]
}

fn plan_strategy() -> impl Strategy<Value = Vec<(Vec<Step>, bool)>> {
    // Plans carry one step per budgeted attempt; early stops leave the tail
    // unused, mirroring a backend that always has a next response ready.
    prop::collection::vec(
        (prop::collection::vec(step_strategy(), 3), any::<bool>()),
        1..=10,
    )
}

proptest! {
    #[test]
    fn answers_equal_is_reflexive_and_symmetric(
        numer_a in -1_000_000i64..1_000_000,
        denom_a in 1i64..10_000,
        numer_b in -1_000_000i64..1_000_000,
        denom_b in 1i64..10_000,
    ) {
        let a = parse_number(&format!("{numer_a}/{denom_a}")).unwrap();
        let b = parse_number(&format!("{numer_b}r{denom_b}")).unwrap();
        prop_assert!(answers_equal(&a, &a, 1e-6));
        prop_assert!(answers_equal(&b, &b, 1e-6));
        prop_assert_eq!(answers_equal(&a, &b, 1e-6), answers_equal(&b, &a, 1e-6));
    }

    #[test]
    fn parse_answer_reads_the_last_nonempty_line(
        noise in prop::collection::vec("[a-zA-Z =:]{0,20}", 0..5),
        value in -1_000_000i64..1_000_000,
        trailing_blanks in 0usize..3,
    ) {
        let mut stdout = String::new();
        for line in &noise {
            stdout.push_str(line);
            stdout.push('\n');
        }
        stdout.push_str(&value.to_string());
        stdout.push('\n');
        for _ in 0..trailing_blanks {
            stdout.push_str("   \n");
        }
        let produced = parse_answer(&stdout);
        prop_assert!(produced.is_some(), "stdout: {stdout:?}");
        let expected = parse_number(&value.to_string()).unwrap();
        prop_assert!(answers_equal(&produced.unwrap(), &expected, 1e-9));
    }

    #[test]
    fn timeout_outranks_any_stderr_content(
        stderr in "[a-z :]{0,40}(syntax error|type error|domain error|)[a-z :]{0,20}",
    ) {
        let raw = RawExecution {
            stdout: String::new(),
            stderr,
            exit_code: None,
            duration_ms: 5000,
            timed_out: true,
        };
        let diagnosis = classify_execution(&raw).unwrap();
        prop_assert_eq!(diagnosis.class, ErrorClass::Timeout);
    }

    #[test]
    fn syntax_keywords_outrank_later_families(
        prefix in "[a-z ]{0,15}",
        other in prop_oneof![
            Just("type error: number expected"),
            Just("domain error: division by zero"),
            Just("instantiation error"),
            Just(""),
        ],
    ) {
        let raw = RawExecution {
            stdout: String::new(),
            stderr: format!("{prefix} syntax error: something. {other}"),
            exit_code: Some(1),
            duration_ms: 3,
            timed_out: false,
        };
        let class = classify_execution(&raw).unwrap().class;
        let syntax_family = matches!(
            class,
            ErrorClass::SyntaxOperatorExpected
                | ErrorClass::SyntaxUnexpectedEof
                | ErrorClass::SyntaxUnexpectedToken
                | ErrorClass::SyntaxError
        );
        prop_assert!(syntax_family, "got {class:?}");
    }

    #[test]
    fn type_keywords_outrank_domain_and_instantiation(
        other in prop_oneof![
            Just("domain error: division by zero"),
            Just("arguments are not sufficiently instantiated"),
        ],
    ) {
        let raw = RawExecution {
            stdout: String::new(),
            stderr: format!("type error in expression. {other}"),
            exit_code: Some(1),
            duration_ms: 3,
            timed_out: false,
        };
        let class = classify_execution(&raw).unwrap().class;
        let type_family = matches!(
            class,
            ErrorClass::TypeNotEvaluable
                | ErrorClass::TypeNumberExpected
                | ErrorClass::TypeCallableExpected
                | ErrorClass::TypeError
        );
        prop_assert!(type_family, "got {class:?}");
    }

    #[test]
    fn extraction_is_idempotent(
        value in 0i64..1_000_000,
        fence in prop_oneof![Just(""), Just("```prolog"), Just("```")],
        prose in prop_oneof![
            Just(""),
            Just("Here is the corrected program:"),
            Just("Sure! The following Prolog should work."),
        ],
    ) {
        let body = format!(
            ":- use_module(library(clpq)).\n:- initialization(main).\n\n\
             solve(Result) :-\n    {{ Result = {value} }}.\n\n\
             main :-\n    solve(Result),\n    format(\"~w~n\", [Result]),\n    halt."
        );
        let response = if fence.is_empty() {
            format!("{prose}\n{body}\n")
        } else {
            format!("{prose}\n{fence}\n{body}\n```\nHope this helps.\n")
        };
        let first = extract_program(&response).unwrap();
        let second = extract_program(&first.source).unwrap();
        prop_assert_eq!(&second.source, &first.source);
        let marker = format!("Result = {value}");
        prop_assert!(first.source.contains(&marker), "source: {}", first.source);
    }

    #[test]
    fn mcnemar_p_is_symmetric_and_bounded(b in 0usize..500, c in 0usize..500) {
        let p = metrics::mcnemar_p_value(b, c);
        let mirrored = metrics::mcnemar_p_value(c, b);
        prop_assert!(p > 0.0 && p <= 1.0, "p({b},{c}) = {p}");
        prop_assert_eq!(p.to_bits(), mirrored.to_bits());
    }

    #[test]
    fn efficiency_rewards_fewer_iterations_and_higher_rates(
        acc in 0.5f64..99.5,
        exec in 0.5f64..99.5,
        avg in 1.0f64..5.0,
        bump in 0.1f64..2.0,
    ) {
        let base = metrics::efficiency(acc, exec, avg);
        prop_assert!(metrics::efficiency(acc, exec, avg + bump) < base);
        prop_assert!(metrics::efficiency(acc + 0.4, exec, avg) > base);
        prop_assert!(metrics::efficiency(acc, exec + 0.4, avg) > base);
    }

    #[test]
    fn identity_is_bounded_and_monotone_in_correction(
        first in 0.0f64..100.0,
        corr_low in 0.0f64..100.0,
        corr_high in 0.0f64..100.0,
    ) {
        let (lo, hi) = if corr_low <= corr_high {
            (corr_low, corr_high)
        } else {
            (corr_high, corr_low)
        };
        let at_lo = executability_identity(first, lo);
        let at_hi = executability_identity(first, hi);
        prop_assert!(at_lo <= at_hi + 1e-12);
        prop_assert!(at_lo >= first - 1e-12 && at_hi <= 100.0 + 1e-12);
    }

    #[test]
    fn split_is_a_seeded_partition(
        n in 2usize..60,
        ratio in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let entries: Vec<_> = (0..n)
            .map(|i| neuroprolog::dataset::CorpusEntry {
                task: neuroprolog::dataset::TaskKind::Solve,
                instruction: format!(
                    "{} Solve the problem",
                    neuroprolog::dataset::SOLVE_PREFIX
                ),
                input: format!("q{i}"),
                output: format!("solve({i})."),
            })
            .collect();
        let (train, val) = neuroprolog::dataset::split_train_val(&entries, ratio, seed);
        let expected_train = ((ratio * n as f64).round() as usize).min(n);
        prop_assert_eq!(train.len(), expected_train);
        prop_assert_eq!(train.len() + val.len(), n);
        let mut combined: Vec<&str> = train.iter().chain(val.iter()).map(|e| e.output.as_str()).collect();
        combined.sort_unstable();
        let mut original: Vec<&str> = entries.iter().map(|e| e.output.as_str()).collect();
        original.sort_unstable();
        prop_assert_eq!(combined, original);

        let (train_again, val_again) = neuroprolog::dataset::split_train_val(&entries, ratio, seed);
        prop_assert_eq!(train_again, train);
        prop_assert_eq!(val_again, val);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn repair_loop_traces_satisfy_invariants_and_metric_identity(
        plans in plan_strategy(),
        workers in 1usize..=2,
    ) {
        let k = 3u32;
        let (problems, backend, executor) = build_batch(&plans);
        let outcome = pipeline::run_benchmark(
            &problems,
            &backend,
            &executor,
            k,
            workers,
            &DecodingParams::default(),
        );
        prop_assert!(outcome.infra_failures.is_empty(), "{:?}", outcome.infra_failures);
        prop_assert_eq!(outcome.traces.len(), plans.len());

        for trace in &outcome.traces {
            let invariants = pipeline::verify_trace_invariants(trace, k);
            prop_assert!(
                invariants.is_ok(),
                "trace {}: {invariants:?}",
                trace.problem.id
            );
            let index: usize = trace.problem.id[1..].parse().unwrap();
            let (steps, gold_free) = &plans[index];
            let stop = steps.iter().position(|s| stops(*s, *gold_free));
            let expected_len = stop.map_or(k as usize, |i| i + 1);
            prop_assert_eq!(trace.attempts.len(), expected_len);
            let expected_status = match (stop, gold_free) {
                (Some(_), false) => FinalStatus::Solved,
                (Some(_), true) => FinalStatus::SolvedUnverified,
                (None, _) => FinalStatus::Failed,
            };
            prop_assert_eq!(&trace.final_status, &expected_status);
        }

        let report = metrics::compute_run_report(&outcome);
        prop_assert!(report.accuracy <= report.executability + 1e-9);
        if let Some(correction) = report.correction_rate {
            let identity = executability_identity(report.first_try, correction);
            prop_assert!(
                (identity - report.executability).abs() < 1e-9,
                "identity {identity} vs executability {}",
                report.executability
            );
        } else {
            // No first-attempt failures: executability equals the first-try rate.
            prop_assert!((report.executability - report.first_try).abs() < 1e-9);
        }
        let total: u64 = outcome.traces.iter().map(|t| t.iterations_used as u64).sum();
        prop_assert!((report.avg_iterations * report.n as f64 - total as f64).abs() < 1e-9);
    }

    #[test]
    fn natural_mix_preserves_both_corpora_exactly(
        kb_n in 1usize..30,
        solve_n in 1usize..30,
        seed in any::<u64>(),
    ) {
        let kb: Vec<_> = (0..kb_n)
            .map(|i| neuroprolog::dataset::CorpusEntry {
                task: neuroprolog::dataset::TaskKind::Kb,
                instruction: format!("{} Encode it", neuroprolog::dataset::KB_PREFIX),
                input: String::new(),
                output: format!("kb({i})."),
            })
            .collect();
        let solve: Vec<_> = (0..solve_n)
            .map(|i| neuroprolog::dataset::CorpusEntry {
                task: neuroprolog::dataset::TaskKind::Solve,
                instruction: format!("{} Solve it", neuroprolog::dataset::SOLVE_PREFIX),
                input: String::new(),
                output: format!("solve({i})."),
            })
            .collect();
        let spec = neuroprolog::dataset::MixSpec::natural(kb_n, solve_n, seed);
        let out = neuroprolog::dataset::mix_cocktail(&kb, &solve, &spec).unwrap();
        prop_assert_eq!(out.records.len(), kb_n + solve_n);
        let mut got: Vec<&str> = out.records.iter().map(|e| e.output.as_str()).collect();
        got.sort_unstable();
        let mut want: Vec<&str> = kb.iter().chain(solve.iter()).map(|e| e.output.as_str()).collect();
        want.sort_unstable();
        prop_assert_eq!(got, want);
    }
}
