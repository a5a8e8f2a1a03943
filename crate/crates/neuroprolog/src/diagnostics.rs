//! Failure classification: a sixteen-class error taxonomy over interpreter
//! stderr, realized as a hierarchical substring matcher (syntax before type
//! before domain before instantiation), plus the per-class repair guidance
//! injected into correction prompts.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::core::{answers_equal, parse_answer, ExactNumber, RawExecution, DEFAULT_TOLERANCE};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorClass {
    SyntaxOperatorExpected,
    SyntaxUnexpectedEof,
    SyntaxUnexpectedToken,
    SyntaxError,
    TypeNotEvaluable,
    TypeNumberExpected,
    TypeCallableExpected,
    TypeError,
    DomainDivideByZero,
    DomainNegativeSqrt,
    DomainFactorialNegative,
    DomainError,
    InstantiationError,
    WrongAnswer,
    UnknownError,
    /// Artifact extension: nonterminating executions killed by the harness.
    Timeout,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 16] = [
        ErrorClass::SyntaxOperatorExpected,
        ErrorClass::SyntaxUnexpectedEof,
        ErrorClass::SyntaxUnexpectedToken,
        ErrorClass::SyntaxError,
        ErrorClass::TypeNotEvaluable,
        ErrorClass::TypeNumberExpected,
        ErrorClass::TypeCallableExpected,
        ErrorClass::TypeError,
        ErrorClass::DomainDivideByZero,
        ErrorClass::DomainNegativeSqrt,
        ErrorClass::DomainFactorialNegative,
        ErrorClass::DomainError,
        ErrorClass::InstantiationError,
        ErrorClass::WrongAnswer,
        ErrorClass::UnknownError,
        ErrorClass::Timeout,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ErrorClass::SyntaxOperatorExpected => "SYNTAX_OPERATOR_EXPECTED",
            ErrorClass::SyntaxUnexpectedEof => "SYNTAX_UNEXPECTED_EOF",
            ErrorClass::SyntaxUnexpectedToken => "SYNTAX_UNEXPECTED_TOKEN",
            ErrorClass::SyntaxError => "SYNTAX_ERROR",
            ErrorClass::TypeNotEvaluable => "TYPE_NOT_EVALUABLE",
            ErrorClass::TypeNumberExpected => "TYPE_NUMBER_EXPECTED",
            ErrorClass::TypeCallableExpected => "TYPE_CALLABLE_EXPECTED",
            ErrorClass::TypeError => "TYPE_ERROR",
            ErrorClass::DomainDivideByZero => "DOMAIN_DIVIDE_BY_ZERO",
            ErrorClass::DomainNegativeSqrt => "DOMAIN_NEGATIVE_SQRT",
            ErrorClass::DomainFactorialNegative => "DOMAIN_FACTORIAL_NEGATIVE",
            ErrorClass::DomainError => "DOMAIN_ERROR",
            ErrorClass::InstantiationError => "INSTANTIATION_ERROR",
            ErrorClass::WrongAnswer => "WRONG_ANSWER",
            ErrorClass::UnknownError => "UNKNOWN_ERROR",
            ErrorClass::Timeout => "TIMEOUT",
        }
    }

    /// True for the classes with a dedicated row in the published taxonomy
    /// table (everything except the generic fallbacks and TIMEOUT).
    pub fn has_canonical_row(&self) -> bool {
        !matches!(
            self,
            ErrorClass::SyntaxError
                | ErrorClass::TypeError
                | ErrorClass::DomainError
                | ErrorClass::UnknownError
                | ErrorClass::Timeout
        )
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorClass::ALL
            .iter()
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown error class {s:?}"))
    }
}

/// One classified failure: the taxonomy class, the 1-based source line when
/// stderr carried one, and the raw evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub class: ErrorClass,
    pub line: Option<u32>,
    pub raw_message: String,
}

/// Per-class repair guidance embedded into correction prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairGuidance {
    pub class: ErrorClass,
    pub description: String,
    pub fix_instruction: String,
}

/// Classify a completed execution against the expected answer. Returns
/// nothing iff the run succeeded and the produced answer matches; otherwise
/// picks the highest-priority matching class.
pub fn classify(
    raw: &RawExecution,
    produced: Option<&ExactNumber>,
    gold: &ExactNumber,
) -> Option<Diagnosis> {
    if let Some(diag) = classify_execution(raw) {
        return Some(diag);
    }
    match produced {
        None => Some(Diagnosis {
            class: ErrorClass::WrongAnswer,
            line: None,
            raw_message: format!(
                "unparseable output: {:?}, expected {}",
                last_line(&raw.stdout),
                gold
            ),
        }),
        Some(answer) if answers_equal(answer, gold, DEFAULT_TOLERANCE) => None,
        Some(answer) => Some(Diagnosis {
            class: ErrorClass::WrongAnswer,
            line: None,
            raw_message: format!("produced {answer}, expected {gold}"),
        }),
    }
}

/// Classify interpreter-level failures only (no answer comparison). Used in
/// gold-free mode where a clean execution cannot be verified.
pub fn classify_execution(raw: &RawExecution) -> Option<Diagnosis> {
    if raw.timed_out {
        return Some(Diagnosis {
            class: ErrorClass::Timeout,
            line: None,
            raw_message: format!("execution timed out after {} ms", raw.duration_ms),
        });
    }
    if raw.succeeded() {
        return None;
    }
    let class = match_stderr(&raw.stderr);
    Some(Diagnosis {
        class,
        line: extract_line_number(&raw.stderr),
        raw_message: raw.stderr.trim().to_string(),
    })
}

/// Hierarchical pattern match over lowercased stderr. Canonical taxonomy
/// patterns are OR-ed with the wordings current SWI-Prolog releases actually
/// emit ("zero_divisor", "is not a function", "not sufficiently
/// instantiated"); quote characters are stripped first so "`callable'
/// expected" matches "callable expected".
fn match_stderr(stderr: &str) -> ErrorClass {
    let msg: String = stderr
        .to_lowercase()
        .chars()
        .filter(|c| !matches!(c, '`' | '\'' | '\u{2018}' | '\u{2019}'))
        .collect();
    let has = |pattern: &str| msg.contains(pattern);

    let not_evaluable = has("not evaluable") || has("is not a function") || has("evaluable");
    if has("syntax error") || has("parsing error") {
        if has("operator expected") {
            ErrorClass::SyntaxOperatorExpected
        } else if has("unexpected eof") || has("unexpected end of file") || has("end of file in")
        {
            ErrorClass::SyntaxUnexpectedEof
        } else if has("unexpected token") {
            ErrorClass::SyntaxUnexpectedToken
        } else {
            ErrorClass::SyntaxError
        }
    } else if has("type error") || not_evaluable {
        if not_evaluable {
            ErrorClass::TypeNotEvaluable
        } else if has("number expected") {
            ErrorClass::TypeNumberExpected
        } else if has("callable expected") {
            ErrorClass::TypeCallableExpected
        } else {
            ErrorClass::TypeError
        }
    } else if has("domain error") || has("evaluation error") {
        if has("division by zero") || has("zero_divisor") {
            ErrorClass::DomainDivideByZero
        } else if has("negative sqrt") || has("domain error(sqrt") {
            ErrorClass::DomainNegativeSqrt
        } else if has("factorial") && has("negative") {
            ErrorClass::DomainFactorialNegative
        } else {
            ErrorClass::DomainError
        }
    } else if has("instantiation error") || has("not sufficiently instantiated") {
        ErrorClass::InstantiationError
    } else {
        ErrorClass::UnknownError
    }
}

static LINE_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:[^\s:]+:(\d+))|(?:at line (\d+))").expect("line pattern compiles")
});

/// First "<file>:<N>" or "at line N" occurrence in stderr.
pub fn extract_line_number(stderr: &str) -> Option<u32> {
    let captures = LINE_PATTERN.captures(stderr)?;
    captures
        .get(1)
        .or_else(|| captures.get(2))
        .and_then(|m| m.as_str().parse().ok())
}

/// The taxonomy table row for a class: a diagnostic description and the
/// verbatim fix instruction used in repair prompts.
pub fn repair_strategy(class: ErrorClass) -> RepairGuidance {
    let (description, fix_instruction) = match class {
        ErrorClass::SyntaxOperatorExpected => (
            "Syntax error: the parser expected an operator between terms (e.g. X Y instead of X + Y).",
            "Insert the appropriate operator (+, -, *, /) between terms. Check arithmetic expression syntax.",
        ),
        ErrorClass::SyntaxUnexpectedEof => (
            "Syntax error: unexpected end of file, typically an unclosed bracket or a missing final period.",
            "Check bracket/parenthesis matching. Ensure all clauses end with period.",
        ),
        ErrorClass::SyntaxUnexpectedToken => (
            "Syntax error: the parser hit an invalid or unexpected token.",
            "Remove invalid characters. Review Prolog syntax rules for special symbols.",
        ),
        ErrorClass::SyntaxError => (
            "Syntax error: the program failed to parse.",
            "Fix the Prolog syntax. Ensure every clause ends with a period and all brackets and parentheses are balanced.",
        ),
        ErrorClass::TypeNotEvaluable => (
            "Type error: an arithmetic expression contains a term that is not evaluable (e.g. an atom used as a number).",
            "Ensure all arithmetic expressions contain only numbers or numeric variables. Replace atoms with numeric values.",
        ),
        ErrorClass::TypeNumberExpected => (
            "Type error: a number was expected but a non-numeric term was found.",
            "Verify that all variables used in calculations are properly instantiated with numbers before arithmetic operations.",
        ),
        ErrorClass::TypeCallableExpected => (
            "Type error: a callable term was expected; a predicate call is malformed.",
            "Check predicate syntax and argument structure. Ensure predicates are properly defined.",
        ),
        ErrorClass::TypeError => (
            "Type error: an operation was applied to a term of the wrong type.",
            "Ensure every operation receives operands of the correct type. Arithmetic requires numeric operands, not atoms or strings.",
        ),
        ErrorClass::DomainDivideByZero => (
            "Domain error: division by zero during arithmetic evaluation.",
            "Add guard condition: Denom =\\= 0 before division. Handle edge case explicitly.",
        ),
        ErrorClass::DomainNegativeSqrt => (
            "Domain error: sqrt/1 called with a negative argument.",
            "Ensure arguments to sqrt/1 are non-negative. Add constraint: X >= 0.",
        ),
        ErrorClass::DomainFactorialNegative => (
            "Domain error: factorial applied to a negative integer.",
            "Add base case check: N >= 0. Factorial undefined for negative integers.",
        ),
        ErrorClass::DomainError => (
            "Domain error: an arithmetic argument lies outside the function's valid domain.",
            "Check that arithmetic arguments are within the valid domain of each function. Add guard conditions for boundary values.",
        ),
        ErrorClass::InstantiationError => (
            "Instantiation error: an unbound variable was used where a bound value is required.",
            "Ensure all variables are bound before arithmetic evaluation. Check predicate ordering to guarantee proper instantiation flow.",
        ),
        ErrorClass::WrongAnswer => (
            "Logical error: execution succeeded but the produced answer does not match the expected answer.",
            "Review problem constraints and reasoning chain. Verify operator precedence and intermediate calculations. Check unit conversions.",
        ),
        ErrorClass::UnknownError => (
            "Unclassified error: the failure did not match any known diagnostic pattern.",
            "Regenerate the program. Keep the required solve/1 and main/0 structure and use CLP(Q) constraints for all arithmetic.",
        ),
        ErrorClass::Timeout => (
            "Timeout: execution exceeded the time budget without terminating.",
            "Ensure the program terminates. Add base cases to recursive predicates and bound all recursion depths.",
        ),
    };
    RepairGuidance {
        class,
        description: description.to_string(),
        fix_instruction: fix_instruction.to_string(),
    }
}

fn last_line(stdout: &str) -> String {
    stdout
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
        .trim()
        .to_string()
}

/// One golden-corpus case: a captured execution plus its expected class.
/// Cases with exit code 0 are judged against a fixed gold answer of 42.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusCase {
    pub stderr: String,
    #[serde(default)]
    pub stdout: String,
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub timed_out: bool,
    pub expected_class: ErrorClass,
}

/// Gold answer used when judging corpus cases that executed cleanly.
pub const CORPUS_GOLD: i64 = 42;

pub fn load_corpus_cases(path: &std::path::Path) -> std::io::Result<Vec<CorpusCase>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}

/// Classify one corpus case under the fixed corpus gold answer.
pub fn classify_corpus_case(case: &CorpusCase) -> Option<Diagnosis> {
    let raw = RawExecution {
        stdout: case.stdout.clone(),
        stderr: case.stderr.clone(),
        exit_code: case.exit_code,
        duration_ms: if case.timed_out { 10_000 } else { 1 },
        timed_out: case.timed_out,
    };
    let produced = parse_answer(&raw.stdout);
    classify(&raw, produced.as_ref(), &ExactNumber::from_integer(CORPUS_GOLD))
}
