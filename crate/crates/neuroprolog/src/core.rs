//! Shared domain types: problems, exact numeric answers, extracted programs,
//! and raw interpreter captures, plus the answer parsing and comparison
//! semantics every other module builds on.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Absolute tolerance for answer comparison. GSM8K answers are integers or
/// two-decimal values, so 1e-4 separates all legitimate answers while
/// absorbing float formatting noise.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// One benchmark item: a natural-language word problem with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub question: String,
    /// Ground-truth answer. Absent only in gold-free (inference-only) runs.
    pub gold_answer: Option<ExactNumber>,
}

/// A scalar answer kept in exact rational form alongside the text it was
/// parsed from, so comparisons never inherit float formatting error.
#[derive(Debug, Clone)]
pub struct ExactNumber {
    value: BigRational,
    original_text: String,
}

impl ExactNumber {
    pub fn from_integer(n: i64) -> Self {
        ExactNumber {
            value: BigRational::from_integer(BigInt::from(n)),
            original_text: n.to_string(),
        }
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn original_text(&self) -> &str {
        &self.original_text
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    /// Canonical decimal rendering: integers print bare, other rationals
    /// print as decimals (exact when the denominator divides a power of ten,
    /// otherwise rounded to 12 significant decimals).
    pub fn to_decimal_string(&self) -> String {
        if self.value.is_integer() {
            return self.value.numer().to_string();
        }
        let sign = if self.value.is_negative() { "-" } else { "" };
        let abs = self.value.abs();
        let scale = BigInt::from(10u8).pow(12);
        let scaled = (abs.numer() * &scale) / abs.denom();
        let int_part = &scaled / &scale;
        let mut frac = (&scaled % &scale).to_string();
        while frac.len() < 12 {
            frac.insert(0, '0');
        }
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac}")
        }
    }
}

impl fmt::Display for ExactNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.original_text)
    }
}

impl PartialEq for ExactNumber {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl Serialize for ExactNumber {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.original_text)
    }
}

impl<'de> Deserialize<'de> for ExactNumber {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_number(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("not a number: {text:?}")))
    }
}

impl FromStr for ExactNumber {
    type Err = ParseNumberError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_number(s).ok_or_else(|| ParseNumberError(s.to_string()))
    }
}

#[derive(Debug, Error)]
#[error("not a number: {0:?}")]
pub struct ParseNumberError(String);

/// A complete Prolog program together with the raw model response it was
/// extracted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrologProgram {
    pub source: String,
    pub extracted_from: String,
}

/// Everything captured from one interpreter subprocess run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawExecution {
    pub stdout: String,
    pub stderr: String,
    /// Present iff the process exited on its own (absent on timeout).
    pub exit_code: Option<i32>,
    pub duration_ms: u64,
    pub timed_out: bool,
}

impl RawExecution {
    pub fn succeeded(&self) -> bool {
        !self.timed_out && self.exit_code == Some(0)
    }
}

/// Parse the last non-empty stdout line as a number. Accepts integers,
/// decimals, scientific notation, and Prolog rationals ("85r2", "5/2",
/// "5 rdiv 2"). Returns nothing when the line is unparseable.
pub fn parse_answer(stdout: &str) -> Option<ExactNumber> {
    let line = stdout.lines().rev().find(|l| !l.trim().is_empty())?;
    parse_number(line.trim())
}

/// Parse a single numeric token. Thousands separators ("1,234") are accepted
/// because GSM8K gold answers carry them.
pub fn parse_number(text: &str) -> Option<ExactNumber> {
    let original = text.trim();
    if original.is_empty() {
        return None;
    }
    let cleaned = if original.contains(',') {
        let stripped: String = original.chars().filter(|c| *c != ',').collect();
        stripped
    } else {
        original.to_string()
    };

    let value = parse_rational_forms(&cleaned).or_else(|| parse_decimal(&cleaned))?;
    Some(ExactNumber {
        value,
        original_text: original.to_string(),
    })
}

fn parse_rational_forms(text: &str) -> Option<BigRational> {
    let (numer, denom) = if let Some((n, d)) = text.split_once(" rdiv ") {
        (n, d)
    } else if let Some((n, d)) = text.split_once('/') {
        (n, d)
    } else if let Some(idx) = find_rational_r(text) {
        (&text[..idx], &text[idx + 1..])
    } else {
        return None;
    };
    let numer: BigInt = numer.trim().parse().ok()?;
    let denom: BigInt = denom.trim().parse().ok()?;
    if denom.is_zero() {
        return None;
    }
    Some(BigRational::new(numer, denom))
}

/// Locate the 'r' of SWI-Prolog's rational literal syntax ("85r2", "-1r3").
fn find_rational_r(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let idx = text.find('r')?;
    if idx == 0 || idx + 1 >= bytes.len() {
        return None;
    }
    let before_ok = bytes[..idx].iter().enumerate().all(|(i, b)| {
        b.is_ascii_digit() || (i == 0 && (*b == b'-' || *b == b'+'))
    });
    let after_ok = bytes[idx + 1..].iter().all(|b| b.is_ascii_digit());
    (before_ok && after_ok).then_some(idx)
}

fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(idx) => {
            let exp: i32 = text[idx + 1..].parse().ok()?;
            (&text[..idx], exp)
        }
        None => (text, 0),
    };

    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };

    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }

    let joined = format!("{int_part}{frac_part}");
    let numer: BigInt = if joined.is_empty() {
        return None;
    } else {
        joined.parse().ok()?
    };
    let mut value = BigRational::new(numer * BigInt::from(sign), BigInt::one());
    let shift = exponent - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10u8));
    if shift > 0 {
        value *= ten.pow(shift);
    } else if shift < 0 {
        value /= ten.pow(-shift);
    }
    Some(value)
}

/// True iff |a - b| <= tol after numeric normalization.
pub fn answers_equal(a: &ExactNumber, b: &ExactNumber, tol: f64) -> bool {
    debug_assert!(tol >= 0.0);
    let tol = BigRational::from_float(tol).unwrap_or_else(BigRational::zero);
    (a.value() - b.value()).abs() <= tol
}

#[derive(Debug, Error)]
pub enum ProblemSetError {
    #[error("failed to read problem set: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: invalid problem record: {message}")]
    Invalid { line: usize, message: String },
    #[error("duplicate problem id {0:?}")]
    DuplicateId(String),
}

#[derive(Deserialize)]
struct ProblemRecord {
    id: String,
    question: String,
    #[serde(default)]
    answer: Option<String>,
}

/// Load a JSON Lines problem set. The answer field accepts a bare numeric
/// string or a GSM8K rationale: everything before the final "#### " marker
/// is stripped. Missing answers are tolerated only when `allow_missing_gold`
/// is set (gold-free mode).
pub fn load_problems(
    path: &Path,
    allow_missing_gold: bool,
) -> Result<Vec<Problem>, ProblemSetError> {
    let text = std::fs::read_to_string(path)?;
    let mut problems = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ProblemRecord =
            serde_json::from_str(line).map_err(|e| ProblemSetError::Invalid {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if record.id.is_empty() || record.question.is_empty() {
            return Err(ProblemSetError::Invalid {
                line: idx + 1,
                message: "id and question must be non-empty".into(),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(ProblemSetError::DuplicateId(record.id));
        }
        let gold_answer = match record.answer {
            Some(raw) => Some(parse_gold_answer(&raw).ok_or_else(|| {
                ProblemSetError::Invalid {
                    line: idx + 1,
                    message: format!("unparseable answer {raw:?}"),
                }
            })?),
            None if allow_missing_gold => None,
            None => {
                return Err(ProblemSetError::Invalid {
                    line: idx + 1,
                    message: "missing answer (run with gold-free mode to allow)".into(),
                })
            }
        };
        problems.push(Problem {
            id: record.id,
            question: record.question,
            gold_answer,
        });
    }
    Ok(problems)
}

/// Parse a gold answer, stripping a GSM8K rationale prefix when present.
pub fn parse_gold_answer(raw: &str) -> Option<ExactNumber> {
    let tail = match raw.rfind("#### ") {
        Some(idx) => &raw[idx + 5..],
        None => raw,
    };
    parse_number(tail.trim())
}
