//! Prompt construction from the checked-in template resources, and recovery
//! of Prolog program text from model responses that violate the "code only"
//! contract (markdown fences, surrounding prose).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::PrologProgram;
use crate::diagnostics::{repair_strategy, Diagnosis};

pub const INITIAL_TEMPLATE: &str = include_str!("../resources/initial_prompt.txt");
pub const REPAIR_TEMPLATE: &str = include_str!("../resources/repair_prompt.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptKind {
    Initial,
    Repair,
}

/// A fully rendered prompt, tagged with the problem and attempt it belongs to
/// so scripted and replay backends can key on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub text: String,
    pub kind: PromptKind,
    pub problem_id: String,
    pub attempt: u32,
}

/// Render the first-attempt generation prompt for a question.
pub fn initial_prompt(problem_id: &str, question: &str) -> PromptBundle {
    debug_assert!(!question.is_empty());
    let text = render(INITIAL_TEMPLATE, &[("<QUESTION>", question)]);
    PromptBundle {
        text,
        kind: PromptKind::Initial,
        problem_id: problem_id.to_string(),
        attempt: 1,
    }
}

/// Render a correction prompt from the failed program and its diagnosis.
/// The header carries " [Line N]" only when a source line was extracted.
pub fn repair_prompt(
    problem_id: &str,
    attempt: u32,
    question: &str,
    previous: &PrologProgram,
    diag: &Diagnosis,
) -> PromptBundle {
    debug_assert!(attempt >= 2);
    let guidance = repair_strategy(diag.class);
    let line_info = match diag.line {
        Some(n) => format!(" [Line {n}]"),
        None => String::new(),
    };
    let text = render(
        REPAIR_TEMPLATE,
        &[
            ("{line_info}", &line_info),
            ("{error_type}", diag.class.name()),
            ("{error_description}", &guidance.description),
            ("{fix_instruction}", &guidance.fix_instruction),
            ("{previous_code}", &previous.source),
            ("{question}", question),
        ],
    );
    PromptBundle {
        text,
        kind: PromptKind::Repair,
        problem_id: problem_id.to_string(),
        attempt,
    }
}

/// Single left-to-right pass: each placeholder occurrence is replaced once
/// and substituted values are never re-scanned, so user content containing
/// placeholder-like text cannot corrupt the rendering.
fn render(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let next = substitutions
            .iter()
            .filter_map(|(key, value)| rest.find(key).map(|idx| (idx, *key, *value)))
            .min_by_key(|(idx, _, _)| *idx);
        match next {
            Some((idx, key, value)) => {
                out.push_str(&rest[..idx]);
                out.push_str(value);
                rest = &rest[idx + key.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("no Prolog program found in model response (no \":-\" directive)")]
    ExtractionFailed,
}

/// Recover the Prolog program from a raw model response: prefer the last
/// fenced code block containing a directive, strip prose before the first
/// ":-" and after the last clause-terminating period, and guarantee the
/// ":- initialization(main)." directive is present.
pub fn extract_program(response: &str) -> Result<PrologProgram, ExtractError> {
    let candidate = select_candidate(response);
    let candidate = trim_leading_prose(candidate).ok_or(ExtractError::ExtractionFailed)?;
    let candidate = trim_trailing_prose(candidate);
    let mut source = candidate.trim().to_string();
    if source.is_empty() || !source.contains(":-") {
        return Err(ExtractError::ExtractionFailed);
    }
    if !source.contains("initialization(main)") {
        source.push_str("\n:- initialization(main).");
    }
    source.push('\n');
    Ok(PrologProgram {
        source,
        extracted_from: response.to_string(),
    })
}

/// Pick the text region holding the program: the last fenced block that
/// contains ":-" (models often restate code after an explanation), else the
/// whole response with any stray fence lines dropped.
fn select_candidate(response: &str) -> String {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Option<String> = None;
    for line in response.lines() {
        let is_fence = line.trim_start().starts_with("```");
        match (&mut current, is_fence) {
            (None, true) => current = Some(String::new()),
            (Some(block), true) => {
                blocks.push(std::mem::take(block));
                current = None;
            }
            (Some(block), false) => {
                block.push_str(line);
                block.push('\n');
            }
            (None, false) => {}
        }
    }
    // An unterminated fence still counts: everything after it is code.
    if let Some(block) = current {
        blocks.push(block);
    }
    if let Some(best) = blocks.iter().rev().find(|b| b.contains(":-")) {
        return best.clone();
    }
    response
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Drop everything before the program start. The cut lands at the start of
/// the line containing the first ":-" when the text before it on that line
/// looks like a clause head, otherwise directly at the ":-" so same-line
/// prose ("Here is the code: :- ...") is removed.
fn trim_leading_prose(text: String) -> Option<String> {
    let idx = text.find(":-")?;
    let line_start = text[..idx].rfind('\n').map_or(0, |p| p + 1);
    let head_region = &text[line_start..idx];
    let cut = if is_clause_head_prefix(head_region) {
        line_start
    } else {
        idx
    };
    Some(text[cut..].to_string())
}

fn is_clause_head_prefix(region: &str) -> bool {
    let trimmed = region.trim();
    if trimmed.is_empty() {
        return true;
    }
    let mut chars = trimmed.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    trimmed
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '(' | ')' | ',' | ' '))
}

/// Drop trailing lines after the last line that ends with a clause period.
fn trim_trailing_prose(text: String) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let last_clause_line = lines.iter().rposition(|l| l.trim_end().ends_with('.'));
    match last_clause_line {
        Some(idx) => lines[..=idx].join("\n"),
        None => text,
    }
}
