//! The reasoning / non-reasoning transcript protocol.
//!
//! A reasoning response is `<think>...</think>` followed by the final answer;
//! a direct response starts with the `<nothink>` token. This module renders
//! records into that form, parses model output back, and repairs the
//! answer-left-inside-think defect.

use serde::{Deserialize, Serialize};

use crate::curate::{IssueCode, LintIssue};
use crate::record::{Mode, SampleRecord};
use crate::Result;

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const NOTHINK: &str = "<nothink>";

/// Phrases that introduce a final answer inside free text.
pub const DEFAULT_ANSWER_MARKERS: &[&str] =
    &["Final answer:", "Final Answer:", "Answer:", "\\boxed{"];

/// Structural verdict on a parsed response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseMode {
    Reason,
    Direct,
    Malformed,
}

/// Output of [`parse_transcript`]: the structural pieces plus any issues.
/// `mode` is `Malformed` exactly when `issues` is non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub mode: ResponseMode,
    pub think: Option<String>,
    pub final_text: String,
    pub issues: Vec<LintIssue>,
    /// Original text, kept so repairs can splice it.
    pub raw: String,
}

/// Render a record into transcript text. Inverse of [`parse_transcript`] on
/// `(mode, think, final)`.
pub fn render_sample(rec: &SampleRecord) -> Result<String> {
    rec.validate()?;
    Ok(match rec.mode {
        Mode::Reason => format!(
            "{THINK_OPEN}{}{THINK_CLOSE}\n{}",
            rec.think.as_deref().unwrap_or_default(),
            rec.final_text
        ),
        Mode::Direct => format!("{NOTHINK}{}", rec.final_text),
    })
}

fn structural_issue(code: IssueCode, detail: impl Into<String>) -> LintIssue {
    LintIssue::new(code, "", "transcript", None, detail)
}

/// Parse transcript text into mode, think block, and final answer.
/// Malformation is data, not an error: structural defects come back as
/// issues with `mode = Malformed`.
pub fn parse_transcript(text: &str) -> ParsedResponse {
    parse_transcript_with(text, DEFAULT_ANSWER_MARKERS)
}

/// [`parse_transcript`] with a custom answer-marker list for the
/// answer-in-think detector.
pub fn parse_transcript_with(text: &str, answer_markers: &[impl AsRef<str>]) -> ParsedResponse {
    let raw = text.to_string();
    let malformed = |think: Option<String>, final_text: String, issues: Vec<LintIssue>| {
        ParsedResponse {
            mode: ResponseMode::Malformed,
            think,
            final_text,
            issues,
            raw: raw.clone(),
        }
    };

    if let Some(rest) = text.strip_prefix(NOTHINK) {
        if rest.contains(THINK_OPEN) || rest.contains(THINK_CLOSE) {
            return malformed(
                None,
                rest.to_string(),
                vec![structural_issue(
                    IssueCode::FormatMismatch,
                    "both mode tokens present",
                )],
            );
        }
        if rest.is_empty() {
            return malformed(
                None,
                String::new(),
                vec![structural_issue(IssueCode::EmptyAnswer, "empty direct answer")],
            );
        }
        return ParsedResponse {
            mode: ResponseMode::Direct,
            think: None,
            final_text: rest.to_string(),
            issues: Vec::new(),
            raw,
        };
    }

    if let Some(rest) = text.strip_prefix(THINK_OPEN) {
        if rest.contains(NOTHINK) {
            return malformed(
                None,
                String::new(),
                vec![structural_issue(
                    IssueCode::FormatMismatch,
                    "both mode tokens present",
                )],
            );
        }
        let Some(close) = rest.find(THINK_CLOSE) else {
            return malformed(
                Some(rest.to_string()),
                String::new(),
                vec![structural_issue(
                    IssueCode::FormatMismatch,
                    "unclosed <think> block",
                )],
            );
        };
        let think = rest[..close].to_string();
        let final_text = rest[close + THINK_CLOSE.len()..].trim_start().to_string();
        if final_text.is_empty() {
            let issue = match find_answer_clause(&think, answer_markers) {
                Some((start, _)) => LintIssue::new(
                    IssueCode::AnswerInThink,
                    "",
                    "transcript",
                    Some((start, think.len())),
                    "final answer left inside the think block",
                ),
                None => structural_issue(IssueCode::EmptyAnswer, "empty final after </think>"),
            };
            return malformed(Some(think), final_text, vec![issue]);
        }
        return ParsedResponse {
            mode: ResponseMode::Reason,
            think: Some(think),
            final_text,
            issues: Vec::new(),
            raw,
        };
    }

    let detail = if text.contains(THINK_OPEN) || text.contains(NOTHINK) {
        "text precedes the mode token"
    } else {
        "missing mode token"
    };
    malformed(
        None,
        text.to_string(),
        vec![structural_issue(IssueCode::FormatMismatch, detail)],
    )
}

/// Locate the trailing answer clause in free text: the last marker match,
/// widened to the start of any earlier overlapping match. Returns the byte
/// range `(start, end_of_text)`.
pub fn find_answer_clause(text: &str, markers: &[impl AsRef<str>]) -> Option<(usize, usize)> {
    let mut matches: Vec<(usize, usize)> = Vec::new();
    for marker in markers {
        let m = marker.as_ref();
        if m.is_empty() {
            continue;
        }
        let mut from = 0;
        while let Some(pos) = text[from..].find(m) {
            let start = from + pos;
            matches.push((start, start + m.len()));
            from = start + 1;
        }
    }
    let mut cur = *matches.iter().max_by_key(|(s, _)| *s)?;
    loop {
        let Some(wider) = matches
            .iter()
            .filter(|(s, e)| *s < cur.0 && *e > cur.0)
            .min_by_key(|(s, _)| *s)
        else {
            break;
        };
        cur = *wider;
    }
    Some((cur.0, text.len()))
}

/// What [`repair_transcript`] did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum RepairOutcome {
    Applied { code: IssueCode, note: String },
    Skipped { code: IssueCode, reason: String },
}

/// Repair fixable structural defects in a parsed transcript. Currently this
/// is the answer-in-think defect: the trailing answer clause moves after
/// `</think>`. Unfixable damage is reported as skipped and the text returned
/// unchanged. Idempotent: repairing a repaired transcript is a no-op.
pub fn repair_transcript(
    parsed: &ParsedResponse,
    answer_markers: &[impl AsRef<str>],
) -> (String, Vec<RepairOutcome>) {
    if parsed.mode != ResponseMode::Malformed {
        return (parsed.raw.clone(), Vec::new());
    }

    let mut outcomes = Vec::new();
    let mut text = parsed.raw.clone();
    for issue in &parsed.issues {
        match issue.code {
            IssueCode::AnswerInThink => {
                let think = parsed.think.as_deref().unwrap_or_default();
                if let Some((start, _)) = find_answer_clause(think, answer_markers) {
                    let clause = think[start..].trim();
                    let kept = think[..start].trim_end();
                    text = format!("{THINK_OPEN}{kept}{THINK_CLOSE}\n{clause}");
                    outcomes.push(RepairOutcome::Applied {
                        code: issue.code,
                        note: "moved trailing answer clause after </think>".into(),
                    });
                }
            }
            code => outcomes.push(RepairOutcome::Skipped {
                code,
                reason: issue.detail.clone(),
            }),
        }
    }
    (text, outcomes)
}

/// [`repair_transcript`] with the default marker list.
pub fn repair_transcript_default(parsed: &ParsedResponse) -> (String, Vec<RepairOutcome>) {
    repair_transcript(parsed, DEFAULT_ANSWER_MARKERS)
}
