//! Record linting: each defect class has one code, one default severity, and
//! (for the mechanical ones) a fixer that [`repair_record`] applies.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::record::{Annotation, SampleRecord};
use crate::transcript::{find_answer_clause, DEFAULT_ANSWER_MARKERS, NOTHINK, THINK_CLOSE, THINK_OPEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueCode {
    MisspelledImageTag,
    AnswerInThink,
    CoordOutOfRange,
    FormatMismatch,
    EmptyAnswer,
    DanglingImageRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::MisspelledImageTag => "misspelled_image_tag",
            IssueCode::AnswerInThink => "answer_in_think",
            IssueCode::CoordOutOfRange => "coord_out_of_range",
            IssueCode::FormatMismatch => "format_mismatch",
            IssueCode::EmptyAnswer => "empty_answer",
            IssueCode::DanglingImageRef => "dangling_image_ref",
        }
    }

    /// Default severity; structural and reference breakage is an error,
    /// stylistic mismatch a warning.
    pub fn severity(self) -> Severity {
        match self {
            IssueCode::FormatMismatch => Severity::Warning,
            _ => Severity::Error,
        }
    }

    /// Whether [`repair_record`] has a mechanical fix registered.
    pub fn fixable(self) -> bool {
        matches!(
            self,
            IssueCode::MisspelledImageTag | IssueCode::AnswerInThink | IssueCode::CoordOutOfRange
        )
    }
}

impl std::fmt::Display for IssueCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One detected defect, located by record id, field, and byte span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintIssue {
    pub code: IssueCode,
    pub record_id: String,
    pub field: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<(usize, usize)>,
    pub detail: String,
    pub severity: Severity,
    pub fixable: bool,
}

impl LintIssue {
    pub fn new(
        code: IssueCode,
        record_id: impl Into<String>,
        field: impl Into<String>,
        span: Option<(usize, usize)>,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            code,
            record_id: record_id.into(),
            field: field.into(),
            span,
            detail: detail.into(),
            severity: code.severity(),
            fixable: code.fixable(),
        }
    }
}

fn tag_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[^<>\s]{1,32}>").unwrap())
}

fn image_tag_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^<image_\d+>$").unwrap())
}

/// Classic dynamic-programming Levenshtein distance, early-exited via the
/// caller's small cutoff.
pub(crate) fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn scan_tags(
    rec_id: &str,
    field: &str,
    text: &str,
    known: &[String],
    issues: &mut Vec<LintIssue>,
) {
    for m in tag_pattern().find_iter(text) {
        let tag = m.as_str();
        if tag == THINK_OPEN || tag == THINK_CLOSE || tag == NOTHINK {
            continue;
        }
        if known.iter().any(|k| k == tag) {
            continue;
        }
        if image_tag_pattern().is_match(tag) {
            issues.push(LintIssue::new(
                IssueCode::DanglingImageRef,
                rec_id,
                field,
                Some((m.start(), m.end())),
                format!("{tag} does not reference a provided image"),
            ));
            continue;
        }
        let nearest = known
            .iter()
            .map(|k| (edit_distance(tag, k), k))
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        if let Some((d, k)) = nearest {
            if (1..=2).contains(&d) {
                issues.push(LintIssue::new(
                    IssueCode::MisspelledImageTag,
                    rec_id,
                    field,
                    Some((m.start(), m.end())),
                    format!("{tag} is likely a misspelling of {k}"),
                ));
            }
        }
    }
}

fn check_annotation(rec_id: &str, index: usize, ann: &Annotation, issues: &mut Vec<LintIssue>) {
    let field = format!("annotations[{index}]");
    if ann.coords.len() != ann.kind.arity() {
        issues.push(LintIssue::new(
            IssueCode::FormatMismatch,
            rec_id,
            &field,
            None,
            format!(
                "{:?} annotation carries {} coords, expected {}",
                ann.kind,
                ann.coords.len(),
                ann.kind.arity()
            ),
        ));
    }
    for (i, &c) in ann.coords.iter().enumerate() {
        if !(0.0..=1.0).contains(&c) || !c.is_finite() {
            issues.push(LintIssue::new(
                IssueCode::CoordOutOfRange,
                rec_id,
                &field,
                Some((i, i + 1)),
                format!("coordinate {c} outside [0, 1]"),
            ));
        }
    }
}

/// Lint one record against the defect catalogue. Pure and deterministic:
/// the same record always yields the same issue list.
pub fn lint_record(rec: &SampleRecord, known_tags: &[String]) -> Vec<LintIssue> {
    let mut issues = Vec::new();

    for (i, turn) in rec.conversations.iter().enumerate() {
        scan_tags(&rec.id, &format!("conversations[{i}]"), &turn.text, known_tags, &mut issues);
    }
    scan_tags(&rec.id, "final", &rec.final_text, known_tags, &mut issues);

    match (rec.mode, &rec.think) {
        (crate::record::Mode::Reason, None) => issues.push(LintIssue::new(
            IssueCode::FormatMismatch,
            &rec.id,
            "think",
            None,
            "reason mode without a think block",
        )),
        (crate::record::Mode::Direct, Some(_)) => issues.push(LintIssue::new(
            IssueCode::FormatMismatch,
            &rec.id,
            "think",
            None,
            "direct mode carries a think block",
        )),
        _ => {}
    }

    if let Some(think) = &rec.think {
        if think.contains(THINK_OPEN) || think.contains(THINK_CLOSE) || think.contains(NOTHINK) {
            issues.push(LintIssue::new(
                IssueCode::FormatMismatch,
                &rec.id,
                "think",
                None,
                "protocol token embedded in think text",
            ));
        }
    }

    if rec.final_text.trim().is_empty() {
        let clause = rec
            .think
            .as_deref()
            .and_then(|t| find_answer_clause(t, DEFAULT_ANSWER_MARKERS));
        match clause {
            Some((start, _)) => issues.push(LintIssue::new(
                IssueCode::AnswerInThink,
                &rec.id,
                "think",
                Some((start, rec.think.as_deref().unwrap_or_default().len())),
                "final answer left inside the think block",
            )),
            None => issues.push(LintIssue::new(
                IssueCode::EmptyAnswer,
                &rec.id,
                "final",
                None,
                "final answer is empty",
            )),
        }
    }

    if let Some(annotations) = &rec.annotations {
        for (i, ann) in annotations.iter().enumerate() {
            check_annotation(&rec.id, i, ann, &mut issues);
        }
    }

    issues
}

/// What [`repair_record`] did about one issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum RepairAction {
    Applied { code: IssueCode, note: String },
    Skipped { code: IssueCode, reason: String },
}

/// Apply every registered fixer to a copy of the record. The original is
/// left untouched; the copy carries provenance under `meta.repairs`.
/// Re-linting the result yields no fixable issues.
pub fn repair_record(
    rec: &SampleRecord,
    known_tags: &[String],
) -> (SampleRecord, Vec<RepairAction>) {
    let issues = lint_record(rec, known_tags);
    let mut out = rec.clone();
    let mut actions = Vec::new();

    for issue in &issues {
        match issue.code {
            IssueCode::MisspelledImageTag => {
                let (Some(span), Some(target)) = (issue.span, issue.detail.split_whitespace().last())
                else {
                    continue;
                };
                // Spans index the original text; fix every occurrence of the
                // misspelled token so repeated typos collapse in one pass.
                let bad = text_of(rec, &issue.field)
                    .map(|t| t[span.0..span.1].to_string());
                if let Some(bad) = bad {
                    for turn in &mut out.conversations {
                        turn.text = turn.text.replace(&bad, target);
                    }
                    out.final_text = out.final_text.replace(&bad, target);
                    actions.push(RepairAction::Applied {
                        code: issue.code,
                        note: format!("replaced {bad} with {target}"),
                    });
                }
            }
            IssueCode::AnswerInThink => {
                if let Some(think) = out.think.clone() {
                    if let Some((start, _)) = find_answer_clause(&think, DEFAULT_ANSWER_MARKERS) {
                        out.final_text = think[start..].trim().to_string();
                        out.think = Some(think[..start].trim_end().to_string());
                        actions.push(RepairAction::Applied {
                            code: issue.code,
                            note: "moved trailing answer clause out of think".into(),
                        });
                    }
                }
            }
            IssueCode::CoordOutOfRange => {
                if let Some(annotations) = &mut out.annotations {
                    for ann in annotations.iter_mut() {
                        for c in ann.coords.iter_mut() {
                            if !c.is_finite() {
                                *c = 0.0;
                            }
                            *c = c.clamp(0.0, 1.0);
                        }
                        // Keep rects inside the frame after clamping.
                        if ann.kind == crate::record::AnnotationKind::Rect
                            && ann.coords.len() == 4
                        {
                            ann.coords[2] = ann.coords[2].min(1.0 - ann.coords[0]);
                            ann.coords[3] = ann.coords[3].min(1.0 - ann.coords[1]);
                        }
                    }
                    actions.push(RepairAction::Applied {
                        code: issue.code,
                        note: "clamped coordinates into [0, 1]".into(),
                    });
                }
            }
            code => actions.push(RepairAction::Skipped {
                code,
                reason: "no mechanical fix registered".into(),
            }),
        }
    }

    if !actions.is_empty() {
        let applied: Vec<String> = actions
            .iter()
            .filter_map(|a| match a {
                RepairAction::Applied { code, .. } => Some(code.to_string()),
                RepairAction::Skipped { .. } => None,
            })
            .collect();
        if !applied.is_empty() {
            out.meta_mut()
                .insert("repairs".into(), serde_json::json!(applied));
        }
    }

    (out, actions)
}

fn text_of<'a>(rec: &'a SampleRecord, field: &str) -> Option<&'a str> {
    if field == "final" {
        return Some(&rec.final_text);
    }
    let idx: usize = field
        .strip_prefix("conversations[")?
        .strip_suffix(']')?
        .parse()
        .ok()?;
    rec.conversations.get(idx).map(|t| t.text.as_str())
}
