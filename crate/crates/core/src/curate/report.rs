//! Dataset-level quality reporting: aggregate lint results and judge
//! verdicts into a histogram plus a suggested quality label. The report
//! assists manual review; nothing is ever deleted automatically.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::lint::{lint_record, LintIssue};
use super::known_image_tags;
use crate::record::SampleRecord;
use crate::{Error, Result};

/// The five-category dataset quality taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QualityValue {
    Excellent,
    GoodQWrongA,
    LowQualityQuestions,
    LowQualityImages,
    FormatErrors,
}

/// Supporting material behind a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Evidence {
    Issue(LintIssue),
    JudgeDisagreement { record_id: String, detail: String },
}

/// A quality label plus the evidence that justifies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityLabel {
    pub value: QualityValue,
    pub evidence: Vec<Evidence>,
}

impl QualityLabel {
    /// Build a label, enforcing that labels requiring evidence have it:
    /// `FormatErrors` needs at least one fixable lint issue, `GoodQWrongA`
    /// at least one judge disagreement.
    pub fn new(value: QualityValue, evidence: Vec<Evidence>) -> Result<Self> {
        match value {
            QualityValue::FormatErrors
                if !evidence
                    .iter()
                    .any(|e| matches!(e, Evidence::Issue(i) if i.fixable)) =>
            {
                Err(Error::Input(
                    "FormatErrors label requires a fixable lint issue as evidence".into(),
                ))
            }
            QualityValue::GoodQWrongA
                if !evidence
                    .iter()
                    .any(|e| matches!(e, Evidence::JudgeDisagreement { .. })) =>
            {
                Err(Error::Input(
                    "GoodQWrongA label requires a judge disagreement as evidence".into(),
                ))
            }
            _ => Ok(Self { value, evidence }),
        }
    }
}

/// Shares of defective records above which a label is suggested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    pub format_errors: f64,
    pub judge_disagreement: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self {
            format_errors: 0.2,
            judge_disagreement: 0.2,
        }
    }
}

/// A short issue sample surfaced in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueExcerpt {
    pub record_id: String,
    pub code: String,
    pub detail: String,
}

/// Aggregated lint/judge statistics for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub record_count: usize,
    pub total_issues: usize,
    pub issue_histogram: BTreeMap<String, usize>,
    pub records_with_fixable_issues: usize,
    pub judge_disagreements: usize,
    pub suggested_label: Option<QualityLabel>,
    pub excerpts: Vec<IssueExcerpt>,
    /// Image paths referenced by more than one record; a hint for manual
    /// low-quality-image review, never an automatic judgment.
    pub duplicate_image_refs: Vec<(String, usize)>,
}

const MAX_EXCERPTS: usize = 5;
const MAX_DUPLICATE_HINTS: usize = 5;

/// Streaming aggregation: feed `(record, issues, judge verdict)` triples and
/// finish into a [`DatasetReport`]. Bounded memory regardless of corpus size.
pub struct DatasetSummary {
    thresholds: LabelThresholds,
    record_count: usize,
    total_issues: usize,
    histogram: BTreeMap<String, usize>,
    records_with_fixable: usize,
    disagreements: usize,
    excerpts: Vec<IssueExcerpt>,
    fixable_evidence: Vec<Evidence>,
    disagreement_evidence: Vec<Evidence>,
    image_ref_counts: HashMap<String, usize>,
}

impl DatasetSummary {
    pub fn new(thresholds: LabelThresholds) -> Self {
        Self {
            thresholds,
            record_count: 0,
            total_issues: 0,
            histogram: BTreeMap::new(),
            records_with_fixable: 0,
            disagreements: 0,
            excerpts: Vec::new(),
            fixable_evidence: Vec::new(),
            disagreement_evidence: Vec::new(),
            image_ref_counts: HashMap::new(),
        }
    }

    /// `judge_disagreed` marks that an external judge contradicted the
    /// record's stored answer (pass `false` when no judge ran).
    pub fn add(&mut self, rec: &SampleRecord, issues: &[LintIssue], judge_disagreed: bool) {
        self.record_count += 1;
        self.total_issues += issues.len();
        for issue in issues {
            *self.histogram.entry(issue.code.to_string()).or_default() += 1;
            if self.excerpts.len() < MAX_EXCERPTS {
                self.excerpts.push(IssueExcerpt {
                    record_id: issue.record_id.clone(),
                    code: issue.code.to_string(),
                    detail: issue.detail.clone(),
                });
            }
            if issue.fixable && self.fixable_evidence.len() < MAX_EXCERPTS {
                self.fixable_evidence.push(Evidence::Issue(issue.clone()));
            }
        }
        if issues.iter().any(|i| i.fixable) {
            self.records_with_fixable += 1;
        }
        if judge_disagreed {
            self.disagreements += 1;
            if self.disagreement_evidence.len() < MAX_EXCERPTS {
                self.disagreement_evidence.push(Evidence::JudgeDisagreement {
                    record_id: rec.id.clone(),
                    detail: "judge answer differed from stored answer".into(),
                });
            }
        }
        for image in &rec.images {
            *self.image_ref_counts.entry(image.clone()).or_default() += 1;
        }
    }

    pub fn finish(self) -> DatasetReport {
        let n = self.record_count;
        let suggested_label = if n == 0 {
            None
        } else {
            let fixable_share = self.records_with_fixable as f64 / n as f64;
            let disagree_share = self.disagreements as f64 / n as f64;
            let format_hit = fixable_share >= self.thresholds.format_errors;
            let judge_hit = disagree_share >= self.thresholds.judge_disagreement;
            if judge_hit && (!format_hit || disagree_share >= fixable_share) {
                QualityLabel::new(QualityValue::GoodQWrongA, self.disagreement_evidence).ok()
            } else if format_hit {
                QualityLabel::new(QualityValue::FormatErrors, self.fixable_evidence).ok()
            } else if self.total_issues == 0 && self.disagreements == 0 {
                Some(QualityLabel {
                    value: QualityValue::Excellent,
                    evidence: Vec::new(),
                })
            } else {
                // Issues exist but below every threshold: leave the call to
                // a human reviewer.
                None
            }
        };

        let mut duplicates: Vec<(String, usize)> = self
            .image_ref_counts
            .into_iter()
            .filter(|(_, c)| *c > 1)
            .collect();
        duplicates.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        duplicates.truncate(MAX_DUPLICATE_HINTS);

        DatasetReport {
            record_count: n,
            total_issues: self.total_issues,
            issue_histogram: self.histogram,
            records_with_fixable_issues: self.records_with_fixable,
            judge_disagreements: self.disagreements,
            suggested_label,
            excerpts: self.excerpts,
            duplicate_image_refs: duplicates,
        }
    }
}

/// Lint every record (against its own canonical image tags) and aggregate.
/// No judge verdicts are involved; use [`DatasetSummary`] directly for
/// judge-aware flows.
pub fn summarize_dataset<'a>(
    records: impl IntoIterator<Item = &'a SampleRecord>,
) -> DatasetReport {
    let mut summary = DatasetSummary::new(LabelThresholds::default());
    for rec in records {
        let issues = lint_record(rec, &known_image_tags(rec));
        summary.add(rec, &issues, false);
    }
    summary.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curate::IssueCode;
    use crate::record::{Role, Turn};

    fn clean_record(i: usize) -> SampleRecord {
        let mut rec = SampleRecord::direct(format!("r{i}"), "fine");
        rec.conversations = vec![Turn {
            role: Role::User,
            text: "Q?".into(),
        }];
        rec
    }

    fn broken_record(i: usize) -> SampleRecord {
        let mut rec = clean_record(i);
        rec.images = vec![format!("img/{i}.png")];
        rec.conversations[0].text = "Look at <imgae_1>".into();
        rec
    }

    #[test]
    fn clean_corpus_suggests_excellent() {
        let records: Vec<_> = (0..100).map(clean_record).collect();
        let report = summarize_dataset(records.iter());
        assert_eq!(report.record_count, 100);
        assert_eq!(report.total_issues, 0);
        assert_eq!(
            report.suggested_label.map(|l| l.value),
            Some(QualityValue::Excellent)
        );
    }

    #[test]
    fn forty_percent_fixable_suggests_format_errors() {
        let records: Vec<_> = (0..100)
            .map(|i| if i < 40 { broken_record(i) } else { clean_record(i) })
            .collect();
        let report = summarize_dataset(records.iter());
        assert_eq!(report.records_with_fixable_issues, 40);
        let label = report.suggested_label.unwrap();
        assert_eq!(label.value, QualityValue::FormatErrors);
        assert!(!label.evidence.is_empty());
        assert_eq!(report.issue_histogram["misspelled_image_tag"], 40);
    }

    #[test]
    fn judge_disagreement_suggests_good_q_wrong_a() {
        let mut summary = DatasetSummary::new(LabelThresholds::default());
        for i in 0..100 {
            let rec = clean_record(i);
            summary.add(&rec, &[], i < 30);
        }
        let report = summary.finish();
        assert_eq!(report.judge_disagreements, 30);
        assert_eq!(
            report.suggested_label.map(|l| l.value),
            Some(QualityValue::GoodQWrongA)
        );
    }

    #[test]
    fn empty_stream_has_no_suggestion() {
        let report = summarize_dataset(std::iter::empty());
        assert_eq!(report.record_count, 0);
        assert!(report.suggested_label.is_none());
        assert!(report.issue_histogram.is_empty());
    }

    #[test]
    fn sub_threshold_issues_leave_no_suggestion() {
        let records: Vec<_> = (0..100)
            .map(|i| if i < 5 { broken_record(i) } else { clean_record(i) })
            .collect();
        let report = summarize_dataset(records.iter());
        assert!(report.suggested_label.is_none());
    }

    #[test]
    fn histogram_counts_sum_to_total_issues() {
        let records: Vec<_> = (0..50).map(broken_record).collect();
        let report = summarize_dataset(records.iter());
        let sum: usize = report.issue_histogram.values().sum();
        assert_eq!(sum, report.total_issues);
    }

    #[test]
    fn duplicate_images_are_surfaced_as_hints() {
        let mut records = Vec::new();
        for i in 0..10 {
            let mut rec = clean_record(i);
            rec.images = vec!["img/shared.png".into()];
            rec.conversations[0].text = "Look at <image_1>".into();
            records.push(rec);
        }
        let report = summarize_dataset(records.iter());
        assert_eq!(report.duplicate_image_refs, vec![("img/shared.png".into(), 10)]);
    }

    #[test]
    fn label_invariants_are_enforced() {
        assert!(QualityLabel::new(QualityValue::FormatErrors, vec![]).is_err());
        assert!(QualityLabel::new(QualityValue::GoodQWrongA, vec![]).is_err());
        let fixable = Evidence::Issue(LintIssue::new(
            IssueCode::MisspelledImageTag,
            "r",
            "final",
            None,
            "tag typo",
        ));
        assert!(QualityLabel::new(QualityValue::FormatErrors, vec![fixable]).is_ok());
    }
}
