//! Dataset curation: record linting against a defect catalogue, quality
//! labeling, majority-vote verification, double-duty reformatting, and
//! judge-driven answer regeneration.

mod judge;
mod lint;
mod reformat;
mod report;
mod vote;

pub use judge::{HttpJudgeClient, JudgeClient, MockJudge, RegenOutcome, regenerate_answer,
    regenerate_answer_with_prompt};
pub(crate) use judge::encode_images;
pub use lint::{lint_record, repair_record, IssueCode, LintIssue, RepairAction, Severity};
pub use reformat::{default_templates, fnv1a64, reformat_double_duty, FormatTemplate, ReformatOutcome};
pub use report::{
    summarize_dataset, DatasetReport, DatasetSummary, Evidence, IssueExcerpt, LabelThresholds,
    QualityLabel, QualityValue,
};
pub use vote::{default_normalizer, majority_vote, Verdict};

use crate::record::SampleRecord;

/// Canonical image tags for a record: `<image_1>` through `<image_N>`.
pub fn known_image_tags(rec: &SampleRecord) -> Vec<String> {
    (1..=rec.images.len())
        .map(|i| format!("<image_{i}>"))
        .collect()
}
