//! Mid-fusion sequence bookkeeping: interleave visual soft-token spans with
//! text tokens and account for every position. No embeddings are built here,
//! only exact lengths and span placement.

use serde::{Deserialize, Serialize};

use crate::tokenize::PatchPlan;
use crate::{Error, Result};

/// Default begin+end marker tokens wrapped around each visual span.
pub const DEFAULT_MARKER_OVERHEAD: u32 = 2;

/// One element of the pre-fusion stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamItem {
    /// A single text token id.
    TextToken(u32),
    /// Stand-in for image `index` (position into the plan list).
    ImagePlaceholder(usize),
}

/// Ordered token/image stream prior to fusion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub items: Vec<StreamItem>,
}

impl TokenStream {
    pub fn new(items: Vec<StreamItem>) -> Self {
        Self { items }
    }

    /// Convenience: `n` text tokens followed by nothing else.
    pub fn text_only(n: u32) -> Self {
        Self {
            items: (0..n).map(StreamItem::TextToken).collect(),
        }
    }
}

/// A visual span in the fused sequence: `start` is the first soft-token
/// position (markers excluded), `length` the plan's token count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualSpan {
    pub start: u32,
    pub length: u32,
    pub image: usize,
}

/// Accounting for a fused text+image sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedLayout {
    pub total_len: u32,
    pub visual_spans: Vec<VisualSpan>,
    pub marker_overhead: u32,
}

/// A broken layout rule found by [`validate_layout`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LayoutViolation {
    /// Sequence is longer than the stage's max sequence length.
    TooLong { total_len: u32, max_seq_len: u32 },
    /// Two visual spans share at least one position.
    SpanOverlap { first: usize, second: usize },
    /// Spans are not in ascending start order.
    SpanOrder { index: usize },
    /// A span runs past the end of the sequence.
    SpanOutOfRange { index: usize },
}

impl std::fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayoutViolation::TooLong { total_len, max_seq_len } => {
                write!(f, "sequence of {total_len} tokens exceeds max {max_seq_len}")
            }
            LayoutViolation::SpanOverlap { first, second } => {
                write!(f, "visual spans {first} and {second} overlap")
            }
            LayoutViolation::SpanOrder { index } => {
                write!(f, "visual span {index} is out of order")
            }
            LayoutViolation::SpanOutOfRange { index } => {
                write!(f, "visual span {index} extends past the sequence end")
            }
        }
    }
}

/// Expand every image placeholder into begin-marker + soft tokens + end-marker
/// positions, preserving text order. `plans[i]` backs placeholder index `i`;
/// every plan must be referenced exactly once.
pub fn assemble_sequence(
    stream: &TokenStream,
    plans: &[PatchPlan],
    marker_overhead: u32,
) -> Result<FusedLayout> {
    let mut seen = vec![false; plans.len()];
    for item in &stream.items {
        if let StreamItem::ImagePlaceholder(i) = item {
            match seen.get_mut(*i) {
                None => {
                    return Err(Error::Reference(format!(
                        "placeholder references image {i} but only {} plans were given",
                        plans.len()
                    )))
                }
                Some(s) if *s => {
                    return Err(Error::Input(format!(
                        "image {i} appears in more than one placeholder"
                    )))
                }
                Some(s) => *s = true,
            }
        }
    }
    if let Some(unused) = seen.iter().position(|s| !s) {
        return Err(Error::Input(format!(
            "plan {unused} is not referenced by any placeholder"
        )));
    }

    let lead = marker_overhead / 2;
    let trail = marker_overhead - lead;
    let mut pos: u32 = 0;
    let mut visual_spans = Vec::new();
    for item in &stream.items {
        match item {
            StreamItem::TextToken(_) => pos += 1,
            StreamItem::ImagePlaceholder(i) => {
                let tokens = plans[*i].token_count;
                visual_spans.push(VisualSpan {
                    start: pos + lead,
                    length: tokens,
                    image: *i,
                });
                pos += lead + tokens + trail;
            }
        }
    }

    Ok(FusedLayout {
        total_len: pos,
        visual_spans,
        marker_overhead,
    })
}

/// Check a layout against a stage's max sequence length and the span
/// invariants. An empty list means the layout is valid.
pub fn validate_layout(layout: &FusedLayout, max_seq_len: u32) -> Vec<LayoutViolation> {
    let mut violations = Vec::new();
    if layout.total_len > max_seq_len {
        violations.push(LayoutViolation::TooLong {
            total_len: layout.total_len,
            max_seq_len,
        });
    }
    let spans = &layout.visual_spans;
    for (i, span) in spans.iter().enumerate() {
        if span.start as u64 + span.length as u64 > layout.total_len as u64 {
            violations.push(LayoutViolation::SpanOutOfRange { index: i });
        }
        if i > 0 {
            let prev = &spans[i - 1];
            if span.start < prev.start {
                violations.push(LayoutViolation::SpanOrder { index: i });
            } else if prev.start as u64 + prev.length as u64 > span.start as u64 {
                violations.push(LayoutViolation::SpanOverlap {
                    first: i - 1,
                    second: i,
                });
            }
        }
    }
    violations
}
