//! The shared multimodal record schema and its JSONL serialization.
//!
//! One record per line, schema:
//! `{"id", "images", "conversations": [{"role", "text"}], "mode",
//!   "think"?, "final", "annotations"?: [{"kind", "coords", "label"}],
//!   "meta"?}`.
//! Reading is streaming with line/byte positions attached to every parse
//! failure, so multi-gigabyte corpora can be processed with bounded memory.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

/// Whether the assistant response carries a chain-of-thought block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Reason,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

/// Spatial annotation in normalized coordinates: `coords` is `[x, y]` for a
/// point and `[x, y, w, h]` for a rect. Values are kept raw so linting can
/// flag out-of-range data instead of refusing to load it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub coords: Vec<f64>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationKind {
    Point,
    Rect,
}

impl AnnotationKind {
    pub fn arity(self) -> usize {
        match self {
            AnnotationKind::Point => 2,
            AnnotationKind::Rect => 4,
        }
    }
}

/// One multimodal training or evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: String,
    pub images: Vec<String>,
    pub conversations: Vec<Turn>,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub think: Option<String>,
    #[serde(rename = "final")]
    pub final_text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Vec<Annotation>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<Map<String, Value>>,
}

impl SampleRecord {
    /// Minimal well-formed direct-mode record.
    pub fn direct(id: impl Into<String>, final_text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            images: Vec::new(),
            conversations: Vec::new(),
            mode: Mode::Direct,
            think: None,
            final_text: final_text.into(),
            annotations: None,
            meta: None,
        }
    }

    /// Minimal well-formed reasoning-mode record.
    pub fn reason(
        id: impl Into<String>,
        think: impl Into<String>,
        final_text: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            images: Vec::new(),
            conversations: Vec::new(),
            mode: Mode::Reason,
            think: Some(think.into()),
            final_text: final_text.into(),
            annotations: None,
            meta: None,
        }
    }

    /// Enforce the mode/think/final invariants.
    pub fn validate(&self) -> Result<()> {
        match (self.mode, &self.think) {
            (Mode::Reason, None) => {
                return Err(Error::Input(format!(
                    "record {}: reason mode requires a think block",
                    self.id
                )))
            }
            (Mode::Direct, Some(_)) => {
                return Err(Error::Input(format!(
                    "record {}: direct mode must not carry a think block",
                    self.id
                )))
            }
            _ => {}
        }
        if self.final_text.is_empty() {
            return Err(Error::Input(format!(
                "record {}: final answer is empty",
                self.id
            )));
        }
        Ok(())
    }

    /// Mutable access to `meta`, creating it on first use.
    pub fn meta_mut(&mut self) -> &mut Map<String, Value> {
        self.meta.get_or_insert_with(Map::new)
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Streaming JSONL reader that tracks the line number and byte offset of
/// every record so malformed lines are reported in place.
pub struct JsonlReader<R> {
    inner: R,
    line: usize,
    offset: u64,
    buf: String,
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            offset: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<SampleRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            let start = self.offset;
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(n) => {
                    self.offset += n as u64;
                    self.line += 1;
                }
                Err(e) => return Some(Err(e.into())),
            }
            let trimmed = self.buf.trim();
            if trimmed.is_empty() {
                continue;
            }
            return Some(serde_json::from_str(trimmed).map_err(|e| Error::Record {
                line: self.line,
                offset: start,
                message: e.to_string(),
            }));
        }
    }
}

/// Write one record per line in the canonical compact form.
pub fn write_records<'a, W: Write>(
    out: &mut W,
    records: impl IntoIterator<Item = &'a SampleRecord>,
) -> Result<()> {
    for rec in records {
        writeln!(out, "{}", rec.to_json_line()?)?;
    }
    Ok(())
}
