//! Benchmark harness: sequential timed runs against a model endpoint,
//! per-task scoring, macro aggregation, Pareto frontier computation, and
//! CSV/SVG reporting.

mod client;
mod pareto;
mod report;
mod run;
mod score;

pub use client::{MockModelClient, MockReply, ModelClient, ModelRequest, ModelResponse, HttpModelClient};
pub use pareto::{compute_pareto, CostAxis, ParetoPoint};
pub use report::{emit_report, render_csv, render_svg};
pub use run::{aggregate, estimate_output_tokens, run_benchmark, BenchmarkSummary, EvalResult,
    RunOptions, Summary, TokenSource};
pub use score::{score_sample, Scored};

use serde::{Deserialize, Serialize};

use crate::geometry::NormRect;
use crate::record::{AnnotationKind, Role, SampleRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub temperature: f64,
    pub decoding: Decoding,
    pub max_output_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoding {
    Greedy,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            decoding: Decoding::Greedy,
            max_output_tokens: 4096,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::Config(format!(
                "temperature {} must be a non-negative number",
                self.temperature
            )));
        }
        if self.max_output_tokens < 1 {
            return Err(Error::Config("max_output_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ExactMatch,
    MultipleChoice,
    RelaxedNumeric,
    PointInBox,
}

/// Gold answer: free text for the textual tasks, a normalized rect for
/// grounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Text(String),
    Rect(NormRect),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub id: String,
    pub benchmark: String,
    pub task_kind: TaskKind,
    pub prompt: String,
    pub images: Vec<String>,
    pub reference: Reference,
}

impl EvalSample {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.task_kind {
            TaskKind::PointInBox => matches!(self.reference, Reference::Rect(_)),
            _ => matches!(self.reference, Reference::Text(_)),
        };
        if !ok {
            return Err(Error::Input(format!(
                "sample {}: reference type does not fit task kind {:?}",
                self.id, self.task_kind
            )));
        }
        Ok(())
    }

    /// Lift a curation record into an eval sample. The benchmark name and
    /// task kind ride in `meta` ("benchmark", "task_kind"); a PointInBox
    /// reference comes from the record's first rect annotation, every other
    /// kind from the final answer text.
    pub fn from_record(rec: &SampleRecord) -> Result<Self> {
        let meta = rec.meta.as_ref();
        let get = |key: &str| meta.and_then(|m| m.get(key)).and_then(|v| v.as_str());
        let benchmark = get("benchmark").unwrap_or("default").to_string();
        let task_kind = match get("task_kind") {
            None | Some("exact_match") => TaskKind::ExactMatch,
            Some("multiple_choice") => TaskKind::MultipleChoice,
            Some("relaxed_numeric") => TaskKind::RelaxedNumeric,
            Some("point_in_box") => TaskKind::PointInBox,
            Some(other) => {
                return Err(Error::Input(format!(
                    "record {}: unknown task_kind {other}",
                    rec.id
                )))
            }
        };
        let prompt = rec
            .conversations
            .iter()
            .rev()
            .find(|t| t.role == Role::User)
            .map(|t| t.text.clone())
            .ok_or_else(|| Error::Input(format!("record {} has no user turn", rec.id)))?;
        let reference = if task_kind == TaskKind::PointInBox {
            let rect = rec
                .annotations
                .iter()
                .flatten()
                .find(|a| a.kind == AnnotationKind::Rect)
                .ok_or_else(|| {
                    Error::Input(format!(
                        "record {}: point_in_box needs a rect annotation",
                        rec.id
                    ))
                })?;
            Reference::Rect(NormRect::new(
                rect.coords[0],
                rect.coords[1],
                rect.coords[2],
                rect.coords[3],
            )?)
        } else {
            Reference::Text(rec.final_text.clone())
        };
        let sample = Self {
            id: rec.id.clone(),
            benchmark,
            task_kind,
            prompt,
            images: rec.images.clone(),
            reference,
        };
        sample.validate()?;
        Ok(sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Annotation, Turn};

    #[test]
    fn gen_config_defaults_and_validation() {
        let cfg = GenConfig::default();
        assert_eq!(cfg.temperature, 0.0);
        assert_eq!(cfg.max_output_tokens, 4096);
        cfg.validate().unwrap();
        assert!(GenConfig { temperature: -0.5, ..cfg }.validate().is_err());
        assert!(GenConfig { max_output_tokens: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn sample_from_record_reads_meta_and_annotations() {
        let mut rec = SampleRecord::direct("q1", "42");
        rec.conversations = vec![Turn { role: Role::User, text: "How many?".into() }];
        rec.meta_mut().insert("benchmark".into(), "counting".into());
        rec.meta_mut().insert("task_kind".into(), "relaxed_numeric".into());
        let sample = EvalSample::from_record(&rec).unwrap();
        assert_eq!(sample.benchmark, "counting");
        assert_eq!(sample.task_kind, TaskKind::RelaxedNumeric);
        assert_eq!(sample.reference, Reference::Text("42".into()));

        rec.meta_mut().insert("task_kind".into(), "point_in_box".into());
        assert!(EvalSample::from_record(&rec).is_err(), "no rect annotation");
        rec.annotations = Some(vec![Annotation {
            kind: AnnotationKind::Rect,
            coords: vec![0.4, 0.4, 0.2, 0.2],
            label: "target".into(),
        }]);
        let sample = EvalSample::from_record(&rec).unwrap();
        assert!(matches!(sample.reference, Reference::Rect(_)));
    }

    #[test]
    fn mismatched_reference_is_rejected() {
        let sample = EvalSample {
            id: "s".into(),
            benchmark: "b".into(),
            task_kind: TaskKind::PointInBox,
            prompt: "p".into(),
            images: vec![],
            reference: Reference::Text("not a rect".into()),
        };
        assert!(sample.validate().is_err());
    }
}
