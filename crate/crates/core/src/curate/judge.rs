//! External judge contract and the answer-regeneration flow built on it.
//!
//! Wire format: POST `{"prompt": string, "images": [base64 strings]}`,
//! response `{"text": string}`. The judge itself (which model, where it
//! runs) is deployment configuration; a scripted mock ships for tests.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::vote::{default_normalizer, majority_vote, Verdict};
use crate::record::SampleRecord;
use crate::{Error, Result};

/// Client for an external answer/caption generator. Implementations must not
/// touch the records themselves; they only turn prompts into text.
pub trait JudgeClient {
    fn generate(&self, prompt: &str, images: &[String]) -> Result<String>;

    /// Whether repeated calls with the same input return the same text.
    fn deterministic(&self) -> bool {
        false
    }

    /// Remaining calls this client will serve, if it enforces a budget.
    fn remaining_budget(&self) -> Option<u64> {
        None
    }
}

/// Scripted judge for tests: answers cycle through `responses`; an optional
/// budget makes over-use fail like a real quota.
pub struct MockJudge {
    responses: Vec<String>,
    calls: AtomicU64,
    budget: Option<u64>,
}

impl MockJudge {
    pub fn new(responses: Vec<String>) -> Self {
        Self {
            responses,
            calls: AtomicU64::new(0),
            budget: None,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl JudgeClient for MockJudge {
    fn generate(&self, _prompt: &str, _images: &[String]) -> Result<String> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(budget) = self.budget {
            if n >= budget {
                return Err(Error::Transport("judge call budget exhausted".into()));
            }
        }
        if self.responses.is_empty() {
            return Err(Error::Transport("mock judge has no scripted responses".into()));
        }
        Ok(self.responses[n as usize % self.responses.len()].clone())
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn remaining_budget(&self) -> Option<u64> {
        self.budget
            .map(|b| b.saturating_sub(self.calls.load(Ordering::SeqCst)))
    }
}

#[derive(Serialize)]
struct JudgeRequest<'a> {
    prompt: &'a str,
    images: Vec<String>,
}

#[derive(Deserialize)]
struct JudgeResponse {
    text: String,
}

/// HTTP judge speaking the wire contract. Image refs are read from disk and
/// sent base64-encoded.
pub struct HttpJudgeClient {
    endpoint: String,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl HttpJudgeClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            client,
            api_key,
        })
    }
}

pub(crate) fn encode_images(refs: &[String]) -> Result<Vec<String>> {
    refs.iter()
        .map(|path| {
            let bytes = std::fs::read(path)?;
            Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
        })
        .collect()
}

impl JudgeClient for HttpJudgeClient {
    fn generate(&self, prompt: &str, images: &[String]) -> Result<String> {
        let body = JudgeRequest {
            prompt,
            images: encode_images(images)?,
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(Error::Transport(format!(
                "judge endpoint returned {}",
                resp.status()
            )));
        }
        let parsed: JudgeResponse = resp.json().map_err(|e| Error::Transport(e.to_string()))?;
        Ok(parsed.text)
    }
}

/// Result of [`regenerate_answer`]: either a record with a vote-verified
/// answer, or the same record tagged for exclusion.
#[derive(Debug, Clone, PartialEq)]
pub enum RegenOutcome {
    Verified(SampleRecord),
    Unverified(SampleRecord),
}

const TRANSPORT_RETRIES: usize = 2;

fn call_with_retry(judge: &dyn JudgeClient, prompt: &str, images: &[String]) -> Result<String> {
    let mut last = None;
    for _ in 0..=TRANSPORT_RETRIES {
        match judge.generate(prompt, images) {
            Ok(text) => return Ok(text),
            Err(e @ Error::Transport(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Transport("judge call failed".into())))
}

/// Regenerate the record's answer with `votes` independent judge samples and
/// keep it only when a strict majority agrees. The input record is never
/// mutated; the returned copy carries provenance (or an exclusion tag).
pub fn regenerate_answer(
    rec: &SampleRecord,
    judge: &dyn JudgeClient,
    votes: usize,
    threshold: f64,
) -> Result<RegenOutcome> {
    let prompt = rec
        .conversations
        .iter()
        .rev()
        .find(|t| t.role == crate::record::Role::User)
        .map(|t| t.text.clone())
        .ok_or_else(|| Error::Input(format!("record {} has no user turn to prompt from", rec.id)))?;
    regenerate_answer_with_prompt(rec, judge, votes, threshold, &prompt)
}

/// Variant taking an explicit prompt, e.g. a description request when
/// seeding captions instead of re-answering the original question.
pub fn regenerate_answer_with_prompt(
    rec: &SampleRecord,
    judge: &dyn JudgeClient,
    votes: usize,
    threshold: f64,
    prompt: &str,
) -> Result<RegenOutcome> {
    if votes == 0 {
        return Err(Error::Config("votes must be at least 1".into()));
    }
    if let Some(remaining) = judge.remaining_budget() {
        if remaining < votes as u64 {
            return Err(Error::Config(format!(
                "judge budget {remaining} cannot cover {votes} votes"
            )));
        }
    }

    let mut candidates = Vec::with_capacity(votes);
    for _ in 0..votes {
        candidates.push(call_with_retry(judge, prompt, &rec.images)?);
    }

    let mut out = rec.clone();
    match majority_vote(&candidates, default_normalizer, threshold)? {
        Verdict::Verified(answer) => {
            out.final_text = answer;
            out.meta_mut().insert(
                "provenance".into(),
                serde_json::json!({
                    "source_id": rec.id,
                    "transform": "regenerate_answer",
                    "votes": votes,
                }),
            );
            Ok(RegenOutcome::Verified(out))
        }
        Verdict::Unverified => {
            out.meta_mut().insert("excluded".into(), serde_json::json!(true));
            out.meta_mut().insert(
                "excluded_reason".into(),
                serde_json::json!("no majority among regenerated answers"),
            );
            Ok(RegenOutcome::Unverified(out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Role, Turn};

    fn question_record() -> SampleRecord {
        let mut rec = SampleRecord::direct("q1", "old");
        rec.conversations = vec![Turn {
            role: Role::User,
            text: "What is 6 times 7?".into(),
        }];
        rec
    }

    #[test]
    fn unanimous_mock_verifies() {
        let judge = MockJudge::new(vec!["42".into()]);
        let out = regenerate_answer(&question_record(), &judge, 3, 0.5).unwrap();
        match out {
            RegenOutcome::Verified(rec) => {
                assert_eq!(rec.final_text, "42");
                assert!(rec.meta.unwrap().contains_key("provenance"));
            }
            other => panic!("expected verified, got {other:?}"),
        }
        assert_eq!(judge.calls(), 3);
    }

    #[test]
    fn split_vote_with_majority_verifies() {
        let judge = MockJudge::new(vec!["A".into(), "B".into(), "A".into(), "A".into(), "B".into()]);
        let out = regenerate_answer(&question_record(), &judge, 5, 0.5).unwrap();
        assert!(matches!(out, RegenOutcome::Verified(rec) if rec.final_text == "A"));
    }

    #[test]
    fn distinct_answers_tag_record_excluded() {
        let judge = MockJudge::new(vec!["A".into(), "B".into(), "C".into()]);
        let out = regenerate_answer(&question_record(), &judge, 3, 0.5).unwrap();
        match out {
            RegenOutcome::Unverified(rec) => {
                assert_eq!(rec.final_text, "old");
                assert_eq!(rec.meta.unwrap()["excluded"], serde_json::json!(true));
            }
            other => panic!("expected unverified, got {other:?}"),
        }
    }

    #[test]
    fn budget_is_enforced_before_calls() {
        let judge = MockJudge::new(vec!["42".into()]).with_budget(2);
        let err = regenerate_answer(&question_record(), &judge, 3, 0.5).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(judge.calls(), 0);
    }
}
