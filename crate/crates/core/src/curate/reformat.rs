//! Double-duty reformatting: rewrite a QA record so it also trains
//! instruction-format following, by appending a format instruction to the
//! question and restating the answer in that format.

use serde::Serialize;

use crate::record::{Role, SampleRecord, Turn};
use crate::{Error, Result};

/// One format instruction plus the rewrite it demands. `apply` returns
/// `None` when the answer cannot be expressed in that format.
pub struct FormatTemplate {
    pub name: &'static str,
    pub instruction: &'static str,
    pub apply: fn(&str) -> Option<String>,
}

fn as_single_word(answer: &str) -> Option<String> {
    let trimmed = answer.trim();
    if trimmed.is_empty() || trimmed.contains(char::is_whitespace) {
        return None;
    }
    Some(trimmed.to_string())
}

fn as_json_object(answer: &str) -> Option<String> {
    #[derive(Serialize)]
    struct Wrapped<'a> {
        answer: &'a str,
    }
    serde_json::to_string(&Wrapped { answer }).ok()
}

fn as_uppercase(answer: &str) -> Option<String> {
    Some(answer.to_uppercase())
}

fn as_sentence(answer: &str) -> Option<String> {
    let trimmed = answer.trim();
    if trimmed.is_empty() {
        return None;
    }
    if trimmed.ends_with(['.', '!', '?']) {
        Some(trimmed.to_string())
    } else {
        Some(format!("{trimmed}."))
    }
}

/// The built-in instruction pool.
pub fn default_templates() -> Vec<FormatTemplate> {
    vec![
        FormatTemplate {
            name: "single_word",
            instruction: "Answer with a single word.",
            apply: as_single_word,
        },
        FormatTemplate {
            name: "json_object",
            instruction: "Give the answer as a JSON object with the key \"answer\".",
            apply: as_json_object,
        },
        FormatTemplate {
            name: "uppercase",
            instruction: "Answer in uppercase letters.",
            apply: as_uppercase,
        },
        FormatTemplate {
            name: "full_sentence",
            instruction: "Answer with a complete sentence.",
            apply: as_sentence,
        },
    ]
}

/// Result of a double-duty rewrite; records whose answers cannot take the
/// selected format are skipped rather than mangled.
#[derive(Debug, Clone, PartialEq)]
pub enum ReformatOutcome {
    Reformatted(SampleRecord),
    Skipped { reason: String },
}

/// FNV-1a 64-bit, for stable seed derivation from names and ids.
pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in data {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Deterministically pick a template from the pool (keyed on seed and record
/// id), append its instruction to the user turn, and rewrite the answer.
/// The input record is never mutated; the new record links back to it via
/// `meta.provenance`.
pub fn reformat_double_duty(
    rec: &SampleRecord,
    pool: &[FormatTemplate],
    seed: u64,
) -> Result<ReformatOutcome> {
    rec.validate()?;
    if pool.is_empty() {
        return Err(Error::Config("template pool is empty".into()));
    }

    let pick = (fnv1a64(rec.id.as_bytes()) ^ seed) % pool.len() as u64;
    let template = &pool[pick as usize];

    let Some(formatted) = (template.apply)(&rec.final_text) else {
        return Ok(ReformatOutcome::Skipped {
            reason: format!(
                "answer of record {} not representable as {}",
                rec.id, template.name
            ),
        });
    };

    let mut out = rec.clone();
    out.id = format!("{}::dd", rec.id);
    match out
        .conversations
        .iter_mut()
        .rev()
        .find(|t| t.role == Role::User)
    {
        Some(turn) => {
            turn.text = format!("{} {}", turn.text.trim_end(), template.instruction);
        }
        None => out.conversations.push(Turn {
            role: Role::User,
            text: template.instruction.to_string(),
        }),
    }
    // Keep any trailing assistant turn consistent with the rewritten answer.
    if let Some(turn) = out.conversations.last_mut() {
        if turn.role == Role::Assistant && turn.text == rec.final_text {
            turn.text = formatted.clone();
        }
    }
    out.final_text = formatted;
    out.meta_mut().insert(
        "provenance".into(),
        serde_json::json!({
            "source_id": rec.id,
            "transform": "double_duty",
            "seed": seed,
            "template": template.name,
        }),
    );
    Ok(ReformatOutcome::Reformatted(out))
}
