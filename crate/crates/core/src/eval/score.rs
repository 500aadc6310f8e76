//! Per-task scoring rules. Every rule degrades to score 0 with a
//! parse-failure flag instead of erroring, so a garbage prediction can
//! never abort a run.

use std::sync::OnceLock;

use regex::Regex;

use super::{Reference, TaskKind};
use crate::geometry::NormRect;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scored {
    /// 1 for a pass, 0 otherwise.
    pub score: u8,
    pub parse_failure: bool,
}

impl Scored {
    fn pass(ok: bool) -> Self {
        Self { score: ok as u8, parse_failure: false }
    }

    fn unparseable() -> Self {
        Self { score: 0, parse_failure: true }
    }
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?").unwrap())
}

fn option_letter_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([A-E])\b").unwrap())
}

fn last_number(text: &str) -> Option<f64> {
    number_re()
        .find_iter(text)
        .last()
        .and_then(|m| m.as_str().parse().ok())
}

fn first_two_numbers(text: &str) -> Option<(f64, f64)> {
    let mut it = number_re()
        .find_iter(text)
        .filter_map(|m| m.as_str().parse::<f64>().ok());
    Some((it.next()?, it.next()?))
}

/// Final standalone option letter in the prediction, e.g. the B of
/// "The answer is (B)."
fn last_option_letter(text: &str) -> Option<char> {
    option_letter_re()
        .find_iter(text)
        .last()
        .map(|m| m.as_str().chars().next().unwrap())
}

const RELAXED_TOLERANCE: f64 = 0.05;

pub fn score_sample(kind: TaskKind, prediction: &str, reference: &Reference) -> Scored {
    match (kind, reference) {
        (TaskKind::ExactMatch, Reference::Text(gold)) => Scored::pass(
            prediction.trim().to_lowercase() == gold.trim().to_lowercase(),
        ),
        (TaskKind::MultipleChoice, Reference::Text(gold)) => {
            let want = gold.trim().to_uppercase();
            match last_option_letter(prediction) {
                Some(got) => Scored::pass(got.to_string() == want),
                None => Scored::unparseable(),
            }
        }
        (TaskKind::RelaxedNumeric, Reference::Text(gold)) => {
            let Some(want) = last_number(gold) else {
                return Scored::unparseable();
            };
            match last_number(prediction) {
                Some(got) => Scored::pass((got - want).abs() <= RELAXED_TOLERANCE * want.abs()),
                None => Scored::unparseable(),
            }
        }
        (TaskKind::PointInBox, Reference::Rect(rect)) => match first_two_numbers(prediction) {
            Some((x, y)) => Scored::pass(contains(rect, x, y)),
            None => Scored::unparseable(),
        },
        // Reference type does not fit the task; treat like an unparseable
        // prediction rather than raising.
        _ => Scored::unparseable(),
    }
}

fn contains(rect: &NormRect, x: f64, y: f64) -> bool {
    x >= rect.x && x <= rect.x + rect.w && y >= rect.y && y <= rect.y + rect.h
}
