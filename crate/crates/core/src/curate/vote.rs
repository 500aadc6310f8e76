//! Majority-vote verification over regenerated answer candidates.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "answer")]
pub enum Verdict {
    Verified(String),
    Unverified,
}

/// Number with optional digit-grouping commas and a trailing unit, e.g.
/// `"3,096"`, `"5 km"`, `"42.0%"`.
fn numeric_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([+-]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?:e[+-]?\d+)?)\s*([a-z%°µ²³/].*)?$")
            .unwrap()
    })
}

/// Trim, case-fold, and canonicalize numeric answers: digit-grouping commas
/// and unit suffixes are stripped, trailing zeros dropped (`"42.50 km"` and
/// `"42.5"` vote together).
pub fn default_normalizer(s: &str) -> String {
    let t = s.trim().to_lowercase();
    if let Some(caps) = numeric_pattern().captures(&t) {
        let digits = caps[1].replace(',', "");
        if let Ok(v) = digits.parse::<f64>() {
            if v.is_finite() {
                return v.to_string();
            }
        }
    }
    t
}

/// Return the candidate whose normalized form is shared by a fraction of
/// candidates strictly greater than `threshold`. The winning class is
/// represented by its lexicographically smallest original string, so the
/// verdict does not depend on candidate order.
pub fn majority_vote(
    candidates: &[String],
    normalize: impl Fn(&str) -> String,
    threshold: f64,
) -> Result<Verdict> {
    if candidates.is_empty() {
        return Err(Error::Input("majority_vote needs at least one candidate".into()));
    }
    if !(0.5..=1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "vote threshold {threshold} outside [0.5, 1.0]"
        )));
    }

    let mut classes: HashMap<String, (usize, &str)> = HashMap::new();
    for cand in candidates {
        let key = normalize(cand);
        let entry = classes.entry(key).or_insert((0, cand.as_str()));
        entry.0 += 1;
        if cand.as_str() < entry.1 {
            entry.1 = cand;
        }
    }

    let n = candidates.len() as f64;
    // With threshold >= 0.5 and a strict comparison, at most one class can
    // pass, so the scan order does not matter.
    for (count, representative) in classes.values() {
        if *count as f64 / n > threshold {
            return Ok(Verdict::Verified(representative.to_string()));
        }
    }
    Ok(Verdict::Unverified)
}
