//! Training-mixture accounting: category counts with duplication factors,
//! reasoning share, and token-budget estimates, plus the seeded
//! sample-without-replacement draw used by the CLI.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::record::SampleRecord;
use crate::{Error, Result};

/// Tokens per sample derived from the mid-training stage (188.5B tokens over
/// 62.8M samples). Used as the documented default when a category does not
/// carry its own average.
pub const STAGE2_AVG_TOKENS: f64 = 188.5e9 / 62.8e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySpec {
    pub name: String,
    /// Distinct samples drawn from the category pool.
    pub base_count: u64,
    /// Times each drawn sample is repeated in the mix.
    #[serde(default = "default_duplication")]
    pub duplication: u64,
    #[serde(default)]
    pub reasoning: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_tokens: Option<f64>,
}

fn default_duplication() -> u64 {
    1
}

impl CategorySpec {
    pub fn new(name: impl Into<String>, base_count: u64) -> Self {
        Self {
            name: name.into(),
            base_count,
            duplication: 1,
            reasoning: false,
            avg_tokens: None,
        }
    }

    pub fn duplicated(mut self, factor: u64) -> Self {
        self.duplication = factor;
        self
    }

    pub fn reasoning(mut self, flag: bool) -> Self {
        self.reasoning = flag;
        self
    }

    pub fn avg_tokens(mut self, avg: f64) -> Self {
        self.avg_tokens = Some(avg);
        self
    }

    /// Samples this category contributes after duplication.
    pub fn contribution(&self) -> u64 {
        self.base_count * self.duplication
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Input("category name is empty".into()));
        }
        if self.duplication < 1 {
            return Err(Error::Input(format!(
                "category {}: duplication must be at least 1",
                self.name
            )));
        }
        if let Some(avg) = self.avg_tokens {
            if !avg.is_finite() || avg < 0.0 {
                return Err(Error::Input(format!(
                    "category {}: avg_tokens {} is not a non-negative number",
                    self.name, avg
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureManifest {
    pub specs: Vec<CategorySpec>,
    pub total_samples: u64,
    pub reasoning_share: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_tokens: Option<f64>,
}

pub fn plan_mixture(specs: &[CategorySpec]) -> Result<MixtureManifest> {
    for spec in specs {
        spec.validate()?;
    }
    let total_samples: u64 = specs.iter().map(CategorySpec::contribution).sum();
    let reasoning: u64 = specs
        .iter()
        .filter(|s| s.reasoning)
        .map(CategorySpec::contribution)
        .sum();
    let reasoning_share = if total_samples == 0 {
        0.0
    } else {
        reasoning as f64 / total_samples as f64
    };
    Ok(MixtureManifest {
        specs: specs.to_vec(),
        total_samples,
        reasoning_share,
        total_tokens: None,
    })
}

/// Σ base_count · duplication · avg_tokens, falling back to `default_avg`
/// for categories without their own average.
pub fn estimate_tokens(manifest: &MixtureManifest, default_avg: Option<f64>) -> Result<f64> {
    let mut total = 0.0;
    for spec in &manifest.specs {
        let avg = match spec.avg_tokens.or(default_avg) {
            Some(a) => a,
            None => {
                return Err(Error::Config(format!(
                    "category {} has no avg_tokens and no default was supplied",
                    spec.name
                )))
            }
        };
        total += spec.contribution() as f64 * avg;
    }
    Ok(total)
}

/// Like the sample-count share, but weighting each category by its token
/// contribution instead.
pub fn reasoning_token_share(manifest: &MixtureManifest, default_avg: Option<f64>) -> Result<f64> {
    let total = estimate_tokens(manifest, default_avg)?;
    if total == 0.0 {
        return Err(Error::Input("mixture has zero estimated tokens".into()));
    }
    let mut reasoning = 0.0;
    for spec in manifest.specs.iter().filter(|s| s.reasoning) {
        let avg = spec.avg_tokens.or(default_avg).unwrap();
        reasoning += spec.contribution() as f64 * avg;
    }
    Ok(reasoning / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareReport {
    pub share: f64,
    pub target: f64,
    pub tol: f64,
    pub within: bool,
}

/// Slack so a share exactly at the tolerance boundary is not flagged when
/// the binary representation of the difference lands a few ulps high
/// (e.g. |0.15 - 0.20| computes slightly above 0.05).
const SHARE_EPS: f64 = 1e-9;

pub fn check_reasoning_share(
    manifest: &MixtureManifest,
    target: f64,
    tol: f64,
) -> Result<ShareReport> {
    if manifest.total_samples == 0 {
        return Err(Error::Input("mixture is empty, share is undefined".into()));
    }
    if !(0.0..=1.0).contains(&target) || !tol.is_finite() || tol < 0.0 {
        return Err(Error::Config(format!(
            "bad share target {target} or tolerance {tol}"
        )));
    }
    let share = manifest.reasoning_share;
    Ok(ShareReport {
        share,
        target,
        tol,
        within: (share - target).abs() <= tol + SHARE_EPS,
    })
}

/// Plain-text mixture configuration (TOML): `[[category]]` tables plus
/// optional `default_avg_tokens`, `target_reasoning_share`, `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    #[serde(rename = "category")]
    pub categories: Vec<CategorySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_avg_tokens: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_reasoning_share: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

pub fn parse_config(text: &str) -> Result<MixtureConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("bad mixture config: {e}")))
}

/// Pick `base_count` distinct pool indices, then repeat each one
/// `duplication` times (adjacent), in draw order.
pub fn draw_indices<R: Rng>(pool_len: usize, spec: &CategorySpec, rng: &mut R) -> Result<Vec<usize>> {
    spec.validate()?;
    let k = usize::try_from(spec.base_count)
        .map_err(|_| Error::Input(format!("category {}: base_count too large", spec.name)))?;
    if k > pool_len {
        return Err(Error::Input(format!(
            "category {}: base_count {} exceeds pool of {}",
            spec.name, k, pool_len
        )));
    }
    let picked = rand::seq::index::sample(rng, pool_len, k);
    let mut out = Vec::with_capacity(k * spec.duplication as usize);
    for idx in picked {
        for _ in 0..spec.duplication {
            out.push(idx);
        }
    }
    Ok(out)
}

/// Category a record belongs to, as tagged in `meta.category`.
pub fn record_category(rec: &SampleRecord) -> &str {
    rec.meta
        .as_ref()
        .and_then(|m| m.get("category"))
        .and_then(|v| v.as_str())
        .unwrap_or("default")
}

/// Seeded concrete draw for a whole mixture: per category in spec order,
/// sample `base_count` records without replacement from that category's
/// pool, repeating each `duplication` times.
pub fn draw_records<'a>(
    records: &'a [SampleRecord],
    specs: &[CategorySpec],
    seed: u64,
) -> Result<Vec<&'a SampleRecord>> {
    let mut pools: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
    for (i, rec) in records.iter().enumerate() {
        pools.entry(record_category(rec)).or_default().push(i);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for spec in specs {
        let pool = pools.get(spec.name.as_str()).ok_or_else(|| {
            Error::Input(format!("no records tagged with category {}", spec.name))
        })?;
        for idx in draw_indices(pool.len(), spec, &mut rng)? {
            out.push(&records[pool[idx]]);
        }
    }
    Ok(out)
}
