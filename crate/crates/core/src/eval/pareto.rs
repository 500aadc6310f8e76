//! Accuracy-vs-cost Pareto frontier over model summaries.

use serde::{Deserialize, Serialize};

use super::Summary;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    /// Time or tokens, whichever axis the caller configured.
    pub cost: f64,
    /// Percent, 0..=100.
    pub accuracy: f64,
}

impl ParetoPoint {
    pub fn new(label: impl Into<String>, cost: f64, accuracy: f64) -> Result<Self> {
        if !cost.is_finite() || !accuracy.is_finite() {
            return Err(Error::Input(format!(
                "pareto point needs finite values, got cost {cost}, accuracy {accuracy}"
            )));
        }
        if !(0.0..=100.0).contains(&accuracy) {
            return Err(Error::Input(format!(
                "accuracy {accuracy} outside 0..=100"
            )));
        }
        Ok(Self { label: label.into(), cost, accuracy })
    }

    pub fn from_summary(label: impl Into<String>, summary: &Summary, axis: CostAxis) -> Result<Self> {
        let cost = match axis {
            CostAxis::LatencyMs => summary.macro_latency_ms,
            CostAxis::OutputTokens => summary.macro_output_tokens,
        };
        Self::new(label, cost, summary.macro_accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostAxis {
    LatencyMs,
    OutputTokens,
}

/// Indices of frontier points, sorted by cost. A point is on the frontier
/// iff no other point has cost ≤ and accuracy ≥ with at least one strict;
/// exact duplicates therefore survive together.
pub fn compute_pareto(points: &[ParetoPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].cost.total_cmp(&points[b].cost).then(a.cmp(&b)));

    let mut frontier = Vec::new();
    let mut best_cheaper = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let cost = points[order[i]].cost;
        let mut j = i;
        while j < order.len() && points[order[j]].cost == cost {
            j += 1;
        }
        let group_max = order[i..j]
            .iter()
            .map(|&k| points[k].accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        // Group members below the group max are dominated at equal cost;
        // the max itself survives unless a cheaper point already matched it.
        if group_max > best_cheaper {
            frontier.extend(order[i..j].iter().copied().filter(|&k| points[k].accuracy == group_max));
        }
        best_cheaper = best_cheaper.max(group_max);
        i = j;
    }
    frontier
}
