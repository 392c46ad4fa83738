//! Agreement between metric scores and human judgments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Correlation between two paired score series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    /// Absent when either series is constant (undefined).
    pub pearson: Option<f64>,
    /// Spearman rank correlation with ties averaged; absent when a rank
    /// series is constant.
    pub spearman: Option<f64>,
    /// Number of overlapping ids.
    pub n: usize,
}

/// Correlates per-example metric scores with human ratings over the ids both
/// maps share. Requires at least 3 overlapping ids.
pub fn correlate_with_human(
    metric_scores: &BTreeMap<String, f64>,
    human_scores: &BTreeMap<String, f64>,
) -> Result<Correlation, MetricError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (id, x) in metric_scores {
        if let Some(y) = human_scores.get(id) {
            xs.push(*x);
            ys.push(*y);
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(MetricError::Input(format!(
            "need at least 3 overlapping ids to correlate, got {n}"
        )));
    }
    let spearman = pearson(&average_ranks(&xs), &average_ranks(&ys));
    Ok(Correlation {
        pearson: pearson(&xs, &ys),
        spearman,
        n,
    })
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    // single product under the root keeps exact affine relations at +/-1
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties receiving the mean of the positions they span.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).expect("finite scores"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the averaged 1-based rank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    ranks
}
