//! Ranking of retrieved image candidates.

use serde::{Deserialize, Serialize};

/// One retrieved image with its precomputed scores and dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageCandidate {
    pub image: String,
    pub clip_score: f64,
    pub aesthetic_score: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    pub clip: f64,
    pub aesthetic: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self {
            clip: 0.7,
            aesthetic: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeConstraints {
    pub min_width: u32,
    pub min_height: u32,
}

/// A candidate that survived the size filter, with its combined score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    #[serde(flatten)]
    pub candidate: ImageCandidate,
    pub combined_score: f64,
}

/// Drops candidates below the size floor, then orders the survivors by the
/// weighted sum of their min-max normalized CLIP and aesthetic scores
/// (normalized within the surviving set; a constant column normalizes to 0).
/// Ties break by image reference, ascending.
pub fn rank_candidates(
    candidates: &[ImageCandidate],
    weights: &RankWeights,
    constraints: &SizeConstraints,
) -> Vec<RankedCandidate> {
    let kept: Vec<&ImageCandidate> = candidates
        .iter()
        .filter(|c| c.width >= constraints.min_width && c.height >= constraints.min_height)
        .collect();
    if kept.is_empty() {
        return Vec::new();
    }
    let bounds = |f: fn(&ImageCandidate) -> f64| {
        let lo = kept.iter().map(|c| f(c)).fold(f64::INFINITY, f64::min);
        let hi = kept.iter().map(|c| f(c)).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (clip_lo, clip_hi) = bounds(|c| c.clip_score);
    let (aes_lo, aes_hi) = bounds(|c| c.aesthetic_score);
    let norm = |v: f64, lo: f64, hi: f64| if hi == lo { 0.0 } else { (v - lo) / (hi - lo) };

    let mut ranked: Vec<RankedCandidate> = kept
        .into_iter()
        .map(|c| RankedCandidate {
            candidate: c.clone(),
            combined_score: weights.clip * norm(c.clip_score, clip_lo, clip_hi)
                + weights.aesthetic * norm(c.aesthetic_score, aes_lo, aes_hi),
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.combined_score
            .partial_cmp(&a.combined_score)
            .expect("finite scores")
            .then_with(|| a.candidate.image.cmp(&b.candidate.image))
    });
    ranked
}
