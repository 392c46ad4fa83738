//! Character n-gram statistics and the chrF score.

use std::collections::HashMap;

use crate::text::{normalize, NormalizationPolicy};

/// Multiset of character n-grams of a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramProfile {
    order: usize,
    counts: HashMap<String, usize>,
}

impl NgramProfile {
    fn from_chars(chars: &[char], order: usize) -> Self {
        let mut counts = HashMap::new();
        if chars.len() >= order {
            for window in chars.windows(order) {
                *counts.entry(window.iter().collect::<String>()).or_insert(0) += 1;
            }
        }
        Self { order, counts }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn count(&self, gram: &str) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Total n-gram occurrences: max(0, chars - order + 1).
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(g, c)| (g.as_str(), *c))
    }

    /// Occurrences shared with `other`: sum over grams of min(count, count).
    pub fn matched(&self, other: &Self) -> usize {
        self.counts
            .iter()
            .map(|(g, c)| (*c).min(other.count(g)))
            .sum()
    }
}

/// N-gram profile of the normalized text with all whitespace removed.
pub fn char_ngram_profile(text: &str, n: usize, policy: &NormalizationPolicy) -> NgramProfile {
    assert!(n >= 1, "n-gram order must be >= 1");
    let chars = prepared_chars(text, policy, true);
    NgramProfile::from_chars(&chars, n)
}

fn prepared_chars(text: &str, policy: &NormalizationPolicy, remove_whitespace: bool) -> Vec<char> {
    let normalized = normalize(text, policy);
    if remove_whitespace {
        normalized.chars().filter(|c| !c.is_whitespace()).collect()
    } else {
        normalized.chars().collect()
    }
}

/// chrF over orders 1..=max_n with whitespace removed before extraction.
pub fn chrf(
    candidate: &str,
    reference: &str,
    max_n: usize,
    beta: f64,
    policy: &NormalizationPolicy,
) -> f64 {
    chrf_with_options(candidate, reference, max_n, beta, policy, true)
}

/// chrF with the whitespace-removal step configurable.
///
/// Per order k: matched = sum over grams of min(candidate count, reference
/// count); precision_k = matched / candidate total, recall_k = matched /
/// reference total. An order with zero grams on both sides is skipped; zero
/// on one side only yields 0 for that side's ratio. chrP / chrR are the
/// arithmetic means over the non-skipped orders and the result is
/// (1+beta^2)*P*R / (beta^2*P + R), 0 when that denominator is 0.
/// Both texts empty after preparation -> 1.0; exactly one empty -> 0.0.
pub fn chrf_with_options(
    candidate: &str,
    reference: &str,
    max_n: usize,
    beta: f64,
    policy: &NormalizationPolicy,
    remove_whitespace: bool,
) -> f64 {
    assert!(max_n >= 1, "chrf order must be >= 1");
    assert!(beta > 0.0, "chrf beta must be > 0");
    let cand = prepared_chars(candidate, policy, remove_whitespace);
    let refr = prepared_chars(reference, policy, remove_whitespace);
    if cand.is_empty() && refr.is_empty() {
        return 1.0;
    }
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let mut precisions = Vec::with_capacity(max_n);
    let mut recalls = Vec::with_capacity(max_n);
    for k in 1..=max_n {
        let cp = NgramProfile::from_chars(&cand, k);
        let rp = NgramProfile::from_chars(&refr, k);
        let (ct, rt) = (cp.total(), rp.total());
        if ct == 0 && rt == 0 {
            continue;
        }
        let matched = cp.matched(&rp) as f64;
        precisions.push(if ct > 0 { matched / ct as f64 } else { 0.0 });
        recalls.push(if rt > 0 { matched / rt as f64 } else { 0.0 });
    }
    let p = precisions.iter().sum::<f64>() / precisions.len() as f64;
    let r = recalls.iter().sum::<f64>() / recalls.len() as f64;
    let denom = beta * beta * p + r;
    if denom == 0.0 {
        return 0.0;
    }
    (1.0 + beta * beta) * p * r / denom
}
