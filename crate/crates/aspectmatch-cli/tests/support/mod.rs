//! Independent reference implementations used only by the acceptance suite.
//!
//! Everything here is written directly from the metric definitions with its
//! own data structures and brute-force enumeration. It never calls into the
//! aspectmatch scoring path it checks.

use std::collections::BTreeMap;

pub const W_CA: f64 = 0.2;
pub const W_DE: f64 = 0.4;
pub const W_CO: f64 = 0.4;
pub const THRESHOLD: f64 = 0.55;

/// Lowercase and collapse whitespace (the default policy over NFC-stable
/// text).
fn ref_normalize(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn squeezed_chars(text: &str) -> Vec<char> {
    ref_normalize(text)
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect()
}

fn ngram_counts(chars: &[char], n: usize) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    if chars.len() >= n {
        for i in 0..=(chars.len() - n) {
            let gram: String = chars[i..i + n].iter().collect();
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Brute-force chrF: enumerate every order, count matches by direct lookup.
pub fn ref_chrf(candidate: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    let cand = squeezed_chars(candidate);
    let refr = squeezed_chars(reference);
    if cand.is_empty() && refr.is_empty() {
        return 1.0;
    }
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for k in 1..=max_n {
        let cg = ngram_counts(&cand, k);
        let rg = ngram_counts(&refr, k);
        let total_c: usize = cg.values().sum();
        let total_r: usize = rg.values().sum();
        if total_c == 0 && total_r == 0 {
            continue;
        }
        let matched: usize = cg
            .iter()
            .map(|(g, c)| (*c).min(rg.get(g).copied().unwrap_or(0)))
            .sum();
        precisions.push(if total_c > 0 {
            matched as f64 / total_c as f64
        } else {
            0.0
        });
        recalls.push(if total_r > 0 {
            matched as f64 / total_r as f64
        } else {
            0.0
        });
    }
    let p: f64 = precisions.iter().sum::<f64>() / precisions.len() as f64;
    let r: f64 = recalls.iter().sum::<f64>() / recalls.len() as f64;
    let denom = beta * beta * p + r;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + beta * beta) * p * r / denom
    }
}

/// Brute-force character-trigram cosine with the adaptive short-string order.
pub fn ref_trigram_cosine(a: &str, b: &str) -> f64 {
    let x = squeezed_chars(a);
    let y = squeezed_chars(b);
    if x.is_empty() && y.is_empty() {
        return 1.0;
    }
    if x.is_empty() || y.is_empty() {
        return 0.0;
    }
    if x == y {
        return 1.0;
    }
    let n = 3usize.min(x.len()).min(y.len());
    let gx = ngram_counts(&x, n);
    let gy = ngram_counts(&y, n);
    let dot: f64 = gx
        .iter()
        .map(|(g, c)| (*c * gy.get(g).copied().unwrap_or(0)) as f64)
        .sum();
    let nx: f64 = gx.values().map(|c| (c * c) as f64).sum::<f64>().sqrt();
    let ny: f64 = gy.values().map(|c| (c * c) as f64).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    (dot / (nx * ny)).clamp(0.0, 1.0)
}

/// Reference triplet: plain strings, correction optional.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RefTriplet {
    pub class: String,
    pub phrase: String,
    pub correction: Option<String>,
}

pub fn rt(class: &str, phrase: &str, correction: &str) -> RefTriplet {
    RefTriplet {
        class: class.to_string(),
        phrase: phrase.to_string(),
        correction: Some(correction.to_string()),
    }
}

fn canonical(mut set: Vec<RefTriplet>) -> Vec<RefTriplet> {
    set.sort_by(|a, b| {
        (a.class.to_lowercase(), &a.phrase, &a.correction)
            .cmp(&(b.class.to_lowercase(), &b.phrase, &b.correction))
    });
    set.dedup();
    set
}

fn ref_aspect_score(pred: &RefTriplet, gold: &RefTriplet, mdc: bool) -> f64 {
    let em = if pred.class.to_lowercase() == gold.class.to_lowercase() {
        1.0
    } else {
        0.0
    };
    let det = (ref_trigram_cosine(&pred.phrase, &gold.phrase)
        + ref_chrf(&pred.phrase, &gold.phrase, 6, 1.0))
        / 2.0;
    if mdc {
        let corr = ref_trigram_cosine(
            pred.correction.as_deref().unwrap_or(""),
            gold.correction.as_deref().unwrap_or(""),
        );
        W_CA * em + W_DE * det + W_CO * corr
    } else {
        W_CA * em + (W_DE + W_CO) * det
    }
}

/// One-to-one greedy matching and the per-example score, straight from the
/// definitions.
pub fn ref_itm_iou(preds: Vec<RefTriplet>, golds: Vec<RefTriplet>, mdc: bool) -> f64 {
    let preds = canonical(preds);
    let golds = canonical(golds);
    if preds.is_empty() && golds.is_empty() {
        return 1.0;
    }
    if preds.is_empty() || golds.is_empty() {
        return 0.0;
    }
    let mut pairs = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        for (j, g) in golds.iter().enumerate() {
            pairs.push((ref_aspect_score(p, g, mdc), i, j));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut used_p = vec![false; preds.len()];
    let mut used_g = vec![false; golds.len()];
    let mut scores = vec![0.0; preds.len()];
    let mut matched = 0usize;
    for (s, i, j) in pairs {
        if s < THRESHOLD {
            break;
        }
        if used_p[i] || used_g[j] {
            continue;
        }
        used_p[i] = true;
        used_g[j] = true;
        scores[i] = s;
        matched += 1;
    }
    let mean: f64 = scores.iter().sum::<f64>() / scores.len() as f64;
    let union = preds.len() + golds.len() - matched;
    mean * (matched as f64 / union as f64)
}
