//! Text normalization shared by every string comparison in the toolkit.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// How texts are canonicalized before comparison. The same policy is always
/// applied to both sides of a comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationPolicy {
    pub lowercase: bool,
    pub collapse_whitespace: bool,
    pub strip_punctuation: bool,
    pub unicode_nfc: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self {
            lowercase: true,
            collapse_whitespace: true,
            strip_punctuation: false,
            unicode_nfc: true,
        }
    }
}

/// Canonicalize `text` under `policy`. Idempotent: applying it twice yields
/// the same string.
///
/// Order matters for idempotence: NFC runs before the punctuation strip
/// (singleton decompositions can surface ASCII punctuation, e.g. the Greek
/// question mark becomes `;`) and again after it (removing a character can
/// leave combining marks that need canonical reordering).
pub fn normalize(text: &str, policy: &NormalizationPolicy) -> String {
    let mut out = if policy.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    if policy.unicode_nfc {
        out = out.nfc().collect();
    }
    if policy.strip_punctuation {
        out.retain(|c| !c.is_ascii_punctuation());
        if policy.unicode_nfc {
            out = out.nfc().collect();
        }
    }
    if policy.collapse_whitespace {
        out = out.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    out
}

/// Binary indicator of normalized string equality.
pub fn exact_match(a: &str, b: &str, policy: &NormalizationPolicy) -> bool {
    normalize(a, policy) == normalize(b, policy)
}
