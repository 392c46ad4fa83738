//! Score gaps and the debias filter over candidate caption pairs.

use serde::{Deserialize, Serialize};

use super::clients::{validated_score, ScorerClient, ScorerKind};
use super::PipelineError;

/// Positive (original caption) and negative (mutated caption) scores from one
/// scorer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub positive: f64,
    pub negative: f64,
}

impl ScorePair {
    /// Quality drop of the mutated caption: positive minus negative, exactly.
    pub fn gap(&self) -> f64 {
        self.positive - self.negative
    }
}

/// Gap measurements for every enabled scorer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GapScores {
    pub vera: Option<ScorePair>,
    pub grammar: Option<ScorePair>,
    pub clip: Option<ScorePair>,
}

/// The scorer clients available to the filter; absent kinds are skipped.
#[derive(Default)]
pub struct ScorerSet {
    pub vera: Option<Box<dyn ScorerClient>>,
    pub grammar: Option<Box<dyn ScorerClient>>,
    pub clip: Option<Box<dyn ScorerClient>>,
}

impl ScorerSet {
    pub fn versions(&self) -> Vec<(ScorerKind, String)> {
        [
            (ScorerKind::Vera, &self.vera),
            (ScorerKind::Grammar, &self.grammar),
            (ScorerKind::Clip, &self.clip),
        ]
        .into_iter()
        .filter_map(|(kind, client)| client.as_ref().map(|c| (kind, c.version())))
        .collect()
    }
}

/// Scores the original and mutated captions with every available scorer.
/// CLIP sees the image reference; the text-only scorers never do.
pub fn score_gap(
    original_caption: &str,
    mutated_caption: &str,
    image: &str,
    scorers: &ScorerSet,
) -> Result<GapScores, PipelineError> {
    let pair = |client: &dyn ScorerClient, image: Option<&str>| -> Result<ScorePair, PipelineError> {
        Ok(ScorePair {
            positive: validated_score(client, original_caption, image)?,
            negative: validated_score(client, mutated_caption, image)?,
        })
    };
    Ok(GapScores {
        vera: self_if(&scorers.vera, |c| pair(c, None))?,
        grammar: self_if(&scorers.grammar, |c| pair(c, None))?,
        clip: self_if(&scorers.clip, |c| pair(c, Some(image)))?,
    })
}

fn self_if<F>(
    client: &Option<Box<dyn ScorerClient>>,
    f: F,
) -> Result<Option<ScorePair>, PipelineError>
where
    F: FnOnce(&dyn ScorerClient) -> Result<ScorePair, PipelineError>,
{
    client.as_ref().map(|c| f(c.as_ref())).transpose()
}

/// One caption pair awaiting the debias decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCandidate {
    pub id: String,
    pub original_caption: String,
    pub mutated_caption: String,
    pub image: String,
}

/// Filter thresholds. A scorer participates only when enabled; gap rules are
/// optional on top of the score rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub vera_enabled: bool,
    pub min_vera: f64,
    pub max_vera_gap: Option<f64>,
    pub grammar_enabled: bool,
    pub min_grammar: f64,
    pub max_grammar_gap: Option<f64>,
    pub clip_enabled: bool,
    pub clip_min: f64,
    pub clip_max: f64,
    pub max_clip_gap: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            vera_enabled: false,
            min_vera: 0.0,
            max_vera_gap: None,
            grammar_enabled: false,
            min_grammar: 0.0,
            max_grammar_gap: None,
            clip_enabled: false,
            clip_min: 0.0,
            clip_max: 1.0,
            max_clip_gap: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let all = [
            self.min_vera,
            self.min_grammar,
            self.clip_min,
            self.clip_max,
        ];
        if all.iter().any(|v| !v.is_finite())
            || [self.max_vera_gap, self.max_grammar_gap, self.max_clip_gap]
                .iter()
                .flatten()
                .any(|v| !v.is_finite())
        {
            return Err(PipelineError::Input("filter thresholds must be finite".into()));
        }
        if self.clip_enabled && self.clip_min > self.clip_max {
            return Err(PipelineError::Input(format!(
                "empty clip band: min {} > max {}",
                self.clip_min, self.clip_max
            )));
        }
        Ok(())
    }
}

/// Why a candidate was rejected; carries the first failing rule only, checked
/// in a fixed order (vera score, vera gap, grammar score, grammar gap, clip
/// band, clip gap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule")]
pub enum RejectReason {
    VeraScore { score: f64, min: f64 },
    VeraGap { gap: f64, max: f64 },
    GrammarScore { score: f64, min: f64 },
    GrammarGap { gap: f64, max: f64 },
    ClipScore { score: f64, min: f64, max: f64 },
    ClipGap { gap: f64, max: f64 },
}

/// Partition of the input candidates. Kept and rejected are disjoint and
/// together cover the input in its original order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<FilterCandidate>,
    pub rejected: Vec<(FilterCandidate, RejectReason)>,
}

/// Applies the debias rules: a candidate is kept iff every enabled scorer's
/// mutated-caption score (and gap, when bounded) satisfies the config.
/// Scorer failures abort the whole batch.
pub fn debias_filter(
    candidates: &[FilterCandidate],
    cfg: &FilterConfig,
    scorers: &ScorerSet,
) -> Result<FilterOutcome, PipelineError> {
    cfg.validate()?;
    for (enabled, client, kind) in [
        (cfg.vera_enabled, scorers.vera.is_some(), "vera"),
        (cfg.grammar_enabled, scorers.grammar.is_some(), "grammar"),
        (cfg.clip_enabled, scorers.clip.is_some(), "clip"),
    ] {
        if enabled && !client {
            return Err(PipelineError::Input(format!(
                "{kind} filtering is enabled but no {kind} scorer is available"
            )));
        }
    }
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for candidate in candidates {
        let gaps = score_gap(
            &candidate.original_caption,
            &candidate.mutated_caption,
            &candidate.image,
            scorers,
        )?;
        match first_failure(cfg, &gaps) {
            None => kept.push(candidate.clone()),
            Some(reason) => rejected.push((candidate.clone(), reason)),
        }
    }
    Ok(FilterOutcome { kept, rejected })
}

fn first_failure(cfg: &FilterConfig, gaps: &GapScores) -> Option<RejectReason> {
    if cfg.vera_enabled {
        let pair = gaps.vera.expect("vera scorer enabled");
        if pair.negative < cfg.min_vera {
            return Some(RejectReason::VeraScore {
                score: pair.negative,
                min: cfg.min_vera,
            });
        }
        if let Some(max) = cfg.max_vera_gap {
            if pair.gap() > max {
                return Some(RejectReason::VeraGap { gap: pair.gap(), max });
            }
        }
    }
    if cfg.grammar_enabled {
        let pair = gaps.grammar.expect("grammar scorer enabled");
        if pair.negative < cfg.min_grammar {
            return Some(RejectReason::GrammarScore {
                score: pair.negative,
                min: cfg.min_grammar,
            });
        }
        if let Some(max) = cfg.max_grammar_gap {
            if pair.gap() > max {
                return Some(RejectReason::GrammarGap { gap: pair.gap(), max });
            }
        }
    }
    if cfg.clip_enabled {
        let pair = gaps.clip.expect("clip scorer enabled");
        if pair.negative < cfg.clip_min || pair.negative > cfg.clip_max {
            return Some(RejectReason::ClipScore {
                score: pair.negative,
                min: cfg.clip_min,
                max: cfg.clip_max,
            });
        }
        if let Some(max) = cfg.max_clip_gap {
            if pair.gap() > max {
                return Some(RejectReason::ClipGap { gap: pair.gap(), max });
            }
        }
    }
    None
}
