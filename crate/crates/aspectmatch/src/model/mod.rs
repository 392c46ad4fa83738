//! Domain types for aspect-based mismatch analysis.

mod parse;

pub use parse::{parse_prediction_text, serialize_triplet_set, ParseWarning, ParsedPrediction};

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::{normalize, NormalizationPolicy};

/// The four facets of image-caption agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AspectClass {
    Attribute,
    Entity,
    Number,
    Relation,
}

impl AspectClass {
    pub const ALL: [AspectClass; 4] = [
        AspectClass::Attribute,
        AspectClass::Entity,
        AspectClass::Number,
        AspectClass::Relation,
    ];

    /// Display name, also the serialized form.
    pub fn name(&self) -> &'static str {
        match self {
            AspectClass::Attribute => "Attribute",
            AspectClass::Entity => "Entity",
            AspectClass::Number => "Number",
            AspectClass::Relation => "Relation",
        }
    }

    /// Canonical lowercase name used for exact-match comparison and report keys.
    pub fn canonical(&self) -> &'static str {
        match self {
            AspectClass::Attribute => "attribute",
            AspectClass::Entity => "entity",
            AspectClass::Number => "number",
            AspectClass::Relation => "relation",
        }
    }
}

impl fmt::Display for AspectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown aspect class {0:?} (expected Entity, Relation, Attribute, or Number)")]
pub struct UnknownClass(pub String);

impl FromStr for AspectClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "entity" => Ok(AspectClass::Entity),
            "relation" => Ok(AspectClass::Relation),
            "attribute" => Ok(AspectClass::Attribute),
            "number" => Ok(AspectClass::Number),
            other => Err(UnknownClass(other.to_string())),
        }
    }
}

impl Serialize for AspectClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for AspectClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TripletError {
    #[error("aspect phrase is empty")]
    EmptyPhrase,
    #[error("correction is present but empty")]
    EmptyCorrection,
}

/// One unit of prediction or ground truth: an aspect class, the mismatched
/// caption phrase, and (for the detection-and-correction task) a correction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AspectTriplet {
    pub class: AspectClass,
    pub phrase: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<String>,
}

impl AspectTriplet {
    /// Builds a triplet, trimming both text fields. The phrase (and the
    /// correction, when present) must be non-empty after trimming.
    pub fn new(
        class: AspectClass,
        phrase: impl Into<String>,
        correction: Option<String>,
    ) -> Result<Self, TripletError> {
        let phrase = phrase.into().trim().to_string();
        if phrase.is_empty() {
            return Err(TripletError::EmptyPhrase);
        }
        let correction = match correction {
            Some(c) => {
                let c = c.trim().to_string();
                if c.is_empty() {
                    return Err(TripletError::EmptyCorrection);
                }
                Some(c)
            }
            None => None,
        };
        Ok(Self {
            class,
            phrase,
            correction,
        })
    }

    /// Detection-only triplet (no correction).
    pub fn detection(class: AspectClass, phrase: impl Into<String>) -> Result<Self, TripletError> {
        Self::new(class, phrase, None)
    }

    fn sort_key(&self) -> (&'static str, &str, Option<&str>) {
        (self.class.canonical(), &self.phrase, self.correction.as_deref())
    }
}

impl PartialOrd for AspectTriplet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AspectTriplet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl<'de> Deserialize<'de> for AspectTriplet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            class: AspectClass,
            phrase: String,
            #[serde(default)]
            correction: Option<String>,
        }
        let w = Wire::deserialize(deserializer)?;
        AspectTriplet::new(w.class, w.phrase, w.correction).map_err(D::Error::custom)
    }
}

/// A set of triplets in canonical order: lexicographic by (class, phrase,
/// correction), exact duplicates removed. The empty set is the canonical
/// representation of a "None" (no mismatch) output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct TripletSet(Vec<AspectTriplet>);

impl TripletSet {
    pub fn new(mut triplets: Vec<AspectTriplet>) -> Self {
        triplets.sort();
        triplets.dedup();
        Self(triplets)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AspectTriplet> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[AspectTriplet] {
        &self.0
    }
}

impl FromIterator<AspectTriplet> for TripletSet {
    fn from_iter<I: IntoIterator<Item = AspectTriplet>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TripletSet {
    type Item = &'a AspectTriplet;
    type IntoIter = std::slice::Iter<'a, AspectTriplet>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl<'de> Deserialize<'de> for TripletSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let triplets = Vec::<AspectTriplet>::deserialize(deserializer)?;
        Ok(Self::new(triplets))
    }
}

/// Which task surface a prediction belongs to: detection only, or detection
/// and correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Md,
    Mdc,
}

impl Task {
    pub fn expected_fields(&self) -> usize {
        match self {
            Task::Md => 2,
            Task::Mdc => 3,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Md => "md",
            Task::Mdc => "mdc",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "md" => Ok(Task::Md),
            "mdc" | "md&c" | "mdandc" => Ok(Task::Mdc),
            other => Err(format!("unknown task {other:?} (expected md or mdc)")),
        }
    }
}

/// Where an image-caption pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    GptSynth,
    Retrieval,
    Diffusion,
}

impl DataSource {
    pub fn name(&self) -> &'static str {
        match self {
            DataSource::GptSynth => "gpt_synth",
            DataSource::Retrieval => "retrieval",
            DataSource::Diffusion => "diffusion",
        }
    }
}

/// One image-caption pair with its gold mismatch set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    /// Opaque image reference (path or URI); never dereferenced here.
    pub image: String,
    pub caption: String,
    pub source: DataSource,
    pub domain: String,
    #[serde(rename = "mismatches")]
    pub gold: TripletSet,
}

/// A model output for one example: either free-form text still to be parsed,
/// or an already structured triplet set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(flatten)]
    pub input: PredictionInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PredictionInput {
    #[serde(rename = "raw")]
    Raw(String),
    #[serde(rename = "triplets")]
    Triplets(TripletSet),
}

/// An invariant violation found by [`validate_record`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// Gold sets carry at most three mismatches.
    TooManyMismatches { count: usize },
    /// Every gold phrase must occur contiguously in the caption
    /// (after normalization). Predictions are not held to this.
    PhraseNotInCaption { phrase: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooManyMismatches { count } => {
                write!(f, "gold set has {count} mismatches, at most 3 allowed")
            }
            Violation::PhraseNotInCaption { phrase } => {
                write!(f, "gold phrase {phrase:?} does not occur in the caption")
            }
        }
    }
}

/// Checks an example record against the gold-set invariants. Returns every
/// violation found; an empty list means the record is valid.
pub fn validate_record(record: &ExampleRecord, policy: &NormalizationPolicy) -> Vec<Violation> {
    let mut violations = Vec::new();
    if record.gold.len() > 3 {
        violations.push(Violation::TooManyMismatches {
            count: record.gold.len(),
        });
    }
    let caption = normalize(&record.caption, policy);
    for triplet in &record.gold {
        let phrase = normalize(&triplet.phrase, policy);
        if !caption.contains(&phrase) {
            violations.push(Violation::PhraseNotInCaption {
                phrase: triplet.phrase.clone(),
            });
        }
    }
    violations
}
