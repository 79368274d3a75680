use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Three-class relevance target. The discriminant is the component index used
/// in every probability vector, on disk and on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelevanceLabel {
    #[serde(rename = "Relevant")]
    Relevant = 0,
    #[serde(rename = "Not Relevant")]
    NotRelevant = 1,
    #[serde(rename = "Can't Decide")]
    CantDecide = 2,
}

impl RelevanceLabel {
    pub const ALL: [RelevanceLabel; 3] = [
        RelevanceLabel::Relevant,
        RelevanceLabel::NotRelevant,
        RelevanceLabel::CantDecide,
    ];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelevanceLabel::Relevant => "Relevant",
            RelevanceLabel::NotRelevant => "Not Relevant",
            RelevanceLabel::CantDecide => "Can't Decide",
        }
    }
}

impl fmt::Display for RelevanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelevanceLabel {
    type Err = Error;

    /// Accepts the display names plus a few spellings seen in exported CSVs
    /// (`NotRelevant`, `Can't Decide` with a typographic apostrophe, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match norm.as_str() {
            "relevant" => Ok(RelevanceLabel::Relevant),
            "notrelevant" => Ok(RelevanceLabel::NotRelevant),
            "cantdecide" => Ok(RelevanceLabel::CantDecide),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Probability vector ordered (Relevant, Not Relevant, Can't Decide).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution(pub [f64; 3]);

impl LabelDistribution {
    pub fn uniform() -> Self {
        LabelDistribution([1.0 / 3.0; 3])
    }

    pub fn prob(&self, label: RelevanceLabel) -> f64 {
        self.0[label.index()]
    }

    /// Most probable label. Ties go to the lower index, i.e.
    /// Relevant before Not Relevant before Can't Decide.
    pub fn argmax(&self) -> RelevanceLabel {
        let mut best = 0;
        for i in 1..3 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        RelevanceLabel::ALL[best]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}
