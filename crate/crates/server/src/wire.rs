//! JSON bodies of the HTTP endpoints.

use relevance_core::{HyperparameterOverrides, Hyperparameters, ModelType};
use serde::{Deserialize, Deserializer, Serialize};

use crate::key::ModelKey;

/// Tweet ids arrive as strings or as bare JSON integers.
pub fn id_from_any<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Str(String),
        Num(serde_json::Number),
    }
    Ok(match Id::deserialize(d)? {
        Id::Str(s) => s,
        Id::Num(n) => n.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRequest {
    pub user_id: String,
    pub classifier_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_type: Option<ModelType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<HyperparameterOverrides>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitResponse {
    pub model_key: ModelKey,
    pub created: bool,
    pub hyperparameters: Hyperparameters,
    pub n_trained: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    #[serde(deserialize_with = "id_from_any")]
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GetLabelsRequest {
    pub model_key: ModelKey,
    #[serde(default)]
    pub tweets: Vec<Tweet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetLabel {
    pub id: String,
    /// `"Relevant"`, `"Not Relevant"` or `"Can't Decide"`.
    pub label: String,
    /// `[p_relevant, p_not_relevant, p_cant_decide]`, 6 decimals.
    pub probs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GetLabelsResponse {
    pub labels: Vec<TweetLabel>,
    pub n_trained: u64,
    pub estimated_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTweet {
    #[serde(deserialize_with = "id_from_any")]
    pub id: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLabelsRequest {
    pub model_key: ModelKey,
    pub examples: Vec<LabeledTweet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLabelsResponse {
    pub status: String,
    pub n_trained: u64,
    pub estimated_f1: f64,
    pub train_seconds: f64,
    /// Ids skipped because none of their tokens has an embedding.
    #[serde(default)]
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamItem {
    #[serde(deserialize_with = "id_from_any")]
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPost {
    pub items: Vec<StreamItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequencedItem {
    pub seq: u64,
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPage {
    pub items: Vec<SequencedItem>,
    /// Pass as `after` to fetch the next page.
    pub next: u64,
}

/// Rounds to `places` decimals.
pub fn round_to(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (x * scale).round() / scale
}
