use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use relevance_core::{
    predict_batch, submit_labels, EmbeddingTable, ExampleSource, Hyperparameters, LabeledExample, ModelType,
    PerformanceEstimator, RelevanceLabel,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::feed::Feed;
use crate::key::ModelKey;
use crate::registry::Registry;
use crate::wire::*;

/// Limits and defaults shared by the handlers.
#[derive(Debug, Clone)]
pub struct ApiConfig {
    /// Largest accepted `/getLabels/` batch.
    pub max_batch: usize,
    pub estimator: PerformanceEstimator,
    /// Hyperparameters of models created without explicit settings.
    pub default_hyperparameters: Hyperparameters,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            max_batch: 1000,
            estimator: PerformanceEstimator::default(),
            default_hyperparameters: Hyperparameters::cnn(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub table: Arc<EmbeddingTable>,
    pub feed: Arc<Feed>,
    pub config: Arc<ApiConfig>,
}

impl AppState {
    fn estimated_f1(&self, n_trained: u64) -> f64 {
        round_to(self.config.estimator.estimate(n_trained), 4)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/init/", post(init))
        .route("/getLabels/", post(get_labels))
        .route("/updateLabels/", post(update_labels))
        .route("/stream/", post(stream_post).get(stream_get))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Parses a JSON body, answering 400 rather than axum's default 422.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn check_key(key: &ModelKey) -> Result<(), ApiError> {
    if key.is_valid() {
        Ok(())
    } else {
        Err(ApiError::bad_request("user_id and classifier_id must be non-empty"))
    }
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn init(State(st): State<AppState>, body: Bytes) -> Result<Json<InitResponse>, ApiError> {
    let req: InitRequest = parse(&body)?;
    let key = ModelKey::new(req.user_id, req.classifier_id);
    check_key(&key)?;
    let dim = st.table.dim();
    let requested = match (req.model_type, &req.hyperparameters) {
        (None, None) => None,
        (model_type, overrides) => {
            let overrides = overrides.clone().unwrap_or_default();
            let model_type = model_type.or(overrides.model_type).unwrap_or(ModelType::Cnn);
            if overrides.model_type.is_some_and(|t| t != model_type) {
                return Err(ApiError::bad_request("model_type disagrees with hyperparameters.model_type"));
            }
            if overrides.embedding_dim.is_some_and(|d| d != dim) {
                return Err(ApiError::bad_request(format!("embedding_dim must be {dim}")));
            }
            let hp = Hyperparameters {
                embedding_dim: dim,
                ..overrides.resolve(model_type)
            };
            hp.validate()?;
            Some(hp)
        }
    };
    let default = Hyperparameters {
        embedding_dim: dim,
        ..st.config.default_hyperparameters.clone()
    };
    let (created, hyperparameters, n_trained) = st.registry.init(&key, requested, default).await?;
    Ok(Json(InitResponse {
        model_key: key,
        created,
        hyperparameters,
        n_trained,
    }))
}

async fn get_labels(State(st): State<AppState>, body: Bytes) -> Result<Json<GetLabelsResponse>, ApiError> {
    let req: GetLabelsRequest = parse(&body)?;
    check_key(&req.model_key)?;
    if req.tweets.len() > st.config.max_batch {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("{} tweets exceed the limit of {}", req.tweets.len(), st.config.max_batch),
        ));
    }
    let guard = st.registry.read(&req.model_key).await?;
    let table = st.table.clone();
    let (predictions, n_trained) = tokio::task::spawn_blocking(move || {
        let model = guard.as_ref().expect("registry returns loaded models");
        let texts: Vec<&str> = req.tweets.iter().map(|t| t.text.as_str()).collect();
        let labels: Vec<TweetLabel> = predict_batch(model, &table, &texts)
            .into_iter()
            .zip(req.tweets)
            .map(|(p, t)| TweetLabel {
                id: t.id,
                label: p.label.as_str().to_string(),
                probs: p.distribution.0.map(|v| round_to(v, 6)),
            })
            .collect();
        (labels, model.n_trained())
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(GetLabelsResponse {
        labels: predictions,
        n_trained,
        estimated_f1: st.estimated_f1(n_trained),
    }))
}

async fn update_labels(State(st): State<AppState>, body: Bytes) -> Result<Json<UpdateLabelsResponse>, ApiError> {
    let req: UpdateLabelsRequest = parse(&body)?;
    check_key(&req.model_key)?;
    if req.examples.is_empty() {
        return Err(ApiError::bad_request("examples must be non-empty"));
    }
    let mut labeled = Vec::with_capacity(req.examples.len());
    for ex in &req.examples {
        let label: RelevanceLabel = ex
            .label
            .parse()
            .map_err(|_| ApiError::bad_request(format!("example {:?} has invalid label {:?}", ex.id, ex.label)))?;
        labeled.push((ex.id.clone(), ex.text.clone(), label));
    }

    let mut guard = st.registry.write(&req.model_key).await?;
    let path = st.registry.checkpoint_path(&req.model_key);
    let table = st.table.clone();
    let started = Instant::now();
    let report = tokio::task::spawn_blocking(move || -> relevance_core::Result<_> {
        let model = guard.as_mut().expect("registry returns loaded models");
        let max_len = model.hyperparameters().max_len;
        let batch: Vec<LabeledExample> = labeled
            .into_iter()
            .map(|(id, text, label)| LabeledExample::from_text(id, &text, label, ExampleSource::User, &table, max_len))
            .collect();
        let report = submit_labels(model, batch)?;
        model.save(&path)?;
        Ok(report)
        // The write guard drops here, after the checkpoint is on disk.
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    let report = report.map_err(|e| match e {
        relevance_core::Error::DegenerateBatch { ids } => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("no example has an embeddable token: {}", ids.join(", ")),
        ),
        other => other.into(),
    })?;
    Ok(Json(UpdateLabelsResponse {
        status: "trained".into(),
        n_trained: report.n_trained,
        estimated_f1: st.estimated_f1(report.n_trained),
        train_seconds: started.elapsed().as_secs_f64(),
        rejected: report.rejected,
    }))
}

async fn stream_post(State(st): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: StreamPost = parse(&body)?;
    let accepted = req.items.len();
    let last_seq = st.feed.push(req.items);
    Ok(Json(json!({ "accepted": accepted, "last_seq": last_seq })))
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    #[serde(default)]
    after: u64,
    #[serde(default = "default_limit")]
    limit: usize,
    /// Long-poll for up to this many milliseconds (capped at 30 s).
    #[serde(default)]
    wait_ms: u64,
}

fn default_limit() -> usize {
    500
}

async fn stream_get(State(st): State<AppState>, Query(q): Query<StreamQuery>) -> Json<StreamPage> {
    let wait = Duration::from_millis(q.wait_ms.min(30_000));
    Json(st.feed.wait_page(q.after, q.limit.max(1), wait).await)
}
