#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use relevance_core::EmbeddingTable;
use relevance_server::{router, ApiConfig, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const WORDS: &[&str] = &[
    "fire", "wildfire", "smoke", "evacuate", "flood", "help", "road", "closed", "burning", "homes", "crews",
    "the", "a", "is", "in", "near", "lol", "music", "game", "love", "coffee", "today",
];

/// Deterministic 4-dim embedding over [`WORDS`].
pub fn table() -> Arc<EmbeddingTable> {
    let entries = WORDS.iter().enumerate().map(|(i, w)| {
        let v = (0..4).map(|d| (((i * 7 + d * 3) % 11) as f32 - 5.0) / 5.0).collect();
        (*w, v)
    });
    Arc::new(EmbeddingTable::from_entries(4, entries).unwrap())
}

pub fn state(dir: &Path) -> AppState {
    AppState::new(dir, table(), ApiConfig::default(), 1000)
}

pub fn app(dir: &Path) -> Router {
    router(state(dir))
}

pub async fn call(app: &Router, method: &str, path: &str, body: Option<&Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(path).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| json!({ "raw": String::from_utf8_lossy(&bytes) }));
    (status, value)
}

pub async fn post(app: &Router, path: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", path, Some(&body)).await
}

pub fn key(user: &str, classifier: &str) -> Value {
    json!({ "user_id": user, "classifier_id": classifier })
}

const RELEVANT: &[&str] = &["fire", "wildfire", "smoke", "evacuate", "flood", "help", "burning", "homes", "crews"];
const OTHER: &[&str] = &["lol", "music", "game", "love", "coffee", "today"];

/// Ten labeled examples with ids `start..start+10`.
pub fn batch(start: usize) -> Vec<Value> {
    (start..start + 10)
        .map(|i| {
            let relevant = i % 2 == 0;
            let pool = if relevant { RELEVANT } else { OTHER };
            let text = format!("{} {} the {}", pool[i % pool.len()], pool[(i / 2) % pool.len()], pool[(i / 3) % pool.len()]);
            json!({
                "id": i.to_string(),
                "text": text,
                "label": if relevant { "Relevant" } else { "Not Relevant" },
            })
        })
        .collect()
}

pub fn probe_tweets() -> Vec<Value> {
    vec![
        json!({"id": "p1", "text": "Wildfire smoke near the road! #evacuate"}),
        json!({"id": "p2", "text": "love this music lol"}),
        json!({"id": "p3", "text": "crews burning homes today"}),
        json!({"id": "p4", "text": "zzz qqq"}),
    ]
}
