mod common;

use axum::http::StatusCode;
use common::*;
use relevance_core::{ClassifierModel, ModelType};
use serde_json::json;

#[tokio::test]
async fn init_creates_then_returns_existing() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, r) = post(&app, "/init/", key("alice", "fire")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["created"], true);
    assert_eq!(r["model_key"], key("alice", "fire"));
    assert_eq!(r["hyperparameters"]["model_type"], "CNN");
    assert_eq!(r["hyperparameters"]["learning_rate"], 0.0079);
    assert!(dir.path().join("alice/fire.rlv").exists());

    let (s, r) = post(&app, "/init/", key("alice", "fire")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["created"], false);
}

#[tokio::test]
async fn init_lstm_uses_recurrent_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, r) = post(&app, "/init/", json!({"user_id": "u", "classifier_id": "c", "model_type": "LSTM"})).await;
    assert_eq!(s, StatusCode::OK, "{r}");
    let hp = &r["hyperparameters"];
    assert_eq!(hp["model_type"], "LSTM");
    assert_eq!(hp["learning_rate"], 0.0002);
    assert_eq!(hp["dropout"], 0.4);
    assert_eq!(hp["recurrent_dropout"], 0.2);
    assert_eq!(hp["hidden_size"], 300);
    let model = ClassifierModel::restore(dir.path().join("u/c.rlv")).unwrap();
    assert_eq!(model.hyperparameters().model_type, ModelType::Lstm);
}

#[tokio::test]
async fn init_conflicts_and_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post(&app, "/init/", key("u", "c")).await;
    let (s, _) = post(&app, "/init/", json!({"user_id": "u", "classifier_id": "c", "model_type": "RNN"})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = post(
        &app,
        "/init/",
        json!({"user_id": "u", "classifier_id": "c", "hyperparameters": {"learning_rate": 0.0079}}),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "matching settings are not a conflict");
    let (s, _) = post(&app, "/init/", json!({"user_id": "", "classifier_id": "c"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/init/", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post(&app, "/init/", json!({"user_id": "u", "classifier_id": "d", "hyperparameters": {"dropout": 1.5}})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post(&app, "/init/", json!({"user_id": "u", "classifier_id": "d", "hyperparameters": {"embedding_dim": 300}})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn get_labels_preserves_order_and_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post(&app, "/init/", key("u", "c")).await;
    let tweets = probe_tweets()[..3].to_vec();
    let (s, r) = post(&app, "/getLabels/", json!({"model_key": key("u", "c"), "tweets": tweets})).await;
    assert_eq!(s, StatusCode::OK);
    let labels = r["labels"].as_array().unwrap();
    assert_eq!(labels.len(), 3);
    for (l, id) in labels.iter().zip(["p1", "p2", "p3"]) {
        assert_eq!(l["id"], id);
        let probs: Vec<f64> = l["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-6 + 1e-12);
        for p in &probs {
            assert_eq!((p * 1e6).round() / 1e6, *p);
        }
        assert!(["Relevant", "Not Relevant", "Can't Decide"].contains(&l["label"].as_str().unwrap()));
    }
    assert_eq!(r["n_trained"], 0);
    assert_eq!(r["estimated_f1"], 0.0);
}

#[tokio::test]
async fn get_labels_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post(&app, "/init/", key("u", "c")).await;
    let (s, r) = post(&app, "/getLabels/", json!({"model_key": key("u", "c"), "tweets": []})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["labels"], json!([]));
    assert_eq!(r["n_trained"], 0);

    let (s, _) = post(&app, "/getLabels/", json!({"model_key": key("u", "nope"), "tweets": []})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let many: Vec<_> = (0..1001).map(|i| json!({"id": i, "text": "fire"})).collect();
    let (s, _) = post(&app, "/getLabels/", json!({"model_key": key("u", "c"), "tweets": many})).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);

    // No embeddable token: uniform distribution and Can't Decide.
    let (_, r) = post(&app, "/getLabels/", json!({"model_key": key("u", "c"), "tweets": [probe_tweets()[3]]})).await;
    assert_eq!(r["labels"][0]["probs"], json!([0.333333, 0.333333, 0.333333]));
    assert_eq!(r["labels"][0]["label"], "Can't Decide");
}

#[tokio::test]
async fn update_labels_trains_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post(&app, "/init/", key("u", "c")).await;
    let (s, r) = post(&app, "/updateLabels/", json!({"model_key": key("u", "c"), "examples": batch(0)})).await;
    assert_eq!(s, StatusCode::OK, "{r}");
    assert_eq!(r["n_trained"], 10);
    assert_eq!(r["status"], "trained");
    assert!(r["train_seconds"].as_f64().unwrap() >= 0.0);
    let (_, r2) = post(&app, "/updateLabels/", json!({"model_key": key("u", "c"), "examples": batch(10)})).await;
    assert_eq!(r2["n_trained"], 20);
    let on_disk = ClassifierModel::restore(dir.path().join("u/c.rlv")).unwrap();
    assert_eq!(on_disk.n_trained(), 20);
}

#[tokio::test]
async fn estimate_at_one_hundred() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post(&app, "/init/", key("u", "c")).await;
    for k in 0..10 {
        post(&app, "/updateLabels/", json!({"model_key": key("u", "c"), "examples": batch(k * 10)})).await;
    }
    let (_, r) = post(&app, "/getLabels/", json!({"model_key": key("u", "c"), "tweets": []})).await;
    assert_eq!(r["n_trained"], 100);
    assert_eq!(r["estimated_f1"], 0.6345);
}

#[tokio::test]
async fn update_labels_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post(&app, "/init/", key("u", "c")).await;
    let mut bad = batch(0);
    bad[4]["label"] = json!("Kind Of");
    let (s, r) = post(&app, "/updateLabels/", json!({"model_key": key("u", "c"), "examples": bad})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(r["error"].as_str().unwrap().contains("\"4\""), "{r}");

    let degenerate = json!([{"id": "x", "text": "zzz", "label": "Relevant"}, {"id": "y", "text": "", "label": "Relevant"}]);
    let (s, r) = post(&app, "/updateLabels/", json!({"model_key": key("u", "c"), "examples": degenerate})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(r["error"].as_str().unwrap().contains("x, y"));

    let (s, _) = post(&app, "/updateLabels/", json!({"model_key": key("u", "c"), "examples": []})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post(&app, "/updateLabels/", json!({"model_key": key("v", "c"), "examples": batch(0)})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    // Partially degenerate batches train on the rest.
    let mut mixed = batch(0);
    mixed.push(json!({"id": "z", "text": "qqq", "label": "Relevant"}));
    let (s, r) = post(&app, "/updateLabels/", json!({"model_key": key("u", "c"), "examples": mixed})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["n_trained"], 10);
    assert_eq!(r["rejected"], json!(["z"]));
}

#[tokio::test]
async fn models_do_not_share_weights() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post(&app, "/init/", key("u", "a")).await;
    post(&app, "/init/", key("u", "b")).await;
    let get = |c: &'static str| {
        let app = app.clone();
        async move { post(&app, "/getLabels/", json!({"model_key": key("u", c), "tweets": probe_tweets()})).await.1 }
    };
    let before = get("b").await;
    for k in 0..3 {
        post(&app, "/updateLabels/", json!({"model_key": key("u", "a"), "examples": batch(k * 10)})).await;
    }
    assert_eq!(get("b").await, before);
    assert_ne!(get("a").await["labels"], before["labels"]);
}

#[tokio::test]
async fn healthz_and_stream_feed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, r) = call(&app, "GET", "/healthz", None).await;
    assert_eq!((s, r), (StatusCode::OK, json!({"status": "ok"})));

    let items: Vec<_> = (0..5).map(|i| json!({"id": i, "text": format!("t{i}")})).collect();
    let (s, r) = post(&app, "/stream/", json!({ "items": items })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["last_seq"], 5);
    let (_, page) = call(&app, "GET", "/stream/?after=2&limit=2", None).await;
    assert_eq!(page["items"].as_array().unwrap().len(), 2);
    assert_eq!(page["items"][0]["id"], "2");
    assert_eq!(page["next"], 4);
    let (_, page) = call(&app, "GET", "/stream/?after=5&wait_ms=20", None).await;
    assert_eq!(page["items"], json!([]));
    assert_eq!(page["next"], 5);
}

#[tokio::test]
async fn ids_with_unsafe_characters_are_stored_safely() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, _) = post(&app, "/init/", key("../evil", "a/b_c")).await;
    assert_eq!(s, StatusCode::OK);
    assert!(dir.path().join("_2e_2e_2fevil/a_2fb_5fc.rlv").exists());
    let (s, _) = post(&app, "/init/", key("..", "x")).await;
    assert_eq!(s, StatusCode::OK);
    assert!(dir.path().join("_2e_2e/x.rlv").exists());
}
