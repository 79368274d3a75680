//! Request/response transcripts under `tests/golden/`. Each file is a list
//! of exchanges replayed in order against a fresh server; set
//! `UPDATE_GOLDEN=1` to rewrite the expected responses.

mod common;

use std::path::PathBuf;

use common::*;
use serde_json::{json, Value};

/// Wall-clock fields vary between runs.
fn mask(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        if obj.contains_key("train_seconds") {
            obj.insert("train_seconds".into(), json!("<seconds>"));
        }
    }
    v
}

async fn check(name: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let exchanges: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut out = Vec::new();
    for (i, ex) in exchanges.into_iter().enumerate() {
        let method = ex["method"].as_str().unwrap();
        let uri = ex["path"].as_str().unwrap();
        let (status, body) = call(&app, method, uri, ex.get("body")).await;
        let body = mask(body);
        if update {
            let mut ex = ex.clone();
            ex["status"] = json!(status.as_u16());
            ex["response"] = body;
            out.push(ex);
        } else {
            assert_eq!(ex["status"], json!(status.as_u16()), "{name} exchange {i} ({method} {uri}): {body}");
            assert_eq!(ex["response"], body, "{name} exchange {i} ({method} {uri})");
        }
    }
    if update {
        std::fs::write(&path, serde_json::to_string_pretty(&out).unwrap() + "\n").unwrap();
    }
}

#[tokio::test]
async fn init_transcript() {
    check("init.json").await;
}

#[tokio::test]
async fn get_labels_transcript() {
    check("getLabels.json").await;
}

#[tokio::test]
async fn update_labels_transcript() {
    check("updateLabels.json").await;
}
