//! An interactive session driven through the HTTP API in-process: create,
//! long-poll events, answer each question, then fetch the hierarchy.
//! `kdrift serve` exposes the same router on a socket.

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use kdrift::service::SessionService;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Value) -> Value {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(if body.is_null() {
            Body::empty()
        } else {
            Body::from(body.to_string())
        })
        .expect("valid request");
    let resp = app.clone().oneshot(req).await.expect("router is infallible");
    let status = resp.status();
    let bytes = resp.into_body().collect().await.expect("body").to_bytes();
    let v: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    println!("{method} {uri} -> {status}");
    v
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app = SessionService::new(None)?.router();
    let created = call(
        &app,
        "POST",
        "/sessions",
        json!({"config": {"iterations": 250, "seeds": [0],
                          "schedule": [{"t": 100, "kind": "concept_drift"}]}}),
    )
    .await;
    let id = created["id"].as_str().ok_or("no id")?.to_string();

    let mut since = 0;
    loop {
        let page = call(
            &app,
            "GET",
            &format!("/sessions/{id}/events?since={since}&wait_ms=5000"),
            Value::Null,
        )
        .await;
        since = page["cursor"].as_u64().unwrap_or(0) as usize;
        for e in page["events"].as_array().into_iter().flatten() {
            if e["type"] == "question" {
                println!("  question: flagged {}", e["description"]["flagged"]);
                let report = call(&app, "POST", &format!("/sessions/{id}/answer"), json!({})).await;
                println!("  applied {}", report["applied"]);
            }
        }
        if page["state"] == "finished" || page["state"] == "failed" {
            break;
        }
    }
    let summary = call(&app, "GET", &format!("/sessions/{id}"), Value::Null).await;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
