mod common;

use common::{contact_scene, touching_scene};
use reqwest::StatusCode;
use sem4d_gateway::server::{spawn, SceneStore};
use sem4d_gateway::ToolResult;
use serde_json::{json, Value};

async fn post(client: &reqwest::Client, url: &str, body: Value) -> (StatusCode, Value) {
    let resp = client.post(url).json(&body).send().await.unwrap();
    (resp.status(), resp.json().await.unwrap())
}

#[tokio::test(flavor = "multi_thread")]
async fn tool_endpoints() {
    let mut store = SceneStore::new();
    store.insert(touching_scene(), 0.25);
    let server = spawn(store, "127.0.0.1:0").await.unwrap();
    let base = server.url();
    let http = reqwest::Client::new();

    let tools: Value = http.get(format!("{base}/tools")).send().await.unwrap().json().await.unwrap();
    let names: Vec<&str> = tools["tools"].as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        [
            "summary",
            "min_distance",
            "overlap_score",
            "overlap_position",
            "relative_motion",
            "trajectory",
            "dominant_direction",
            "fetch_frame"
        ]
    );

    let scenes: Value = http.get(format!("{base}/scenes")).send().await.unwrap().json().await.unwrap();
    assert_eq!(scenes["scenes"][0]["id"], "touching");
    assert_eq!(scenes["scenes"][0]["num_instances"], 2);

    let summary: Value = http.get(format!("{base}/scenes/touching/summary")).send().await.unwrap().json().await.unwrap();
    assert_eq!(summary["instances"][0]["class"], "tool");
    assert_eq!(summary["instances"][1]["centroid"], json!([0.15, 0.05, 1.0]));

    let call = format!("{base}/scenes/touching/call");
    let (status, body) = post(&http, &call, json!({"tool": "min_distance", "arguments": {"a": 0, "b": 1, "t": 2}})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok", "payload": {"t": 2, "meters": 0.0, "stale": false}}));

    let (status, body) = post(&http, &call, json!({"tool": "teleport", "arguments": {}})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "error");
    assert_eq!(body["error"]["code"], "unknown_tool");

    let (_, body) = post(&http, &call, json!({"session_id": "s1", "tool": "min_distance", "arguments": {"a": 0, "b": 7, "t": 0}})).await;
    assert_eq!(body["error"]["code"], "unknown_instance");
    let (_, body) = post(&http, &call, json!({"tool": "relative_motion", "arguments": {"a": 0, "b": 1, "t0": 2, "t1": 1}})).await;
    assert_eq!(body["error"]["code"], "bad_interval");
    let (_, body) = post(&http, &call, json!({"tool": "overlap_score", "arguments": {"a": 0, "b": 1, "t": 4}})).await;
    assert_eq!(body["error"]["code"], "out_of_range");
    let (_, body) = post(&http, &call, json!({"tool": "overlap_score", "arguments": {"a": "zero", "b": 1, "t": 0}})).await;
    assert_eq!(body["error"]["code"], "invalid_arguments");
    let (_, body) = post(&http, &call, json!({"tool": "fetch_frame", "arguments": {"t": 0}})).await;
    assert_eq!(body["error"]["code"], "frame_unavailable");

    let (_, body) = post(&http, &call, json!({"tool": "overlap_position", "arguments": {"a": 0, "b": 1, "t": 0, "precise": true}})).await;
    let r: ToolResult = serde_json::from_value(body).unwrap();
    assert!(r.is_ok());

    // Malformed JSON is a client error, not a tool result.
    let resp = http
        .post(&call)
        .header("content-type", "application/json")
        .body("{\"tool\": ")
        .send()
        .await
        .unwrap();
    assert!(resp.status().is_client_error());
    let resp = http.post(&call).json(&json!({"arguments": {}})).send().await.unwrap();
    assert!(resp.status().is_client_error());

    let (status, body) = post(&http, &format!("{base}/scenes/nope/call"), json!({"tool": "summary"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "unknown_scene");
}

#[tokio::test(flavor = "multi_thread")]
async fn frames_are_served_as_png() {
    let tmp = tempfile::tempdir().unwrap();
    contact_scene(tmp.path());
    let store = SceneStore::load_dir(&tmp.path().join("scenes")).unwrap();
    assert_eq!(store.ids().collect::<Vec<_>>(), ["contact"]);
    let server = spawn(store, "127.0.0.1:0").await.unwrap();
    let base = server.url();
    let resp = reqwest::get(format!("{base}/scenes/contact/frames/0")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "image/png");
    let bytes = resp.bytes().await.unwrap();
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    let resp = reqwest::get(format!("{base}/scenes/contact/frames/20")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let resp = reqwest::get(format!("{base}/scenes/contact/frames/x")).await.unwrap();
    assert!(resp.status().is_client_error());
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_calls_agree() {
    let mut store = SceneStore::new();
    store.insert(touching_scene(), 0.25);
    let server = spawn(store, "127.0.0.1:0").await.unwrap();
    let url = format!("{}/scenes/touching/call", server.url());
    let http = reqwest::Client::new();
    let mut tasks = Vec::new();
    for i in 0..16 {
        let (http, url) = (http.clone(), url.clone());
        tasks.push(tokio::spawn(async move {
            let args = json!({"a": i % 2, "b": 1 - i % 2, "t": i % 4});
            post(&http, &url, json!({"tool": "overlap_score", "arguments": args})).await.1
        }));
    }
    let mut scores = Vec::new();
    for t in tasks {
        scores.push(t.await.unwrap()["payload"]["score"].clone());
    }
    assert!(scores.windows(2).all(|w| w[0] == w[1]), "{scores:?}");
}
