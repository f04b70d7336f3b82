//! HTTP tool server over a set of loaded scenes.
//!
//! Tool failures are `200` responses carrying a [`ToolResult::Error`];
//! `4xx` is reserved for malformed requests and unknown scenes.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

use sem4d_core::pipeline::load_scene_dir;
use sem4d_core::toolkit::{Scene4D, DEFAULT_DIRECTION_EPSILON};

use crate::tools::{execute, registry, summary_payload, DispatchOptions, ToolCall, ToolResult};
use crate::GatewayError;

/// Loaded scenes with their dispatch settings. Immutable once serving.
#[derive(Debug, Default)]
pub struct SceneStore {
    scenes: BTreeMap<String, (Scene4D, DispatchOptions)>,
}

impl SceneStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, scene: Scene4D, direction_epsilon: f64) {
        let opts = DispatchOptions {
            frame_fetching: true,
            direction_epsilon,
        };
        self.scenes.insert(scene.scene_id().to_string(), (scene, opts));
    }

    /// Every built scene under `root` (or `root` itself if it is one).
    pub fn load_dir(root: &Path) -> Result<Self, GatewayError> {
        let mut store = Self::new();
        for (_, (scene, doc)) in load_scene_dir(root).map_err(|e| GatewayError::Scene(e.to_string()))? {
            store.insert(scene, doc.config.toolkit.direction_epsilon);
        }
        Ok(store)
    }

    pub fn get(&self, id: &str) -> Option<&Scene4D> {
        self.scenes.get(id).map(|(s, _)| s)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.scenes.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    /// Executes `call` on scene `id`.
    pub fn call(&self, id: &str, call: &ToolCall) -> Option<ToolResult> {
        self.scenes.get(id).map(|(s, o)| execute(s, call, o))
    }

    pub fn epsilon(&self, id: &str) -> f64 {
        self.scenes
            .get(id)
            .map_or(DEFAULT_DIRECTION_EPSILON, |(_, o)| o.direction_epsilon)
    }
}

type Shared = Arc<SceneStore>;

fn error_response(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(ToolResult::error(code, message))).into_response()
}

fn unknown_scene(id: &str) -> Response {
    error_response(StatusCode::NOT_FOUND, "unknown_scene", format!("no scene {id:?}"))
}

async fn list_scenes(State(store): State<Shared>) -> Json<Value> {
    let scenes: Vec<Value> = store
        .scenes
        .values()
        .map(|(s, _)| {
            json!({
                "id": s.scene_id(),
                "num_timesteps": s.num_timesteps(),
                "num_instances": s.instances().instances.len(),
                "width": s.width(),
                "height": s.height(),
            })
        })
        .collect();
    Json(json!({ "scenes": scenes }))
}

async fn scene_summary(State(store): State<Shared>, UrlPath(id): UrlPath<String>) -> Response {
    match store.get(&id) {
        Some(scene) => {
            let mut v = summary_payload(scene);
            crate::tools::round_floats(&mut v, crate::tools::DEFAULT_DECIMALS);
            Json(v).into_response()
        }
        None => unknown_scene(&id),
    }
}

async fn list_tools() -> Json<Value> {
    Json(json!({ "tools": registry() }))
}

async fn call_tool(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ToolCall>, JsonRejection>,
) -> Response {
    let call = match body {
        Ok(Json(call)) => call,
        Err(rej) => return error_response(rej.status(), "malformed_request", rej.body_text()),
    };
    if store.get(&id).is_none() {
        return unknown_scene(&id);
    }
    let worker = store.clone();
    match tokio::task::spawn_blocking(move || worker.call(&id, &call)).await {
        Ok(Some(result)) => Json(result).into_response(),
        Ok(None) => error_response(StatusCode::NOT_FOUND, "unknown_scene", "scene vanished"),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

async fn frame(State(store): State<Shared>, UrlPath((id, t)): UrlPath<(String, usize)>) -> Response {
    let Some(scene) = store.get(&id) else {
        return unknown_scene(&id);
    };
    let frame = match scene.fetch_frame(t) {
        Ok(f) => f,
        Err(e) => {
            let status = match e {
                sem4d_core::toolkit::ToolError::OutOfRange { .. } => StatusCode::BAD_REQUEST,
                _ => StatusCode::NOT_FOUND,
            };
            return error_response(status, e.code(), e.to_string());
        }
    };
    match tokio::fs::read(&frame.path).await {
        Ok(bytes) => {
            let mime = match frame.path.extension().and_then(|e| e.to_str()) {
                Some("jpg" | "jpeg") => "image/jpeg",
                _ => "image/png",
            };
            ([(header::CONTENT_TYPE, mime)], bytes).into_response()
        }
        Err(e) => error_response(StatusCode::NOT_FOUND, "frame_unavailable", e.to_string()),
    }
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/scenes", get(list_scenes))
        .route("/scenes/{id}/summary", get(scene_summary))
        .route("/tools", get(list_tools))
        .route("/scenes/{id}/call", post(call_tool))
        .route("/scenes/{id}/frames/{t}", get(frame))
        .with_state(store)
}

/// A server running on the current tokio runtime. Stops when dropped.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<()>>,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Serves until the process is stopped.
    pub async fn wait(mut self) {
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Binds `addr` and starts serving in the background.
pub async fn spawn(store: SceneStore, addr: &str) -> Result<RunningServer, GatewayError> {
    let bind_err = |source| GatewayError::Bind {
        addr: addr.to_string(),
        source,
    };
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(bind_err)?;
    let local = listener.local_addr().map_err(bind_err)?;
    let app = router(Arc::new(store));
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
        {
            log::error!("server stopped: {e}");
        }
    });
    log::info!("serving on http://{local}");
    Ok(RunningServer {
        addr: local,
        shutdown: Some(tx),
        task: Some(task),
    })
}
