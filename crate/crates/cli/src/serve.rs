//! Serve mode: in-memory sketch and episode registry behind a JSON API.
//!
//! Episodes created with `"mode": "run"` advance on a blocking worker until
//! terminal; `"mode": "step"` episodes advance only on `POST .../advance`.

use crate::config::{BackendKind, FileConfig};
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hamnav_core::fixtures;
use hamnav_core::pipeline::{AblationFlags, EpisodeStatus, SimConfig, SimEpisode};
use hamnav_core::sketchmap::{HandDrawnMap, SketchBundle};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

#[derive(Default)]
pub struct Registry {
    sketches: RwLock<HashMap<String, Arc<HandDrawnMap>>>,
    episodes: RwLock<HashMap<String, Arc<Mutex<SimEpisode>>>>,
    next_id: AtomicU64,
    config: FileConfig,
}

impl Registry {
    pub fn new(config: FileConfig) -> Self {
        Self { config, ..Self::default() }
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1)
    }

    fn episode(&self, id: &str) -> Result<Arc<Mutex<SimEpisode>>, ApiError> {
        self.episodes
            .read()
            .expect("registry lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown episode {id}")))
    }
}

pub type AppState = Arc<Registry>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/api/worlds", get(list_worlds))
        .route("/api/sketches", post(upload_sketch))
        .route("/api/episodes", post(create_episode))
        .route("/api/episodes/:id", get(get_episode))
        .route("/api/episodes/:id/svap/:t", get(get_svap))
        .route("/api/episodes/:id/advance", post(advance_episode))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

async fn list_worlds() -> Json<serde_json::Value> {
    let worlds: Vec<_> = fixtures::all_worlds()
        .iter()
        .map(|w| json!({ "id": w.name, "floors": w.floors.len(), "landmarks": w.landmarks.len() }))
        .collect();
    Json(json!({ "worlds": worlds }))
}

/// Accepts either a `bundle` zip part or `map` (PNG) plus `annotations` (JSON) parts.
async fn upload_sketch(State(state): State<AppState>, mut multipart: Multipart) -> Result<Response, ApiError> {
    let mut parts: HashMap<String, Vec<u8>> = HashMap::new();
    while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::bad(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::bad(e.to_string()))?;
        parts.insert(name, bytes.to_vec());
    }
    let bundle = if let Some(zip) = parts.get("bundle") {
        SketchBundle::read_zip(zip)
    } else if let (Some(png), Some(ann)) = (parts.get("map"), parts.get("annotations")) {
        SketchBundle::from_parts(png, ann)
    } else {
        return Err(ApiError::bad("expected a `bundle` part or `map` and `annotations` parts"));
    };
    let parsed = bundle
        .and_then(|b| b.validate())
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let id = state.fresh_id("s");
    let body = json!({
        "sketch_id": id,
        "landmarks": parsed.map.landmarks.len(),
        "path_points": parsed.map.path.len(),
        "warnings": parsed.warnings,
    });
    state.sketches.write().expect("registry lock poisoned").insert(id, Arc::new(parsed.map));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeMode {
    #[default]
    Run,
    Step,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateEpisode {
    pub sketch_id: String,
    pub world_id: String,
    #[serde(default)]
    pub backend: BackendKind,
    /// Ablation names such as `["no_em"]`.
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: EpisodeMode,
    #[serde(default)]
    pub max_steps: Option<u32>,
}

async fn create_episode(
    State(state): State<AppState>,
    body: Result<Json<CreateEpisode>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad(e.body_text()))?;
    let map = state
        .sketches
        .read()
        .expect("registry lock poisoned")
        .get(&req.sketch_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown sketch {}", req.sketch_id)))?;
    let world =
        fixtures::world(&req.world_id).map_err(|_| ApiError::not_found(format!("unknown world {}", req.world_id)))?;
    let flags = AblationFlags::parse_list(&req.flags.join(",")).map_err(|e| ApiError::bad(e.to_string()))?;
    let backend = state.config.backend(req.backend).map_err(|e| ApiError::bad(format!("{e:#}")))?;

    let mut config = SimConfig { seed: req.seed, ..SimConfig::default() };
    config.pipeline.flags = flags;
    config.pipeline.keep_svap = true;
    config.pipeline.max_steps = req.max_steps;
    let map = (*map).clone();
    let episode = tokio::task::spawn_blocking(move || SimEpisode::new(map, Arc::new(world), backend, config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let id = state.fresh_id("e");
    let episode = Arc::new(Mutex::new(episode));
    state.episodes.write().expect("registry lock poisoned").insert(id.clone(), episode.clone());

    if req.mode == EpisodeMode::Run {
        tokio::task::spawn_blocking(move || loop {
            // lock per step so readers can poll progress
            let mut ep = episode.lock().expect("episode lock poisoned");
            if ep.status().is_terminal() {
                break;
            }
            let _ = ep.advance();
        });
    }
    Ok((StatusCode::CREATED, Json(json!({ "episode_id": id, "mode": req.mode }))).into_response())
}

fn episode_json(id: &str, ep: &SimEpisode) -> serde_json::Value {
    let trace = ep.trace();
    json!({
        "episode_id": id,
        "status": trace.status,
        "world_id": ep.world().name,
        "plan": trace.header.plan,
        "metrics": trace.metrics,
        "error": trace.error,
        "steps": trace.steps,
    })
}

async fn get_episode(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let ep = state.episode(&id)?;
    let ep = ep.lock().expect("episode lock poisoned");
    Ok(Json(episode_json(&id, &ep)))
}

async fn get_svap(State(state): State<AppState>, Path((id, t)): Path<(String, usize)>) -> Result<Response, ApiError> {
    let ep = state.episode(&id)?;
    let png = {
        let ep = ep.lock().expect("episode lock poisoned");
        let svap = ep.svap(t).ok_or_else(|| ApiError::not_found(format!("episode {id} has no step {t}")))?;
        let mut buf = std::io::Cursor::new(Vec::new());
        svap.image
            .write_to(&mut buf, image::ImageFormat::Png)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        buf.into_inner()
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn advance_episode(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let ep = state.episode(&id)?;
    let result = tokio::task::spawn_blocking(move || {
        let mut ep = ep.lock().expect("episode lock poisoned");
        if ep.status() != EpisodeStatus::Running {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("episode is {:?}", ep.status())));
        }
        let step = ep.advance().ok().cloned();
        Ok(json!({ "status": ep.status(), "step": step, "metrics": ep.status().is_terminal().then(|| ep.metrics()) }))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(result).into_response())
}

/// Binds and serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, config: FileConfig) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app(Arc::new(Registry::new(config)))).await?;
    Ok(())
}
