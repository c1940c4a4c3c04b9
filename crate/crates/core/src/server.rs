//! HTTP backend for built sites: static files plus `/eval` and `/check`.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use ald_engine::{parse_program, parse_query, solve_with_cancel, Budget};
use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::exercise::{self, CheckDeps};
use crate::filters::FilterRegistry;
use crate::site::Sidecar;
use crate::tools::ToolRunner;

const MAX_STEPS: u64 = 50_000_000;
const MAX_DEPTH: u32 = 10_000;
const MAX_ANSWERS: usize = 1_000;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("{}: not a built site directory", .0.display())]
    NotASite(PathBuf),
    #[error("bad exercise sidecar: {0}")]
    Sidecar(String),
    #[error("cannot listen on port {port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

struct AppState {
    root: PathBuf,
    sidecar: Option<Sidecar>,
    runner: ToolRunner,
    filters: FilterRegistry,
}

/// Router for a built output directory. The exercise sidecar is optional;
/// without it every `/check` answers 404.
pub fn router(root: impl Into<PathBuf>) -> Result<Router, ServeError> {
    let root = root.into();
    if !root.join("index.html").is_file() {
        return Err(ServeError::NotASite(root));
    }
    let sidecar_path = Sidecar::path_in(&root);
    let sidecar = if sidecar_path.exists() {
        Some(Sidecar::load(&sidecar_path).map_err(ServeError::Sidecar)?)
    } else {
        None
    };
    let (manifest, budget) = match &sidecar {
        Some(s) => (s.tools.clone(), s.budget),
        None => (Default::default(), Budget::default()),
    };
    let state = AppState {
        root,
        sidecar,
        runner: ToolRunner::new(manifest, None).with_budget(budget),
        filters: FilterRegistry::with_builtins(),
    };
    Ok(Router::new()
        .route("/eval", post(eval))
        .route("/check", post(check))
        .fallback(static_file)
        .with_state(Arc::new(state)))
}

pub async fn serve_on(listener: tokio::net::TcpListener, router: Router) -> Result<(), ServeError> {
    axum::serve(listener, router).await?;
    Ok(())
}

/// Serves `root` on 127.0.0.1:`port` until the process ends.
pub fn serve(root: impl Into<PathBuf>, port: u16) -> Result<(), ServeError> {
    let router = router(root)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|source| ServeError::Bind { port, source })?;
        serve_on(listener, router).await
    })
}

fn json_error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| json_error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRequest {
    #[serde(default)]
    pub engine_id: String,
    pub program: String,
    pub query: String,
    #[serde(default)]
    pub max_answers: Option<usize>,
    #[serde(default)]
    pub max_depth: Option<u32>,
    #[serde(default)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct EvalAnswer {
    pub bindings: IndexMap<String, String>,
    pub depth: u32,
}

#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct EvalResponse {
    pub status: &'static str,
    pub answers: Vec<EvalAnswer>,
    pub more: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalResponse {
    fn error(message: String) -> Self {
        EvalResponse { status: "error", answers: Vec::new(), more: false, error: Some(message) }
    }
}

/// Evaluates one request. Every engine id is served by the built-in engine.
pub fn evaluate(req: &EvalRequest, cancel: &AtomicBool) -> EvalResponse {
    let defaults = Budget::default();
    let budget = Budget {
        max_answers: req.max_answers.unwrap_or(defaults.max_answers).min(MAX_ANSWERS),
        max_depth: req.max_depth.unwrap_or(defaults.max_depth).min(MAX_DEPTH),
        max_steps: req.max_steps.unwrap_or(defaults.max_steps).min(MAX_STEPS),
    };
    let program = match parse_program(&req.program) {
        Ok(p) => p,
        Err(e) => return EvalResponse::error(format!("program: {e}")),
    };
    let query = match parse_query(&req.query) {
        Ok(q) => q,
        Err(e) => return EvalResponse::error(format!("query: {e}")),
    };
    match solve_with_cancel(&program, &query, &budget, cancel) {
        Ok(s) => EvalResponse {
            status: "ok",
            answers: s
                .answers
                .iter()
                .map(|a| EvalAnswer {
                    bindings: a.bindings.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
                    depth: a.proof_depth,
                })
                .collect(),
            more: s.more,
            error: None,
        },
        Err(e) => EvalResponse::error(format!("{}: {e}", e.kind())),
    }
}

/// Sets the flag when dropped, so abandoned requests stop evaluating.
struct CancelOnDrop(Arc<AtomicBool>);

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        self.0.store(true, Ordering::Relaxed);
    }
}

async fn eval(body: Bytes) -> Response {
    let req: EvalRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let flag = Arc::new(AtomicBool::new(false));
    let _guard = CancelOnDrop(flag.clone());
    match tokio::task::spawn_blocking(move || evaluate(&req, &flag)).await {
        Ok(resp) => Json(resp).into_response(),
        Err(e) => json_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRequest {
    #[serde(default)]
    pub page: Option<String>,
    pub cell_id: String,
    pub submission: String,
}

async fn check(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: CheckRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let found = state.sidecar.as_ref().and_then(|s| s.find(req.page.as_deref(), &req.cell_id));
    if found.is_none() {
        return json_error(StatusCode::NOT_FOUND, format!("no exercise `{}`", req.cell_id));
    }
    let verdict = tokio::task::spawn_blocking(move || {
        let sidecar = state.sidecar.as_ref().expect("checked above");
        let spec = sidecar.find(req.page.as_deref(), &req.cell_id).expect("checked above");
        let deps = CheckDeps {
            runner: &state.runner,
            filters: &state.filters,
            budget: sidecar.budget,
            default_tool: sidecar.default_tool.as_deref(),
        };
        exercise::check(spec, &req.submission, &deps)
    })
    .await;
    match verdict {
        Ok(v) => Json(json!({
            "verdict": v.outcome.as_str(),
            "feedback": v.feedback(),
        }))
        .into_response(),
        Err(e) => json_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn static_file(State(state): State<Arc<AppState>>, uri: Uri) -> Response {
    let Some(path) = resolve_static(&state.root, uri.path()) else {
        return (StatusCode::NOT_FOUND, "not found").into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], Body::from(bytes)).into_response(),
        Err(_) => (StatusCode::NOT_FOUND, "not found").into_response(),
    }
}

/// Maps a request path to a file under `root`; hidden segments (including
/// the private sidecar directory) and `..` are refused.
pub fn resolve_static(root: &Path, request_path: &str) -> Option<PathBuf> {
    let mut path = root.to_path_buf();
    for segment in request_path.split('/').filter(|s| !s.is_empty()) {
        if segment.starts_with('.') || segment.contains('\\') || segment.contains('%') {
            return None;
        }
        path.push(segment);
    }
    if path.is_dir() {
        path.push("index.html");
    }
    path.is_file().then_some(path)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}
