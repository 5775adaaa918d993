//! HTTP/JSON service for submitting jobs and serving processed programs.
//!
//! The artifact directory is the source of truth: each finished program lives
//! in `<artifact_dir>/programs/<id>/` and the job index is rebuilt from the
//! manifests found there on startup.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, Mutex, RwLock};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::delivery::{AdmDocument, Manifest, ObjectRole};
use crate::loudness::Loudness;
use crate::pipeline::{process_file, Backend, ProcessOptions};
use crate::remix::{PresetRegistry, PRESET_EMPHASIZED};

pub const STEM_FILES: [&str; 3] = ["dialogue.wav", "background.wav", "mix.wav"];

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub artifact_dir: PathBuf,
    pub registry: PresetRegistry,
    pub workers: usize,
    pub cors_origin: Option<String>,
}

impl ServeConfig {
    pub fn new(artifact_dir: impl Into<PathBuf>) -> Self {
        Self { artifact_dir: artifact_dir.into(), registry: PresetRegistry::default(), workers: 1, cors_origin: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn can_advance_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running)
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub input: String,
    pub backend: Backend,
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub state: JobState,
    /// Artifact file names inside the program directory.
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Job {
    /// Moves to `next`, refusing skipped or reversed transitions.
    pub fn advance(&mut self, next: JobState) -> Result<(), String> {
        if self.state.can_advance_to(next) {
            self.state = next;
            Ok(())
        } else {
            Err(format!("job {}: illegal transition {:?} -> {:?}", self.id, self.state, next))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRequest {
    pub input: String,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Program id; derived from the request when absent.
    #[serde(default)]
    pub program: Option<String>,
}

pub struct AppState {
    cfg: ServeConfig,
    jobs: RwLock<BTreeMap<String, Job>>,
    queue: mpsc::UnboundedSender<String>,
}

impl AppState {
    pub fn program_dir(&self, id: &str) -> PathBuf {
        self.cfg.artifact_dir.join("programs").join(id)
    }

    pub async fn job(&self, id: &str) -> Option<Job> {
        self.jobs.read().await.get(id).cloned()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} \"{id}\""))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn internal(detail: impl std::fmt::Display) -> Self {
        eprintln!("internal error: {detail}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

/// Stable 64-bit FNV-1a, used to derive program ids from job requests.
fn fnv1a(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.bytes().chain(std::iter::once(0)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn program_artifacts(id: &str) -> Vec<String> {
    let mut v =
        vec![format!("{id}.wav"), format!("{id}.json"), format!("{id}.package.wav"), format!("{id}.package.xml")];
    v.extend(["dialogue", "background", "mix"].iter().map(|s| format!("{id}.{s}.wav")));
    v
}

/// Finished programs found under `<artifact_dir>/programs`.
pub fn scan_programs(artifact_dir: &Path) -> io::Result<Vec<Job>> {
    let root = artifact_dir.join("programs");
    let mut jobs = Vec::new();
    let entries = match std::fs::read_dir(&root) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(jobs),
        Err(e) => return Err(e),
    };
    for entry in entries {
        let dir = entry?.path();
        let id = file_name(&dir);
        if !valid_id(&id) {
            continue;
        }
        let Ok(m) = Manifest::read(&dir.join(format!("{id}.json"))) else {
            continue;
        };
        let artifacts = program_artifacts(&id);
        if m.package.is_none() || !artifacts.iter().all(|a| dir.join(a).is_file()) {
            continue;
        }
        let Some(backend) = m.backend.as_deref().and_then(|b| b.parse().ok()) else {
            continue;
        };
        jobs.push(Job {
            id,
            input: m.input.unwrap_or_default(),
            backend,
            preset: m.preset,
            model: None,
            state: JobState::Done,
            artifacts,
            error: None,
        });
    }
    jobs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(jobs)
}

/// Builds the router and starts the job workers. Must be called inside a
/// Tokio runtime.
pub fn app(cfg: ServeConfig) -> io::Result<(Router, Arc<AppState>)> {
    std::fs::create_dir_all(cfg.artifact_dir.join("programs"))?;
    let jobs = scan_programs(&cfg.artifact_dir)?.into_iter().map(|j| (j.id.clone(), j)).collect();
    let (tx, rx) = mpsc::unbounded_channel();
    let cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
        .allow_origin(match &cfg.cors_origin {
            Some(o) => AllowOrigin::exact(
                HeaderValue::from_str(o).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?,
            ),
            None => AllowOrigin::any(),
        });
    let workers = cfg.workers.max(1);
    let state = Arc::new(AppState { cfg, jobs: RwLock::new(jobs), queue: tx });

    let rx = Arc::new(Mutex::new(rx));
    for _ in 0..workers {
        tokio::spawn(worker(state.clone(), rx.clone()));
    }

    let router = Router::new()
        .route("/jobs", post(submit_job))
        .route("/jobs/{id}", get(get_job))
        .route("/programs", get(list_programs))
        .route("/programs/{id}/metadata", get(program_metadata))
        .route("/programs/{id}/stems/{file}", get(program_stem))
        .layer(cors)
        .with_state(state.clone());
    Ok((router, state))
}

pub async fn serve(addr: &str, cfg: ServeConfig) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let (router, _) = app(cfg)?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router).await
}

async fn set_state(state: &AppState, id: &str, next: JobState, f: impl FnOnce(&mut Job)) {
    let mut jobs = state.jobs.write().await;
    if let Some(job) = jobs.get_mut(id) {
        f(job);
        if let Err(e) = job.advance(next) {
            eprintln!("{e}");
        }
    }
}

async fn worker(state: Arc<AppState>, rx: Arc<Mutex<mpsc::UnboundedReceiver<String>>>) {
    loop {
        let Some(id) = rx.lock().await.recv().await else {
            return;
        };
        let Some(job) = state.job(&id).await else {
            continue;
        };
        set_state(&state, &id, JobState::Running, |_| {}).await;

        let preset = state.cfg.registry.get(&job.preset).cloned();
        let dir = state.program_dir(&id);
        let result = match preset {
            Ok(preset) => {
                let opts = ProcessOptions {
                    model: job.model.as_ref().map(PathBuf::from),
                    write_stems: true,
                    ..ProcessOptions::new(job.backend, preset)
                };
                let input = PathBuf::from(&job.input);
                let pid = id.clone();
                tokio::task::spawn_blocking(move || process_file(&input, &dir, &pid, &opts).map(|_| ()))
                    .await
                    .map_err(|e| e.to_string())
                    .and_then(|r| r.map_err(|e| e.to_string()))
            }
            Err(e) => Err(e.to_string()),
        };
        match result {
            Ok(()) => set_state(&state, &id, JobState::Done, |j| j.artifacts = program_artifacts(&id)).await,
            Err(e) => set_state(&state, &id, JobState::Failed, |j| j.error = Some(e)).await,
        }
    }
}

async fn submit_job(
    State(state): State<Arc<AppState>>,
    body: Result<Json<JobRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    let backend: Backend = req.backend.as_deref().unwrap_or("center").parse().map_err(ApiError::invalid)?;
    let preset = req.preset.unwrap_or_else(|| PRESET_EMPHASIZED.to_string());
    state.cfg.registry.get(&preset).map_err(|e| ApiError::invalid(e.to_string()))?;
    if !Path::new(&req.input).is_file() {
        return Err(ApiError::invalid(format!("input \"{}\" is not a readable file", req.input)));
    }
    match (backend, &req.model) {
        (Backend::Model, None) => return Err(ApiError::invalid("model backend requires \"model\"")),
        (Backend::Model, Some(m)) if !Path::new(m).is_file() => {
            return Err(ApiError::invalid(format!("model \"{m}\" is not a readable file")))
        }
        _ => {}
    }
    let id = match req.program {
        Some(p) if valid_id(&p) => p,
        Some(p) => return Err(ApiError::invalid(format!("invalid program id \"{p}\""))),
        None => format!("{:016x}", fnv1a(&[&req.input, backend.as_str(), &preset, req.model.as_deref().unwrap_or("")])),
    };

    let mut jobs = state.jobs.write().await;
    if let Some(existing) = jobs.get(&id) {
        if existing.state != JobState::Failed {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("job \"{id}\" already submitted")));
        }
    }
    let job = Job {
        id: id.clone(),
        input: req.input,
        backend,
        preset,
        model: req.model,
        state: JobState::Queued,
        artifacts: Vec::new(),
        error: None,
    };
    jobs.insert(id.clone(), job);
    drop(jobs);
    state.queue.send(id.clone()).map_err(ApiError::internal)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "state": JobState::Queued }))))
}

async fn get_job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Job>, ApiError> {
    state.job(&id).await.map(Json).ok_or_else(|| ApiError::not_found("job", &id))
}

async fn done_job(state: &AppState, id: &str) -> Result<Job, ApiError> {
    match state.job(id).await {
        Some(j) if j.state == JobState::Done => Ok(j),
        _ => Err(ApiError::not_found("program", id)),
    }
}

async fn list_programs(State(state): State<Arc<AppState>>) -> Json<Value> {
    let jobs = state.jobs.read().await;
    let programs: Vec<Value> = jobs
        .values()
        .filter(|j| j.state == JobState::Done)
        .map(|j| json!({ "id": j.id, "preset": j.preset, "backend": j.backend, "input": j.input }))
        .collect();
    Json(json!({ "programs": programs }))
}

fn loudness_json(l: Loudness) -> Value {
    match l {
        Loudness::Lufs(v) => json!(v),
        Loudness::Silence => json!("silence"),
        Loudness::TooShort => json!("too_short"),
    }
}

async fn program_metadata(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    done_job(&state, &id).await?;
    let dir = state.program_dir(&id);
    let manifest = Manifest::read(&dir.join(format!("{id}.json"))).map_err(ApiError::internal)?;
    let xml = tokio::fs::read_to_string(dir.join(format!("{id}.package.xml"))).await.map_err(ApiError::internal)?;
    let doc = AdmDocument::from_xml(&xml).map_err(ApiError::internal)?;
    let object = |role| {
        let o = doc.object(role).expect("validated document");
        json!({
            "integrated_loudness_lufs": loudness_json(o.integrated_loudness),
            "channels": o.channels,
            "url": format!("/programs/{id}/stems/{}.wav", role.as_str()),
        })
    };
    let presets: Vec<Value> = state
        .cfg
        .registry
        .presets()
        .iter()
        .map(|p| {
            json!({
                "name": p.name,
                "label": p.label,
                "global_atten_db": p.params.global_atten_db,
                "duck_extra_db": p.params.duck_extra_db,
            })
        })
        .collect();
    Ok(Json(json!({
        "program": id,
        "programme_name": doc.programme_name,
        "sample_rate": doc.sample_rate,
        "num_samples": manifest.num_samples,
        "stems": {
            "dialogue": object(ObjectRole::Dialogue),
            "background": object(ObjectRole::Background),
            "mix": {
                "integrated_loudness_lufs": loudness_json(doc.mix_loudness),
                "url": format!("/programs/{id}/stems/mix.wav"),
            },
        },
        "bounds": doc.bounds,
        "presets": presets,
        "applied_preset": manifest.preset,
        "loudness_before_lufs": loudness_json(manifest.loudness_before_lufs),
        "loudness_after_lufs": loudness_json(manifest.loudness_after_lufs),
        "makeup_gain_db": manifest.makeup_gain_db,
    })))
}

async fn program_stem(
    State(state): State<Arc<AppState>>,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    if !STEM_FILES.contains(&file.as_str()) {
        return Err(ApiError::not_found("stem", &file));
    }
    done_job(&state, &id).await?;
    let path = state.program_dir(&id).join(format!("{id}.{file}"));
    let bytes = tokio::fs::read(&path).await.map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_machine_only_moves_forward() {
        use JobState::*;
        let allowed = [(Queued, Running), (Running, Done), (Running, Failed)];
        for a in [Queued, Running, Done, Failed] {
            for b in [Queued, Running, Done, Failed] {
                assert_eq!(a.can_advance_to(b), allowed.contains(&(a, b)), "{a:?} -> {b:?}");
            }
        }
    }

    #[test]
    fn ids() {
        assert!(valid_id("abc-1_2"));
        assert!(!valid_id("../x"));
        assert!(!valid_id(""));
        assert_eq!(fnv1a(&[]), 0xcbf2_9ce4_8422_2325);
        assert_ne!(fnv1a(&["ab", "c"]), fnv1a(&["a", "bc"]));
    }
}
