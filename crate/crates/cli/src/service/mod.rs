//! HTTP trial service: human search sessions plus model replays.

pub mod model;
pub mod store;

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use axum::Router;
use axum::extract::{Path, Query, State};
use axum::http::{StatusCode, header};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Json;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Value, json};
use vsearch_core::agent::{
    AgentConfig, CircularScan, InitialFixation, OracleDetector, OracleDetectorConfig, Scene, SearchPolicy, SpikingPolicy,
    run_agent_trial,
};
use vsearch_core::elm::ElmModel;
use vsearch_core::metrics::summarize;
use vsearch_core::retina::{FcgConfig, Retina};
use vsearch_core::stimulus::{GaborSpec, NoiseSpec, SEARCH_IMAGE_SPAN_DEG, SearchImage, build_search_image, sample_target_location};
use vsearch_core::trial::{TrialRecord, is_correct_response};
use vsearch_core::visibility::VisibilityParams;
use vsearch_core::Vec2;

use model::{LiveTrial, Mode, Registry, SessionRecord, Status};
use store::{Event, Store};

/// Threshold found by calibrating the reference map to 98% accuracy.
pub const DEFAULT_ELM_THRESHOLD: f64 = 0.896;
pub const DEFAULT_CONTRAST: f64 = 0.15;
const IMAGE_CACHE: usize = 16;
const RENDER_CACHE: usize = 512;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub seed: u64,
    pub elm_threshold: f64,
    pub agent_ckpt: Option<PathBuf>,
}

pub struct AppState {
    cfg: ServiceConfig,
    inner: Mutex<Inner>,
    retina: Retina,
    elm: ElmModel,
    agent: Option<SpikingPolicy>,
    images: Mutex<HashMap<String, Arc<SearchImage>>>,
    renders: Mutex<HashMap<(String, u64, u64), Arc<Vec<u8>>>>,
}

struct Inner {
    reg: Registry,
    store: Store,
}

pub type Shared = Arc<AppState>;

impl AppState {
    /// Open the data directory and replay its event log.
    pub fn open(cfg: ServiceConfig) -> Result<Shared> {
        let (store, events) = Store::open(&cfg.data_dir)?;
        let mut reg = Registry::default();
        for e in &events {
            reg.apply(e);
        }
        let agent = match &cfg.agent_ckpt {
            Some(p) => Some(vsearch_core::rl::load_policy(p).with_context(|| format!("loading policy from {}", p.display()))?.0),
            None => None,
        };
        Ok(Arc::new(Self {
            retina: Retina::new(&FcgConfig::default())?,
            elm: ElmModel::new(&VisibilityParams::reference(), cfg.elm_threshold)?,
            agent,
            inner: Mutex::new(Inner { reg, store }),
            images: Mutex::new(HashMap::new()),
            renders: Mutex::new(HashMap::new()),
            cfg,
        }))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn trial(&self, id: &str) -> Result<LiveTrial, ApiError> {
        self.lock().reg.trials.get(id).cloned().ok_or_else(|| ApiError::not_found("trial", id))
    }

    fn image(&self, t: &LiveTrial) -> Result<Arc<SearchImage>, ApiError> {
        if let Some(img) = self.images.lock().unwrap_or_else(|p| p.into_inner()).get(&t.trial_id) {
            return Ok(img.clone());
        }
        let img = Arc::new(stimulus_for(t.seed, t.contrast, t.target_deg).map_err(ApiError::internal)?);
        let mut cache = self.images.lock().unwrap_or_else(|p| p.into_inner());
        if cache.len() >= IMAGE_CACHE {
            cache.clear();
        }
        cache.insert(t.trial_id.clone(), img.clone());
        Ok(img)
    }

    pub fn sync(&self) -> Result<()> {
        self.lock().store.sync()
    }
}

fn stimulus_for(seed: u64, contrast: f64, target: Vec2) -> vsearch_core::Result<SearchImage> {
    let noise = NoiseSpec { seed, ..NoiseSpec::default() };
    let gabor = GaborSpec { contrast, ..GaborSpec::default() };
    build_search_image(&noise, &gabor, target)
}

fn derive_seed(base: u64, k: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(base ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15)).next_u64()
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

// ---- errors ----

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
    fn bad_request(m: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, m)
    }
    fn conflict(m: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, m)
    }
    fn not_found(kind: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no {kind} '{id}'"))
    }
    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

// ---- routes ----

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/trial", post(create_trial))
        .route("/api/session/{id}/summary", get(session_summary))
        .route("/api/trial/{id}/view", get(view))
        .route("/api/trial/{id}/image", get(full_image))
        .route("/api/trial/{id}/fixation", post(add_fixation))
        .route("/api/trial/{id}/response", post(respond))
        .route("/api/trial/{id}/scanpath", get(scanpath))
        .route("/api/trial/{id}/compare", get(compare))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
pub struct NewSession {
    pub mode: Mode,
    #[serde(default)]
    pub contrast: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

async fn create_session(State(app): State<Shared>, Json(req): Json<NewSession>) -> ApiResult<(StatusCode, Json<SessionRecord>)> {
    let contrast = req.contrast.unwrap_or(DEFAULT_CONTRAST);
    if !(contrast.is_finite() && contrast > 0.0 && contrast <= 1.0) {
        return Err(ApiError::bad_request(format!("contrast must be in (0, 1], got {contrast}")));
    }
    let mut inner = app.lock();
    let id = inner.reg.next_session_id();
    let seed = req.seed.unwrap_or_else(|| derive_seed(app.cfg.seed, inner.reg.sessions.len() as u64 + 1));
    let e = Event::Session { session_id: id.clone(), mode: req.mode, seed, contrast, created_at: now_secs() };
    inner.store.append(&e).map_err(ApiError::internal)?;
    inner.reg.apply(&e);
    Ok((StatusCode::CREATED, Json(inner.reg.sessions[&id].clone())))
}

async fn get_session(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<SessionRecord>> {
    app.lock().reg.sessions.get(&id).cloned().map(Json).ok_or_else(|| ApiError::not_found("session", &id))
}

fn view_url(trial_id: &str, f: Vec2) -> String {
    format!("/api/trial/{trial_id}/view?fix_x={}&fix_y={}", f.x, f.y)
}

async fn create_trial(State(app): State<Shared>, Path(sid): Path<String>) -> ApiResult<(StatusCode, Json<Value>)> {
    let session = app.lock().reg.sessions.get(&sid).cloned().ok_or_else(|| ApiError::not_found("session", &sid))?;
    let k = session.trial_ids.len() as u64 + 1;
    let seed = derive_seed(session.seed, k);
    let contrast = session.contrast;
    // Building the stimulus fixes the pixel-snapped target location.
    let img = blocking(move || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = NoiseSpec::default();
        let loc = sample_target_location(&mut rng, noise.diameter_px, &GaborSpec::default());
        stimulus_for(seed, contrast, loc).map_err(ApiError::internal)
    })
    .await?;
    let target = img.target.map(|t| t.location_deg).ok_or_else(|| ApiError::internal("stimulus has no target"))?;
    let start = Vec2::new(0.0, 0.0);
    let mut inner = app.lock();
    let tid = inner.reg.next_trial_id();
    let e = Event::Trial { trial_id: tid.clone(), session_id: sid.clone(), seed, contrast, target_deg: target, start_deg: start };
    inner.store.append(&e).map_err(ApiError::internal)?;
    inner.reg.apply(&e);
    drop(inner);
    {
        let mut cache = app.images.lock().unwrap_or_else(|p| p.into_inner());
        if cache.len() >= IMAGE_CACHE {
            cache.clear();
        }
        cache.insert(tid.clone(), Arc::new(img));
    }
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "trial_id": tid,
            "session_id": sid,
            "seed": seed,
            "contrast": contrast,
            "fixation_index": 1,
            "fixation": start,
            "view": view_url(&tid, start),
        })),
    ))
}

#[derive(Debug, Deserialize)]
pub struct ViewQuery {
    pub fix_x: f64,
    pub fix_y: f64,
}

/// Grey-level PNG of the retinal image at the given fixation.
pub fn render_png(pixels: &ndarray::Array2<f64>) -> Result<Vec<u8>> {
    let (h, w) = pixels.dim();
    let raw: Vec<u8> = pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let img = image::GrayImage::from_raw(w as u32, h as u32, raw).context("pixel buffer size")?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

async fn view(State(app): State<Shared>, Path(id): Path<String>, Query(q): Query<ViewQuery>) -> ApiResult<Response> {
    if !(q.fix_x.is_finite() && q.fix_y.is_finite()) {
        return Err(ApiError::bad_request("fixation must be finite"));
    }
    let key = (id.clone(), q.fix_x.to_bits(), q.fix_y.to_bits());
    let cached = app.renders.lock().unwrap_or_else(|p| p.into_inner()).get(&key).cloned();
    let png = match cached {
        Some(p) => p,
        None => {
            let t = app.trial(&id)?;
            let app2 = app.clone();
            let png = blocking(move || {
                let img = app2.image(&t)?;
                let r = app2.retina.transform(&img, Vec2::new(q.fix_x, q.fix_y));
                render_png(&r.pixels).map_err(ApiError::internal)
            })
            .await?;
            let png = Arc::new(png);
            let mut cache = app.renders.lock().unwrap_or_else(|p| p.into_inner());
            if cache.len() >= RENDER_CACHE {
                cache.clear();
            }
            cache.insert(key, png.clone());
            png
        }
    };
    Ok(([(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "public, max-age=31536000, immutable")], png.as_ref().clone()).into_response())
}

/// The unfoveated stimulus, only once the trial is over.
async fn full_image(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let t = app.trial(&id)?;
    if t.status != Status::Responded {
        return Err(ApiError::conflict("full image is available after the response"));
    }
    let app2 = app.clone();
    let png = blocking(move || render_png(&app2.image(&t)?.pixels).map_err(ApiError::internal)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Debug, Deserialize)]
pub struct Point {
    pub x_deg: f64,
    pub y_deg: f64,
}

fn check_point(p: &Point) -> ApiResult<Vec2> {
    let v = Vec2::new(p.x_deg, p.y_deg);
    let lim = SEARCH_IMAGE_SPAN_DEG / 2.0;
    if !v.is_finite() || v.x.abs() > lim || v.y.abs() > lim {
        return Err(ApiError::bad_request(format!("location must be finite and within ±{lim} deg")));
    }
    Ok(v)
}

async fn add_fixation(State(app): State<Shared>, Path(id): Path<String>, Json(p): Json<Point>) -> ApiResult<Json<Value>> {
    let v = check_point(&p)?;
    let mut inner = app.lock();
    let t = inner.reg.trials.get(&id).ok_or_else(|| ApiError::not_found("trial", &id))?;
    if t.status != Status::Active {
        return Err(ApiError::conflict("trial already has a response"));
    }
    let e = Event::Fixation { trial_id: id.clone(), x_deg: v.x, y_deg: v.y };
    inner.store.append(&e).map_err(ApiError::internal)?;
    inner.reg.apply(&e);
    let k = inner.reg.trials[&id].fixations.len();
    Ok(Json(json!({ "trial_id": id, "fixation_index": k, "fixation": v, "view": view_url(&id, v) })))
}

async fn respond(State(app): State<Shared>, Path(id): Path<String>, Json(p): Json<Point>) -> ApiResult<Json<Value>> {
    let v = check_point(&p)?;
    let mut inner = app.lock();
    let t = inner.reg.trials.get(&id).ok_or_else(|| ApiError::not_found("trial", &id))?;
    if t.status != Status::Active {
        return Err(ApiError::conflict("trial already has a response"));
    }
    let correct = is_correct_response(v, t.target_deg);
    let target = t.target_deg;
    let e = Event::Response { trial_id: id.clone(), x_deg: v.x, y_deg: v.y, correct };
    inner.store.append(&e).map_err(ApiError::internal)?;
    inner.reg.apply(&e);
    let t = inner.reg.trials[&id].clone();
    let mode = inner.reg.sessions.get(&t.session_id).map(|s| s.mode).unwrap_or(Mode::Human);
    if let Some(rec) = t.record(mode) {
        inner.store.append_trial(&rec).map_err(ApiError::internal)?;
    }
    Ok(Json(json!({
        "trial_id": id,
        "correct": correct,
        "target": target,
        "response": v,
        "distance_deg": v.dist(target),
        "fixations": t.fixations.len(),
    })))
}

#[derive(Debug, Serialize)]
struct Scanpath {
    trial_id: String,
    session_id: String,
    status: Status,
    fixations: Vec<Vec2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<Vec2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<Vec2>,
}

async fn scanpath(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Scanpath>> {
    let t = app.trial(&id)?;
    let done = t.status == Status::Responded;
    Ok(Json(Scanpath {
        trial_id: t.trial_id,
        session_id: t.session_id,
        status: t.status,
        fixations: t.fixations,
        response: t.response,
        correct: t.correct,
        // Hidden until the observer has answered.
        target: done.then_some(t.target_deg),
    }))
}

#[derive(Debug, Deserialize)]
pub struct CompareQuery {
    pub policy: String,
}

/// Replay a model on the same stimulus (same target, same seed).
pub fn replay(app: &AppState, t: &LiveTrial, policy: &str) -> ApiResult<TrialRecord> {
    match policy {
        "elm" => {
            let target = app.elm.nearest(t.target_deg);
            let tr = app.elm.run_trial(target, t.seed);
            let mut rec = app.elm.trial_record(&tr, t.seed);
            rec.target_deg = t.target_deg;
            rec.outcome = match rec.response_deg {
                Some(r) if rec.outcome != vsearch_core::trial::Outcome::Timeout => {
                    if is_correct_response(r, t.target_deg) { vsearch_core::trial::Outcome::Correct } else { vsearch_core::trial::Outcome::Error }
                }
                _ => rec.outcome,
            };
            Ok(rec)
        }
        "agent" | "circular" => {
            let mut pol: Box<dyn SearchPolicy> = match policy {
                "agent" => match &app.agent {
                    Some(p) => Box::new(p.clone()),
                    None => return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "agent policy unavailable: no checkpoint loaded")),
                },
                _ => Box::new(CircularScan::default()),
            };
            let scene = Scene { target_deg: t.target_deg, contrast: t.contrast };
            let det = OracleDetector::new(OracleDetectorConfig::default());
            let cfg = AgentConfig { initial: InitialFixation::Fixed(t.fixations[0]), ..AgentConfig::default() };
            Ok(run_agent_trial(&scene, &det, pol.as_mut(), &cfg, t.seed).record(t.seed, policy))
        }
        other => Err(ApiError::bad_request(format!("unknown policy '{other}' (expected elm, agent or circular)"))),
    }
}

async fn compare(State(app): State<Shared>, Path(id): Path<String>, Query(q): Query<CompareQuery>) -> ApiResult<Json<Value>> {
    if !matches!(q.policy.as_str(), "elm" | "agent" | "circular") {
        return Err(ApiError::bad_request(format!("unknown policy '{}' (expected elm, agent or circular)", q.policy)));
    }
    let t = app.trial(&id)?;
    if t.status != Status::Responded {
        return Err(ApiError::conflict("trial has no response yet"));
    }
    let app2 = app.clone();
    let policy = q.policy.clone();
    let t2 = t.clone();
    let rec = blocking(move || replay(&app2, &t2, &policy)).await?;
    Ok(Json(json!({
        "trial_id": id,
        "policy": q.policy,
        "target": t.target_deg,
        "human": { "fixations": t.fixations, "response": t.response, "correct": t.correct },
        "model": {
            "fixations": rec.fixations_deg,
            "response": rec.response_deg,
            "outcome": rec.outcome,
            "correct": rec.outcome.is_correct(),
        },
    })))
}

async fn session_summary(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let inner = app.lock();
    let s = inner.reg.sessions.get(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
    let recs: Vec<TrialRecord> = s.trial_ids.iter().filter_map(|t| inner.reg.trials.get(t)).filter_map(|t| t.record(s.mode)).collect();
    drop(inner);
    if recs.is_empty() {
        return Ok(Json(json!({ "trials": 0 })));
    }
    let summary = summarize(&recs).map_err(ApiError::internal)?;
    serde_json::to_value(summary).map(Json).map_err(ApiError::internal)
}

/// Bind and serve until ctrl-c; the log is synced before returning.
pub async fn serve(cfg: ServiceConfig, addr: SocketAddr) -> Result<()> {
    let state = AppState::open(cfg)?;
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("cannot bind {addr} (port in use?)"))?;
    eprintln!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            eprintln!("shutting down");
        })
        .await?;
    state.sync()
}

