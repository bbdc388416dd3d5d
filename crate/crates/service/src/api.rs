//! REST API for interactive annotation sessions.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use slicewise_core::metrics::{dice, dice_slice, hd95, nsd, Tolerance};
use slicewise_core::nifti::{self, NiftiError};
use slicewise_core::plane::{Frame, MaskSlice};
use slicewise_core::prompt::{
    select_center_slice, Click, ClickLabel, InteractiveSegmenter, ReferenceSegmenter,
    RemoteSegmenter,
};
use slicewise_core::propagation::{
    propagate_with, Propagator, Provenance, ReferencePropagator, RemotePropagator,
    DEFAULT_STEP_TIMEOUT,
};
use slicewise_core::volume::{to_frames, DEFAULT_AXIS};
use slicewise_core::{MaskVolume, Volume, VoxelGrid, WindowSpec};

use crate::error::{parse_json, ApiError, ApiJson};
use crate::session::{
    JobState, PromptEvent, PromptState, PropagationJob, Session, SessionStatus, VolumeScores,
};

pub const DEFAULT_TTL: Duration = Duration::from_secs(2 * 60 * 60);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Finished volume masks are written here as `<session>_mask.nii.gz`.
    pub data_dir: Option<PathBuf>,
    pub ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            ttl: DEFAULT_TTL,
        }
    }
}

type SessionRef = Arc<Mutex<Session>>;

pub struct AppState {
    sessions: RwLock<HashMap<String, SessionRef>>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            sessions: RwLock::new(HashMap::new()),
            config,
        })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    fn session(&self, id: &str) -> Result<SessionRef, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| unknown_session(id))
    }

    /// Drops sessions idle for longer than the TTL, except those with a
    /// propagation in flight. Returns how many were removed.
    pub fn evict_expired(&self, now: Instant) -> usize {
        let mut sessions = self.sessions.write().unwrap();
        let before = sessions.len();
        let ttl = self.config.ttl;
        sessions.retain(|_, s| match s.try_lock() {
            Ok(s) => {
                s.status == SessionStatus::Propagating
                    || now.saturating_duration_since(s.last_access) <= ttl
            }
            Err(_) => true,
        });
        before - sessions.len()
    }
}

fn unknown_session(id: &str) -> ApiError {
    ApiError::new(
        StatusCode::NOT_FOUND,
        "unknown_session",
        format!("no session `{id}`"),
    )
}

/// Periodically evicts expired sessions. Must be called inside a runtime.
pub fn spawn_sweeper(state: Arc<AppState>) -> tokio::task::JoinHandle<()> {
    let period = (state.config.ttl / 4).clamp(Duration::from_millis(200), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            state.evict_expired(Instant::now());
        }
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/clicks", post(add_click))
        .route("/sessions/{id}/mask-prompt", post(set_mask_prompt))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/propagate", post(start_propagation))
        .route("/sessions/{id}/progress", get(progress))
        .route("/sessions/{id}/frames/{file}", get(frame_png))
        .route("/sessions/{id}/masks/{k}", get(fetch_mask))
        .route("/sessions/{id}/metrics", get(metrics))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

/// `"reference"` or `{"remote": "http://host:port"}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendSpec {
    #[default]
    Reference,
    Remote(String),
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    /// Server-side NIfTI path.
    #[serde(default)]
    pub volume_path: Option<PathBuf>,
    /// Uploaded NIfTI file, base64.
    #[serde(default)]
    pub volume_base64: Option<String>,
    #[serde(default)]
    pub gt_path: Option<PathBuf>,
    #[serde(default)]
    pub gt_base64: Option<String>,
    #[serde(default)]
    pub axis: Option<usize>,
    #[serde(default)]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub segmenter_2d: BackendSpec,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProgressView {
    pub state: String,
    pub done: usize,
    pub total: usize,
    /// Per slice: prompt, forward, backward, or pending.
    pub provenance: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: SessionStatus,
    pub axis: usize,
    pub n_slices: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub active_slice: usize,
    pub has_gt: bool,
    pub history_len: usize,
    pub round: u32,
    pub prompt_slice: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionView {
    pub slice: Option<usize>,
    pub round: u32,
    pub mask_rle: Option<Vec<u32>>,
    /// Dice against the attached ground truth slice, when there is one.
    pub dice: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct ClickRequest {
    #[serde(default)]
    pub slice: Option<usize>,
    pub row: usize,
    pub col: usize,
    pub label: ClickLabel,
}

#[derive(Debug, Deserialize)]
pub struct MaskPromptRequest {
    #[serde(default)]
    pub slice: Option<usize>,
    pub mask_rle: Vec<u32>,
}

#[derive(Debug, Default, Deserialize)]
pub struct PropagateRequest {
    #[serde(default)]
    pub backend: BackendSpec,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MaskView {
    pub index: usize,
    pub provenance: Provenance,
    pub mask_rle: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsView {
    /// Slice with the most ground-truth foreground.
    pub gt_center_slice: usize,
    pub prediction_slice: Option<usize>,
    pub prediction_dice: Option<f64>,
    /// Present once a propagation has finished.
    pub volume: Option<VolumeScores>,
}

fn view(s: &Session) -> SessionView {
    let (h, w) = s.stack.frame_shape();
    SessionView {
        session_id: s.id.clone(),
        status: s.status,
        axis: s.stack.axis,
        n_slices: s.n_slices(),
        frame_height: h,
        frame_width: w,
        active_slice: s.active_slice,
        has_gt: s.gt.is_some(),
        history_len: s.events.len(),
        round: s.prompts.round(),
        prompt_slice: s.prompts.slice,
    }
}

fn prediction_view(s: &Session) -> PredictionView {
    let slice = s.prompts.slice;
    let pred = s.prompts.prediction.as_ref();
    let dice = match (slice, pred) {
        (Some(k), Some(p)) => s.gt_slice(k).and_then(|g| dice_slice(p, &g).ok()),
        _ => None,
    };
    PredictionView {
        slice,
        round: s.prompts.round(),
        mask_rle: pred.map(|m| m.to_rle()),
        dice,
    }
}

fn nifti_error(e: NiftiError, what: &str) -> ApiError {
    match e {
        NiftiError::Io(io) => ApiError::bad_request(format!("cannot read {what}: {io}"))
            .with_field(format!("{what}_path")),
        NiftiError::Format { field, message } => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_volume",
            format!("{what}: malformed header field `{field}`: {message}"),
        )
        .with_field(field),
        other => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_volume",
            format!("{what}: {other}"),
        ),
    }
}

fn read_input(
    path: &Option<PathBuf>,
    b64: &Option<String>,
    what: &str,
) -> Result<Option<Volume>, ApiError> {
    let bytes = match (path, b64) {
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request(format!(
                "give either {what}_path or {what}_base64, not both"
            )))
        }
        (Some(p), None) => std::fs::read(p).map_err(|e| {
            ApiError::bad_request(format!("cannot read {}: {e}", p.display()))
                .with_field(format!("{what}_path"))
        })?,
        (None, Some(s)) => STANDARD.decode(s).map_err(|e| {
            ApiError::bad_request(format!("{what}_base64: {e}"))
                .with_field(format!("{what}_base64"))
        })?,
        (None, None) => return Ok(None),
    };
    nifti::read_volume(&bytes)
        .map(Some)
        .map_err(|e| nifti_error(e, what))
}

fn make_segmenter(spec: &BackendSpec) -> Box<dyn InteractiveSegmenter> {
    match spec {
        BackendSpec::Reference => Box::new(ReferenceSegmenter::default()),
        BackendSpec::Remote(url) => Box::new(RemoteSegmenter::new(url, DEFAULT_STEP_TIMEOUT)),
    }
}

fn check_backend(spec: &BackendSpec, field: &str) -> Result<(), ApiError> {
    match spec {
        BackendSpec::Remote(url)
            if !(url.starts_with("http://") || url.starts_with("https://")) =>
        {
            Err(ApiError::bad_request(format!("`{url}` is not an http(s) URL")).with_field(field))
        }
        _ => Ok(()),
    }
}

fn build_session(req: CreateSession) -> Result<Session, ApiError> {
    let axis = req.axis.unwrap_or(DEFAULT_AXIS);
    if axis > 2 {
        return Err(
            ApiError::bad_request(format!("axis {axis} is not 0, 1 or 2")).with_field("axis"),
        );
    }
    check_backend(&req.segmenter_2d, "segmenter_2d")?;
    let volume = read_input(&req.volume_path, &req.volume_base64, "volume")?.ok_or_else(|| {
        ApiError::bad_request("volume_path or volume_base64 is required").with_field("volume_path")
    })?;
    let gt = match read_input(&req.gt_path, &req.gt_base64, "gt")? {
        Some(g) => {
            let mask = nifti::mask_from_labels(&g).map_err(|e| nifti_error(e, "gt"))?;
            if mask.dims() != volume.dims() {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid_volume",
                    format!(
                        "gt dims {:?} differ from volume dims {:?}",
                        mask.dims(),
                        volume.dims()
                    ),
                )
                .with_field("gt"));
            }
            Some(mask)
        }
        None => None,
    };
    let window = req
        .window
        .unwrap_or_else(|| WindowSpec::for_modality(volume.modality()));
    window
        .validate()
        .map_err(|e| ApiError::bad_request(e.to_string()).with_field("window"))?;
    let stack = to_frames(&volume, axis, window)
        .map_err(|e| ApiError::bad_request(e.to_string()).with_field("window"))?;
    let active_slice = gt
        .as_ref()
        .and_then(|g| select_center_slice(g, axis).ok())
        .unwrap_or(stack.len() / 2);
    Ok(Session {
        id: uuid::Uuid::new_v4().simple().to_string(),
        volume,
        stack: Arc::new(stack),
        gt,
        active_slice,
        events: Vec::new(),
        prompts: PromptState::default(),
        segmenter: Some(make_segmenter(&req.segmenter_2d)),
        status: SessionStatus::Idle,
        job: None,
        last_access: Instant::now(),
    })
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    ApiJson(req): ApiJson<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let session = blocking(move || build_session(req)).await?;
    let v = view(&session);
    app.sessions
        .write()
        .unwrap()
        .insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(v)))
}

async fn get_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let s = app.session(&id)?;
    let mut s = s.lock().unwrap();
    s.touch();
    Ok(Json(view(&s)))
}

async fn delete_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    match app.sessions.write().unwrap().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(unknown_session(&id)),
    }
}

fn ensure_idle(s: &Session) -> Result<(), ApiError> {
    let busy = match s.status {
        SessionStatus::Idle | SessionStatus::Error => return Ok(()),
        SessionStatus::Predicting => "a prediction",
        SessionStatus::Propagating => "a propagation",
    };
    Err(ApiError::conflict(
        "session_busy",
        format!("session is busy with {busy}"),
    ))
}

fn check_slice(s: &Session, slice: usize) -> Result<(), ApiError> {
    if slice >= s.n_slices() {
        return Err(
            ApiError::bad_request(format!("slice {slice} outside 0..{}", s.n_slices()))
                .with_field("slice"),
        );
    }
    Ok(())
}

/// Recomputes the prompt state outside the session lock, then commits it.
/// `events` is the full new history; `incremental` applies only its last
/// event to the current state instead of replaying everything.
fn recompute(
    session: &SessionRef,
    events: Vec<PromptEvent>,
    incremental: bool,
) -> Result<PredictionView, ApiError> {
    let (stack, mut state, mut seg) = {
        let mut s = session.lock().unwrap();
        ensure_idle(&s)?;
        let seg = s
            .segmenter
            .take()
            .ok_or_else(|| ApiError::conflict("session_busy", "segmenter in use"))?;
        s.status = SessionStatus::Predicting;
        let state = if incremental {
            s.prompts.clone()
        } else {
            PromptState::default()
        };
        (Arc::clone(&s.stack), state, seg)
    };
    let outcome = if incremental {
        match events.last() {
            Some(e) => state.apply(e, &stack.frames, seg.as_mut()),
            None => Ok(()),
        }
    } else {
        PromptState::replay(&events, &stack.frames, seg.as_mut()).map(|s| state = s)
    };
    let mut s = session.lock().unwrap();
    s.segmenter = Some(seg);
    s.status = SessionStatus::Idle;
    s.touch();
    match outcome {
        Ok(()) => {
            if let Some(k) = state.slice {
                s.active_slice = k;
            }
            s.events = events;
            s.prompts = state;
            Ok(prediction_view(&s))
        }
        Err(e) => Err(ApiError::new(
            StatusCode::BAD_GATEWAY,
            "segmenter_failed",
            e.to_string(),
        )),
    }
}

async fn add_click(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<ClickRequest>,
) -> Result<Json<PredictionView>, ApiError> {
    let session = app.session(&id)?;
    blocking(move || {
        let events = {
            let s = session.lock().unwrap();
            ensure_idle(&s)?;
            let slice = req.slice.unwrap_or(s.active_slice);
            check_slice(&s, slice)?;
            let (h, w) = s.stack.frame_shape();
            if req.row >= h {
                return Err(
                    ApiError::bad_request(format!("row {} outside 0..{h}", req.row))
                        .with_field("row"),
                );
            }
            if req.col >= w {
                return Err(
                    ApiError::bad_request(format!("col {} outside 0..{w}", req.col))
                        .with_field("col"),
                );
            }
            let mut events = s.events.clone();
            events.push(PromptEvent::Click {
                slice,
                click: Click {
                    row: req.row,
                    col: req.col,
                    label: req.label,
                    round: 0,
                },
            });
            events
        };
        recompute(&session, events, true)
    })
    .await
    .map(Json)
}

async fn set_mask_prompt(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<MaskPromptRequest>,
) -> Result<Json<PredictionView>, ApiError> {
    let session = app.session(&id)?;
    blocking(move || {
        let events = {
            let s = session.lock().unwrap();
            ensure_idle(&s)?;
            let slice = req.slice.unwrap_or(s.active_slice);
            check_slice(&s, slice)?;
            let (h, w) = s.stack.frame_shape();
            let mask = MaskSlice::from_rle(h, w, &req.mask_rle).map_err(|e| {
                ApiError::bad_request(format!("mask for a {h}x{w} frame: {e}"))
                    .with_field("mask_rle")
            })?;
            let mut events = s.events.clone();
            events.push(PromptEvent::Mask { slice, mask });
            events
        };
        recompute(&session, events, true)
    })
    .await
    .map(Json)
}

async fn undo(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<PredictionView>, ApiError> {
    let session = app.session(&id)?;
    blocking(move || {
        let events = {
            let s = session.lock().unwrap();
            ensure_idle(&s)?;
            if s.events.is_empty() {
                return Err(ApiError::conflict("empty_history", "nothing to undo"));
            }
            s.events[..s.events.len() - 1].to_vec()
        };
        recompute(&session, events, false)
    })
    .await
    .map(Json)
}

fn make_propagator(spec: &BackendSpec) -> Box<dyn Propagator> {
    match spec {
        BackendSpec::Reference => Box::new(ReferencePropagator::default()),
        BackendSpec::Remote(url) => Box::new(RemotePropagator::new(url, DEFAULT_STEP_TIMEOUT)),
    }
}

fn score(pred: &MaskVolume, gt: &MaskVolume, spacing: [f64; 3]) -> Option<VolumeScores> {
    Some(VolumeScores {
        dice: dice(pred, gt).ok()?,
        nsd: nsd(pred, gt, spacing, Tolerance::default()).ok()?,
        hd95: hd95(pred, gt, spacing).ok(),
    })
}

async fn start_propagation(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<ProgressView>), ApiError> {
    let req: PropagateRequest = if body.iter().all(u8::is_ascii_whitespace) {
        PropagateRequest::default()
    } else {
        parse_json(&body)?
    };
    check_backend(&req.backend, "backend")?;
    let session = app.session(&id)?;
    let (job, stack, prompt, volume, gt, session_id) = {
        let mut s = session.lock().unwrap();
        ensure_idle(&s)?;
        let (Some(center), Some(prompt)) = (s.prompts.slice, s.prompts.prediction.clone()) else {
            return Err(ApiError::conflict(
                "no_prompt",
                "add a click or a mask prompt first",
            ));
        };
        let job = Arc::new(PropagationJob::new(s.n_slices(), center));
        s.job = Some(Arc::clone(&job));
        s.status = SessionStatus::Propagating;
        s.touch();
        (
            job,
            Arc::clone(&s.stack),
            prompt,
            s.volume.clone(),
            s.gt.clone(),
            s.id.clone(),
        )
    };
    let data_dir = app.config.data_dir.clone();
    let worker_session = Arc::clone(&session);
    let worker_job = Arc::clone(&job);
    std::thread::spawn(move || {
        let job = worker_job;
        let factory = || make_propagator(&req.backend);
        let observer = |u: slicewise_core::propagation::SliceUpdate<'_>| {
            job.record(u.index, u.provenance, u.mask)
        };
        match propagate_with(&stack, &prompt, job.center, &factory, &observer) {
            Err(e) => job.finish(JobState::Error, Some(e.to_string())),
            Ok(res) if !res.is_complete() => {
                let msg: Vec<String> = res
                    .failures
                    .iter()
                    .map(|f| {
                        format!(
                            "{:?} pass stopped at slice {}: {}",
                            f.direction, f.at_index, f.error
                        )
                    })
                    .collect();
                job.finish(JobState::Error, Some(msg.join("; ")));
            }
            Ok(res) => {
                if let Some(gt) = &gt {
                    *job.scores.lock().unwrap() = score(&res.mask, gt, volume.spacing());
                }
                let saved = match &data_dir {
                    Some(dir) => nifti::save_mask(
                        &res.mask,
                        &volume,
                        dir.join(format!("{session_id}_mask.nii.gz")),
                    )
                    .map_err(|e| format!("write-through failed: {e}")),
                    None => Ok(()),
                };
                match saved {
                    Ok(()) => job.finish(JobState::Done, None),
                    Err(e) => job.finish(JobState::Error, Some(e)),
                }
            }
        }
        let mut s = worker_session.lock().unwrap();
        s.status = SessionStatus::Idle;
        s.touch();
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(progress_view(Some(&job), job.total)),
    ))
}

fn progress_view(job: Option<&PropagationJob>, total: usize) -> ProgressView {
    let Some(job) = job else {
        return ProgressView {
            state: "idle".into(),
            done: 0,
            total,
            provenance: vec!["pending".into(); total],
            error: None,
        };
    };
    // read the count before the provenance so `done` never exceeds what is listed
    let done = job.done();
    let provenance = job
        .provenance
        .lock()
        .unwrap()
        .iter()
        .map(|p| match p {
            Some(p) => serde_json::to_value(p)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            None => "pending".into(),
        })
        .collect();
    let (state, error) = job.state.lock().unwrap().clone();
    let state = match state {
        JobState::Running => "running",
        JobState::Done => "done",
        JobState::Error => "error",
    };
    ProgressView {
        state: state.into(),
        done,
        total: job.total,
        provenance,
        error,
    }
}

async fn progress(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<ProgressView>, ApiError> {
    let s = app.session(&id)?;
    let (job, total) = {
        let mut s = s.lock().unwrap();
        s.touch();
        (s.job.clone(), s.n_slices())
    };
    Ok(Json(progress_view(job.as_deref(), total)))
}

fn slice_index(s: &Session, raw: &str) -> Result<usize, ApiError> {
    let k: usize = raw.parse().map_err(|_| {
        ApiError::bad_request(format!("`{raw}` is not a slice index")).with_field("slice")
    })?;
    check_slice(s, k)?;
    Ok(k)
}

pub fn encode_png(frame: &Frame) -> Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, frame.width() as u32, frame.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header()?;
    w.write_image_data(frame.as_slice())?;
    w.finish()?;
    Ok(out)
}

async fn frame_png(
    State(app): State<Arc<AppState>>,
    Path((id, file)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let raw = file
        .strip_suffix(".png")
        .ok_or_else(|| ApiError::not_found(format!("no frame resource `{file}`")))?;
    let s = app.session(&id)?;
    let stack = {
        let mut s = s.lock().unwrap();
        s.touch();
        let k = slice_index(&s, raw)?;
        (Arc::clone(&s.stack), k)
    };
    let png = blocking(move || {
        encode_png(&stack.0.frames[stack.1]).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn fetch_mask(
    State(app): State<Arc<AppState>>,
    Path((id, k)): Path<(String, String)>,
) -> Result<Json<MaskView>, ApiError> {
    let s = app.session(&id)?;
    let mut s = s.lock().unwrap();
    s.touch();
    let k = slice_index(&s, &k)?;
    if let Some(job) = &s.job {
        let slices = job.slices.lock().unwrap();
        if let (Some(mask), Some(p)) = (&slices[k], job.provenance.lock().unwrap()[k]) {
            return Ok(Json(MaskView {
                index: k,
                provenance: p,
                mask_rle: mask.to_rle(),
            }));
        }
    } else if let (Some(slice), Some(pred)) = (s.prompts.slice, &s.prompts.prediction) {
        if slice == k {
            return Ok(Json(MaskView {
                index: k,
                provenance: Provenance::Prompt,
                mask_rle: pred.to_rle(),
            }));
        }
    }
    Err(ApiError::new(
        StatusCode::NOT_FOUND,
        "mask_not_available",
        format!("no mask for slice {k} yet"),
    )
    .with_field("slice"))
}

async fn metrics(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<MetricsView>, ApiError> {
    let s = app.session(&id)?;
    let mut s = s.lock().unwrap();
    s.touch();
    let Some(gt) = &s.gt else {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "no_ground_truth",
            "session has no ground truth",
        ));
    };
    let gt_center_slice = select_center_slice(gt, s.stack.axis).unwrap_or(0);
    let p = prediction_view(&s);
    let volume = s
        .job
        .as_ref()
        .and_then(|j| j.scores.lock().unwrap().clone());
    Ok(Json(MetricsView {
        gt_center_slice,
        prediction_slice: p.slice,
        prediction_dice: p.dice,
        volume,
    }))
}
