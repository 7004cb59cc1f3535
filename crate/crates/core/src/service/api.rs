use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::RwLockReadGuard;
use tower_http::services::ServeDir;

use super::store::GalleryItem;
use super::{AppState, ServiceError};
use crate::atlas::{Atlas, MapBounds};
use crate::embedding::UmapParams;
use crate::gateway::raster::TargetObject;
use crate::gateway::ImageBytes;
use crate::replot::{analyze_frame_features, append_record, frame_path, project_features, InterpolationJob, JobStatus, ReplotError, ReplotRecord, Stage};

pub(super) fn router(state: AppState) -> Router {
    let files = ServeDir::new(state.inner.store.root());
    Router::new()
        .route("/health", get(health))
        .route("/atlas", get(get_atlas))
        .route("/highlight", get(highlight))
        .route("/objects", get(objects))
        .route("/gallery", get(list_gallery).post(add_gallery))
        .route("/gallery/{item_id}", delete(delete_gallery))
        .route("/apply", post(apply))
        .route("/interpolate", post(create_job))
        .route("/interpolate/{job_id}", get(get_job))
        .route("/interpolate/{job_id}/replot", post(replot))
        .nest_service("/files", files)
        .with_state(state)
}

#[derive(Debug)]
pub(super) struct ApiError {
    status: StatusCode,
    message: String,
    stage: Option<Stage>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), stage: None }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn unavailable() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "atlas is not loaded yet")
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "stage": self.stage }))).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Provider(p) => ApiError::new(StatusCode::BAD_GATEWAY, p.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<ReplotError> for ApiError {
    fn from(e: ReplotError) -> Self {
        let status = match &e {
            ReplotError::NotDone { .. } | ReplotError::FrameOutOfRange { .. } | ReplotError::InvalidTransition { .. } => StatusCode::CONFLICT,
            ReplotError::Provider { .. } | ReplotError::Dimension { .. } => StatusCode::BAD_GATEWAY,
            ReplotError::InvalidJob(_) | ReplotError::Projection { .. } | ReplotError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self { status, stage: e.stage(), message: e.to_string() }
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn read_atlas(state: &AppState) -> ApiResult<tokio::sync::RwLockReadGuard<'_, Atlas>> {
    RwLockReadGuard::try_map(state.inner.atlas.read().await, Option::as_ref).map_err(|_| ApiError::unavailable())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker panicked: {e}")))
}

/// Image path (relative to the data directory) of a texture or dynamic point.
fn image_of(atlas: &Atlas, reference: &str) -> ApiResult<String> {
    if let Some(t) = atlas.texture(reference) {
        return Ok(t.image_path.clone());
    }
    match atlas.dynamic_point(reference) {
        Some(r) => r.image_path.clone().ok_or_else(|| ApiError::not_found(format!("dynamic point {reference} has no stored frame"))),
        None => Err(ApiError::not_found(format!("unknown ref {reference}"))),
    }
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    let loaded = state.inner.atlas.read().await.is_some();
    Json(json!({ "atlas_loaded": loaded, "status": "ok" }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTerm {
    pub coord: [f64; 2],
    pub english_description: String,
    pub surface: String,
    pub term_id: String,
    pub texture_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTexture {
    pub coord: [f64; 2],
    pub image_path: String,
    pub term_id: String,
    pub texture_id: String,
    pub thumbnail_path: String,
}

/// Everything a client needs to draw both maps; no embedding vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasSummary {
    pub bounds: MapBounds,
    pub dynamic_points: Vec<ReplotRecord>,
    pub params: UmapParams,
    pub terms: Vec<SummaryTerm>,
    pub textures: Vec<SummaryTexture>,
    pub version: u32,
}

impl AtlasSummary {
    pub fn of(atlas: &Atlas) -> Self {
        let terms = atlas
            .terms
            .iter()
            .map(|t| SummaryTerm {
                coord: t.coord,
                english_description: t.stages.english_description.clone(),
                surface: t.surface.clone(),
                term_id: t.term_id.clone(),
                texture_ids: atlas.highlight_for_term(&t.term_id).unwrap_or_default(),
            })
            .collect();
        let textures = atlas
            .textures
            .iter()
            .map(|t| SummaryTexture {
                coord: t.coord,
                image_path: t.image_path.clone(),
                term_id: t.term_id.clone(),
                texture_id: t.texture_id.clone(),
                thumbnail_path: t.thumbnail_path.clone(),
            })
            .collect();
        Self { bounds: atlas.bounds, dynamic_points: atlas.dynamic_points.clone(), params: atlas.params.clone(), terms, textures, version: atlas.version }
    }
}

async fn get_atlas(State(state): State<AppState>) -> ApiResult<Json<AtlasSummary>> {
    Ok(Json(AtlasSummary::of(&*read_atlas(&state).await?)))
}

#[derive(Deserialize)]
struct HighlightQuery {
    kind: String,
    id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreviewItem {
    pub texture_id: String,
    pub thumbnail_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighlightResponse {
    /// Ids emphasized in the other map.
    pub highlighted_ids: Vec<String>,
    /// The owning term's 1-3 texture variations.
    pub preview: Vec<PreviewItem>,
}

async fn highlight(State(state): State<AppState>, Query(q): Query<HighlightQuery>) -> ApiResult<Json<HighlightResponse>> {
    let atlas = read_atlas(&state).await?;
    let (highlighted_ids, owner) = match q.kind.as_str() {
        "term" => {
            let ids = atlas.highlight_for_term(&q.id).map_err(|e| ApiError::not_found(e.to_string()))?;
            (ids, q.id.clone())
        }
        "texture" => {
            let term = atlas.highlight_for_texture(&q.id).map_err(|e| ApiError::not_found(e.to_string()))?;
            (vec![term.clone()], term)
        }
        other => return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("kind must be term or texture, got {other:?}"))),
    };
    let preview = atlas
        .highlight_for_term(&owner)
        .unwrap_or_default()
        .into_iter()
        .filter_map(|id| atlas.texture(&id).map(|t| PreviewItem { texture_id: id, thumbnail_path: t.thumbnail_path.clone() }))
        .collect();
    Ok(Json(HighlightResponse { highlighted_ids, preview }))
}

async fn objects(State(state): State<AppState>) -> Json<Vec<super::TargetObjectInfo>> {
    Json(state.inner.objects.clone())
}

#[derive(Deserialize)]
struct GalleryRequest {
    #[serde(rename = "ref")]
    reference: String,
}

async fn list_gallery(State(state): State<AppState>) -> Json<Vec<GalleryItem>> {
    Json(state.inner.meta.lock().await.gallery.items.clone())
}

async fn add_gallery(State(state): State<AppState>, Json(req): Json<GalleryRequest>) -> ApiResult<(StatusCode, Json<GalleryItem>)> {
    {
        let atlas = read_atlas(&state).await?;
        if atlas.texture(&req.reference).is_none() && atlas.dynamic_point(&req.reference).is_none() {
            return Err(ApiError::not_found(format!("unknown ref {}", req.reference)));
        }
    }
    let mut meta = state.inner.meta.lock().await;
    let mut gallery = meta.gallery.clone();
    gallery.next_item += 1;
    let item = GalleryItem {
        added_at: now_millis(),
        item_id: format!("item-{:06}", gallery.next_item),
        position: gallery.items.len(),
        reference: req.reference,
    };
    gallery.items.push(item.clone());
    state.inner.store.save_gallery(&gallery)?;
    meta.gallery = gallery;
    Ok((StatusCode::CREATED, Json(item)))
}

async fn delete_gallery(State(state): State<AppState>, Path(item_id): Path<String>) -> ApiResult<StatusCode> {
    let mut meta = state.inner.meta.lock().await;
    let mut gallery = meta.gallery.clone();
    let Some(pos) = gallery.items.iter().position(|i| i.item_id == item_id) else {
        return Err(ApiError::not_found(format!("unknown gallery item {item_id}")));
    };
    gallery.items.remove(pos);
    for (i, item) in gallery.items.iter_mut().enumerate() {
        item.position = i;
    }
    state.inner.store.save_gallery(&gallery)?;
    meta.gallery = gallery;
    Ok(StatusCode::NO_CONTENT)
}

fn now_millis() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Deserialize)]
struct ApplyRequest {
    object_id: String,
    #[serde(rename = "ref")]
    reference: String,
}

fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

async fn apply(State(state): State<AppState>, Json(req): Json<ApplyRequest>) -> ApiResult<Json<serde_json::Value>> {
    let object = TargetObject::parse(&req.object_id).ok_or_else(|| ApiError::not_found(format!("unknown object {}", req.object_id)))?;
    let texture_path = image_of(&*read_atlas(&state).await?, &req.reference)?;
    let key = format!("{}/{}", object.as_str(), req.reference);
    if let Some(path) = state.inner.meta.lock().await.composites.get(&key) {
        return Ok(Json(json!({ "cached": true, "composite_image_path": path })));
    }

    let worker = state.clone();
    let rel = format!("composites/{}/{}.png", object.as_str(), file_safe(&req.reference));
    let out = rel.clone();
    blocking(move || -> Result<(), ServiceError> {
        let store = &worker.inner.store;
        let base = ImageBytes(store.read_file(&format!("objects/{}.png", object.as_str()))?);
        let texture = ImageBytes(store.read_file(&texture_path)?);
        let composite = worker.inner.providers.apply_texture(&base, &texture)?;
        store.write_file(&out, &composite.0)
    })
    .await??;

    let mut meta = state.inner.meta.lock().await;
    let mut composites = meta.composites.clone();
    composites.insert(key, rel.clone());
    state.inner.store.save_composites(&composites)?;
    meta.composites = composites;
    Ok(Json(json!({ "cached": false, "composite_image_path": rel })))
}

#[derive(Deserialize)]
struct JobRequest {
    texture_a: String,
    texture_b: String,
}

/// Job status as reported to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub error: Option<String>,
    pub frame_count: usize,
    pub frames: Vec<String>,
    pub job_id: String,
    pub source_texture_a: String,
    pub source_texture_b: String,
    pub status: JobStatus,
}

impl From<&InterpolationJob> for JobView {
    fn from(j: &InterpolationJob) -> Self {
        Self {
            error: j.error.clone(),
            frame_count: j.frame_count(),
            frames: j.frames.clone(),
            job_id: j.job_id.clone(),
            source_texture_a: j.source_texture_a.clone(),
            source_texture_b: j.source_texture_b.clone(),
            status: j.status,
        }
    }
}

async fn create_job(State(state): State<AppState>, Json(req): Json<JobRequest>) -> ApiResult<(StatusCode, Json<JobView>)> {
    if req.texture_a == req.texture_b {
        return Err(ApiError::conflict("interpolation needs two different images"));
    }
    let paths = {
        let atlas = read_atlas(&state).await?;
        (image_of(&atlas, &req.texture_a)?, image_of(&atlas, &req.texture_b)?)
    };
    let job = {
        let mut meta = state.inner.meta.lock().await;
        let mut jobs = meta.jobs.clone();
        jobs.next_job += 1;
        let job = InterpolationJob::new(format!("job-{:06}", jobs.next_job), req.texture_a, req.texture_b);
        jobs.jobs.insert(job.job_id.clone(), job.clone());
        state.inner.store.save_jobs(&jobs)?;
        meta.jobs = jobs;
        job
    };
    tokio::spawn(run_job(state, job.job_id.clone(), paths));
    Ok((StatusCode::ACCEPTED, Json(JobView::from(&job))))
}

/// Applies `change` to a job and persists the job table.
async fn update_job(state: &AppState, job_id: &str, change: impl FnOnce(&mut InterpolationJob) -> Result<(), ReplotError>) -> Result<(), ApiError> {
    let mut meta = state.inner.meta.lock().await;
    let mut jobs = meta.jobs.clone();
    let job = jobs.jobs.get_mut(job_id).ok_or_else(|| ApiError::not_found(format!("unknown job {job_id}")))?;
    change(job)?;
    state.inner.store.save_jobs(&jobs)?;
    meta.jobs = jobs;
    Ok(())
}

async fn run_job(state: AppState, job_id: String, (path_a, path_b): (String, String)) {
    if let Err(e) = update_job(&state, &job_id, InterpolationJob::start).await {
        tracing::error!(job_id, error = e.message, "could not start job");
        return;
    }
    let worker = state.clone();
    let id = job_id.clone();
    let outcome = blocking(move || -> Result<Vec<String>, ServiceError> {
        let store = &worker.inner.store;
        let a = ImageBytes(store.read_file(&path_a)?);
        let b = ImageBytes(store.read_file(&path_b)?);
        let frames = worker.inner.providers.interpolate_video(&a, &b)?;
        frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let rel = format!("frames/{id}/{i:02}.png");
                store.write_file(&rel, &f.0).map(|_| rel)
            })
            .collect()
    })
    .await;
    let result = match outcome {
        Ok(Ok(frames)) if !frames.is_empty() => update_job(&state, &job_id, |j| j.complete(frames)).await,
        Ok(Ok(_)) => update_job(&state, &job_id, |j| j.fail("the video provider returned no frames")).await,
        Ok(Err(e)) => update_job(&state, &job_id, |j| j.fail(e.to_string())).await,
        Err(e) => update_job(&state, &job_id, |j| j.fail(e.message)).await,
    };
    if let Err(e) = result {
        tracing::error!(job_id, error = e.message, "could not record job outcome");
    }
}

async fn get_job(State(state): State<AppState>, Path(job_id): Path<String>) -> ApiResult<Json<JobView>> {
    let meta = state.inner.meta.lock().await;
    let job = meta.jobs.jobs.get(&job_id).ok_or_else(|| ApiError::not_found(format!("unknown job {job_id}")))?;
    Ok(Json(JobView::from(job)))
}

#[derive(Deserialize)]
struct ReplotRequest {
    frame_index: usize,
}

async fn replot(State(state): State<AppState>, Path(job_id): Path<String>, Json(req): Json<ReplotRequest>) -> ApiResult<Json<ReplotRecord>> {
    let frame_rel = {
        let meta = state.inner.meta.lock().await;
        let job = meta.jobs.jobs.get(&job_id).ok_or_else(|| ApiError::not_found(format!("unknown job {job_id}")))?;
        frame_path(job, req.frame_index)?.to_string()
    };
    if state.inner.atlas.read().await.is_none() {
        return Err(ApiError::unavailable());
    }
    let frame = ImageBytes(state.inner.store.read_file(&frame_rel)?);

    // Stages 1-3 run without any lock.
    let providers = state.inner.providers.clone();
    let features = blocking(move || analyze_frame_features(&providers, &frame)).await??;

    // Stage 4 only reads the fitted models.
    let worker = state.clone();
    let id = job_id.clone();
    let mut record = blocking(move || -> ApiResult<ReplotRecord> {
        let guard = worker.inner.atlas.blocking_read();
        let atlas = guard.as_ref().ok_or_else(ApiError::unavailable)?;
        Ok(project_features(atlas, features, &id, req.frame_index)?)
    })
    .await??;
    record.image_path = Some(frame_rel);

    let mut guard = state.inner.atlas.write().await;
    let atlas = guard.as_mut().ok_or_else(ApiError::unavailable)?;
    let record = append_record(atlas, record);
    if let Err(e) = state.inner.store.save_atlas(atlas) {
        atlas.dynamic_points.pop();
        return Err(e.into());
    }
    Ok(Json(record))
}
