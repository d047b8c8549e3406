//! Read-only HTTP/JSON API over one immutable ontology snapshot.
//!
//! The service hands out the catalog, preference metadata, sustainability
//! indices and the user-independent inputs of explanations. No route accepts
//! preference scores; personalization happens on the client.

use std::collections::BTreeMap;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::extract::{MatchedPath, Path as UrlPath, Query, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use susrate_core::explain::{tag_detail, TagDetail};
use susrate_core::store::{load_ontology, ontology_version, StoreError};
use susrate_core::{Category, Ontology, RatingConfig, RatingEngine, RatingError};
use tokio::net::TcpListener;

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error("no ontology path configured")]
    NoPath,
    #[error("page size cap must be between 1 and {MAX_PAGE_SIZE}, got {0}")]
    PageSizeCap(usize),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Source for the initial load and for reloads.
    pub ontology_path: Option<PathBuf>,
    pub page_size_cap: usize,
    pub rating: RatingConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { ontology_path: None, page_size_cap: MAX_PAGE_SIZE, rating: RatingConfig::default() }
    }
}

/// An ontology with its index cache and content hash.
#[derive(Debug)]
pub struct Snapshot {
    pub engine: RatingEngine,
    pub version: String,
}

impl Snapshot {
    pub fn build(ontology: Ontology, rating: RatingConfig) -> Result<Self, ServiceError> {
        let version = ontology_version(&ontology);
        let engine = RatingEngine::new(Arc::new(ontology), rating)?;
        Ok(Self { engine, version })
    }

    pub fn ontology(&self) -> &Ontology {
        self.engine.ontology()
    }
}

struct Shared {
    config: ServiceConfig,
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    building: AtomicBool,
    reload: tokio::sync::Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

/// Marks the cache as building until dropped.
pub struct BuildingGuard(AppState);

impl Drop for BuildingGuard {
    fn drop(&mut self) {
        self.0 .0.building.store(false, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheState {
    Empty,
    Building,
    Ready,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        if config.page_size_cap == 0 || config.page_size_cap > MAX_PAGE_SIZE {
            return Err(ServiceError::PageSizeCap(config.page_size_cap));
        }
        config.rating.validate()?;
        Ok(Self(Arc::new(Shared {
            config,
            snapshot: RwLock::new(None),
            building: AtomicBool::new(false),
            reload: tokio::sync::Mutex::new(()),
        })))
    }

    /// Builds the state and loads the configured ontology.
    pub fn load(config: ServiceConfig) -> Result<Self, ServiceError> {
        let path = config.ontology_path.clone().ok_or(ServiceError::NoPath)?;
        let state = Self::new(config)?;
        state.install(read_snapshot(&path, state.config().rating)?);
        Ok(state)
    }

    pub fn with_ontology(ontology: Ontology, config: ServiceConfig) -> Result<Self, ServiceError> {
        let state = Self::new(config)?;
        state.install(Snapshot::build(ontology, state.config().rating)?);
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.0.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Atomically replaces the snapshot, returning the previous one.
    pub fn install(&self, snapshot: Snapshot) -> Option<Arc<Snapshot>> {
        let mut slot = self.0.snapshot.write().unwrap_or_else(|e| e.into_inner());
        slot.replace(Arc::new(snapshot))
    }

    pub fn begin_building(&self) -> BuildingGuard {
        self.0.building.store(true, Ordering::SeqCst);
        BuildingGuard(self.clone())
    }

    pub fn cache_state(&self) -> CacheState {
        if self.0.building.load(Ordering::SeqCst) {
            CacheState::Building
        } else if self.snapshot().is_some() {
            CacheState::Ready
        } else {
            CacheState::Empty
        }
    }

    /// Re-reads the ontology file and swaps the snapshot in. Readers keep the
    /// old snapshot until the new one is complete; concurrent reloads queue.
    pub async fn reload(&self) -> Result<ReloadResponse, ServiceError> {
        let path = self.config().ontology_path.clone().ok_or(ServiceError::NoPath)?;
        let _writer = self.0.reload.lock().await;
        let _building = self.begin_building();
        let rating = self.config().rating;
        let snapshot = tokio::task::spawn_blocking(move || read_snapshot(&path, rating))
            .await
            .map_err(|e| std::io::Error::other(e.to_string()))??;
        let ontology_version = snapshot.version.clone();
        let previous = self.install(snapshot).map(|s| s.version.clone());
        Ok(ReloadResponse { ontology_version, previous_version: previous })
    }
}

fn read_snapshot(path: &Path, rating: RatingConfig) -> Result<Snapshot, ServiceError> {
    let loaded = load_ontology(path)?;
    for finding in &loaded.warnings {
        tracing::warn!(%finding, "ontology warning");
    }
    Snapshot::build(loaded.ontology, rating)
}

/// Accepted inputs of one route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RouteSchema {
    pub method: &'static str,
    pub path: &'static str,
    pub path_params: &'static [&'static str],
    pub query_params: &'static [&'static str],
    pub body_fields: &'static [&'static str],
}

const HEALTH: RouteSchema =
    RouteSchema { method: "GET", path: "/v1/health", path_params: &[], query_params: &[], body_fields: &[] };
const PREFERENCES: RouteSchema =
    RouteSchema { method: "GET", path: "/v1/preferences", path_params: &[], query_params: &[], body_fields: &[] };
const PRODUCTS: RouteSchema = RouteSchema {
    method: "GET",
    path: "/v1/products",
    path_params: &[],
    query_params: &["category", "page", "page_size"],
    body_fields: &[],
};
const INDICES: RouteSchema = RouteSchema {
    method: "GET",
    path: "/v1/products/{id}/indices",
    path_params: &["id"],
    query_params: &[],
    body_fields: &[],
};
const TAG_DETAIL: RouteSchema = RouteSchema {
    method: "GET",
    path: "/v1/products/{id}/tag-detail",
    path_params: &["id"],
    query_params: &[],
    body_fields: &[],
};
const RELOAD: RouteSchema =
    RouteSchema { method: "POST", path: "/v1/admin/reload", path_params: &[], query_params: &[], body_fields: &[] };

/// Every route with the inputs it accepts. Requests carrying any other query
/// parameter are rejected, so this list is exhaustive.
pub fn route_schemas() -> &'static [RouteSchema] {
    &[HEALTH, PREFERENCES, PRODUCTS, INDICES, TAG_DETAIL, RELOAD]
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route(HEALTH.path, get(health))
        .route(PREFERENCES.path, get(preferences))
        .route(PRODUCTS.path, get(products))
        .route(INDICES.path, get(indices))
        .route(TAG_DETAIL.path, get(tag_detail_route))
        .route(RELOAD.path, post(reload))
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve<F>(listener: TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let route = request
        .extensions()
        .get::<MatchedPath>()
        .map(|p| p.as_str().to_owned())
        .unwrap_or_else(|| "unmatched".to_owned());
    let started = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        %method,
        route,
        status = response.status().as_u16(),
        micros = started.elapsed().as_micros() as u64,
        "request"
    );
    response
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

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type Params = Query<BTreeMap<String, String>>;

fn check_params(schema: &RouteSchema, params: &BTreeMap<String, String>) -> Result<(), ApiError> {
    match params.keys().find(|k| !schema.query_params.contains(&k.as_str())) {
        Some(k) => Err(ApiError::bad_request(format!("unknown query parameter `{k}`"))),
        None => Ok(()),
    }
}

fn loaded(state: &AppState) -> Result<Arc<Snapshot>, ApiError> {
    state.snapshot().ok_or_else(|| {
        let message = match state.cache_state() {
            CacheState::Building => "cache building",
            _ => "no ontology loaded",
        };
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, message)
    })
}

#[derive(Debug, Serialize)]
pub struct HealthResponse {
    pub status: &'static str,
    pub ontology_version: Option<String>,
    pub cache: CacheState,
}

async fn health(State(state): State<AppState>, Query(params): Params) -> Result<Json<HealthResponse>, ApiError> {
    check_params(&HEALTH, &params)?;
    Ok(Json(HealthResponse {
        status: "ok",
        ontology_version: state.snapshot().map(|s| s.version.clone()),
        cache: state.cache_state(),
    }))
}

#[derive(Debug, Serialize)]
pub struct PreferenceSummary {
    pub id: String,
    pub statement: String,
    pub description: String,
    pub category: Category,
    pub strict: bool,
}

async fn preferences(
    State(state): State<AppState>,
    Query(params): Params,
) -> Result<Json<Vec<PreferenceSummary>>, ApiError> {
    check_params(&PREFERENCES, &params)?;
    let snapshot = loaded(&state)?;
    let list = snapshot
        .ontology()
        .preferences
        .values()
        .map(|p| PreferenceSummary {
            id: p.id.clone(),
            statement: p.statement.clone(),
            description: p.description.clone(),
            category: p.category,
            strict: p.strict,
        })
        .collect();
    Ok(Json(list))
}

#[derive(Debug, Serialize)]
pub struct ProductSummary {
    pub id: String,
    pub name: String,
    pub category_id: String,
    pub unit_price: Option<f64>,
    pub tag_ids: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ProductPage {
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub ontology_version: String,
    pub products: Vec<ProductSummary>,
}

fn positive(params: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize, ApiError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(ApiError::bad_request(format!("`{key}` must be a positive integer, got `{v}`"))),
        },
    }
}

async fn products(State(state): State<AppState>, Query(params): Params) -> Result<Json<ProductPage>, ApiError> {
    check_params(&PRODUCTS, &params)?;
    let cap = state.config().page_size_cap;
    let page = positive(&params, "page", 1)?;
    let page_size = positive(&params, "page_size", DEFAULT_PAGE_SIZE.min(cap))?;
    if page_size > cap {
        return Err(ApiError::bad_request(format!("`page_size` must be at most {cap}")));
    }
    let snapshot = loaded(&state)?;
    let category = params.get("category");
    let matching: Vec<_> =
        snapshot.ontology().products.values().filter(|p| category.is_none_or(|c| &p.category_id == c)).collect();
    let start = (page - 1).saturating_mul(page_size);
    let products = matching
        .iter()
        .skip(start)
        .take(page_size)
        .map(|p| ProductSummary {
            id: p.id.clone(),
            name: p.name.clone(),
            category_id: p.category_id.clone(),
            unit_price: p.unit_price,
            tag_ids: p.tag_ids.iter().cloned().collect(),
        })
        .collect();
    Ok(Json(ProductPage {
        page,
        page_size,
        total: matching.len(),
        ontology_version: snapshot.version.clone(),
        products,
    }))
}

#[derive(Debug, Serialize)]
pub struct IndexResponse {
    pub product_id: String,
    pub indices: BTreeMap<String, f64>,
    pub ontology_version: String,
}

fn unknown_product(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, format!("unknown product `{id}`"))
}

async fn indices(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Params,
) -> Result<Json<IndexResponse>, ApiError> {
    check_params(&INDICES, &params)?;
    let snapshot = loaded(&state)?;
    let engine = &snapshot.engine;
    let row = engine.index_row(&id).ok_or_else(|| unknown_product(&id))?;
    let indices = engine.preference_ids().iter().cloned().zip(row.iter().copied()).collect();
    Ok(Json(IndexResponse { product_id: id, indices, ontology_version: snapshot.version.clone() }))
}

#[derive(Debug, Serialize)]
pub struct TagDetailResponse {
    #[serde(flatten)]
    pub detail: TagDetail<f64>,
    pub ontology_version: String,
}

async fn tag_detail_route(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Params,
) -> Result<Json<TagDetailResponse>, ApiError> {
    check_params(&TAG_DETAIL, &params)?;
    let snapshot = loaded(&state)?;
    let detail = tag_detail(&snapshot.engine, &id).map_err(|e| match e {
        RatingError::UnknownProduct(_) => unknown_product(&id),
        other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    })?;
    Ok(Json(TagDetailResponse { detail, ontology_version: snapshot.version.clone() }))
}

#[derive(Debug, Serialize)]
pub struct ReloadResponse {
    pub ontology_version: String,
    pub previous_version: Option<String>,
}

async fn reload(State(state): State<AppState>, Query(params): Params) -> Result<Json<ReloadResponse>, ApiError> {
    check_params(&RELOAD, &params)?;
    match state.reload().await {
        Ok(r) => {
            tracing::info!(version = %r.ontology_version, "snapshot replaced");
            Ok(Json(r))
        }
        Err(ServiceError::NoPath) => Err(ApiError::new(StatusCode::CONFLICT, "no ontology path configured")),
        Err(e) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())),
    }
}
