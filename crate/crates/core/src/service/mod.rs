//! HTTP service over a data directory: serves the atlas and the authored
//! highlight links, keeps a gallery, applies textures to the presentation
//! objects, runs interpolation jobs in the background and replots frames.
//!
//! Everything the service owns lives in one directory (see [`store`]), so a
//! restart reloads an equivalent state. Jobs that were still pending or
//! running come back as failed.

mod api;
pub mod store;

use axum::Router;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;
use tokio::sync::{Mutex, RwLock};

use crate::atlas::{Atlas, AtlasError};
use crate::gateway::{GatewayConfig, ProviderError, ProviderMode, ProviderSet};
pub use api::{AtlasSummary, HighlightResponse, JobView, SummaryTerm, SummaryTexture};
pub use store::{GalleryItem, Store, TargetObjectInfo};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("corrupt service state: {0}")]
    Corrupt(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Listen address, data directory and provider selection. Read from a TOML
/// file, then overridden by `ATLAS_LISTEN`, `ATLAS_DATA_DIR`,
/// `ATLAS_PROVIDER_MODE` and `ATLAS_SEED`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub listen: String,
    pub provider: GatewayConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { data_dir: PathBuf::from("atlas-data"), listen: DEFAULT_LISTEN.into(), provider: GatewayConfig::default() }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServiceError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// Applies overrides from `lookup` (normally `std::env::var`).
    pub fn with_env(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        if let Some(v) = lookup("ATLAS_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = lookup("ATLAS_DATA_DIR") {
            self.data_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup("ATLAS_PROVIDER_MODE") {
            self.provider.mode = v.parse::<ProviderMode>().map_err(ServiceError::Config)?;
        }
        if let Some(v) = lookup("ATLAS_SEED") {
            self.provider.seed = v.parse().map_err(|e| ServiceError::Config(format!("ATLAS_SEED: {e}")))?;
        }
        Ok(self)
    }
}

pub(crate) struct Meta {
    pub gallery: store::GalleryFile,
    pub jobs: store::JobsFile,
    pub composites: BTreeMap<String, String>,
}

pub(crate) struct Shared {
    pub store: Store,
    pub providers: ProviderSet,
    pub objects: Vec<TargetObjectInfo>,
    pub atlas: RwLock<Option<Atlas>>,
    pub meta: Mutex<Meta>,
}

/// Cheaply cloneable handle to the service state.
#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Shared>,
}

impl AppState {
    /// Opens the data directory: gallery, jobs, composites and the object
    /// images. The atlas is not loaded yet; until [`AppState::load_atlas`]
    /// succeeds, atlas-backed endpoints answer 503.
    pub fn open(data_dir: impl Into<PathBuf>, providers: ProviderSet) -> Result<Self, ServiceError> {
        let store = Store::new(data_dir);
        let objects = store.ensure_objects()?;
        let meta = Meta { gallery: store.load_gallery()?, jobs: store.load_jobs()?, composites: store.load_composites()? };
        Ok(Self {
            inner: Arc::new(Shared { store, providers, objects, atlas: RwLock::new(None), meta: Mutex::new(meta) }),
        })
    }

    /// Reads `atlas.json` from the data directory and makes it live.
    pub async fn load_atlas(&self) -> Result<(), ServiceError> {
        let store = self.inner.store.clone();
        let atlas = tokio::task::spawn_blocking(move || store.load_atlas())
            .await
            .map_err(|e| ServiceError::Corrupt(format!("atlas loader panicked: {e}")))??;
        *self.inner.atlas.write().await = Some(atlas);
        Ok(())
    }

    /// Makes an in-memory atlas live and persists it.
    pub async fn install_atlas(&self, atlas: Atlas) -> Result<(), ServiceError> {
        self.inner.store.save_atlas(&atlas)?;
        *self.inner.atlas.write().await = Some(atlas);
        Ok(())
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn router(&self) -> Router {
        api::router(self.clone())
    }
}

/// Binds `config.listen`, starts answering immediately and loads the atlas
/// in the background. Runs until `shutdown` resolves.
pub async fn serve(
    config: &ServiceConfig,
    providers: ProviderSet,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let state = AppState::open(&config.data_dir, providers)?;
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|source| ServiceError::Io { path: PathBuf::from(&config.listen), source })?;
    tracing::info!(listen = %config.listen, data_dir = %config.data_dir.display(), "serving");
    let loader = state.clone();
    tokio::spawn(async move {
        match loader.load_atlas().await {
            Ok(()) => tracing::info!("atlas loaded"),
            Err(e) => tracing::error!(error = %e, "atlas failed to load"),
        }
    });
    serve_on(listener, state, shutdown).await
}

/// Serves `state` on an already bound listener.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let addr = listener.local_addr().map(|a| a.to_string()).unwrap_or_default();
    axum::serve(listener, state.router())
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|source| ServiceError::Io { path: PathBuf::from(addr), source })
}
