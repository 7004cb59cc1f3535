//! Distance computation, exact neighbor search and a from-scratch UMAP.
//!
//! The pipeline is split into the usual stages so each can be tested on its own:
//! [`knn_exact`] / [`knn_graph`] feed [`calibrate_smooth_knn`] and
//! [`build_fuzzy_graph`], [`find_ab_params`] fits the low-dimensional curve,
//! [`initialize_layout`] produces the starting coordinates and
//! [`optimize_layout`] runs the edge-sampled SGD. [`UmapModel`] ties them
//! together for fitting and out-of-sample transforms.

mod calibrate;
mod curve;
mod distance;
mod fuzzy;
mod init;
mod knn;
mod model;
mod optimize;
mod trust;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibrate::{calibrate_smooth_knn, calibration_mass, Calibration, BISECTION_MAX_ITER, SIGMA_MAX, SIGMA_MIN, SMOOTH_K_TOLERANCE};
pub use curve::{curve_value, find_ab_params, CurveFit};
pub use distance::{cosine_distance, distance, euclidean_distance};
pub use fuzzy::{build_fuzzy_graph, membership_strengths, FuzzyGraph};
pub use init::{initialize_layout, random_layout, LAYOUT_BOX};
pub use knn::{knn_exact, knn_graph, KnnGraph, Neighbors};
pub use model::{transform_epochs, UmapModel};
pub use optimize::{optimize_layout, GRADIENT_CLIP};
pub use trust::trustworthiness;

/// A 2D layout, one row per point.
pub type Coords = Vec<[f64; 2]>;

pub type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero-norm vector cannot be compared with cosine distance")]
    ZeroNorm,
    #[error("vector contains a non-finite value at position {0}")]
    NonFinite(usize),
    #[error("vector must have at least 2 components, found {0}")]
    TooShort(usize),
    #[error("k = {k} is out of range for {available} candidates")]
    KOutOfRange { k: usize, available: usize },
    #[error("distance row is not sorted ascending at position {0}")]
    Unsorted(usize),
    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("curve fit did not converge after {0} iterations")]
    CurveFitDiverged(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
}

impl Modality {
    /// Dimension the atlas expects for vectors of this modality.
    pub fn dimension(self) -> usize {
        match self {
            Modality::Image => 512,
            Modality::Text => 1536,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub id: String,
    pub modality: Modality,
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(id: impl Into<String>, modality: Modality, values: Vec<f32>) -> Self {
        Self { id: id.into(), modality, values }
    }

    /// Checks finiteness, minimum length, the modality's declared dimension
    /// and rejects all-zero vectors.
    pub fn validate(&self) -> Result<()> {
        check_values(&self.values)?;
        let expected = self.modality.dimension();
        if self.values.len() != expected {
            return Err(EmbeddingError::DimensionMismatch { expected, found: self.values.len() });
        }
        if self.values.iter().all(|v| *v == 0.0) {
            return Err(EmbeddingError::ZeroNorm);
        }
        Ok(())
    }
}

pub(crate) fn check_values(values: &[f32]) -> Result<()> {
    if values.len() < 2 {
        return Err(EmbeddingError::TooShort(values.len()));
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(EmbeddingError::NonFinite(pos));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl std::str::FromStr for Metric {
    type Err = EmbeddingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(EmbeddingError::InvalidParams(format!("unknown metric {other:?}"))),
        }
    }
}

/// UMAP configuration. Defaults are 15 neighbors, `min_dist` 0.5 and
/// cosine distance; the remaining knobs follow the reference algorithm.
///
/// Fields are declared in alphabetical order so that serialization is canonical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapParams {
    pub initial_learning_rate: f64,
    pub metric: Metric,
    pub min_dist: f64,
    pub n_epochs: usize,
    pub n_neighbors: usize,
    pub negative_sample_rate: usize,
    pub seed: u64,
    pub spread: f64,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            initial_learning_rate: 1.0,
            metric: Metric::Cosine,
            min_dist: 0.5,
            n_epochs: 200,
            n_neighbors: 15,
            negative_sample_rate: 5,
            seed: 42,
            spread: 1.0,
        }
    }
}

impl UmapParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EmbeddingError::InvalidParams(msg));
        if self.n_neighbors < 2 {
            return bad(format!("n_neighbors must be >= 2, got {}", self.n_neighbors));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return bad(format!("spread must be positive, got {}", self.spread));
        }
        if !(self.min_dist.is_finite() && self.min_dist >= 0.0 && self.min_dist < 3.0 * self.spread) {
            return bad(format!("min_dist must lie in [0, 3*spread), got {}", self.min_dist));
        }
        if self.n_epochs == 0 {
            return bad("n_epochs must be positive".into());
        }
        if self.negative_sample_rate == 0 {
            return bad("negative_sample_rate must be positive".into());
        }
        if !(self.initial_learning_rate.is_finite() && self.initial_learning_rate > 0.0) {
            return bad(format!("initial_learning_rate must be positive, got {}", self.initial_learning_rate));
        }
        Ok(())
    }
}
