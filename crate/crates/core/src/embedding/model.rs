use serde::{Deserialize, Serialize};

use super::calibrate::calibrate_smooth_knn;
use super::curve::find_ab_params;
use super::fuzzy::{build_fuzzy_graph, membership_strengths, t_conorm, FuzzyGraph};
use super::init::initialize_layout;
use super::knn::{knn_graph, KnnGraph, Prepared};
use super::optimize::{optimize_layout, run_sgd, EpochSchedule};
use super::{check_values, Coords, EmbeddingError, EmbeddingVector, Result, UmapParams};

const TRANSFORM_STREAM: u64 = 0x7a5f;

/// Starting coordinate plus weighted `(query, training, w)` edges.
type Placement = ([f64; 2], Vec<(usize, usize, f64)>);

/// Transforms start from a quarter of the fitting learning rate, since the
/// initialization already places new points near their final position.
const TRANSFORM_RATE_DIVISOR: f64 = 4.0;

/// Epoch budget for placing new points into a fitted layout.
pub fn transform_epochs(n_epochs: usize) -> usize {
    n_epochs.div_ceil(3)
}

/// A fitted projection. Immutable once built; transforms only read it.
///
/// Fields are declared in alphabetical order so serialization is canonical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UmapModel {
    pub a: f64,
    pub b: f64,
    pub coords: Coords,
    pub fuzzy: FuzzyGraph,
    pub knn: KnnGraph,
    pub params: UmapParams,
    pub training_ids: Vec<String>,
    pub training_vectors: Vec<Vec<f32>>,
}

impl UmapModel {
    /// Fits a layout for the given vectors; their order fixes the row order.
    pub fn fit(vectors: &[EmbeddingVector], params: &UmapParams) -> Result<Self> {
        let ids = vectors.iter().map(|v| v.id.clone()).collect();
        let values = vectors.iter().map(|v| v.values.clone()).collect();
        Self::fit_raw(ids, values, params)
    }

    pub fn fit_raw(training_ids: Vec<String>, training_vectors: Vec<Vec<f32>>, params: &UmapParams) -> Result<Self> {
        params.validate()?;
        if training_ids.len() != training_vectors.len() {
            return Err(EmbeddingError::Shape("id and vector counts differ".into()));
        }
        let n = training_vectors.len();
        let needed = params.n_neighbors + 1;
        if n < needed {
            return Err(EmbeddingError::TooFewPoints { needed, found: n });
        }
        let dim = training_vectors[0].len();
        for v in &training_vectors {
            check_values(v)?;
            if v.len() != dim {
                return Err(EmbeddingError::DimensionMismatch { expected: dim, found: v.len() });
            }
        }

        let knn = knn_graph(&training_vectors, params.n_neighbors, params.metric)?;
        let fuzzy = build_fuzzy_graph(&knn)?;
        let curve = find_ab_params(params.min_dist, params.spread)?;
        let init = initialize_layout(&fuzzy, params.seed);
        let coords = optimize_layout(&fuzzy, &init, params, curve.a, curve.b, &vec![true; n])?;

        Ok(Self { a: curve.a, b: curve.b, coords, fuzzy, knn, params: params.clone(), training_ids, training_vectors })
    }

    pub fn n_points(&self) -> usize {
        self.training_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.training_vectors.first().map_or(0, Vec::len)
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.training_ids.iter().position(|t| t == id)
    }

    /// Starting positions for new points: the membership-weighted mean of
    /// their neighbors' coordinates. A query at distance zero from one or
    /// more training points starts exactly on (the mean of) those points.
    pub fn transform_init<V: AsRef<[f32]>>(&self, queries: &[V]) -> Result<Coords> {
        let prepared = Prepared::new(&self.training_vectors, self.params.metric)?;
        queries.iter().map(|q| Ok(self.place(&prepared, q.as_ref())?.0)).collect()
    }

    /// Places new points without refitting: neighbor-weighted initialization
    /// followed by `ceil(n_epochs / 3)` epochs at a quarter of the fitting
    /// learning rate in which only the new point moves. Each query is
    /// optimized independently, so its result does not depend on the other
    /// queries in the batch.
    pub fn transform<V: AsRef<[f32]>>(&self, queries: &[V]) -> Result<Coords> {
        let prepared = Prepared::new(&self.training_vectors, self.params.metric)?;
        let n = self.n_points();
        let mut movable = vec![false; n + 1];
        movable[n] = true;
        let schedule = EpochSchedule {
            learning_rate: self.params.initial_learning_rate / TRANSFORM_RATE_DIVISOR,
            n_epochs: transform_epochs(self.params.n_epochs),
            seed: crate::rng::SplitMix64::derive(self.params.seed, TRANSFORM_STREAM).next_u64(),
        };

        let mut out = Vec::with_capacity(queries.len());
        for q in queries {
            let q = q.as_ref();
            check_values(q)?;
            let (start, edges) = self.place(&prepared, q)?;
            let mut coords = self.coords.clone();
            coords.push(start);
            run_sgd(&mut coords, &edges, &movable, n, schedule, &self.params, self.a, self.b);
            out.push(coords[n]);
        }
        Ok(out)
    }

    /// Initial coordinate and query-to-training edges (query row is `n`).
    ///
    /// Edges carry the symmetrized membership a refit would assign: the
    /// query's own calibrated row combined by t-conorm with the membership
    /// each training point would give the query if it entered that point's
    /// neighbor list (scored with the stored `rho`/`sigma`).
    fn place(&self, prepared: &Prepared<'_, Vec<f32>>, query: &[f32]) -> Result<Placement> {
        let n = self.n_points();
        let k = self.params.n_neighbors.min(n);
        let all = prepared.search(query, n, None)?;
        let (indices, distances) = (&all.indices[..k], &all.distances[..k]);
        let cal = calibrate_smooth_knn(distances, (k as f64).log2())?;
        let weights = membership_strengths(distances, cal);

        let exact: Vec<usize> = indices.iter().zip(distances).filter(|(_, d)| **d == 0.0).map(|(i, _)| *i).collect();
        let start = if exact.is_empty() {
            let total: f64 = weights.iter().sum();
            let mut acc = [0.0; 2];
            for (&j, &w) in indices.iter().zip(&weights) {
                acc[0] += w * self.coords[j][0];
                acc[1] += w * self.coords[j][1];
            }
            [acc[0] / total, acc[1] / total]
        } else {
            let mut acc = [0.0; 2];
            for &j in &exact {
                acc[0] += self.coords[j][0];
                acc[1] += self.coords[j][1];
            }
            [acc[0] / exact.len() as f64, acc[1] / exact.len() as f64]
        };

        let mut forward = vec![0.0; n];
        for (&j, &w) in indices.iter().zip(&weights) {
            forward[j] = w;
        }
        let mut edges = Vec::new();
        for (&j, &d) in all.indices.iter().zip(&all.distances) {
            let reverse = match self.knn.distances[j].last() {
                Some(&kth) if d < kth => (-(d - self.fuzzy.rho[j]).max(0.0) / self.fuzzy.sigma[j]).exp(),
                _ => 0.0,
            };
            let w = t_conorm(forward[j], reverse);
            if w > 0.0 {
                edges.push((n, j, w));
            }
        }
        edges.sort_by_key(|e| e.1);
        Ok((start, edges))
    }

    /// Checks internal consistency: shapes, graph invariants, finite
    /// coordinates and curve parameters matching the stored params.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let n = self.n_points();
        if self.coords.len() != n || self.training_vectors.len() != n {
            return Err(EmbeddingError::Shape(format!(
                "model has {n} ids, {} coordinate rows and {} vectors",
                self.coords.len(),
                self.training_vectors.len()
            )));
        }
        if self.knn.n_points() != n || self.fuzzy.n_points() != n {
            return Err(EmbeddingError::Shape("graph size differs from training set".into()));
        }
        self.knn.validate()?;
        self.fuzzy.validate()?;
        if self.coords.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(EmbeddingError::Shape("non-finite coordinate".into()));
        }
        let dim = self.dim();
        for v in &self.training_vectors {
            check_values(v)?;
            if v.len() != dim {
                return Err(EmbeddingError::DimensionMismatch { expected: dim, found: v.len() });
            }
        }
        let curve = find_ab_params(self.params.min_dist, self.params.spread)?;
        if curve.a != self.a || curve.b != self.b {
            return Err(EmbeddingError::InvalidParams("curve parameters a, b do not match min_dist/spread".into()));
        }
        Ok(())
    }
}
