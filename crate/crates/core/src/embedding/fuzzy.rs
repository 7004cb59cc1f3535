use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::calibrate::{calibrate_smooth_knn, Calibration};
use super::knn::KnnGraph;
use super::{EmbeddingError, Result};

/// Symmetric fuzzy membership graph in CSR form (column indices ascending
/// within each row), plus the per-point calibration it was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyGraph {
    pub indices: Vec<usize>,
    pub indptr: Vec<usize>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FuzzyGraph {
    /// Builds a CSR graph from a symmetric edge map.
    pub fn from_edges(n: usize, edges: &BTreeMap<(usize, usize), f64>, rho: Vec<f64>, sigma: Vec<f64>) -> Self {
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(edges.len());
        let mut weights = Vec::with_capacity(edges.len());
        indptr.push(0);
        let mut iter = edges.iter().peekable();
        for row in 0..n {
            while let Some(((i, j), w)) = iter.next_if(|((i, _), _)| *i == row) {
                debug_assert_eq!(*i, row);
                indices.push(*j);
                weights.push(*w);
            }
            indptr.push(indices.len());
        }
        Self { indices, indptr, rho, sigma, weights }
    }

    pub fn n_points(&self) -> usize {
        self.indptr.len().saturating_sub(1)
    }

    pub fn n_edges(&self) -> usize {
        self.weights.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.weights[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.weights[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// All directed entries `(i, j, w)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_points()).flat_map(|i| self.row(i).map(move |(j, w)| (i, j, w))).collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_points();
        let shape = |m: &str| Err(EmbeddingError::Shape(m.to_string()));
        if self.indptr.first() != Some(&0) || self.indptr.last() != Some(&self.indices.len()) {
            return shape("fuzzy graph indptr does not span the index array");
        }
        if self.indices.len() != self.weights.len() || self.rho.len() != n || self.sigma.len() != n {
            return shape("fuzzy graph arrays have inconsistent lengths");
        }
        if self.indptr.windows(2).any(|w| w[1] < w[0]) {
            return shape("fuzzy graph indptr is not monotone");
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && *w <= 1.0)) {
            return shape("fuzzy graph weight outside (0, 1]");
        }
        if self.sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return shape("fuzzy graph sigma must be positive");
        }
        for i in 0..n {
            let cols = &self.indices[self.indptr[i]..self.indptr[i + 1]];
            if cols.windows(2).any(|w| w[1] <= w[0]) || cols.iter().any(|&j| j >= n) {
                return shape("fuzzy graph row columns must be ascending and in range");
            }
            for (j, w) in self.row(i) {
                if self.get(j, i) != w {
                    return shape("fuzzy graph is not symmetric");
                }
            }
        }
        Ok(())
    }
}

/// `exp(-max(0, d - rho) / sigma)` for each distance in a row.
pub fn membership_strengths(distances: &[f64], cal: Calibration) -> Vec<f64> {
    distances.iter().map(|&d| (-(d - cal.rho).max(0.0) / cal.sigma).exp()).collect()
}

/// Calibrates every row with target `log2(k)`, forms the directed
/// memberships and symmetrizes with the probabilistic t-conorm
/// `a + b - a*b`. Entries that underflow to zero are dropped.
pub fn build_fuzzy_graph(knn: &KnnGraph) -> Result<FuzzyGraph> {
    knn.validate()?;
    let n = knn.n_points();
    let target = (knn.k() as f64).log2();

    let mut rho = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, (idx, dist)) in knn.indices.iter().zip(&knn.distances).enumerate() {
        let cal = calibrate_smooth_knn(dist, target)?;
        rho.push(cal.rho);
        sigma.push(cal.sigma);
        for (&j, w) in idx.iter().zip(membership_strengths(dist, cal)) {
            if w > 0.0 {
                directed.insert((i, j), w);
            }
        }
    }

    let mut symmetric: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &w_ij) in &directed {
        let w_ji = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let w = t_conorm(w_ij, w_ji);
        symmetric.insert((i, j), w);
        symmetric.insert((j, i), w);
    }
    Ok(FuzzyGraph::from_edges(n, &symmetric, rho, sigma))
}

/// `a + b - a*b`, evaluated as `hi + lo * (1 - hi)` in a fixed operand order
/// so `(i, j)` and `(j, i)` agree bitwise and a full membership stays 1.
pub(crate) fn t_conorm(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (hi + lo * (1.0 - hi)).min(1.0)
}
