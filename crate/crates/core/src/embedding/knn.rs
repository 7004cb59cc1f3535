use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use super::distance::{cosine_from_parts, dot, euclidean_unchecked, squared_norm};
use super::{EmbeddingError, Metric, Result};

/// The `k` nearest corpus entries for one query, ascending by distance.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbors {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Neighbor lists for every point of a corpus, self excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnGraph {
    pub distances: Vec<Vec<f64>>,
    pub indices: Vec<Vec<usize>>,
}

impl KnnGraph {
    pub fn n_points(&self) -> usize {
        self.indices.len()
    }

    pub fn k(&self) -> usize {
        self.indices.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.len() != self.distances.len() {
            return Err(EmbeddingError::Shape("knn index/distance row counts differ".into()));
        }
        let n = self.n_points();
        let k = self.k();
        for (i, (idx, dist)) in self.indices.iter().zip(&self.distances).enumerate() {
            if idx.len() != k || dist.len() != k {
                return Err(EmbeddingError::Shape(format!("knn row {i} does not have {k} entries")));
            }
            if idx.iter().any(|&j| j == i || j >= n) {
                return Err(EmbeddingError::Shape(format!("knn row {i} holds a self or out-of-range index")));
            }
            if dist.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(EmbeddingError::Shape(format!("knn row {i} holds an invalid distance")));
            }
            if let Some(p) = dist.windows(2).position(|w| w[1] < w[0]) {
                return Err(EmbeddingError::Unsorted(p + 1));
            }
        }
        Ok(())
    }
}

/// Brute-force neighbor search of one query against a corpus. Ties are
/// broken by the lower corpus index.
pub fn knn_exact<V: AsRef<[f32]>>(query: &[f32], corpus: &[V], k: usize, metric: Metric) -> Result<Neighbors> {
    let prepared = Prepared::new(corpus, metric)?;
    prepared.search(query, k, None)
}

/// Neighbor lists for every corpus member against the rest of the corpus.
pub fn knn_graph<V: AsRef<[f32]>>(corpus: &[V], k: usize, metric: Metric) -> Result<KnnGraph> {
    let prepared = Prepared::new(corpus, metric)?;
    let mut indices = Vec::with_capacity(corpus.len());
    let mut distances = Vec::with_capacity(corpus.len());
    for (i, row) in corpus.iter().enumerate() {
        let found = prepared.search(row.as_ref(), k, Some(i))?;
        indices.push(found.indices);
        distances.push(found.distances);
    }
    Ok(KnnGraph { distances, indices })
}

/// Corpus with cached squared norms for repeated queries.
pub(crate) struct Prepared<'a, V> {
    corpus: &'a [V],
    norms: Vec<f64>,
    metric: Metric,
    dim: usize,
}

impl<'a, V: AsRef<[f32]>> Prepared<'a, V> {
    pub(crate) fn new(corpus: &'a [V], metric: Metric) -> Result<Self> {
        let dim = corpus.first().map_or(0, |v| v.as_ref().len());
        for v in corpus {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(EmbeddingError::DimensionMismatch { expected: dim, found: v.len() });
            }
        }
        let norms: Vec<f64> = match metric {
            Metric::Cosine => corpus.iter().map(|v| squared_norm(v.as_ref())).collect(),
            Metric::Euclidean => Vec::new(),
        };
        if norms.contains(&0.0) {
            return Err(EmbeddingError::ZeroNorm);
        }
        Ok(Self { corpus, norms, metric, dim })
    }

    pub(crate) fn search(&self, query: &[f32], k: usize, skip: Option<usize>) -> Result<Neighbors> {
        if query.len() != self.dim {
            return Err(EmbeddingError::DimensionMismatch { expected: self.dim, found: query.len() });
        }
        let available = self.corpus.len() - usize::from(skip.is_some());
        if k == 0 || k > available {
            return Err(EmbeddingError::KOutOfRange { k, available });
        }
        let query_norm = match self.metric {
            Metric::Cosine => {
                let n = squared_norm(query);
                if n == 0.0 {
                    return Err(EmbeddingError::ZeroNorm);
                }
                n
            }
            Metric::Euclidean => 0.0,
        };

        let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(available);
        for (j, item) in self.corpus.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            let item = item.as_ref();
            let d = match self.metric {
                Metric::Cosine => cosine_from_parts(dot(query, item), query_norm, self.norms[j]),
                Metric::Euclidean => euclidean_unchecked(query, item),
            };
            candidates.push((d, j));
        }

        let by_distance_then_index = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) };
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k - 1, by_distance_then_index);
            candidates.truncate(k);
        }
        candidates.sort_unstable_by(by_distance_then_index);

        Ok(Neighbors {
            indices: candidates.iter().map(|c| c.1).collect(),
            distances: candidates.iter().map(|c| c.0).collect(),
        })
    }
}
