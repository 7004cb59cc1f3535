use super::knn::Prepared;
use super::{Coords, EmbeddingError, Metric, Result};

/// Trustworthiness of a layout at neighborhood size `k`:
///
/// `T(k) = 1 - 2 / (n k (2n - 3k - 1)) * sum_i sum_{j in U_i(k)} (r(i, j) - k)`
///
/// where `U_i(k)` are the layout neighbors of `i` that are not among its
/// `k` nearest input-space neighbors and `r(i, j)` is the 1-based rank of
/// `j` by input-space distance from `i`. Ties rank by lower index.
pub fn trustworthiness<V: AsRef<[f32]>>(high: &[V], low: &Coords, k: usize, metric: Metric) -> Result<f64> {
    let n = high.len();
    if low.len() != n {
        return Err(EmbeddingError::Shape(format!("{n} input rows but {} layout rows", low.len())));
    }
    if k == 0 || 2 * n <= 3 * k + 1 {
        return Err(EmbeddingError::KOutOfRange { k, available: n });
    }
    let prepared = Prepared::new(high, metric)?;
    let mut penalty = 0.0f64;
    let mut rank = vec![0usize; n];
    for i in 0..n {
        let ordered = prepared.search(high[i].as_ref(), n - 1, Some(i))?;
        for (r, &j) in ordered.indices.iter().enumerate() {
            rank[j] = r + 1;
        }
        for j in low_neighbors(low, i, k) {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * penalty)
}

fn low_neighbors(low: &Coords, i: usize, k: usize) -> Vec<usize> {
    let p = low[i];
    let mut cand: Vec<(f64, usize)> = low
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2), j))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.into_iter().take(k).map(|c| c.1).collect()
}
