use super::{EmbeddingError, Metric, Result};

/// `1 - a.b / (|a| |b|)`, accumulated in `f64` and clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    same_len(a, b)?;
    let (dot, na, nb) = dot_and_norms(a, b);
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok(cosine_from_parts(dot, na, nb))
}

pub fn euclidean_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    same_len(a, b)?;
    Ok(euclidean_unchecked(a, b))
}

pub fn distance(metric: Metric, a: &[f32], b: &[f32]) -> Result<f64> {
    match metric {
        Metric::Cosine => cosine_distance(a, b),
        Metric::Euclidean => euclidean_distance(a, b),
    }
}

fn same_len(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(())
}

pub(crate) fn squared_norm(a: &[f32]) -> f64 {
    a.iter().map(|&x| f64::from(x) * f64::from(x)).sum()
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

fn dot_and_norms(a: &[f32], b: &[f32]) -> (f64, f64, f64) {
    (dot(a, b), squared_norm(a), squared_norm(b))
}

/// Shared by the pairwise function and the neighbor search so both produce
/// bit-identical values. `na` and `nb` are squared norms; `sqrt(x * x) == x`
/// makes identical inputs come out as exactly zero.
pub(crate) fn cosine_from_parts(dot: f64, na: f64, nb: f64) -> f64 {
    (1.0 - dot / (na * nb).sqrt()).clamp(0.0, 2.0)
}

pub(crate) fn euclidean_unchecked(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
