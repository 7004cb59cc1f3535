use super::{EmbeddingError, Result};

pub const SIGMA_MIN: f64 = 1e-8;
pub const SIGMA_MAX: f64 = 1e4;
pub const BISECTION_MAX_ITER: usize = 64;
pub const SMOOTH_K_TOLERANCE: f64 = 1e-5;

/// Per-point local connectivity: `rho` is the distance to the nearest
/// neighbor, `sigma` the bandwidth that gives the row its target mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub rho: f64,
    pub sigma: f64,
}

/// Solves `sum_i exp(-max(0, d_i - rho) / sigma) = target` for `sigma`.
///
/// Bisection runs on a geometric midpoint over `[SIGMA_MIN, SIGMA_MAX]`
/// since the bracket spans twelve decades. It stops as soon as the residual
/// is within [`SMOOTH_K_TOLERANCE`] or after [`BISECTION_MAX_ITER`] steps;
/// in the latter case the last midpoint (which sits against the bracket
/// edge when no finite root exists) is returned. Rows whose distances are
/// all equal have no usable bandwidth and get `sigma = 1.0`.
pub fn calibrate_smooth_knn(distances: &[f64], target: f64) -> Result<Calibration> {
    if distances.len() < 2 {
        return Err(EmbeddingError::KOutOfRange { k: distances.len(), available: 2 });
    }
    if let Some(pos) = distances.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(EmbeddingError::NonFinite(pos));
    }
    if let Some(pos) = distances.windows(2).position(|w| w[1] < w[0]) {
        return Err(EmbeddingError::Unsorted(pos + 1));
    }

    let rho = distances[0];
    if distances.iter().all(|&d| d == rho) {
        return Ok(Calibration { rho, sigma: 1.0 });
    }

    let mass = |sigma: f64| -> f64 { distances.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum() };

    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    let mut sigma = (lo * hi).sqrt();
    for _ in 0..BISECTION_MAX_ITER {
        let residual = mass(sigma) - target;
        if residual.abs() <= SMOOTH_K_TOLERANCE {
            break;
        }
        if residual > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        sigma = (lo * hi).sqrt();
    }
    Ok(Calibration { rho, sigma })
}

/// `Σ exp(-max(0, d - rho) / sigma)` over a row; calibration drives this to the target.
pub fn calibration_mass(distances: &[f64], cal: Calibration) -> f64 {
    distances.iter().map(|&d| (-(d - cal.rho).max(0.0) / cal.sigma).exp()).sum()
}
