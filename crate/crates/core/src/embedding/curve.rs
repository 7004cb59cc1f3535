use super::{EmbeddingError, Result};

const SAMPLES: usize = 300;
const MAX_ITER: usize = 500;

/// Fitted parameters of the low-dimensional similarity curve
/// `f(d) = 1 / (1 + a * d^(2b))`, with the RMSE of the fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveFit {
    pub a: f64,
    pub b: f64,
    pub rmse: f64,
}

pub fn curve_value(d: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * d.powf(2.0 * b))
}

fn target(d: f64, min_dist: f64, spread: f64) -> f64 {
    if d <= min_dist {
        1.0
    } else {
        (-(d - min_dist) / spread).exp()
    }
}

/// Least-squares fit of the curve to the offset exponential
/// `1 if d <= min_dist else exp(-(d - min_dist) / spread)` sampled at 300
/// evenly spaced points on `[0, 3 * spread]`.
///
/// Levenberg-Marquardt from `(a, b) = (1, 1)` with multiplicative damping.
pub fn find_ab_params(min_dist: f64, spread: f64) -> Result<CurveFit> {
    if !(spread.is_finite() && spread > 0.0) || !(min_dist.is_finite() && min_dist >= 0.0 && min_dist < 3.0 * spread) {
        return Err(EmbeddingError::InvalidParams(format!(
            "curve fit needs 0 <= min_dist < 3*spread, got min_dist={min_dist}, spread={spread}"
        )));
    }
    let xs: Vec<f64> = (0..SAMPLES).map(|i| 3.0 * spread * i as f64 / (SAMPLES - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| target(x, min_dist, spread)).collect();

    let sse = |a: f64, b: f64| -> f64 { xs.iter().zip(&ys).map(|(&x, &y)| (curve_value(x, a, b) - y).powi(2)).sum() };

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut cost = sse(a, b);
    let mut lambda = 1e-3;
    let mut converged = false;

    for _ in 0..MAX_ITER {
        // Normal equations J^T J and J^T r for the two parameters.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let (da, db) = if x > 0.0 {
                let u = x.powf(2.0 * b);
                let denom = (1.0 + a * u).powi(2);
                (-u / denom, -a * u * 2.0 * x.ln() / denom)
            } else {
                (0.0, 0.0)
            };
            let r = curve_value(x, a, b) - y;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }

        let mut improved = false;
        while lambda < 1e12 {
            let maa = jaa * (1.0 + lambda);
            let mbb = jbb * (1.0 + lambda);
            let det = maa * mbb - jab * jab;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(mbb * ga - jab * gb) / det;
            let step_b = -(maa * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            if na > 0.0 && nb > 0.0 {
                let new_cost = sse(na, nb);
                if new_cost.is_finite() && new_cost <= cost {
                    let rel = (step_a.abs() / a.abs()).max(step_b.abs() / b.abs());
                    let drop = cost - new_cost;
                    a = na;
                    b = nb;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if rel < 1e-12 || drop <= 1e-15 * cost.max(1e-300) {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if converged || !improved {
            // No descent direction left at any damping: a stationary point.
            converged = true;
            break;
        }
    }

    if !converged || !(a.is_finite() && b.is_finite()) {
        return Err(EmbeddingError::CurveFitDiverged(MAX_ITER));
    }
    Ok(CurveFit { a, b, rmse: (cost / SAMPLES as f64).sqrt() })
}
