use super::fuzzy::FuzzyGraph;
use super::{Coords, EmbeddingError, Result, UmapParams};
use crate::rng::SplitMix64;

/// Per-coordinate bound on a single gradient step.
pub const GRADIENT_CLIP: f64 = 4.0;

const REPULSION_STRENGTH: f64 = 1.0;
const OPTIMIZE_STREAM: u64 = 0x0971;

/// Edge-sampled SGD on the fuzzy cross-entropy between the graph and the
/// layout, with all graph edges used and negatives drawn from every row.
///
/// Rows whose `movable` flag is false are never written.
pub fn optimize_layout(
    fuzzy: &FuzzyGraph,
    init: &Coords,
    params: &UmapParams,
    a: f64,
    b: f64,
    movable: &[bool],
) -> Result<Coords> {
    let n = init.len();
    if fuzzy.n_points() != n || movable.len() != n {
        return Err(EmbeddingError::Shape(format!(
            "layout has {n} rows, graph {} and mask {}",
            fuzzy.n_points(),
            movable.len()
        )));
    }
    let mut coords = init.clone();
    let schedule = EpochSchedule { learning_rate: params.initial_learning_rate, n_epochs: params.n_epochs, seed: params.seed };
    run_sgd(&mut coords, &fuzzy.edges(), movable, n, schedule, params, a, b);
    Ok(coords)
}

#[derive(Clone, Copy)]
pub(crate) struct EpochSchedule {
    pub learning_rate: f64,
    pub n_epochs: usize,
    pub seed: u64,
}

/// The SGD loop shared by fitting and transforming.
///
/// An edge of weight `w` is sampled every `w_max / w` epochs; edges that
/// would be sampled less than once over the run are dropped. Each attractive
/// update is followed by `negative_sample_rate` repulsive updates against
/// rows drawn uniformly from `0..negative_pool`. The learning rate decays
/// linearly from the schedule's starting rate towards zero.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_sgd(
    coords: &mut Coords,
    edges: &[(usize, usize, f64)],
    movable: &[bool],
    negative_pool: usize,
    schedule: EpochSchedule,
    params: &UmapParams,
    a: f64,
    b: f64,
) {
    let n_epochs = schedule.n_epochs;
    if n_epochs == 0 || negative_pool == 0 || !movable.iter().any(|&m| m) {
        return;
    }
    let w_max = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    if w_max <= 0.0 {
        return;
    }

    let active: Vec<(usize, usize, f64)> = edges
        .iter()
        .filter(|&&(i, j, w)| (movable[i] || movable[j]) && w_max / w <= n_epochs as f64)
        .map(|&(i, j, w)| (i, j, w_max / w))
        .collect();
    let negative_rate = params.negative_sample_rate as f64;
    let mut next_sample: Vec<f64> = active.iter().map(|e| e.2).collect();
    let mut next_negative: Vec<f64> = active.iter().map(|e| e.2 / negative_rate).collect();

    let mut rng = SplitMix64::derive(schedule.seed, OPTIMIZE_STREAM);
    for epoch in 0..n_epochs {
        let alpha = schedule.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
        let tick = (epoch + 1) as f64;

        for (e, &(i, j, period)) in active.iter().enumerate() {
            if next_sample[e] > tick {
                continue;
            }

            let delta = sub(coords[i], coords[j]);
            let d2 = delta[0] * delta[0] + delta[1] * delta[1];
            let coeff = if d2 > 0.0 { -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0) } else { 0.0 };
            for d in 0..2 {
                let grad = clip(coeff * delta[d]);
                if movable[i] {
                    coords[i][d] += grad * alpha;
                }
                if movable[j] {
                    coords[j][d] -= grad * alpha;
                }
            }
            next_sample[e] += period;

            let negative_period = period / negative_rate;
            let n_negative = ((tick - next_negative[e]) / negative_period).floor().max(0.0) as usize;
            for _ in 0..n_negative {
                let k = rng.below(negative_pool);
                if k == i || !movable[i] {
                    continue;
                }
                let delta = sub(coords[i], coords[k]);
                let d2 = delta[0] * delta[0] + delta[1] * delta[1];
                for d in 0..2 {
                    let grad = if d2 > 0.0 {
                        let coeff = 2.0 * REPULSION_STRENGTH * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
                        clip(coeff * delta[d])
                    } else {
                        GRADIENT_CLIP
                    };
                    coords[i][d] += grad * alpha;
                }
            }
            next_negative[e] += n_negative as f64 * negative_period;
        }
    }
}

fn sub(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    [p[0] - q[0], p[1] - q[1]]
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRADIENT_CLIP, GRADIENT_CLIP)
}
