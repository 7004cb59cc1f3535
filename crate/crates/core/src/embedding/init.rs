use nalgebra::{DMatrix, SymmetricEigen};

use super::fuzzy::FuzzyGraph;
use super::Coords;
use crate::rng::SplitMix64;

/// Half-width of the square every initial layout is scaled into.
pub const LAYOUT_BOX: f64 = 10.0;

const MIN_SPECTRAL_POINTS: usize = 8;
const JITTER: f64 = 1e-4;
const INIT_STREAM: u64 = 0x1417;

/// Uniform random coordinates in `[-LAYOUT_BOX, LAYOUT_BOX]^2`.
pub fn random_layout(n: usize, seed: u64) -> Coords {
    let mut rng = SplitMix64::derive(seed, INIT_STREAM);
    (0..n).map(|_| [rng.uniform(-LAYOUT_BOX, LAYOUT_BOX), rng.uniform(-LAYOUT_BOX, LAYOUT_BOX)]).collect()
}

/// Spectral initialization from the normalized Laplacian
/// `L = I - D^{-1/2} W D^{-1/2}`, using the eigenvectors of the second and
/// third smallest eigenvalues.
///
/// Each connected component is embedded on its own and placed in a separate
/// cell of a square grid, so points of different components never coincide.
/// Components (or whole graphs) with fewer than 8 points, and components
/// whose eigendecomposition fails, get seeded uniform coordinates instead.
/// The result is scaled into `[-10, 10]^2` and receives a tiny seeded jitter.
pub fn initialize_layout(fuzzy: &FuzzyGraph, seed: u64) -> Coords {
    let n = fuzzy.n_points();
    if n < MIN_SPECTRAL_POINTS {
        return random_layout(n, seed);
    }
    let mut rng = SplitMix64::derive(seed, INIT_STREAM);
    let components = connected_components(fuzzy);

    let mut coords = vec![[0.0; 2]; n];
    let cells = (components.len() as f64).sqrt().ceil() as usize;
    for (c, members) in components.iter().enumerate() {
        let local = spectral_component(fuzzy, members).unwrap_or_else(|| {
            members.iter().map(|_| [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)]).collect()
        });
        let local = normalize_unit(local);
        let (cx, cy) = if components.len() == 1 { (0.0, 0.0) } else { (3.0 * (c % cells) as f64, 3.0 * (c / cells) as f64) };
        for (&i, p) in members.iter().zip(local) {
            coords[i] = [p[0] + cx, p[1] + cy];
        }
    }

    center_and_scale(&mut coords);
    for p in coords.iter_mut() {
        for v in p.iter_mut() {
            *v = (*v + rng.uniform(-JITTER, JITTER)).clamp(-LAYOUT_BOX, LAYOUT_BOX);
        }
    }
    coords
}

fn connected_components(fuzzy: &FuzzyGraph) -> Vec<Vec<usize>> {
    let n = fuzzy.n_points();
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        label[start] = id;
        let mut head = 0;
        while head < members.len() {
            let i = members[head];
            head += 1;
            for (j, _) in fuzzy.row(i) {
                if label[j] == usize::MAX {
                    label[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

fn spectral_component(fuzzy: &FuzzyGraph, members: &[usize]) -> Option<Coords> {
    let m = members.len();
    if m < MIN_SPECTRAL_POINTS {
        return None;
    }
    let position = |i: usize| members.binary_search(&i).ok();
    let mut weights = DMatrix::<f64>::zeros(m, m);
    for (a, &i) in members.iter().enumerate() {
        for (j, w) in fuzzy.row(i) {
            if let Some(b) = position(j) {
                weights[(a, b)] = w;
            }
        }
    }
    let inv_sqrt_degree: Vec<f64> = (0..m)
        .map(|a| {
            let d: f64 = weights.row(a).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut laplacian = DMatrix::<f64>::identity(m, m);
    for a in 0..m {
        for b in 0..m {
            laplacian[(a, b)] -= inv_sqrt_degree[a] * weights[(a, b)] * inv_sqrt_degree[b];
        }
    }

    let eigen = SymmetricEigen::try_new(laplacian, 1e-12, 10_000)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eigen.eigenvalues[x].total_cmp(&eigen.eigenvalues[y]).then(x.cmp(&y)));

    let mut axes = Vec::with_capacity(2);
    for &col in &order[1..3] {
        let mut v: Vec<f64> = eigen.eigenvectors.column(col).iter().copied().collect();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        axes.push(v);
    }
    let coords: Coords = (0..m).map(|a| [axes[0][a], axes[1][a]]).collect();
    coords.iter().all(|p| p[0].is_finite() && p[1].is_finite()).then_some(coords)
}

/// Centers a point set and scales it so the largest absolute coordinate is 1.
fn normalize_unit(mut coords: Coords) -> Coords {
    center_and_scale(&mut coords);
    for p in coords.iter_mut() {
        p[0] /= LAYOUT_BOX;
        p[1] /= LAYOUT_BOX;
    }
    coords
}

fn center_and_scale(coords: &mut Coords) {
    if coords.is_empty() {
        return;
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in coords.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let half = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / 2.0).max(f64::MIN_POSITIVE);
    for p in coords.iter_mut() {
        for d in 0..2 {
            p[d] = (p[d] - mid[d]) / half * LAYOUT_BOX;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{build_fuzzy_graph, knn_graph, Metric};
    use std::collections::BTreeMap;

    fn in_box(coords: &Coords) -> bool {
        coords.iter().all(|p| p.iter().all(|v| (-LAYOUT_BOX..=LAYOUT_BOX).contains(v)))
    }

    #[test]
    fn tiny_graph_gets_random_box_layout() {
        let mut edges = BTreeMap::new();
        edges.insert((0, 1), 1.0);
        edges.insert((1, 0), 1.0);
        let g = FuzzyGraph::from_edges(3, &edges, vec![0.0; 3], vec![1.0; 3]);
        let coords = initialize_layout(&g, 9);
        assert_eq!(coords.len(), 3);
        assert!(in_box(&coords));
        assert_eq!(coords, initialize_layout(&g, 9));
    }

    /// Two 12-cycles with no edges between them.
    fn two_rings() -> FuzzyGraph {
        let mut edges = BTreeMap::new();
        for base in [0usize, 12] {
            for k in 0..12 {
                let i = base + k;
                let j = base + (k + 1) % 12;
                edges.insert((i, j), 1.0);
                edges.insert((j, i), 1.0);
            }
        }
        FuzzyGraph::from_edges(24, &edges, vec![0.0; 24], vec![1.0; 24])
    }

    #[test]
    fn components_are_separated() {
        let g = two_rings();
        let coords = initialize_layout(&g, 1);
        assert!(in_box(&coords));
        let (a, b) = coords.split_at(12);
        let box_of = |pts: &[[f64; 2]]| {
            let xs = pts.iter().map(|p| p[0]);
            (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max))
        };
        let (a_lo, a_hi) = box_of(a);
        let (b_lo, b_hi) = box_of(b);
        assert!(a_hi < b_lo || b_hi < a_lo, "component x-ranges overlap");
        for p in a {
            for q in b {
                assert!(p != q);
            }
        }
    }

    #[test]
    fn ring_spectral_layout_is_a_circle() {
        let g = two_rings();
        let coords = initialize_layout(&g, 1);
        // Neighbors on a ring stay closer than antipodal points.
        let d = |i: usize, j: usize| ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
        assert!(d(0, 1) < d(0, 6));
    }

    #[test]
    fn deterministic_and_boxed_on_random_data() {
        let mut rng = SplitMix64::new(2);
        let pts: Vec<Vec<f32>> = (0..80).map(|_| (0..6).map(|_| rng.normal() as f32).collect()).collect();
        let g = build_fuzzy_graph(&knn_graph(&pts, 10, Metric::Euclidean).unwrap()).unwrap();
        let a = initialize_layout(&g, 77);
        let b = initialize_layout(&g, 77);
        assert_eq!(a, b);
        assert!(in_box(&a));
    }
}
