//! Project unseen vectors into a fitted map without refitting it.

use mimetic_atlas::embedding::{UmapModel, UmapParams};
use mimetic_atlas::rng::SplitMix64;

fn main() {
    let mut rng = SplitMix64::new(3);
    let vectors: Vec<Vec<f32>> = (0..120).map(|i| (0..16).map(|d| ((i % 4 == d % 4) as u8 as f64 * 3.0 + rng.normal()) as f32).collect()).collect();
    let ids = (0..120).map(|i| format!("v{i}")).collect();
    let params = UmapParams { n_neighbors: 10, n_epochs: 100, ..Default::default() };
    let model = UmapModel::fit_raw(ids, vectors.clone(), &params).unwrap();

    // A copy of a training vector starts exactly on that vector's point.
    let init = model.transform_init(&[&vectors[5]]).unwrap();
    println!("training point 5 at {:?}, copy initialized at {:?}", model.coords[5], init[0]);

    let novel: Vec<f32> = vectors[5].iter().zip(&vectors[9]).map(|(a, b)| 0.5 * (a + b)).collect();
    let placed = model.transform(&[vectors[5].clone(), novel]).unwrap();
    println!("copy after optimization: {:?}", placed[0]);
    println!("midpoint of 5 and 9:     {:?} (5 at {:?}, 9 at {:?})", placed[1], model.coords[5], model.coords[9]);
}
