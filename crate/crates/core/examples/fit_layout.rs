//! Fit a 2D layout on three Gaussian blobs and score it against a random
//! layout with trustworthiness.

use mimetic_atlas::embedding::{random_layout, trustworthiness, UmapModel, UmapParams};
use mimetic_atlas::rng::SplitMix64;
use std::time::Instant;

fn main() {
    let mut rng = SplitMix64::new(1);
    let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..50).map(|_| 4.0 * rng.normal()).collect()).collect();
    let vectors: Vec<Vec<f32>> = (0..300).map(|i| centers[i % 3].iter().map(|c| (c + rng.normal()) as f32).collect()).collect();
    let ids = (0..300).map(|i| format!("p{i:03}")).collect();

    let params = UmapParams::default();
    let start = Instant::now();
    let model = UmapModel::fit_raw(ids, vectors.clone(), &params).unwrap();
    println!("fit 300 points in {:.2?} (a = {:.4}, b = {:.4})", start.elapsed(), model.a, model.b);

    let fitted = trustworthiness(&vectors, &model.coords, 15, params.metric).unwrap();
    let baseline = trustworthiness(&vectors, &random_layout(300, 99), 15, params.metric).unwrap();
    println!("trustworthiness@15: fitted {fitted:.4}, random {baseline:.4}");

    for blob in 0..3 {
        let pts: Vec<_> = model.coords.iter().skip(blob).step_by(3).collect();
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        println!("blob {blob}: centroid ({cx:.2}, {cy:.2})");
    }
}
