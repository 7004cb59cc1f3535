//! Start the HTTP service on a mock dataset and drive it as a client would.
//!
//! Pass `--keep` to leave it running on 127.0.0.1:8080 afterwards.

use mimetic_atlas::atlas::{build_atlas, load_build_input, BuildManifest};
use mimetic_atlas::dataset::{generate_mock_dataset, DatasetShape};
use mimetic_atlas::embedding::UmapParams;
use mimetic_atlas::gateway::{MockSeedConfig, ProviderSet};
use mimetic_atlas::service::{serve_on, AppState};
use serde_json::{json, Value};
use std::time::Duration;

#[tokio::main]
async fn main() {
    let keep = std::env::args().any(|a| a == "--keep");
    let dir = tempfile::tempdir().unwrap();
    let summary = generate_mock_dataset(dir.path(), &DatasetShape { terms: 30, textures: 84, seed: 1 }).unwrap();
    let manifest = BuildManifest::load(&summary.manifest_path).unwrap();
    let atlas = build_atlas(load_build_input(&manifest, None).unwrap(), &UmapParams::default()).unwrap();

    let state = AppState::open(dir.path(), ProviderSet::mock(MockSeedConfig::default())).unwrap();
    state.install_atlas(atlas).await.unwrap();
    let listener = tokio::net::TcpListener::bind(if keep { "127.0.0.1:8080" } else { "127.0.0.1:0" }).await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve_on(listener, state, async {
        let _ = stopped.await;
    }));
    println!("serving {} on {base}", dir.path().display());

    let http = reqwest::Client::new();
    let atlas: Value = http.get(format!("{base}/atlas")).send().await.unwrap().json().await.unwrap();
    let term = &atlas["terms"][0];
    println!("GET /atlas: {} terms, {} textures", atlas["terms"].as_array().unwrap().len(), atlas["textures"].as_array().unwrap().len());

    let hl: Value = http.get(format!("{base}/highlight?kind=term&id={}", term["term_id"].as_str().unwrap())).send().await.unwrap().json().await.unwrap();
    println!("highlight {}: {}", term["surface"], hl["highlighted_ids"]);

    let a = atlas["textures"][0]["texture_id"].as_str().unwrap();
    let b = atlas["textures"][5]["texture_id"].as_str().unwrap();
    http.post(format!("{base}/gallery")).json(&json!({ "ref": a })).send().await.unwrap();
    let applied: Value = http.post(format!("{base}/apply")).json(&json!({ "object_id": "vase", "ref": a })).send().await.unwrap().json().await.unwrap();
    println!("vase + {a}: {}", applied["composite_image_path"]);

    let job: Value = http.post(format!("{base}/interpolate")).json(&json!({ "texture_a": a, "texture_b": b })).send().await.unwrap().json().await.unwrap();
    let job_id = job["job_id"].as_str().unwrap().to_string();
    let status = loop {
        let s: Value = http.get(format!("{base}/interpolate/{job_id}")).send().await.unwrap().json().await.unwrap();
        if s["status"] == "done" || s["status"] == "failed" {
            break s;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    };
    println!("{job_id}: {} with {} frames", status["status"], status["frame_count"]);

    let record: Value = http.post(format!("{base}/interpolate/{job_id}/replot")).json(&json!({ "frame_index": 7 })).send().await.unwrap().json().await.unwrap();
    println!("replot: {} {} image {} text {} ({})", record["replot_id"], record["surface"], record["image_coord"], record["text_coord"], record["display_color"]);

    if keep {
        println!("press ctrl-c to stop");
        let _ = tokio::signal::ctrl_c().await;
    }
    let _ = stop.send(());
    server.await.unwrap().unwrap();
}
