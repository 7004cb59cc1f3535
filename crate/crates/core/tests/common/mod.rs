#![allow(dead_code)]

use mimetic_atlas::gateway::{MockSeedConfig, ProviderSet};
use mimetic_atlas::rng::SplitMix64;
use mimetic_atlas::service::{serve_on, AppState};
use std::path::Path;

/// Three isotropic Gaussian clusters: centers uniform in [-10, 10]^dim,
/// unit standard deviation, points assigned round-robin.
pub fn isotropic_blobs(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = SplitMix64::new(seed);
    let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.uniform(-10.0, 10.0)).collect()).collect();
    (0..n).map(|i| centers[i % 3].iter().map(|c| (c + rng.normal()) as f32).collect()).collect()
}

/// Three Gaussian clusters whose variance lies in a shared 2D subspace,
/// plus small isotropic noise.
pub fn planar_blobs(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = SplitMix64::new(seed);
    let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.uniform(-10.0, 10.0)).collect()).collect();
    let basis: Vec<Vec<f64>> = (0..2).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
    (0..n)
        .map(|i| {
            let (u, w) = (rng.normal(), rng.normal());
            (0..dim).map(|d| (centers[i % 3][d] + u * basis[0][d] + w * basis[1][d] + 0.05 * rng.normal()) as f32).collect()
        })
        .collect()
}

pub fn gaussian_corpus(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.normal() as f32).collect()).collect()
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i:04}")).collect()
}

/// Independent brute-force neighbor oracle: full f64 distance table, stable
/// sort by (distance, index).
pub mod oracle {
    pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
        let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
        for (x, y) in a.iter().zip(b) {
            let (x, y) = (*x as f64, *y as f64);
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
        (1.0 - ab / (aa.sqrt() * bb.sqrt())).clamp(0.0, 2.0)
    }

    pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>().sqrt()
    }

    pub fn neighbors(query: &[f32], corpus: &[Vec<f32>], k: usize, skip: Option<usize>, dist: fn(&[f32], &[f32]) -> f64) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = corpus.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(i, c)| (i, dist(query, c))).collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }
}

/// A running service on an ephemeral port.
pub struct Running {
    pub base: String,
    pub state: AppState,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<tokio::task::JoinHandle<()>>,
}

impl Running {
    pub async fn start(dir: &Path, seed: u64, load: bool) -> Running {
        let providers = ProviderSet::mock(MockSeedConfig::with_seed(seed));
        Self::start_with(dir, providers, load).await
    }

    pub async fn start_with(dir: &Path, providers: ProviderSet, load: bool) -> Running {
        let state = AppState::open(dir, providers).unwrap();
        if load {
            state.load_atlas().await.unwrap();
        }
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let handle = tokio::spawn({
            let state = state.clone();
            async move {
                serve_on(listener, state, async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
            }
        });
        Running { base, state, stop: Some(tx), handle: Some(handle) }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            h.await.unwrap();
        }
    }
}

/// Polls a job until it leaves pending/running.
pub async fn wait_for_job(http: &reqwest::Client, svc: &Running, job_id: &str) -> serde_json::Value {
    for _ in 0..600 {
        let v: serde_json::Value = http.get(svc.url(&format!("/interpolate/{job_id}"))).send().await.unwrap().json().await.unwrap();
        if v["status"] == "done" || v["status"] == "failed" {
            return v;
        }
        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
    }
    panic!("job {job_id} did not finish");
}

/// Trustworthiness computed from scratch: full rank tables in the input
/// space (cosine), layout neighbors by euclidean distance.
pub fn oracle_trustworthiness(high: &[Vec<f32>], low: &[[f64; 2]], k: usize) -> f64 {
    let n = high.len();
    let mut penalty = 0.0;
    for i in 0..n {
        let ranked = oracle::neighbors(&high[i], high, n - 1, Some(i), oracle::cosine);
        let mut rank = vec![0usize; n];
        for (r, (j, _)) in ranked.iter().enumerate() {
            rank[*j] = r + 1;
        }
        let mut by_layout: Vec<(usize, f64)> =
            (0..n).filter(|&j| j != i).map(|j| (j, ((low[i][0] - low[j][0]).powi(2) + (low[i][1] - low[j][1]).powi(2)).sqrt())).collect();
        by_layout.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        for (j, _) in by_layout.iter().take(k) {
            if rank[*j] > k {
                penalty += (rank[*j] - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

/// Recursive directory copy.
pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}
