//! Exact k-nearest-neighbor search under cosine and euclidean distance.

use mimetic_atlas::embedding::{knn_exact, knn_graph, Metric};
use mimetic_atlas::rng::SplitMix64;

fn main() {
    let mut rng = SplitMix64::new(7);
    let corpus: Vec<Vec<f32>> = (0..200).map(|_| (0..32).map(|_| rng.normal() as f32).collect()).collect();
    let query: Vec<f32> = corpus[17].iter().map(|v| v + 0.01).collect();

    for metric in [Metric::Cosine, Metric::Euclidean] {
        let hits = knn_exact(&query, &corpus, 5, metric).unwrap();
        println!("{metric:?}: indices {:?}", hits.indices);
        println!("  distances {:.4?}", hits.distances);
    }

    // The neighbor graph of a corpus excludes each point itself.
    let graph = knn_graph(&corpus, 15, Metric::Cosine).unwrap();
    println!("graph: {} rows x {} neighbors, row 0 -> {:?}", graph.n_points(), graph.k(), &graph.indices[0][..5]);
}
