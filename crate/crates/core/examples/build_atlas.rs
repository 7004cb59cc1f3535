//! Generate a small mock dataset, build the atlas and follow the authored
//! links between the two maps.
//!
//! `cargo run --example build_atlas -- 235 676` builds at full size.

use mimetic_atlas::atlas::{build_atlas, load_atlas, load_build_input, save_atlas, BuildManifest};
use mimetic_atlas::dataset::{generate_mock_dataset, DatasetShape};
use mimetic_atlas::embedding::UmapParams;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("counts must be integers"));
    let terms = args.next().unwrap_or(40);
    let textures = args.next().unwrap_or(110);

    let dir = tempfile::tempdir().unwrap();
    let summary = generate_mock_dataset(dir.path(), &DatasetShape { terms, textures, seed: 42 }).unwrap();
    println!("dataset: {} terms, {} textures ({} terms lost a texture)", summary.terms, summary.textures, summary.partial_terms);

    let manifest = BuildManifest::load(&summary.manifest_path).unwrap();
    let atlas = build_atlas(load_build_input(&manifest, None).unwrap(), &UmapParams::default()).unwrap();
    let path = dir.path().join("atlas.json");
    save_atlas(&atlas, &path).unwrap();
    let reloaded = load_atlas(&path).unwrap();
    assert_eq!(reloaded, atlas);
    println!("saved and reloaded {} ({} bytes)", path.display(), std::fs::metadata(&path).unwrap().len());

    let term = &atlas.terms[0];
    let textures = atlas.highlight_for_term(&term.term_id).unwrap();
    println!("\n{} ({}) at {:.3?}", term.surface, term.term_id, term.coord);
    println!("  {}", term.stages.english_description);
    for id in &textures {
        let t = atlas.texture(id).unwrap();
        println!("  -> {id} at {:.3?}, owner {}", t.coord, atlas.highlight_for_texture(id).unwrap());
    }
    println!("\nimage bounds {:?}\ntext bounds  {:?}", atlas.bounds.image, atlas.bounds.text);
}
