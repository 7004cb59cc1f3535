//! The re-embedding loop: interpolate between two textures, pick a frame,
//! and project it into both maps as a new dynamic point.

use mimetic_atlas::atlas::{build_atlas, load_build_input, BuildManifest};
use mimetic_atlas::dataset::{generate_mock_dataset, DatasetShape};
use mimetic_atlas::embedding::UmapParams;
use mimetic_atlas::gateway::{ImageBytes, MockSeedConfig, ProviderSet};
use mimetic_atlas::replot::{extract_frame, replot_frame, InterpolationJob};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let summary = generate_mock_dataset(dir.path(), &DatasetShape { terms: 30, textures: 84, seed: 5 }).unwrap();
    let manifest = BuildManifest::load(&summary.manifest_path).unwrap();
    let mut atlas = build_atlas(load_build_input(&manifest, None).unwrap(), &UmapParams::default()).unwrap();
    let providers = ProviderSet::mock(MockSeedConfig::with_seed(5));

    let (a, b) = (atlas.textures[0].clone(), atlas.textures[10].clone());
    let read = |p: &str| ImageBytes(std::fs::read(dir.path().join(p)).unwrap());
    let mut job = InterpolationJob::new("job-1", &a.texture_id, &b.texture_id);
    job.start().unwrap();
    let frames = providers.interpolate_video(&read(&a.image_path), &read(&b.image_path)).unwrap();
    let paths: Vec<String> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let rel = format!("frames/job-1/{i:02}.png");
            std::fs::create_dir_all(dir.path().join("frames/job-1")).unwrap();
            std::fs::write(dir.path().join(&rel), &f.0).unwrap();
            rel
        })
        .collect();
    job.complete(paths).unwrap();
    println!("{} -> {}: {} frames", a.texture_id, b.texture_id, job.frame_count());

    let static_before = (atlas.image_coords(), atlas.text_coords());
    for index in [0, 7, 15] {
        let frame = extract_frame(&job, index, dir.path()).unwrap();
        let r = replot_frame(&mut atlas, &providers, &frame, &job.job_id, index).unwrap();
        println!("frame {index:>2}: {} {:<14} image {:.3?} text {:.3?} [{}]", r.replot_id, r.surface, r.image_coord, r.text_coord, r.display_color);
    }
    println!("texture A sits at {:.3?}, texture B at {:.3?}", a.coord, b.coord);
    assert_eq!(static_before, (atlas.image_coords(), atlas.text_coords()));
    println!("static coordinates unchanged; {} dynamic points", atlas.dynamic_points.len());
}
