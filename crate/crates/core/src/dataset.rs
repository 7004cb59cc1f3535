//! Synthetic datasets produced entirely by the mock providers.
//!
//! [`generate_mock_dataset`] writes a build manifest, both embedding files,
//! 256×256 texture PNGs and 64×64 thumbnails. Surfaces come from the mock
//! syllable generator; a candidate is accepted only while the running
//! texture total can still land exactly on the requested count, so the
//! dataset reaches the target counts with the generator's own partial
//! failures.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::atlas::{write_embeddings, AtlasError, BuildManifest, ManifestTerm, ManifestTexture, ParamOverrides, MAX_TEXTURES_PER_TERM};
use crate::gateway::{raster, ImageBytes, MockSeedConfig, ProviderError, ProviderSet};

pub const FULL_TERM_COUNT: usize = 235;
pub const FULL_TEXTURE_COUNT: usize = 676;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const IMAGE_EMBEDDINGS_FILE: &str = "image_embeddings.jsonl";
pub const TEXT_EMBEDDINGS_FILE: &str = "text_embeddings.jsonl";
const MAX_CANDIDATES: u64 = 200_000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot make {textures} textures from {terms} terms with 2-3 textures each")]
    InfeasibleCounts { terms: usize, textures: usize },
    #[error("gave up after {0} candidate surfaces without reaching the requested counts")]
    Exhausted(u64),
    #[error("provider error for {surface}: {source}")]
    Provider { surface: String, source: ProviderError },
    #[error("undecodable texture from the generator for {surface}: {message}")]
    Decode { surface: String, message: String },
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetShape {
    pub terms: usize,
    pub textures: usize,
    pub seed: u64,
}

impl DatasetShape {
    /// 235 terms owning 676 textures.
    pub fn full_scale(seed: u64) -> Self {
        Self { terms: FULL_TERM_COUNT, textures: FULL_TEXTURE_COUNT, seed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSummary {
    pub manifest_path: PathBuf,
    pub terms: usize,
    pub textures: usize,
    /// Terms whose third texture failed to generate.
    pub partial_terms: usize,
}

/// Writes a complete mock dataset under `dir`.
pub fn generate_mock_dataset(dir: &Path, shape: &DatasetShape) -> Result<DatasetSummary, DatasetError> {
    // The mock generator yields 2 or 3 textures per term.
    if shape.textures < 2 * shape.terms || shape.textures > MAX_TEXTURES_PER_TERM * shape.terms {
        return Err(DatasetError::InfeasibleCounts { terms: shape.terms, textures: shape.textures });
    }
    let config = MockSeedConfig::with_seed(shape.seed);
    let providers = ProviderSet::mock(config.clone());
    for sub in ["textures", "thumbs"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|source| DatasetError::Io { path: p, source })?;
    }

    let mut terms = Vec::new();
    let mut textures = Vec::new();
    let mut image_rows: Vec<(String, Vec<f32>)> = Vec::new();
    let mut text_rows: Vec<(String, Vec<f32>)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut remaining_textures = shape.textures;
    let mut partial_terms = 0;

    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4);
    let mut next_candidate = 0u64;
    'batches: while terms.len() < shape.terms {
        if next_candidate >= MAX_CANDIDATES {
            return Err(DatasetError::Exhausted(next_candidate));
        }
        // Candidates are prepared in parallel but accepted strictly in
        // candidate order, so the output does not depend on thread timing.
        let batch: Vec<u64> = (next_candidate..next_candidate + 2 * workers as u64).collect();
        next_candidate += batch.len() as u64;
        let prepared: Vec<Result<Candidate, DatasetError>> = std::thread::scope(|scope| {
            let (config, providers) = (&config, &providers);
            let handles: Vec<_> = batch.iter().map(|&c| scope.spawn(move || prepare(config, providers, c))).collect();
            handles.into_iter().map(|h| h.join().expect("dataset worker panicked")).collect()
        });
        for candidate in prepared {
            let c = candidate?;
            if !seen.insert(c.surface.clone()) {
                continue;
            }
            let terms_after = shape.terms - terms.len() - 1;
            let Some(textures_after) = remaining_textures.checked_sub(c.images.len()) else { continue };
            if textures_after < 2 * terms_after || textures_after > MAX_TEXTURES_PER_TERM * terms_after {
                continue;
            }
            remaining_textures = textures_after;
            if c.images.len() < MAX_TEXTURES_PER_TERM {
                partial_terms += 1;
            }

            let term_id = format!("term-{:03}", terms.len());
            text_rows.push((term_id.clone(), c.text_vector));
            for (i, ((png, thumb), vector)) in c.images.iter().zip(&c.thumbnails).zip(c.image_vectors).enumerate() {
                let texture_id = format!("tex-{:03}-{i}", terms.len());
                let image_path = format!("textures/{texture_id}.png");
                let thumbnail_path = format!("thumbs/{texture_id}.png");
                write(&dir.join(&image_path), &png.0)?;
                write(&dir.join(&thumbnail_path), &thumb.0)?;
                image_rows.push((texture_id.clone(), vector));
                textures.push(ManifestTexture { texture_id, term_id: term_id.clone(), image_path, thumbnail_path, image_embedding_id: None });
            }
            terms.push(ManifestTerm { term_id, surface: c.surface, stages: Some(c.stages), text_embedding_id: None });
            if terms.len() == shape.terms {
                break 'batches;
            }
        }
    }

    write_embeddings(&dir.join(IMAGE_EMBEDDINGS_FILE), image_rows.iter().map(|(id, v)| (id.as_str(), v.as_slice())))?;
    write_embeddings(&dir.join(TEXT_EMBEDDINGS_FILE), text_rows.iter().map(|(id, v)| (id.as_str(), v.as_slice())))?;
    let manifest = BuildManifest {
        terms,
        textures,
        image_embeddings: IMAGE_EMBEDDINGS_FILE.into(),
        text_embeddings: TEXT_EMBEDDINGS_FILE.into(),
        params: ParamOverrides::default(),
        output: Some("atlas.json".into()),
        base_dir: dir.to_path_buf(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;
    Ok(DatasetSummary { manifest_path, terms: manifest.terms.len(), textures: manifest.textures.len(), partial_terms })
}

struct Candidate {
    surface: String,
    stages: crate::atlas::PromptStages,
    images: Vec<ImageBytes>,
    thumbnails: Vec<ImageBytes>,
    image_vectors: Vec<Vec<f32>>,
    text_vector: Vec<f32>,
}

/// Stages, renders and embeds candidate term number `index`.
fn prepare(config: &MockSeedConfig, providers: &ProviderSet, index: u64) -> Result<Candidate, DatasetError> {
    let surface = config.mimetic_surface(config.hash("dataset-surface", &[&index.to_le_bytes()]));
    let provider_err = |source| DatasetError::Provider { surface: surface.clone(), source };
    let stages = providers.stage_prompts(&surface).map_err(provider_err)?;
    let images = providers.generate_textures(&stages, MAX_TEXTURES_PER_TERM).map_err(provider_err)?;
    let mut thumbnails = Vec::with_capacity(images.len());
    let mut image_vectors = Vec::with_capacity(images.len());
    for png in &images {
        let decoded = raster::decode(png).map_err(|message| DatasetError::Decode { surface: surface.clone(), message })?;
        thumbnails.push(raster::encode(&raster::thumbnail(&decoded)));
        image_vectors.push(providers.embed_image(png).map_err(provider_err)?);
    }
    let text_vector = providers.embed_text(&stages.english_description).map_err(provider_err)?;
    Ok(Candidate { surface, stages, images, thumbnails, image_vectors, text_vector })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}
