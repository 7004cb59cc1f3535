//! Dataset entities, the authored term/texture link graph and the atlas
//! document.
//!
//! Cross-modal highlighting is a lookup in the ownership table built at
//! authoring time: a term highlights exactly the textures generated from it,
//! a texture highlights the one term it was generated from. Nothing here
//! computes similarity.

mod build;
mod ingest;
mod io;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use thiserror::Error;

use crate::embedding::{Coords, EmbeddingError, Modality, UmapModel, UmapParams};
use crate::replot::ReplotRecord;

pub use build::{build_atlas, AtlasInput, TermInput, TextureInput};
pub use ingest::{load_build_input, read_embeddings, write_embeddings, BuildManifest, EmbeddingLine, ManifestTerm, ManifestTexture, ParamOverrides};
pub use io::{from_json, load_atlas, save_atlas, to_canonical_json};

pub const ATLAS_VERSION: u32 = 1;
pub const MIN_TEXTURES_PER_TERM: usize = 1;
pub const MAX_TEXTURES_PER_TERM: usize = 3;

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("texture {texture_id} references unknown term {term_id} (orphan texture)")]
    OrphanTexture { texture_id: String, term_id: String },
    #[error("term {term_id} owns {count} textures; each term must own between 1 and 3 textures")]
    OwnershipCount { term_id: String, count: usize },
    #[error("missing {modality} embedding {id}")]
    MissingEmbedding { id: String, modality: &'static str },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("unknown term {0}")]
    UnknownTerm(String),
    #[error("unknown texture {0}")]
    UnknownTexture(String),
    #[error("{context}: {source}")]
    Embedding { context: String, source: EmbeddingError },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("malformed document: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("prompt staging for term {term_id} failed: {source}")]
    Staging { term_id: String, source: crate::gateway::ProviderError },
}

impl AtlasError {
    pub(crate) fn embedding(context: impl Into<String>) -> impl FnOnce(EmbeddingError) -> Self {
        let context = context.into();
        move |source| AtlasError::Embedding { context, source }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| AtlasError::Io { path, source }
    }
}

pub type Result<T, E = AtlasError> = std::result::Result<T, E>;

/// Staged prompt text for one invented term. `english_description` is the
/// text embedded for the language map and the text that ties the term to
/// its generated textures.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStages {
    pub english_description: String,
    pub image_prompt: String,
    pub material: String,
    pub physical_qualities: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub coord: [f64; 2],
    pub stages: PromptStages,
    pub surface: String,
    pub term_id: String,
    pub text_embedding_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureRecord {
    pub coord: [f64; 2],
    pub image_embedding_id: String,
    pub image_path: String,
    pub term_id: String,
    pub texture_id: String,
    pub thumbnail_path: String,
}

/// Axis-aligned bounding box of one map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub max: [f64; 2],
    pub min: [f64; 2],
}

impl Bounds {
    /// Tight bounds of a non-empty point set.
    pub fn from_coords(coords: &[[f64; 2]]) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in coords {
            for d in 0..2 {
                min[d] = min[d].min(p[d]);
                max[d] = max[d].max(p[d]);
            }
        }
        Self { max, min }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }

    pub fn diagonal(&self) -> f64 {
        ((self.max[0] - self.min[0]).powi(2) + (self.max[1] - self.min[1]).powi(2)).sqrt()
    }

    /// Grows each axis by `fraction` of its extent on both sides.
    pub fn expanded(&self, fraction: f64) -> Self {
        let pad = [(self.max[0] - self.min[0]) * fraction, (self.max[1] - self.min[1]) * fraction];
        Self { max: [self.max[0] + pad[0], self.max[1] + pad[1]], min: [self.min[0] - pad[0], self.min[1] - pad[1]] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapBounds {
    pub image: Bounds,
    pub text: Bounds,
}

/// The published artifact: records, both fitted maps, their bounds and the
/// dynamic points added by re-embedding generated frames.
///
/// Fields are declared in alphabetical order so serialization is canonical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub bounds: MapBounds,
    pub dynamic_points: Vec<ReplotRecord>,
    pub image_model: UmapModel,
    pub params: UmapParams,
    pub terms: Vec<TermRecord>,
    pub text_model: UmapModel,
    pub textures: Vec<TextureRecord>,
    pub version: u32,
}

impl Atlas {
    pub fn term(&self, term_id: &str) -> Option<&TermRecord> {
        self.terms.binary_search_by(|t| t.term_id.as_str().cmp(term_id)).ok().map(|i| &self.terms[i])
    }

    pub fn texture(&self, texture_id: &str) -> Option<&TextureRecord> {
        self.textures.binary_search_by(|t| t.texture_id.as_str().cmp(texture_id)).ok().map(|i| &self.textures[i])
    }

    pub fn dynamic_point(&self, replot_id: &str) -> Option<&ReplotRecord> {
        self.dynamic_points.iter().find(|r| r.replot_id == replot_id)
    }

    /// Textures generated from `term_id`, ascending by texture id.
    pub fn highlight_for_term(&self, term_id: &str) -> Result<Vec<String>> {
        if self.term(term_id).is_none() {
            return Err(AtlasError::UnknownTerm(term_id.to_string()));
        }
        // `textures` is kept sorted by id, so the filter preserves that order.
        Ok(self.textures.iter().filter(|t| t.term_id == term_id).map(|t| t.texture_id.clone()).collect())
    }

    /// The single term a static texture was generated from. Dynamic points
    /// have no authored owner and are reported as unknown textures.
    pub fn highlight_for_texture(&self, texture_id: &str) -> Result<String> {
        self.texture(texture_id).map(|t| t.term_id.clone()).ok_or_else(|| AtlasError::UnknownTexture(texture_id.to_string()))
    }

    pub fn image_coords(&self) -> Coords {
        self.textures.iter().map(|t| t.coord).collect()
    }

    pub fn text_coords(&self) -> Coords {
        self.terms.iter().map(|t| t.coord).collect()
    }

    pub fn push_dynamic(&mut self, record: ReplotRecord) {
        self.dynamic_points.push(record);
    }

    /// Sorts records by id; the canonical order of the document.
    pub(crate) fn normalize(&mut self) {
        self.terms.sort_by(|a, b| a.term_id.cmp(&b.term_id));
        self.textures.sort_by(|a, b| a.texture_id.cmp(&b.texture_id));
    }

    /// Checks every document invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        let invariant = |m: String| Err(AtlasError::Invariant(m));
        if self.version != ATLAS_VERSION {
            return invariant(format!("unsupported atlas version {}", self.version));
        }
        if self.terms.windows(2).any(|w| w[0].term_id >= w[1].term_id) {
            return match duplicate(self.terms.iter().map(|t| t.term_id.as_str())) {
                Some(id) => Err(AtlasError::DuplicateId(id)),
                None => invariant("terms are not sorted by term_id".into()),
            };
        }
        if self.textures.windows(2).any(|w| w[0].texture_id >= w[1].texture_id) {
            return match duplicate(self.textures.iter().map(|t| t.texture_id.as_str())) {
                Some(id) => Err(AtlasError::DuplicateId(id)),
                None => invariant("textures are not sorted by texture_id".into()),
            };
        }
        check_ownership(self.terms.iter().map(|t| t.term_id.as_str()), self.textures.iter().map(|t| (t.texture_id.as_str(), t.term_id.as_str())))?;
        for t in &self.terms {
            if t.surface.is_empty() {
                return invariant(format!("term {} has an empty surface", t.term_id));
            }
        }

        for (model, name, modality) in [(&self.image_model, "image_model", Modality::Image), (&self.text_model, "text_model", Modality::Text)] {
            model.validate().map_err(AtlasError::embedding(name))?;
            if model.dim() != modality.dimension() {
                return invariant(format!("{name} has dimension {}, expected {}", model.dim(), modality.dimension()));
            }
            if model.params != self.params {
                return invariant(format!("{name} params differ from atlas params"));
            }
        }

        let term_ids: Vec<&str> = self.terms.iter().map(|t| t.term_id.as_str()).collect();
        let texture_ids: Vec<&str> = self.textures.iter().map(|t| t.texture_id.as_str()).collect();
        if self.text_model.training_ids != term_ids {
            return invariant("text_model rows do not match the term records".into());
        }
        if self.image_model.training_ids != texture_ids {
            return invariant("image_model rows do not match the texture records".into());
        }
        for (t, p) in self.terms.iter().zip(&self.text_model.coords) {
            if !same_point(t.coord, *p) {
                return invariant(format!("term {} coord differs from its text_model row", t.term_id));
            }
        }
        for (t, p) in self.textures.iter().zip(&self.image_model.coords) {
            if !same_point(t.coord, *p) {
                return invariant(format!("texture {} coord differs from its image_model row", t.texture_id));
            }
        }

        let tight = MapBounds { image: Bounds::from_coords(&self.image_coords()), text: Bounds::from_coords(&self.text_coords()) };
        if tight != self.bounds {
            return invariant("bounds are not the tight min/max of the static coordinates".into());
        }

        for r in &self.dynamic_points {
            r.validate().map_err(|e| AtlasError::Invariant(format!("dynamic point {}: {e}", r.replot_id)))?;
        }
        if let Some(id) = duplicate(self.dynamic_points.iter().map(|r| r.replot_id.as_str())) {
            return Err(AtlasError::DuplicateId(id));
        }
        Ok(())
    }
}

fn same_point(p: [f64; 2], q: [f64; 2]) -> bool {
    p[0].to_bits() == q[0].to_bits() && p[1].to_bits() == q[1].to_bits()
}

fn duplicate<'a>(ids: impl Iterator<Item = &'a str>) -> Option<String> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Some(id.to_string());
        }
    }
    None
}

/// Every texture must name a known term and every term must own 1-3 textures.
pub(crate) fn check_ownership<'a>(
    term_ids: impl Iterator<Item = &'a str>,
    textures: impl Iterator<Item = (&'a str, &'a str)>,
) -> Result<()> {
    let mut counts: BTreeMap<&str, usize> = term_ids.map(|t| (t, 0)).collect();
    for (texture_id, term_id) in textures {
        match counts.get_mut(term_id) {
            Some(c) => *c += 1,
            None => {
                return Err(AtlasError::OrphanTexture { texture_id: texture_id.to_string(), term_id: term_id.to_string() });
            }
        }
    }
    for (term_id, count) in counts {
        if !(MIN_TEXTURES_PER_TERM..=MAX_TEXTURES_PER_TERM).contains(&count) {
            return Err(AtlasError::OwnershipCount { term_id: term_id.to_string(), count });
        }
    }
    Ok(())
}
