//! Build inputs on disk: one JSON manifest holding the terms (with optional
//! pre-authored prompt stages) and the texture ownership table, plus two
//! line-delimited embedding files of `{"id": ..., "vector": [...]}` records.
//! Relative paths in a manifest resolve against the manifest's directory.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{AtlasError, AtlasInput, PromptStages, Result, TermInput, TextureInput};
use crate::gateway::ProviderSet;
use crate::embedding::{Metric, UmapParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestTerm {
    pub term_id: String,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<PromptStages>,
    /// Defaults to `term_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_embedding_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestTexture {
    pub texture_id: String,
    pub term_id: String,
    pub image_path: String,
    pub thumbnail_path: String,
    /// Defaults to `texture_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_embedding_id: Option<String>,
}

/// Optional overrides of the default map parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_neighbors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_dist: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ParamOverrides {
    pub fn apply(&self, mut params: UmapParams) -> UmapParams {
        if let Some(v) = self.n_neighbors {
            params.n_neighbors = v;
        }
        if let Some(v) = self.min_dist {
            params.min_dist = v;
        }
        if let Some(v) = self.spread {
            params.spread = v;
        }
        if let Some(v) = self.metric {
            params.metric = v;
        }
        if let Some(v) = self.n_epochs {
            params.n_epochs = v;
        }
        if let Some(v) = self.seed {
            params.seed = v;
        }
        params
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildManifest {
    pub terms: Vec<ManifestTerm>,
    pub textures: Vec<ManifestTexture>,
    pub image_embeddings: String,
    pub text_embeddings: String,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl BuildManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(AtlasError::io(path))?;
        let mut manifest: BuildManifest =
            serde_json::from_str(&text).map_err(|e| AtlasError::Parse(format!("{}: {e}", path.display())))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| AtlasError::Parse(e.to_string()))?;
        super::io::write_atomically(path, text.as_bytes())
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Reads everything a manifest references. Terms without pre-authored
/// stages are staged through `providers`; with no providers they are an error.
pub fn load_build_input(manifest: &BuildManifest, providers: Option<&ProviderSet>) -> Result<AtlasInput> {
    let mut terms = Vec::with_capacity(manifest.terms.len());
    for t in &manifest.terms {
        let stages = match (&t.stages, providers) {
            (Some(s), _) => s.clone(),
            (None, Some(p)) => p.stage_prompts(&t.surface).map_err(|source| AtlasError::Staging { term_id: t.term_id.clone(), source })?,
            (None, None) => return Err(AtlasError::Invariant(format!("term {} has no prompt stages", t.term_id))),
        };
        terms.push(TermInput {
            term_id: t.term_id.clone(),
            surface: t.surface.clone(),
            stages,
            text_embedding_id: t.text_embedding_id.clone().unwrap_or_else(|| t.term_id.clone()),
        });
    }
    let textures = manifest
        .textures
        .iter()
        .map(|t| TextureInput {
            texture_id: t.texture_id.clone(),
            term_id: t.term_id.clone(),
            image_path: t.image_path.clone(),
            thumbnail_path: t.thumbnail_path.clone(),
            image_embedding_id: t.image_embedding_id.clone().unwrap_or_else(|| t.texture_id.clone()),
        })
        .collect();
    Ok(AtlasInput {
        terms,
        textures,
        image_embeddings: read_embeddings(&manifest.resolve(&manifest.image_embeddings))?,
        text_embeddings: read_embeddings(&manifest.resolve(&manifest.text_embeddings))?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLine {
    pub id: String,
    pub vector: Vec<f32>,
}

/// Reads a line-delimited embedding file. Blank lines are skipped; a
/// repeated id is an error.
pub fn read_embeddings(path: &Path) -> Result<BTreeMap<String, Vec<f32>>> {
    let file = fs::File::open(path).map_err(AtlasError::io(path))?;
    let mut out = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(AtlasError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingLine =
            serde_json::from_str(&line).map_err(|e| AtlasError::Parse(format!("{} line {}: {e}", path.display(), n + 1)))?;
        if out.insert(rec.id.clone(), rec.vector).is_some() {
            return Err(AtlasError::DuplicateId(rec.id));
        }
    }
    Ok(out)
}

pub fn write_embeddings<'a>(path: &Path, records: impl IntoIterator<Item = (&'a str, &'a [f32])>) -> Result<()> {
    let file = fs::File::create(path).map_err(AtlasError::io(path))?;
    let mut w = BufWriter::new(file);
    for (id, vector) in records {
        let line = serde_json::to_string(&EmbeddingLine { id: id.to_string(), vector: vector.to_vec() })
            .map_err(|e| AtlasError::Parse(e.to_string()))?;
        writeln!(w, "{line}").map_err(AtlasError::io(path))?;
    }
    w.flush().map_err(AtlasError::io(path))
}
