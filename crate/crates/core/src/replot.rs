//! The re-embedding loop: a frame from a generated interpolation video is
//! named, described, embedded in both modalities and projected into the
//! existing maps as a new dynamic point. Neither map is refit.
//!
//! Stages 1-3 only talk to providers and can run concurrently; stage 4
//! reads the fitted models. [`replot_frame`] runs all four and appends the
//! record in one step.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::atlas::Atlas;
use crate::embedding::{EmbeddingError, Modality};
use crate::gateway::{ImageBytes, ProviderError, ProviderSet};

pub const DYNAMIC_COLOR: &str = "orange";

/// A re-embedded frame with a coordinate in each map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplotRecord {
    pub description: String,
    pub display_color: String,
    pub dynamic: bool,
    pub frame_index: usize,
    pub image_coord: [f64; 2],
    /// Dimension of the vector projected by the image map.
    pub image_input_dim: usize,
    /// Stored frame, relative to the data directory, when persisted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    pub job_id: String,
    pub replot_id: String,
    pub surface: String,
    pub text_coord: [f64; 2],
    /// Dimension of the vector projected by the text map.
    pub text_input_dim: usize,
}

impl ReplotRecord {
    pub fn validate(&self) -> Result<(), String> {
        if !self.dynamic {
            return Err("dynamic flag must be set".into());
        }
        if self.display_color != DYNAMIC_COLOR {
            return Err(format!("display color must be {DYNAMIC_COLOR}, found {}", self.display_color));
        }
        if !self.image_coord.iter().chain(&self.text_coord).all(|v| v.is_finite()) {
            return Err("coordinates must be finite".into());
        }
        if self.image_input_dim != Modality::Image.dimension() || self.text_input_dim != Modality::Text.dimension() {
            return Err(format!(
                "projected dimensions {}/{} do not match the image/text maps",
                self.image_input_dim, self.text_input_dim
            ));
        }
        if self.surface.is_empty() || self.replot_id.is_empty() || self.job_id.is_empty() {
            return Err("surface, replot_id and job_id must be non-empty".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JobStatus::Pending => "pending",
            JobStatus::Running => "running",
            JobStatus::Done => "done",
            JobStatus::Failed => "failed",
        })
    }
}

/// An A -> B video request. Frames are stored as paths relative to a root
/// directory and are present exactly when the job is done.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationJob {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub frames: Vec<String>,
    pub job_id: String,
    pub source_texture_a: String,
    pub source_texture_b: String,
    pub status: JobStatus,
}

impl InterpolationJob {
    pub fn new(job_id: impl Into<String>, a: impl Into<String>, b: impl Into<String>) -> Self {
        Self {
            error: None,
            frames: Vec::new(),
            job_id: job_id.into(),
            source_texture_a: a.into(),
            source_texture_b: b.into(),
            status: JobStatus::Pending,
        }
    }

    pub fn start(&mut self) -> Result<(), ReplotError> {
        self.transition(JobStatus::Running)
    }

    pub fn complete(&mut self, frames: Vec<String>) -> Result<(), ReplotError> {
        if frames.is_empty() {
            return Err(ReplotError::InvalidJob(format!("job {} completed without frames", self.job_id)));
        }
        self.transition(JobStatus::Done)?;
        self.frames = frames;
        Ok(())
    }

    /// Allowed from pending (e.g. interrupted before it ran) and running.
    pub fn fail(&mut self, message: impl Into<String>) -> Result<(), ReplotError> {
        self.transition(JobStatus::Failed)?;
        self.error = Some(message.into());
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn transition(&mut self, to: JobStatus) -> Result<(), ReplotError> {
        use JobStatus::*;
        let ok = matches!((self.status, to), (Pending, Running) | (Running, Done) | (Running, Failed) | (Pending, Failed));
        if !ok {
            return Err(ReplotError::InvalidTransition { job_id: self.job_id.clone(), from: self.status, to });
        }
        self.status = to;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if (self.status == JobStatus::Done) != !self.frames.is_empty() {
            return Err(format!("job {} is {} with {} frames", self.job_id, self.status, self.frames.len()));
        }
        if self.status == JobStatus::Failed && self.error.is_none() {
            return Err(format!("failed job {} carries no error", self.job_id));
        }
        Ok(())
    }
}

/// The pipeline stage an error came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    AnalyzeFrame,
    DescribeConcept,
    EmbedImage,
    EmbedText,
    Project,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::AnalyzeFrame => "analyze_frame",
            Stage::DescribeConcept => "describe_concept",
            Stage::EmbedImage => "embed_image",
            Stage::EmbedText => "embed_text",
            Stage::Project => "project",
        })
    }
}

#[derive(Debug, Error)]
pub enum ReplotError {
    #[error("job {job_id} is {status}, not done")]
    NotDone { job_id: String, status: JobStatus },
    #[error("frame {index} is out of range for a job with {count} frames")]
    FrameOutOfRange { index: usize, count: usize },
    #[error("job {job_id} cannot move from {from} to {to}")]
    InvalidTransition { job_id: String, from: JobStatus, to: JobStatus },
    #[error("{0}")]
    InvalidJob(String),
    #[error("stage {stage} failed: {source}")]
    Provider { stage: Stage, source: ProviderError },
    #[error("stage {stage} returned a {found}-dimensional vector, expected {expected}")]
    Dimension { stage: Stage, expected: usize, found: usize },
    #[error("projection into the {map} map failed: {source}")]
    Projection { map: &'static str, source: EmbeddingError },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ReplotError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            ReplotError::Provider { stage, .. } | ReplotError::Dimension { stage, .. } => Some(*stage),
            ReplotError::Projection { .. } => Some(Stage::Project),
            _ => None,
        }
    }
}

/// Returns stored frame `index` of a finished job, reading from `root`.
pub fn extract_frame(job: &InterpolationJob, index: usize, root: &Path) -> Result<ImageBytes, ReplotError> {
    let path = root.join(frame_path(job, index)?);
    std::fs::read(&path).map(ImageBytes).map_err(|source| ReplotError::Io { path, source })
}

/// The relative path of frame `index`, after the done and range checks.
pub fn frame_path(job: &InterpolationJob, index: usize) -> Result<&str, ReplotError> {
    if job.status != JobStatus::Done {
        return Err(ReplotError::NotDone { job_id: job.job_id.clone(), status: job.status });
    }
    job.frames.get(index).map(String::as_str).ok_or(ReplotError::FrameOutOfRange { index, count: job.frames.len() })
}

/// Output of stages 1-3.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures {
    pub surface: String,
    pub description: String,
    pub image_vector: Vec<f32>,
    pub text_vector: Vec<f32>,
}

/// Stages 1-3: name the frame, describe the name, embed frame and description.
pub fn analyze_frame_features(providers: &ProviderSet, frame: &ImageBytes) -> Result<FrameFeatures, ReplotError> {
    let tag = |stage| move |source| ReplotError::Provider { stage, source };
    let surface = providers.analyze_frame(frame).map_err(tag(Stage::AnalyzeFrame))?;
    let description = providers.describe_concept(&surface).map_err(tag(Stage::DescribeConcept))?;
    let image_vector = providers.embed_image(frame).map_err(tag(Stage::EmbedImage))?;
    let text_vector = providers.embed_text(&description).map_err(tag(Stage::EmbedText))?;
    for (stage, v, modality) in [(Stage::EmbedImage, &image_vector, Modality::Image), (Stage::EmbedText, &text_vector, Modality::Text)] {
        if v.len() != modality.dimension() {
            return Err(ReplotError::Dimension { stage, expected: modality.dimension(), found: v.len() });
        }
    }
    Ok(FrameFeatures { surface, description, image_vector, text_vector })
}

/// Stage 4: projects the features through the fitted image and text maps.
/// The returned record has an empty `replot_id`; one is assigned on append.
pub fn project_features(atlas: &Atlas, features: FrameFeatures, job_id: &str, frame_index: usize) -> Result<ReplotRecord, ReplotError> {
    let project = |model: &crate::embedding::UmapModel, v: &[f32], map| {
        model.transform(&[v]).map(|c| c[0]).map_err(|source| ReplotError::Projection { map, source })
    };
    let image_coord = project(&atlas.image_model, &features.image_vector, "image")?;
    let text_coord = project(&atlas.text_model, &features.text_vector, "text")?;
    Ok(ReplotRecord {
        description: features.description,
        display_color: DYNAMIC_COLOR.to_string(),
        dynamic: true,
        frame_index,
        image_coord,
        image_input_dim: features.image_vector.len(),
        image_path: None,
        job_id: job_id.to_string(),
        replot_id: String::new(),
        surface: features.surface,
        text_coord,
        text_input_dim: features.text_vector.len(),
    })
}

/// Stages 1-4 without touching the atlas.
pub fn project_frame(
    atlas: &Atlas,
    providers: &ProviderSet,
    frame: &ImageBytes,
    job_id: &str,
    frame_index: usize,
) -> Result<ReplotRecord, ReplotError> {
    let features = analyze_frame_features(providers, frame)?;
    project_features(atlas, features, job_id, frame_index)
}

/// The id the next appended dynamic point receives.
pub fn next_replot_id(atlas: &Atlas) -> String {
    format!("replot-{:05}", atlas.dynamic_points.len() + 1)
}

/// Assigns an id and appends. The caller holds whatever lock guards `atlas`.
pub fn append_record(atlas: &mut Atlas, mut record: ReplotRecord) -> ReplotRecord {
    record.replot_id = next_replot_id(atlas);
    atlas.push_dynamic(record.clone());
    record
}

/// Runs the whole loop and appends the new point. On error the atlas is
/// left untouched.
pub fn replot_frame(
    atlas: &mut Atlas,
    providers: &ProviderSet,
    frame: &ImageBytes,
    job_id: &str,
    frame_index: usize,
) -> Result<ReplotRecord, ReplotError> {
    let record = project_frame(atlas, providers, frame, job_id, frame_index)?;
    Ok(append_record(atlas, record))
}
