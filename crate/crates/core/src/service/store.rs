//! One-directory persistence: `atlas.json`, `gallery.json`, `jobs.json`,
//! `composites.json` and the image files they point at.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::ServiceError;
use crate::atlas::{load_atlas, save_atlas, Atlas};
use crate::gateway::raster::{self, TargetObject};
use crate::replot::{InterpolationJob, JobStatus};

pub const ATLAS_FILE: &str = "atlas.json";
pub const GALLERY_FILE: &str = "gallery.json";
pub const JOBS_FILE: &str = "jobs.json";
pub const COMPOSITES_FILE: &str = "composites.json";
pub const RESTART_ERROR: &str = "interrupted by a service restart before completion";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryItem {
    /// Milliseconds since the Unix epoch.
    pub added_at: u64,
    pub item_id: String,
    pub position: usize,
    #[serde(rename = "ref")]
    pub reference: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryFile {
    pub items: Vec<GalleryItem>,
    pub next_item: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JobsFile {
    pub jobs: BTreeMap<String, InterpolationJob>,
    pub next_job: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetObjectInfo {
    pub base_image_path: String,
    pub object_id: TargetObject,
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    pub fn load_atlas(&self) -> Result<Atlas, ServiceError> {
        Ok(load_atlas(&self.path(ATLAS_FILE))?)
    }

    pub fn save_atlas(&self, atlas: &Atlas) -> Result<(), ServiceError> {
        Ok(save_atlas(atlas, &self.path(ATLAS_FILE))?)
    }

    pub fn load_gallery(&self) -> Result<GalleryFile, ServiceError> {
        self.read_or_default(GALLERY_FILE)
    }

    pub fn save_gallery(&self, gallery: &GalleryFile) -> Result<(), ServiceError> {
        self.write_json(GALLERY_FILE, gallery)
    }

    /// Loads job metadata; jobs that never finished are marked failed.
    pub fn load_jobs(&self) -> Result<JobsFile, ServiceError> {
        let mut jobs: JobsFile = self.read_or_default(JOBS_FILE)?;
        let mut changed = false;
        for job in jobs.jobs.values_mut() {
            if matches!(job.status, JobStatus::Pending | JobStatus::Running) {
                if job.status == JobStatus::Pending {
                    job.start().map_err(|e| ServiceError::Corrupt(e.to_string()))?;
                }
                job.fail(RESTART_ERROR).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
                changed = true;
            }
        }
        if changed {
            self.save_jobs(&jobs)?;
        }
        Ok(jobs)
    }

    pub fn save_jobs(&self, jobs: &JobsFile) -> Result<(), ServiceError> {
        self.write_json(JOBS_FILE, jobs)
    }

    pub fn load_composites(&self) -> Result<BTreeMap<String, String>, ServiceError> {
        self.read_or_default(COMPOSITES_FILE)
    }

    pub fn save_composites(&self, composites: &BTreeMap<String, String>) -> Result<(), ServiceError> {
        self.write_json(COMPOSITES_FILE, composites)
    }

    /// Renders the presentation objects unless already present.
    pub fn ensure_objects(&self) -> Result<Vec<TargetObjectInfo>, ServiceError> {
        TargetObject::ALL
            .iter()
            .map(|&object| {
                let rel = format!("objects/{}.png", object.as_str());
                let path = self.path(&rel);
                if !path.exists() {
                    self.write_file(&rel, &raster::encode(&object.render()).0)?;
                }
                Ok(TargetObjectInfo { base_image_path: rel, object_id: object })
            })
            .collect()
    }

    pub fn read_file(&self, relative: &str) -> Result<Vec<u8>, ServiceError> {
        let path = self.path(relative);
        fs::read(&path).map_err(|source| ServiceError::Io { path, source })
    }

    pub fn write_file(&self, relative: &str, bytes: &[u8]) -> Result<(), ServiceError> {
        let path = self.path(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| ServiceError::Io { path: parent.to_path_buf(), source })?;
        }
        fs::write(&path, bytes).map_err(|source| ServiceError::Io { path, source })
    }

    fn read_or_default<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T, ServiceError> {
        let path = self.path(name);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| ServiceError::Corrupt(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(T::default()),
            Err(source) => Err(ServiceError::Io { path, source }),
        }
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), ServiceError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        text.push('\n');
        let path = self.path(name);
        let mut tmp = path.clone().into_os_string();
        tmp.push(".tmp");
        fs::create_dir_all(&self.root).map_err(|source| ServiceError::Io { path: self.root.clone(), source })?;
        fs::write(&tmp, text).map_err(|source| ServiceError::Io { path: PathBuf::from(&tmp), source })?;
        fs::rename(&tmp, &path).map_err(|source| ServiceError::Io { path, source })
    }
}
