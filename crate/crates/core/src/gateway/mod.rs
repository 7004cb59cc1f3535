//! Provider interfaces for every generative capability, plus deterministic
//! offline mocks.
//!
//! Each role is a small trait. A [`ProviderSet`] bundles one implementation
//! per role and is the only way the rest of the crate reaches a provider: its
//! methods run the call on a worker thread and give up with
//! [`ProviderError::Timeout`] once the configured timeout expires.

mod config;
pub mod mock;
pub mod raster;

use std::fmt;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

use crate::atlas::PromptStages;

pub use config::{GatewayConfig, LiveEndpoint, ProviderMode, DEFAULT_TIMEOUT};
pub use mock::MockSeedConfig;

/// A PNG-encoded raster.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBytes(pub Vec<u8>);

impl fmt::Debug for ImageBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ImageBytes({} bytes)", self.0.len())
    }
}

impl ImageBytes {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProviderInfo {
    pub name: String,
    pub deterministic: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider {provider} rejected the input: {message}")]
    InvalidInput { provider: String, message: String },
    #[error("provider {provider} failed: {message}")]
    Failed { provider: String, message: String },
    #[error("provider {provider} timed out after {after:?}")]
    Timeout { provider: String, after: Duration },
    #[error("provider {provider} is unavailable: {message}")]
    Unavailable { provider: String, message: String },
}

impl ProviderError {
    pub fn provider(&self) -> &str {
        match self {
            ProviderError::InvalidInput { provider, .. }
            | ProviderError::Failed { provider, .. }
            | ProviderError::Timeout { provider, .. }
            | ProviderError::Unavailable { provider, .. } => provider,
        }
    }
}

pub type ProviderResult<T> = Result<T, ProviderError>;

/// Onomatopoeia -> material -> physical qualities -> English description -> image prompt.
pub trait PromptStager: Send + Sync {
    fn info(&self) -> ProviderInfo;
    fn stage_prompts(&self, surface: &str) -> ProviderResult<PromptStages>;
}

/// Returns between 1 and `count` images; fewer than requested signals
/// partial generation failure.
pub trait TextureGenerator: Send + Sync {
    fn info(&self) -> ProviderInfo;
    fn generate_textures(&self, stages: &PromptStages, count: usize) -> ProviderResult<Vec<ImageBytes>>;
}

pub trait TextureApplier: Send + Sync {
    fn info(&self) -> ProviderInfo;
    fn apply_texture(&self, object: &ImageBytes, texture: &ImageBytes) -> ProviderResult<ImageBytes>;
}

/// One-way A -> B video as an ordered frame list.
pub trait VideoInterpolator: Send + Sync {
    fn info(&self) -> ProviderInfo;
    fn interpolate_video(&self, a: &ImageBytes, b: &ImageBytes) -> ProviderResult<Vec<ImageBytes>>;
}

/// Reads a frame and names it with an onomatopoeia.
pub trait FrameAnalyzer: Send + Sync {
    fn info(&self) -> ProviderInfo;
    fn analyze_frame(&self, frame: &ImageBytes) -> ProviderResult<String>;
}

pub trait ConceptDescriber: Send + Sync {
    fn info(&self) -> ProviderInfo;
    fn describe_concept(&self, surface: &str) -> ProviderResult<String>;
}

pub trait TextEmbedder: Send + Sync {
    fn info(&self) -> ProviderInfo;
    fn embed_text(&self, text: &str) -> ProviderResult<Vec<f32>>;
}

pub trait ImageEmbedder: Send + Sync {
    fn info(&self) -> ProviderInfo;
    fn embed_image(&self, image: &ImageBytes) -> ProviderResult<Vec<f32>>;
}

/// One provider per role and the per-call timeout.
#[derive(Clone)]
pub struct ProviderSet {
    pub prompt_stager: Arc<dyn PromptStager>,
    pub texture_generator: Arc<dyn TextureGenerator>,
    pub texture_applier: Arc<dyn TextureApplier>,
    pub video_interpolator: Arc<dyn VideoInterpolator>,
    pub frame_analyzer: Arc<dyn FrameAnalyzer>,
    pub concept_describer: Arc<dyn ConceptDescriber>,
    pub text_embedder: Arc<dyn TextEmbedder>,
    pub image_embedder: Arc<dyn ImageEmbedder>,
    pub timeout: Duration,
}

impl fmt::Debug for ProviderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderSet").field("providers", &self.describe()).field("timeout", &self.timeout).finish()
    }
}

impl ProviderSet {
    /// The full offline mock set.
    pub fn mock(config: MockSeedConfig) -> Self {
        let config = Arc::new(config);
        Self {
            prompt_stager: Arc::new(mock::MockPromptStager::new(config.clone())),
            texture_generator: Arc::new(mock::MockTextureGenerator::new(config.clone())),
            texture_applier: Arc::new(mock::MockTextureApplier),
            video_interpolator: Arc::new(mock::MockVideoInterpolator::new(config.clone())),
            frame_analyzer: Arc::new(mock::MockFrameAnalyzer::new(config.clone())),
            concept_describer: Arc::new(mock::MockConceptDescriber::new(config.clone())),
            text_embedder: Arc::new(mock::MockTextEmbedder::new(config.clone())),
            image_embedder: Arc::new(mock::MockImageEmbedder::new(config)),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn builder() -> ProviderSetBuilder {
        ProviderSetBuilder::default()
    }

    /// Builds the set a configuration asks for. Live adapters are not
    /// bundled; live mode must be assembled with [`ProviderSet::builder`].
    pub fn from_config(config: &GatewayConfig) -> ProviderResult<Self> {
        match config.mode {
            ProviderMode::Mock => Ok(Self::mock(MockSeedConfig { seed: config.seed, ..MockSeedConfig::default() }).with_timeout(config.timeout())),
            ProviderMode::Live => Err(ProviderError::Unavailable {
                provider: "gateway".into(),
                message: "no live adapters are registered; assemble a ProviderSet with ProviderSet::builder()".into(),
            }),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// `(role, info)` for every provider in the set.
    pub fn describe(&self) -> Vec<(&'static str, ProviderInfo)> {
        vec![
            ("prompt_stager", self.prompt_stager.info()),
            ("texture_generator", self.texture_generator.info()),
            ("texture_applier", self.texture_applier.info()),
            ("video_interpolator", self.video_interpolator.info()),
            ("frame_analyzer", self.frame_analyzer.info()),
            ("concept_describer", self.concept_describer.info()),
            ("text_embedder", self.text_embedder.info()),
            ("image_embedder", self.image_embedder.info()),
        ]
    }

    pub fn stage_prompts(&self, surface: &str) -> ProviderResult<PromptStages> {
        let p = self.prompt_stager.clone();
        let surface = surface.to_owned();
        self.guarded(p.info().name, move || p.stage_prompts(&surface))
    }

    pub fn generate_textures(&self, stages: &PromptStages, count: usize) -> ProviderResult<Vec<ImageBytes>> {
        let p = self.texture_generator.clone();
        let stages = stages.clone();
        let name = p.info().name;
        let images = self.guarded(name.clone(), move || p.generate_textures(&stages, count))?;
        if images.is_empty() {
            return Err(ProviderError::Failed { provider: name, message: "no texture was generated".into() });
        }
        Ok(images)
    }

    pub fn apply_texture(&self, object: &ImageBytes, texture: &ImageBytes) -> ProviderResult<ImageBytes> {
        let p = self.texture_applier.clone();
        let (object, texture) = (object.clone(), texture.clone());
        self.guarded(p.info().name, move || p.apply_texture(&object, &texture))
    }

    pub fn interpolate_video(&self, a: &ImageBytes, b: &ImageBytes) -> ProviderResult<Vec<ImageBytes>> {
        let p = self.video_interpolator.clone();
        let (a, b) = (a.clone(), b.clone());
        self.guarded(p.info().name, move || p.interpolate_video(&a, &b))
    }

    pub fn analyze_frame(&self, frame: &ImageBytes) -> ProviderResult<String> {
        let p = self.frame_analyzer.clone();
        let frame = frame.clone();
        self.guarded(p.info().name, move || p.analyze_frame(&frame))
    }

    pub fn describe_concept(&self, surface: &str) -> ProviderResult<String> {
        let p = self.concept_describer.clone();
        let surface = surface.to_owned();
        self.guarded(p.info().name, move || p.describe_concept(&surface))
    }

    pub fn embed_text(&self, text: &str) -> ProviderResult<Vec<f32>> {
        let p = self.text_embedder.clone();
        let text = text.to_owned();
        self.guarded(p.info().name, move || p.embed_text(&text))
    }

    pub fn embed_image(&self, image: &ImageBytes) -> ProviderResult<Vec<f32>> {
        let p = self.image_embedder.clone();
        let image = image.clone();
        self.guarded(p.info().name, move || p.embed_image(&image))
    }

    /// Runs `call` on a worker thread and waits at most `self.timeout`.
    /// A timed-out worker is detached; its eventual result is dropped.
    fn guarded<T, F>(&self, provider: String, call: F) -> ProviderResult<T>
    where
        T: Send + 'static,
        F: FnOnce() -> ProviderResult<T> + Send + 'static,
    {
        let (tx, rx) = mpsc::sync_channel(1);
        let spawned = std::thread::Builder::new().name(format!("provider-{provider}")).spawn(move || {
            let _ = tx.send(call());
        });
        if let Err(e) = spawned {
            return Err(ProviderError::Failed { provider, message: format!("could not start worker: {e}") });
        }
        match rx.recv_timeout(self.timeout) {
            Ok(result) => result,
            Err(mpsc::RecvTimeoutError::Timeout) => Err(ProviderError::Timeout { provider, after: self.timeout }),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(ProviderError::Failed { provider, message: "provider worker panicked".into() })
            }
        }
    }
}

/// Assembles a set from individual providers; `build` fails on any missing role.
#[derive(Default)]
pub struct ProviderSetBuilder {
    pub prompt_stager: Option<Arc<dyn PromptStager>>,
    pub texture_generator: Option<Arc<dyn TextureGenerator>>,
    pub texture_applier: Option<Arc<dyn TextureApplier>>,
    pub video_interpolator: Option<Arc<dyn VideoInterpolator>>,
    pub frame_analyzer: Option<Arc<dyn FrameAnalyzer>>,
    pub concept_describer: Option<Arc<dyn ConceptDescriber>>,
    pub text_embedder: Option<Arc<dyn TextEmbedder>>,
    pub image_embedder: Option<Arc<dyn ImageEmbedder>>,
    pub timeout: Option<Duration>,
}

impl ProviderSetBuilder {
    /// Starts from an existing set, e.g. to swap a single provider.
    pub fn from_set(set: &ProviderSet) -> Self {
        Self {
            prompt_stager: Some(set.prompt_stager.clone()),
            texture_generator: Some(set.texture_generator.clone()),
            texture_applier: Some(set.texture_applier.clone()),
            video_interpolator: Some(set.video_interpolator.clone()),
            frame_analyzer: Some(set.frame_analyzer.clone()),
            concept_describer: Some(set.concept_describer.clone()),
            text_embedder: Some(set.text_embedder.clone()),
            image_embedder: Some(set.image_embedder.clone()),
            timeout: Some(set.timeout),
        }
    }

    pub fn build(self) -> ProviderResult<ProviderSet> {
        fn need<T: ?Sized>(slot: Option<Arc<T>>, role: &str) -> ProviderResult<Arc<T>> {
            slot.ok_or_else(|| ProviderError::Unavailable { provider: role.to_string(), message: "no provider configured for this role".into() })
        }
        Ok(ProviderSet {
            prompt_stager: need(self.prompt_stager, "prompt_stager")?,
            texture_generator: need(self.texture_generator, "texture_generator")?,
            texture_applier: need(self.texture_applier, "texture_applier")?,
            video_interpolator: need(self.video_interpolator, "video_interpolator")?,
            frame_analyzer: need(self.frame_analyzer, "frame_analyzer")?,
            concept_describer: need(self.concept_describer, "concept_describer")?,
            text_embedder: need(self.text_embedder, "text_embedder")?,
            image_embedder: need(self.image_embedder, "image_embedder")?,
            timeout: self.timeout.unwrap_or(DEFAULT_TIMEOUT),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SlowDescriber;

    impl ConceptDescriber for SlowDescriber {
        fn info(&self) -> ProviderInfo {
            ProviderInfo { name: "slow".into(), deterministic: true }
        }
        fn describe_concept(&self, surface: &str) -> ProviderResult<String> {
            std::thread::sleep(Duration::from_millis(500));
            Ok(surface.to_string())
        }
    }

    #[test]
    fn slow_provider_times_out() {
        let mut builder = ProviderSetBuilder::from_set(&ProviderSet::mock(MockSeedConfig::default()));
        builder.concept_describer = Some(Arc::new(SlowDescriber));
        builder.timeout = Some(Duration::from_millis(50));
        let set = builder.build().unwrap();
        let err = set.describe_concept("Puyopuyo").unwrap_err();
        assert!(matches!(err, ProviderError::Timeout { ref provider, .. } if provider == "slow"));
    }

    #[test]
    fn incomplete_set_is_rejected() {
        let mut builder = ProviderSetBuilder::from_set(&ProviderSet::mock(MockSeedConfig::default()));
        builder.image_embedder = None;
        let err = builder.build().unwrap_err();
        assert_eq!(err.provider(), "image_embedder");
    }

    #[test]
    fn every_mock_declares_itself_deterministic() {
        let set = ProviderSet::mock(MockSeedConfig::default());
        let described = set.describe();
        assert_eq!(described.len(), 8);
        assert!(described.iter().all(|(_, info)| info.deterministic && info.name.starts_with("mock-")));
    }

    #[test]
    fn live_mode_without_adapters_is_unavailable() {
        let cfg = GatewayConfig { mode: ProviderMode::Live, ..GatewayConfig::default() };
        assert!(matches!(ProviderSet::from_config(&cfg), Err(ProviderError::Unavailable { .. })));
        assert!(ProviderSet::from_config(&GatewayConfig::default()).is_ok());
    }
}
