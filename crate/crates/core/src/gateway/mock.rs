//! Deterministic offline providers.
//!
//! Every mock is a pure function of its [`MockSeedConfig`] and its inputs.
//! Content hashes are SHA-256 over a role tag, the seed and the
//! length-prefixed inputs, truncated to 64 bits.
//!
//! - Prompt stages and concept descriptions fill fixed templates with a
//!   material and two physical qualities picked by the hash of the surface.
//! - Textures are two-color fractal value noise. The palette follows the
//!   material (jittered by the prompt hash); the noise pattern is keyed by
//!   `hash(image_prompt, index)`. When `hash(image_prompt) % 7 == 0` the
//!   third image is dropped, simulating a failed generation.
//! - Application blends the tiled texture 50/50 over the object's
//!   silhouette; background pixels are left alone.
//! - Videos are 16 frames: a linear cross-dissolve from A to B plus value
//!   noise keyed by the ordered pair, scaled by `16·sin(πα)` so both end
//!   frames are exact and the middle frames are not plain blends.
//! - Frame analysis picks two syllables and one of three reduplication
//!   patterns from the hash of the decoded pixels.
//! - Text embeddings are a bag of per-token Gaussian vectors (each keyed by
//!   the token's hash) plus a whole-text vector; image embeddings are a
//!   seeded random projection of a 16×16 downsample. Both are unit-normalized,
//!   so identical inputs give identical vectors and similar inputs land near
//!   each other.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::{Arc, OnceLock};

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};

use super::raster::{self, BACKGROUND, TEXTURE_SIZE};
use super::*;
use crate::rng::SplitMix64;

pub const MOCK_FRAME_COUNT: usize = 16;
const PERTURBATION_AMPLITUDE: f64 = 16.0;
const EMBED_GRID: u32 = 16;

pub const MATERIALS: [&str; 12] = [
    "clay", "wool felt", "glazed ceramic", "rubber", "moss", "brushed metal", "wet paper", "velvet", "tree bark", "gelatin",
    "sea sponge", "frosted glass",
];

pub const QUALITIES: [&str; 16] = [
    "soft", "springy", "sticky", "grainy", "glossy", "fluffy", "brittle", "slippery", "bumpy", "porous", "crinkled",
    "smooth", "wobbly", "fibrous", "dense", "airy",
];

pub const DEFAULT_SYLLABLES: [&str; 45] = [
    "ka", "ki", "ku", "ke", "ko", "sa", "shi", "su", "se", "so", "ta", "chi", "tsu", "te", "to", "na", "ni", "nu", "ne", "no",
    "ha", "hi", "fu", "he", "ho", "ma", "mi", "mu", "me", "mo", "ya", "yu", "yo", "ra", "ri", "ru", "re", "ro", "wa", "pu",
    "po", "pi", "bu", "gu", "nyo",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockSeedConfig {
    pub image_dim: usize,
    pub seed: u64,
    pub syllables: Vec<String>,
    pub text_dim: usize,
}

impl Default for MockSeedConfig {
    fn default() -> Self {
        Self { image_dim: 512, seed: 42, syllables: DEFAULT_SYLLABLES.iter().map(|s| s.to_string()).collect(), text_dim: 1536 }
    }
}

impl MockSeedConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    /// 64-bit content hash of `parts` under a role tag.
    pub fn hash(&self, role: &str, parts: &[&[u8]]) -> u64 {
        let mut h = Sha256::new();
        h.update(b"mimetic-mock/1\0");
        h.update((role.len() as u64).to_le_bytes());
        h.update(role.as_bytes());
        h.update(self.seed.to_le_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    /// Whether the texture generator drops the third image for this prompt.
    pub fn texture_generation_fails(&self, image_prompt: &str) -> bool {
        self.hash("texture", &[image_prompt.as_bytes()]).is_multiple_of(7)
    }

    /// A reduplicated mimetic word built from two syllables picked by `h`.
    pub fn mimetic_surface(&self, h: u64) -> String {
        let n = self.syllables.len().max(1) as u64;
        let syl = |k: u64| self.syllables.get(k as usize).map(String::as_str).unwrap_or("pu");
        let (a, b) = (syl((h >> 8) % n), syl((h >> 24) % n));
        let word = match h % 3 {
            0 => format!("{a}{b}{a}{b}"),
            1 => format!("{a}{b}n{a}{b}n"),
            _ => format!("{a}{b}{b}n"),
        };
        capitalize(&word)
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn pick<'a>(table: &[&'a str], h: u64) -> &'a str {
    table[(h % table.len() as u64) as usize]
}

/// Material and two distinct qualities for a surface.
fn traits(cfg: &MockSeedConfig, surface: &str) -> (&'static str, &'static str, &'static str) {
    let h = cfg.hash("traits", &[surface.as_bytes()]);
    let material = pick(&MATERIALS, h);
    let q1 = (h >> 16) % QUALITIES.len() as u64;
    let q2 = (q1 + 1 + (h >> 32) % (QUALITIES.len() as u64 - 1)) % QUALITIES.len() as u64;
    (material, QUALITIES[q1 as usize], QUALITIES[q2 as usize])
}

fn info(name: &str) -> ProviderInfo {
    ProviderInfo { name: name.to_string(), deterministic: true }
}

fn invalid(provider: &str, message: impl Into<String>) -> ProviderError {
    ProviderError::InvalidInput { provider: provider.to_string(), message: message.into() }
}

fn decode(provider: &str, bytes: &ImageBytes) -> ProviderResult<RgbImage> {
    raster::decode(bytes).map_err(|e| invalid(provider, format!("undecodable image: {e}")))
}

fn non_empty(provider: &str, text: &str) -> ProviderResult<()> {
    if text.trim().is_empty() {
        Err(invalid(provider, "empty input"))
    } else {
        Ok(())
    }
}

fn unit_f32(v: &[f64]) -> Vec<f32> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut out = vec![0.0; v.len()];
        out[0] = 1.0;
        return out;
    }
    v.iter().map(|x| (x / norm) as f32).collect()
}

macro_rules! mock_struct {
    ($name:ident) => {
        #[derive(Clone, Debug)]
        pub struct $name {
            config: Arc<MockSeedConfig>,
        }

        impl $name {
            pub fn new(config: Arc<MockSeedConfig>) -> Self {
                Self { config }
            }
        }
    };
}

mock_struct!(MockPromptStager);
mock_struct!(MockTextureGenerator);
mock_struct!(MockVideoInterpolator);
mock_struct!(MockFrameAnalyzer);
mock_struct!(MockConceptDescriber);
mock_struct!(MockTextEmbedder);

impl PromptStager for MockPromptStager {
    fn info(&self) -> ProviderInfo {
        info("mock-prompt-stager")
    }

    fn stage_prompts(&self, surface: &str) -> ProviderResult<PromptStages> {
        non_empty("mock-prompt-stager", surface)?;
        let (material, q1, q2) = traits(&self.config, surface);
        let english_description =
            format!("A {q1}, {q2} {material} surface whose touch feels the way \"{surface}\" sounds");
        Ok(PromptStages {
            image_prompt: format!("seamless tileable texture, close-up photograph, {english_description}, even lighting, high detail"),
            english_description,
            material: material.to_string(),
            physical_qualities: format!("{q1}, {q2}"),
        })
    }
}

impl TextureGenerator for MockTextureGenerator {
    fn info(&self) -> ProviderInfo {
        info("mock-texture-generator")
    }

    fn generate_textures(&self, stages: &PromptStages, count: usize) -> ProviderResult<Vec<ImageBytes>> {
        if !(1..=3).contains(&count) {
            return Err(invalid("mock-texture-generator", format!("count must be in 1..=3, got {count}")));
        }
        non_empty("mock-texture-generator", &stages.image_prompt)?;
        let cfg = &self.config;
        let prompt = stages.image_prompt.as_bytes();
        let base = palette(cfg, &stages.material, prompt);
        let fails = cfg.texture_generation_fails(&stages.image_prompt);
        Ok((0..count)
            .filter(|&i| !(fails && i == 2))
            .map(|i| {
                let key = cfg.hash("texture-pattern", &[prompt, &(i as u64).to_le_bytes()]);
                let noise = raster::value_noise(key, TEXTURE_SIZE);
                let img = RgbImage::from_fn(TEXTURE_SIZE, TEXTURE_SIZE, |x, y| {
                    let v = noise[(y * TEXTURE_SIZE + x) as usize];
                    Rgb(std::array::from_fn(|c| (base[0][c] + (base[1][c] - base[0][c]) * v).round().clamp(0.0, 255.0) as u8))
                });
                raster::encode(&img)
            })
            .collect())
    }
}

/// Two colors derived from the material, each channel jittered by up to ±24
/// from the prompt hash.
fn palette(cfg: &MockSeedConfig, material: &str, prompt: &[u8]) -> [[f64; 3]; 2] {
    let mut base = SplitMix64::new(cfg.hash("palette", &[material.as_bytes()]));
    let mut jitter = SplitMix64::new(cfg.hash("palette-jitter", &[prompt]));
    std::array::from_fn(|_| std::array::from_fn(|_| (base.uniform(20.0, 235.0) + jitter.uniform(-24.0, 24.0)).clamp(0.0, 255.0)))
}

/// Needs no configuration: the blend is fixed.
#[derive(Clone, Copy, Debug, Default)]
pub struct MockTextureApplier;

impl TextureApplier for MockTextureApplier {
    fn info(&self) -> ProviderInfo {
        info("mock-texture-applier")
    }

    fn apply_texture(&self, object: &ImageBytes, texture: &ImageBytes) -> ProviderResult<ImageBytes> {
        let name = "mock-texture-applier";
        let object = decode(name, object)?;
        let texture = decode(name, texture)?;
        let (tw, th) = texture.dimensions();
        let out = RgbImage::from_fn(object.width(), object.height(), |x, y| {
            let o = *object.get_pixel(x, y);
            if o == BACKGROUND {
                return o;
            }
            let t = texture.get_pixel(x % tw, y % th);
            Rgb(std::array::from_fn(|c| (o[c] as u16 + t[c] as u16).div_ceil(2) as u8))
        });
        Ok(raster::encode(&out))
    }
}

impl VideoInterpolator for MockVideoInterpolator {
    fn info(&self) -> ProviderInfo {
        info("mock-video-interpolator")
    }

    fn interpolate_video(&self, a: &ImageBytes, b: &ImageBytes) -> ProviderResult<Vec<ImageBytes>> {
        let name = "mock-video-interpolator";
        let a = decode(name, a)?;
        let mut b = decode(name, b)?;
        if b.dimensions() != a.dimensions() {
            b = imageops::resize(&b, a.width(), a.height(), FilterType::Nearest);
        }
        let (w, h) = a.dimensions();
        let size = w.max(h);
        let last = (MOCK_FRAME_COUNT - 1) as f64;
        let key = self.config.hash("video", &[&raster::pixel_key(&a), &raster::pixel_key(&b)]);
        Ok((0..MOCK_FRAME_COUNT)
            .map(|t| {
                let alpha = t as f64 / last;
                let amplitude = PERTURBATION_AMPLITUDE * (std::f64::consts::PI * alpha).sin();
                let noise = raster::value_noise(key ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15), size);
                let frame = RgbImage::from_fn(w, h, |x, y| {
                    let (pa, pb) = (a.get_pixel(x, y), b.get_pixel(x, y));
                    let p = amplitude * (2.0 * noise[(y * size + x) as usize] - 1.0);
                    Rgb(std::array::from_fn(|c| {
                        let v = (1.0 - alpha) * pa[c] as f64 + alpha * pb[c] as f64 + p;
                        v.round().clamp(0.0, 255.0) as u8
                    }))
                });
                raster::encode(&frame)
            })
            .collect())
    }
}

impl FrameAnalyzer for MockFrameAnalyzer {
    fn info(&self) -> ProviderInfo {
        info("mock-frame-analyzer")
    }

    fn analyze_frame(&self, frame: &ImageBytes) -> ProviderResult<String> {
        let img = decode("mock-frame-analyzer", frame)?;
        Ok(self.config.mimetic_surface(self.config.hash("analyze", &[&raster::pixel_key(&img)])))
    }
}

impl ConceptDescriber for MockConceptDescriber {
    fn info(&self) -> ProviderInfo {
        info("mock-concept-describer")
    }

    fn describe_concept(&self, surface: &str) -> ProviderResult<String> {
        non_empty("mock-concept-describer", surface)?;
        let (material, q1, q2) = traits(&self.config, surface);
        Ok(format!(
            "\"{surface}\" evokes a {q1}, {q2} {material} surface: the repeated syllables suggest a texture that yields and returns under the fingertips"
        ))
    }
}

impl TextEmbedder for MockTextEmbedder {
    fn info(&self) -> ProviderInfo {
        info("mock-text-embedder")
    }

    fn embed_text(&self, text: &str) -> ProviderResult<Vec<f32>> {
        non_empty("mock-text-embedder", text)?;
        let cfg = &self.config;
        let dim = cfg.text_dim;
        let mut acc = vec![0.0f64; dim];
        let mut add = |key: u64, weight: f64| {
            let mut rng = SplitMix64::new(key);
            acc.iter_mut().for_each(|v| *v += weight * rng.normal());
        };
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            add(cfg.hash("text-token", &[token.to_lowercase().as_bytes()]), 1.0);
        }
        add(cfg.hash("text-whole", &[text.as_bytes()]), 1.0);
        Ok(unit_f32(&acc))
    }
}

#[derive(Debug)]
pub struct MockImageEmbedder {
    config: Arc<MockSeedConfig>,
    projection: OnceLock<Vec<f64>>,
}

impl MockImageEmbedder {
    pub fn new(config: Arc<MockSeedConfig>) -> Self {
        Self { config, projection: OnceLock::new() }
    }

    fn projection(&self) -> &[f64] {
        self.projection.get_or_init(|| {
            let inputs = (EMBED_GRID * EMBED_GRID * 3) as usize;
            let mut rng = SplitMix64::new(self.config.hash("image-projection", &[]));
            (0..inputs * self.config.image_dim).map(|_| rng.normal()).collect()
        })
    }
}

impl ImageEmbedder for MockImageEmbedder {
    fn info(&self) -> ProviderInfo {
        info("mock-image-embedder")
    }

    fn embed_image(&self, image: &ImageBytes) -> ProviderResult<Vec<f32>> {
        let img = decode("mock-image-embedder", image)?;
        let small = imageops::resize(&img, EMBED_GRID, EMBED_GRID, FilterType::Triangle);
        let features: Vec<f64> = small.as_raw().iter().map(|&v| v as f64 / 255.0 - 0.5).collect();
        let proj = self.projection();
        let n = features.len();
        let mut out: Vec<f64> = (0..self.config.image_dim)
            .map(|d| proj[d * n..(d + 1) * n].iter().zip(&features).map(|(w, f)| w * f).sum())
            .collect();
        // A small content-keyed term keeps distinct rasters apart even when
        // their downsamples coincide.
        let mut rng = SplitMix64::new(self.config.hash("image-content", &[&raster::pixel_key(&img)]));
        out.iter_mut().for_each(|v| *v += 0.05 * rng.normal());
        Ok(unit_f32(&out))
    }
}
