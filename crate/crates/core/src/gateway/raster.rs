//! PNG encode/decode and the procedural rasters used by the mocks and the
//! dataset generator.

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::imageops::{self, FilterType as ResizeFilter};
use image::{ImageEncoder, Rgb, RgbImage};

use super::ImageBytes;
use crate::rng::SplitMix64;

pub const TEXTURE_SIZE: u32 = 256;
pub const THUMBNAIL_SIZE: u32 = 64;
/// Pixels of this exact color are background in object images.
pub const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);

pub fn decode(bytes: &ImageBytes) -> Result<RgbImage, String> {
    if bytes.0.is_empty() {
        return Err("empty image".into());
    }
    let img = image::load_from_memory_with_format(&bytes.0, image::ImageFormat::Png).map_err(|e| e.to_string())?;
    let rgb = img.to_rgb8();
    if rgb.width() == 0 || rgb.height() == 0 {
        return Err("image has no pixels".into());
    }
    Ok(rgb)
}

pub fn encode(img: &RgbImage) -> ImageBytes {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Sub)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .expect("encoding an in-memory RGB8 buffer cannot fail");
    ImageBytes(out)
}

/// Width, height and raw RGB bytes, for hashing decoded content rather than
/// a particular PNG encoding of it.
pub fn pixel_key(img: &RgbImage) -> Vec<u8> {
    let mut key = Vec::with_capacity(8 + img.as_raw().len());
    key.extend_from_slice(&img.width().to_le_bytes());
    key.extend_from_slice(&img.height().to_le_bytes());
    key.extend_from_slice(img.as_raw());
    key
}

pub fn thumbnail(img: &RgbImage) -> RgbImage {
    imageops::resize(img, THUMBNAIL_SIZE, THUMBNAIL_SIZE, ResizeFilter::Triangle)
}

/// Fractal value noise in `[0, 1]`, tileable with period `size`.
///
/// Four octaves on lattices of 4, 8, 16 and 32 cells, amplitude halving per
/// octave, smoothstep-interpolated. Lattice values come from `seed`.
pub fn value_noise(seed: u64, size: u32) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let n = size as usize;
    let mut acc = vec![0.0; n * n];
    let mut total = 0.0;
    let mut amplitude = 1.0;
    for octave in 0..4 {
        let cells = 4usize << octave;
        let lattice: Vec<f64> = (0..cells * cells).map(|_| rng.next_f64()).collect();
        let at = |x: usize, y: usize| lattice[(y % cells) * cells + (x % cells)];
        let scale = cells as f64 / size as f64;
        for y in 0..n {
            let fy = y as f64 * scale;
            let (y0, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
            for x in 0..n {
                let fx = x as f64 * scale;
                let (x0, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
                let top = lerp(at(x0, y0), at(x0 + 1, y0), tx);
                let bottom = lerp(at(x0, y0 + 1), at(x0 + 1, y0 + 1), tx);
                acc[y * n + x] += amplitude * lerp(top, bottom, ty);
            }
        }
        total += amplitude;
        amplitude *= 0.5;
    }
    acc.iter_mut().for_each(|v| *v /= total);
    acc
}

/// A `size`×`size` two-color noise texture.
pub fn noise_texture(seed: u64, size: u32) -> RgbImage {
    let mut rng = SplitMix64::derive(seed, 1);
    let mut color = || [rng.below(256) as f64, rng.below(256) as f64, rng.below(256) as f64];
    let (c0, c1) = (color(), color());
    let noise = value_noise(seed, size);
    RgbImage::from_fn(size, size, |x, y| {
        let v = noise[(y * size + x) as usize];
        Rgb(std::array::from_fn(|c| lerp(c0[c], c1[c], v).round() as u8))
    })
}

/// The two presentation objects textures are applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetObject {
    Vase,
    Headphones,
}

impl TargetObject {
    pub const ALL: [TargetObject; 2] = [TargetObject::Vase, TargetObject::Headphones];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetObject::Vase => "vase",
            TargetObject::Headphones => "headphones",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.as_str() == s)
    }

    /// Gray-shaded silhouette on a white background.
    pub fn render(self) -> RgbImage {
        let s = TEXTURE_SIZE as f64;
        RgbImage::from_fn(TEXTURE_SIZE, TEXTURE_SIZE, |x, y| {
            let (u, v) = ((x as f64 + 0.5) / s, (y as f64 + 0.5) / s);
            let inside = match self {
                TargetObject::Vase => vase(u, v),
                TargetObject::Headphones => headphones(u, v),
            };
            match inside {
                Some(shade) => {
                    let g = (90.0 + 120.0 * shade).round() as u8;
                    Rgb([g, g, g.saturating_sub(6)])
                }
                None => BACKGROUND,
            }
        })
    }
}

/// Shade in `[0, 1]` inside the vase body, `None` outside.
fn vase(u: f64, v: f64) -> Option<f64> {
    if !(0.12..=0.92).contains(&v) {
        return None;
    }
    // Narrow neck widening into a round belly.
    let t = (v - 0.12) / 0.8;
    let radius = 0.08 + 0.26 * (std::f64::consts::PI * t.powf(0.8)).sin().max(0.0) + 0.02 * (t < 0.08) as u8 as f64;
    let dx = (u - 0.5).abs();
    (dx <= radius).then(|| 1.0 - dx / radius.max(1e-9) * 0.8)
}

fn headphones(u: f64, v: f64) -> Option<f64> {
    let (cx, cy) = (0.5, 0.52);
    let r = ((u - cx).powi(2) + (v - cy).powi(2)).sqrt();
    // Headband: upper half ring.
    if v <= cy && (0.30..=0.36).contains(&r) {
        return Some(0.7);
    }
    // Ear cups: rounded rectangles at both band ends.
    for cup_x in [cx - 0.33, cx + 0.33] {
        let (dx, dy) = ((u - cup_x).abs(), (v - (cy + 0.1)).abs());
        if dx <= 0.08 && dy <= 0.16 {
            return Some(1.0 - dy / 0.16 * 0.6);
        }
    }
    None
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let img = noise_texture(9, 32);
        let back = decode(&encode(&img)).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode(&img), encode(&back));
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let a = value_noise(1, 64);
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a, value_noise(1, 64));
        assert_ne!(a, value_noise(2, 64));
    }

    #[test]
    fn objects_have_a_silhouette_and_background() {
        for obj in TargetObject::ALL {
            let img = obj.render();
            let fg = img.pixels().filter(|p| **p != BACKGROUND).count();
            assert!(fg > 2000 && fg < 40000, "{obj:?}: {fg}");
            assert_eq!(TargetObject::parse(obj.as_str()), Some(obj));
        }
    }

    #[test]
    fn undecodable_bytes() {
        assert!(decode(&ImageBytes(vec![])).is_err());
        assert!(decode(&ImageBytes(b"not a png".to_vec())).is_err());
    }
}
