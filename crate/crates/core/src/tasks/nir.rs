//! 2D neural implicit representation: pixel coordinate → RGB.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::net::Network;
use crate::par::Parallelism;
use crate::train::{predict_slot, Example, Input, TrainData};

pub const FOURIER_FREQUENCIES: usize = 160;
pub const FOURIER_SCALE: f64 = 10.0;
pub const PSNR_CAP: f64 = 120.0;

/// RGB image with channels in `[0, 1]`, row-major, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Image(format!("{} values for {width}×{height} RGB", data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * 3;
        &self.data[i..i + 3]
    }

    /// Reads PNG or PPM (by content), converting to RGB.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
        Self::new(w as usize, h as usize, data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Writes PNG, or binary PPM when the extension is `ppm`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_bytes())
            .ok_or_else(|| Error::Image("buffer size".into()))?;
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("ppm") => image::ImageFormat::Pnm,
            _ => image::ImageFormat::Png,
        };
        buf.save_with_format(path, format)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }
}

/// `10·log10(1/MSE)` for images in `[0, 1]`, capped at [`PSNR_CAP`].
pub fn psnr(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values", truth.len()),
            found: format!("{}", pred.len()),
        });
    }
    let mse = pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / pred.len() as f64;
    if mse < 1e-12 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// `2 × 160` Gaussian frequency matrix with standard deviation `scale`,
/// row-major (first row multiplies the row coordinate).
pub fn fourier_matrix(seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).expect("positive scale");
    (0..2 * FOURIER_FREQUENCIES).map(|_| normal.sample(&mut rng)).collect()
}

/// `[cos(2π·Bᵀc), sin(2π·Bᵀc)]`, 320 values in `[−1, 1]`.
pub fn fourier_features(coord: [f64; 2], b: &[f64]) -> Vec<f64> {
    let m = b.len() / 2;
    let mut out = vec![0.0; 2 * m];
    for k in 0..m {
        let angle = 2.0 * PI * (coord[0] * b[k] + coord[1] * b[m + k]);
        let (s, c) = angle.sin_cos();
        out[k] = c;
        out[m + k] = s;
    }
    out
}

/// Every pixel of a set of equally sized images, with shared Fourier
/// features; image `j` is the target of sub-model `j`.
#[derive(Debug, Clone)]
pub struct NirDataset {
    pub width: usize,
    pub height: usize,
    pub coords: Vec<[f64; 2]>,
    pub features: Vec<Arc<[f64]>>,
    pub images: Vec<RgbImage>,
    pub fourier: Vec<f64>,
}

impl NirDataset {
    pub fn new(images: Vec<RgbImage>, seed: u64) -> Result<Self> {
        let first = images.first().ok_or_else(|| Error::Dataset("no NIR images".into()))?;
        let (width, height) = (first.width, first.height);
        if images.iter().any(|im| im.width != width || im.height != height) {
            return Err(Error::Dataset("NIR images differ in size".into()));
        }
        let fourier = fourier_matrix(seed, FOURIER_SCALE);
        let scale = |n: usize, i: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let coords: Vec<[f64; 2]> = (0..height)
            .flat_map(|r| (0..width).map(move |c| [scale(height, r), scale(width, c)]))
            .collect();
        let features = coords.iter().map(|&c| Arc::from(fourier_features(c, &fourier))).collect();
        Ok(Self {
            width,
            height,
            coords,
            features,
            images,
            fourier,
        })
    }

    pub fn train_data(&self) -> TrainData {
        TrainData::new(
            self.images
                .iter()
                .map(|im| {
                    self.features
                        .iter()
                        .zip(im.data.chunks_exact(3))
                        .map(|(f, rgb)| Example::new(Input::Real(f.clone()), rgb.to_vec()))
                        .collect()
                })
                .collect(),
        )
    }

    /// Sub-model `slot`'s rendering of the full image, clamped to `[0, 1]`.
    pub fn reconstruct(&self, net: &Network, slot: usize, mode: Parallelism) -> Result<RgbImage> {
        let inputs: Vec<&[f64]> = self.features.iter().map(|f| &f[..]).collect();
        let out = predict_slot(net, &inputs, slot, mode)?;
        let data = out.into_iter().flatten().map(|v| v.clamp(0.0, 1.0)).collect();
        RgbImage::new(self.width, self.height, data)
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Five related woodblock-style scenes (sky, sun, mountain, waves) that
/// share their composition and differ in palette and details.
pub fn nir_fixtures(size: usize) -> Vec<RgbImage> {
    let palettes: [([f64; 3], [f64; 3], [f64; 3], [f64; 3], [f64; 3]); 5] = [
        ([0.95, 0.85, 0.65], [0.55, 0.7, 0.85], [0.2, 0.3, 0.5], [0.1, 0.25, 0.45], [0.85, 0.3, 0.2]),
        ([0.98, 0.75, 0.55], [0.85, 0.45, 0.35], [0.35, 0.2, 0.3], [0.15, 0.3, 0.4], [0.95, 0.85, 0.3]),
        ([0.85, 0.9, 0.95], [0.4, 0.55, 0.75], [0.3, 0.35, 0.3], [0.05, 0.2, 0.35], [0.9, 0.9, 0.8]),
        ([0.9, 0.8, 0.85], [0.6, 0.5, 0.7], [0.25, 0.15, 0.35], [0.2, 0.2, 0.45], [0.8, 0.5, 0.6]),
        ([0.9, 0.95, 0.8], [0.5, 0.75, 0.6], [0.2, 0.35, 0.25], [0.1, 0.35, 0.35], [0.95, 0.6, 0.2]),
    ];
    palettes
        .iter()
        .enumerate()
        .map(|(i, &(sky_top, sky_low, mountain, sea, sun))| {
            let fi = i as f64;
            let n = size as f64;
            let mut data = Vec::with_capacity(size * size * 3);
            for r in 0..size {
                for c in 0..size {
                    let (y, x) = (r as f64 / n, c as f64 / n);
                    let mut px = mix(sky_top, sky_low, y / 0.6);
                    let (sx, sy) = (0.72 - 0.08 * fi, 0.2 + 0.02 * fi);
                    let d = ((x - sx).powi(2) + (y - sy).powi(2)).sqrt();
                    px = mix(px, sun, 1.0 - smoothstep(0.075, 0.085, d));
                    let ridge = 0.55 - 0.3 * (1.0 - ((x - 0.4 - 0.03 * fi) / 0.28).abs()).max(0.0)
                        + 0.015 * (x * 40.0 + fi).sin();
                    if y > ridge {
                        let snow = 1.0 - smoothstep(ridge + 0.03, ridge + 0.05, y);
                        px = mix(mountain, [0.97, 0.97, 0.95], snow * f64::from(u8::from(ridge < 0.4)));
                    }
                    let crest = 0.62 + 0.05 * (x * 9.0 + 1.3 * fi).sin() + 0.03 * (x * 23.0 - fi).sin();
                    if y > crest {
                        let bands = 0.5 + 0.5 * ((y - crest) * 60.0 + 4.0 * (x * 7.0).sin()).sin();
                        let foam = 1.0 - smoothstep(0.0, 0.02, y - crest);
                        px = mix(mix(sea, [0.85, 0.9, 0.95], 0.35 * bands), [1.0, 1.0, 1.0], foam);
                    }
                    data.extend_from_slice(&px.map(|v| v.clamp(0.0, 1.0)));
                }
            }
            RgbImage::new(size, size, data).expect("fixture size")
        })
        .collect()
}
