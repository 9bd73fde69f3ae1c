//! Curves as CSV (always) and as a small PNG line chart (best effort).

use std::fmt::Write as _;
use std::path::Path;

use image::{Rgb, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

/// Long-format CSV: `series,<x>,<y>`.
pub fn curve_csv(x_name: &str, y_name: &str, series: &[Series]) -> String {
    let mut out = format!("series,{x_name},{y_name}\n");
    for s in series {
        for (x, y) in &s.points {
            let _ = writeln!(out, "{},{x},{y}", s.name);
        }
    }
    out
}

const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [214, 39, 40],
    [44, 160, 44],
    [255, 127, 14],
    [148, 103, 189],
    [140, 86, 75],
];

/// Renders every series into one chart with a light grid; axes span the
/// data range. No labels are drawn, the CSV carries the numbers.
pub fn render(series: &[Series], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return img;
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let margin = 24.0;
    let (w, h) = (width as f64 - 2.0 * margin, height as f64 - 2.0 * margin);
    let map = |x: f64, y: f64| (margin + (x - x0) / (x1 - x0) * w, margin + (1.0 - (y - y0) / (y1 - y0)) * h);

    for i in 0..=4 {
        let t = i as f64 / 4.0;
        line(&mut img, (margin, margin + t * h), (margin + w, margin + t * h), [225, 225, 225]);
        line(&mut img, (margin + t * w, margin), (margin + t * w, margin + h), [225, 225, 225]);
    }
    line(&mut img, (margin, margin + h), (margin + w, margin + h), [0, 0, 0]);
    line(&mut img, (margin, margin), (margin, margin + h), [0, 0, 0]);

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mapped: Vec<(f64, f64)> = s.points.iter().map(|&(x, y)| map(x, y)).collect();
        for pair in mapped.windows(2) {
            line(&mut img, pair[0], pair[1], color);
        }
        if let [single] = mapped[..] {
            line(&mut img, single, single, color);
        }
    }
    img
}

pub fn save_png(path: &Path, series: &[Series]) -> image::ImageResult<()> {
    render(series, 640, 400).save(path)
}

fn line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let (x, y) = (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, Rgb(color));
        }
    }
}
