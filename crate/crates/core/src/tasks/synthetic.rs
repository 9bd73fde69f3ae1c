//! MNIST-like handwritten digits drawn from stroke templates.
//!
//! Each class is a set of polylines in the unit square. A sample jitters
//! the control points, applies a random rotation, shear, scale and shift,
//! renders the strokes with a random pen width into a 28×28 canvas, blurs
//! and adds pixel noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::idx::ImageDataset;

pub const SIDE: usize = 28;

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64, n: usize) -> Stroke {
    (0..=n)
        .map(|i| {
            let t = (from + (to - from) * i as f64 / n as f64).to_radians();
            (cx + rx * t.cos(), cy - ry * t.sin())
        })
        .collect()
}

/// Strokes of digit `c` in `[0,1]²`, y pointing down.
fn template(c: u8) -> Vec<Stroke> {
    match c {
        0 => vec![arc(0.5, 0.5, 0.3, 0.42, 0.0, 360.0, 24)],
        1 => vec![vec![(0.38, 0.22), (0.55, 0.08), (0.55, 0.92)]],
        2 => vec![
            arc(0.5, 0.32, 0.28, 0.24, 160.0, -30.0, 12),
            vec![(0.74, 0.44), (0.22, 0.92), (0.8, 0.92)],
        ],
        3 => vec![
            arc(0.48, 0.3, 0.26, 0.22, 150.0, -90.0, 12),
            arc(0.48, 0.7, 0.3, 0.22, 90.0, -150.0, 12),
        ],
        4 => vec![vec![(0.62, 0.08), (0.2, 0.64), (0.82, 0.64)], vec![(0.64, 0.36), (0.64, 0.94)]],
        5 => vec![
            vec![(0.76, 0.1), (0.3, 0.1), (0.27, 0.46)],
            arc(0.47, 0.67, 0.3, 0.26, 140.0, -150.0, 14),
        ],
        6 => vec![
            vec![(0.66, 0.08), (0.36, 0.4), (0.24, 0.66)],
            arc(0.5, 0.7, 0.26, 0.22, 180.0, -180.0, 20),
        ],
        7 => vec![vec![(0.2, 0.1), (0.8, 0.1), (0.4, 0.94)]],
        8 => vec![
            arc(0.5, 0.29, 0.22, 0.2, 0.0, 360.0, 18),
            arc(0.5, 0.71, 0.27, 0.22, 0.0, 360.0, 18),
        ],
        9 => vec![
            arc(0.5, 0.32, 0.25, 0.22, 0.0, 360.0, 18),
            vec![(0.75, 0.32), (0.68, 0.94)],
        ],
        _ => unreachable!("digit classes are 0..10"),
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// One rendered sample of class `c`, row-major 28×28 in `[0, 1]`.
pub fn render_digit(c: u8, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let jitter = Normal::new(0.0, 0.035).expect("valid sigma");
    let angle: f64 = Normal::new(0.0, 0.2).expect("valid sigma").sample(rng);
    let shear: f64 = rng.gen_range(-0.25..0.25);
    let sx: f64 = rng.gen_range(0.75..1.1);
    let sy: f64 = rng.gen_range(0.8..1.1);
    let shift = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let width: f64 = rng.gen_range(0.9..2.0);
    let (sin, cos) = angle.sin_cos();

    let strokes: Vec<Stroke> = template(c)
        .into_iter()
        .map(|s| {
            s.into_iter()
                .map(|(x, y)| {
                    let (x, y) = (x + jitter.sample(rng) - 0.5, y + jitter.sample(rng) - 0.5);
                    let (x, y) = (sx * (x + shear * y), sy * y);
                    let (x, y) = (cos * x - sin * y, sin * x + cos * y);
                    // 20×20 box centred in the canvas, like MNIST
                    (14.0 + 20.0 * x + shift.0, 14.0 + 20.0 * y + shift.1)
                })
                .collect()
        })
        .collect();

    let mut img = vec![0.0; SIDE * SIDE];
    for r in 0..SIDE {
        for col in 0..SIDE {
            let p = (col as f64 + 0.5, r as f64 + 0.5);
            let mut dist = f64::INFINITY;
            for s in &strokes {
                for w in s.windows(2) {
                    dist = dist.min(segment_distance(p, w[0], w[1]));
                }
            }
            img[r * SIDE + col] = (1.0 - (dist - width) / 1.2).clamp(0.0, 1.0);
        }
    }
    let blurred = blur(&img);
    let noise = Normal::new(0.0, 0.06).expect("valid sigma");
    blurred
        .into_iter()
        .map(|v| {
            let speck = if rng.gen::<f64>() < 0.01 { rng.gen_range(0.3..0.8) } else { 0.0 };
            (v + noise.sample(rng) + speck).clamp(0.0, 1.0)
        })
        .collect()
}

fn blur(img: &[f64]) -> Vec<f64> {
    const K: [f64; 3] = [0.25, 0.5, 0.25];
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for r in 0..SIDE {
            for c in 0..SIDE {
                let mut acc = 0.0;
                for (o, k) in K.iter().enumerate() {
                    let (rr, cc) = if horizontal {
                        (r as isize, c as isize + o as isize - 1)
                    } else {
                        (r as isize + o as isize - 1, c as isize)
                    };
                    if (0..SIDE as isize).contains(&rr) && (0..SIDE as isize).contains(&cc) {
                        acc += k * src[rr as usize * SIDE + cc as usize];
                    }
                }
                out[r * SIDE + c] = acc;
            }
        }
        out
    };
    pass(&pass(img, true), false)
}

/// `per_class` samples of each digit, classes interleaved.
pub fn synthetic_digits(per_class: usize, seed: u64) -> ImageDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(per_class * 10 * SIDE * SIDE);
    let mut labels = Vec::with_capacity(per_class * 10);
    for _ in 0..per_class {
        for c in 0..10u8 {
            pixels.extend(render_digit(c, &mut rng));
            labels.push(c);
        }
    }
    ImageDataset::new(SIDE, SIDE, pixels, labels).expect("generator output is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = synthetic_digits(3, 11);
        assert_eq!(a, synthetic_digits(3, 11));
        assert_ne!(a, synthetic_digits(3, 12));
        assert_eq!(a.len(), 30);
        assert!(a.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn classes_differ_on_average() {
        let ds = synthetic_digits(20, 1);
        let mut means = vec![vec![0.0; SIDE * SIDE]; 10];
        for i in 0..ds.len() {
            for (m, p) in means[ds.labels[i] as usize].iter_mut().zip(ds.image(i)) {
                *m += p / 20.0;
            }
        }
        for a in 0..10 {
            for b in a + 1..10 {
                let d: f64 = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y).powi(2)).sum();
                assert!(d > 1.0, "classes {a} and {b} too close: {d}");
            }
            let ink: f64 = means[a].iter().sum();
            assert!(ink > 40.0 && ink < 400.0, "class {a} ink {ink}");
        }
    }
}
