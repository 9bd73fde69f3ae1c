//! Sum-pooling DeepSet baseline: shared tanh MLP per set element, sum over
//! elements, linear classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::classify::argmax;
use super::digitsum::DigitSumDataset;
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::train::{adam_step, base_loss, epoch_order, LossKind, OptimizerState};

const GRAD_LANES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DeepSet {
    /// Widths of the element encoder, input first.
    pub phi_widths: Vec<usize>,
    pub classes: usize,
    /// Per layer: row-major `out × in` weights, then `out` biases.
    pub params: Vec<f64>,
}

struct Cache {
    /// Activations per element per layer, input first.
    acts: Vec<Vec<Vec<f64>>>,
    pooled: Vec<f64>,
    logits: Vec<f64>,
}

impl DeepSet {
    /// Glorot-uniform weights, zero biases.
    pub fn new(phi_widths: Vec<usize>, classes: usize, seed: u64) -> Result<Self> {
        if phi_widths.len() < 2 || phi_widths.contains(&0) || classes == 0 {
            return Err(Error::InvalidNetwork(format!("bad DeepSet widths {phi_widths:?} → {classes}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut dims: Vec<(usize, usize)> = phi_widths.windows(2).map(|w| (w[0], w[1])).collect();
        dims.push((*phi_widths.last().unwrap(), classes));
        for (i, o) in dims {
            let limit = (6.0 / (i + o) as f64).sqrt();
            params.extend((0..i * o).map(|_| limit * (2.0 * rng.gen::<f64>() - 1.0)));
            params.extend(std::iter::repeat_n(0.0, o));
        }
        Ok(Self {
            phi_widths,
            classes,
            params,
        })
    }

    /// Encoder `in → hidden` followed by `phi_layers − 1` more `hidden → hidden` layers.
    pub fn with_hidden(input: usize, hidden: usize, phi_layers: usize, classes: usize, seed: u64) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(hidden, phi_layers));
        Self::new(widths, classes, seed)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `(in, out, weight offset)` per layer, classifier last.
    fn layout(&self) -> Vec<(usize, usize, usize)> {
        let mut dims: Vec<(usize, usize)> = self.phi_widths.windows(2).map(|w| (w[0], w[1])).collect();
        dims.push((*self.phi_widths.last().unwrap(), self.classes));
        let mut off = 0;
        dims.into_iter()
            .map(|(i, o)| {
                let r = (i, o, off);
                off += i * o + o;
                r
            })
            .collect()
    }

    fn affine(&self, (i, o, off): (usize, usize, usize), x: &[f64]) -> Vec<f64> {
        let w = &self.params[off..off + i * o];
        let b = &self.params[off + i * o..off + i * o + o];
        w.chunks_exact(i)
            .zip(b)
            .map(|(row, b)| b + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    fn run(&self, set: &[Vec<f64>]) -> Result<Cache> {
        let input = self.phi_widths[0];
        if set.is_empty() || set.iter().any(|z| z.len() != input) {
            return Err(Error::ShapeMismatch {
                expected: format!("non-empty set of {input}-vectors"),
                found: format!("{} elements", set.len()),
            });
        }
        let layout = self.layout();
        let (phi, head) = layout.split_at(layout.len() - 1);
        let acts: Vec<Vec<Vec<f64>>> = set
            .iter()
            .map(|z| {
                let mut a = vec![z.clone()];
                for &l in phi {
                    let h = self.affine(l, a.last().unwrap()).into_iter().map(f64::tanh).collect();
                    a.push(h);
                }
                a
            })
            .collect();
        // sum each coordinate in sorted order so pooling is bitwise order-free
        let hidden = *self.phi_widths.last().unwrap();
        let pooled: Vec<f64> = (0..hidden)
            .map(|c| {
                let mut v: Vec<f64> = acts.iter().map(|a| a.last().unwrap()[c]).collect();
                v.sort_by(f64::total_cmp);
                v.into_iter().sum()
            })
            .collect();
        let logits = self.affine(head[0], &pooled);
        Ok(Cache { acts, pooled, logits })
    }

    pub fn forward(&self, set: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.run(set)?.logits)
    }

    /// Cross-entropy of one set and its gradient, accumulated into `grad`
    /// with weight `scale`.
    fn loss_grad(&self, set: &[Vec<f64>], target: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        let cache = self.run(set)?;
        let mut dl = vec![0.0; self.classes];
        let loss = scale * base_loss(LossKind::CrossEntropyDiagonal, &cache.logits, target, scale, Some(&mut dl));
        let layout = self.layout();
        let (phi, head) = layout.split_at(layout.len() - 1);
        let (hi, ho, hoff) = head[0];
        let mut dpooled = vec![0.0; hi];
        for o in 0..ho {
            for i in 0..hi {
                grad[hoff + o * hi + i] += dl[o] * cache.pooled[i];
                dpooled[i] += self.params[hoff + o * hi + i] * dl[o];
            }
            grad[hoff + hi * ho + o] += dl[o];
        }
        for acts in &cache.acts {
            let mut up = dpooled.clone();
            for (k, &(i, o, off)) in phi.iter().enumerate().rev() {
                let x = &acts[k];
                let y = &acts[k + 1];
                let dz: Vec<f64> = up.iter().zip(y).map(|(u, t)| u * (1.0 - t * t)).collect();
                let mut down = vec![0.0; i];
                for r in 0..o {
                    let row = off + r * i;
                    for c in 0..i {
                        grad[row + c] += dz[r] * x[c];
                        down[c] += self.params[row + c] * dz[r];
                    }
                    grad[off + i * o + r] += dz[r];
                }
                up = down;
            }
        }
        Ok(loss)
    }

    /// Mean cross-entropy over `items` (indices into `data`) and its gradient.
    pub fn batch_grad(&self, data: &DigitSumDataset, items: &[usize], mode: Parallelism) -> Result<(f64, Vec<f64>)> {
        let targets: Vec<Vec<f64>> = items.iter().map(|&t| super::classify::one_hot(data.labels[t])).collect();
        let scale = 1.0 / items.len().max(1) as f64;
        let lanes = par::lanes(items.len(), GRAD_LANES);
        let parts = par::map_indexed(mode, lanes.len(), |l| -> Result<(f64, Vec<f64>)> {
            let mut g = vec![0.0; self.params.len()];
            let mut loss = 0.0;
            for k in lanes[l].clone() {
                loss += self.loss_grad(&data.features[items[k]], &targets[k], scale, &mut g)?;
            }
            Ok((loss, g))
        });
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.params.len()];
        for part in parts {
            let (l, g) = part?;
            loss += l;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        Ok((loss, grad))
    }

    pub fn accuracy(&self, data: &DigitSumDataset, mode: Parallelism) -> Result<f64> {
        let preds = par::map_indexed(mode, data.len(), |t| self.forward(&data.features[t]).map(|y| argmax(&y)));
        let mut correct = 0;
        for (p, &l) in preds.into_iter().zip(&data.labels) {
            correct += usize::from(p? == l as usize);
        }
        Ok(correct as f64 / data.len().max(1) as f64)
    }
}

#[derive(Debug, Clone)]
pub struct DeepSetTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub parallelism: Parallelism,
}

/// Adam on mean cross-entropy. `on_epoch(model, epoch, mean_loss, steps)`
/// runs after every epoch. Returns the mean training loss per epoch.
pub fn train_deepset(
    model: &mut DeepSet,
    data: &DigitSumDataset,
    cfg: &DeepSetTraining,
    on_epoch: &mut dyn FnMut(&DeepSet, usize, f64, usize) -> Result<()>,
) -> Result<Vec<f64>> {
    if cfg.batch_size == 0 || data.is_empty() {
        return Err(Error::Dataset("DeepSet training needs data and a positive batch size".into()));
    }
    let mut opt = OptimizerState::new(model.param_count(), cfg.lr);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        let order = epoch_order(data.len(), cfg.seed, epoch, 0, true);
        let mut total = 0.0;
        let mut n = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let (loss, g) = model.batch_grad(data, chunk, cfg.parallelism)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("DeepSet loss {loss} at epoch {epoch}")));
            }
            adam_step(&mut model.params, &g, &mut opt)?;
            total += loss;
            n += 1;
            step += 1;
        }
        let mean = total / n as f64;
        losses.push(mean);
        on_epoch(model, epoch, mean, step)?;
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraDescriptor;
    use crate::net::InitConfig;

    fn set(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    fn small() -> DeepSet {
        let mut m = DeepSet::new(vec![4, 6, 5], 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in &mut m.params {
            *p += rng.gen_range(-0.1..0.1);
        }
        m
    }

    #[test]
    fn invariant_under_all_orderings() {
        let m = DeepSet::with_hidden(32, 84, 5, 10, 1).unwrap();
        let z = set(3, 3, 32);
        let reference = m.forward(&z).unwrap();
        for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let perm: Vec<Vec<f64>> = p.iter().map(|&i| z[i].clone()).collect();
            assert_eq!(m.forward(&perm).unwrap(), reference);
        }
    }

    #[test]
    fn zero_inputs_closed_form() {
        let m = small();
        let z = vec![vec![0.0; 4]; 3];
        // φ(0) by hand: tanh of the biases chained through the layers
        let b1 = &m.params[24..30];
        let h1: Vec<f64> = b1.iter().map(|b| b.tanh()).collect();
        let w2 = &m.params[30..60];
        let b2 = &m.params[60..65];
        let h2: Vec<f64> = (0..5)
            .map(|r| (b2[r] + (0..6).map(|c| w2[r * 6 + c] * h1[c]).sum::<f64>()).tanh())
            .collect();
        let w3 = &m.params[65..80];
        let b3 = &m.params[80..83];
        let expected: Vec<f64> = (0..3)
            .map(|r| b3[r] + (0..5).map(|c| w3[r * 5 + c] * 3.0 * h2[c]).sum::<f64>())
            .collect();
        let got = m.forward(&z).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut m = small();
        let data = DigitSumDataset {
            d: 3,
            features: vec![set(1, 3, 4), set(2, 3, 4)],
            digits: vec![vec![0, 1, 1], vec![0, 0, 0]],
            labels: vec![2, 0],
        };
        m.classes = 3;
        let (_, g) = m.batch_grad(&data, &[0, 1], Parallelism::Sequential).unwrap();
        let h = 1e-6;
        for k in 0..m.params.len() {
            let mut p = m.clone();
            p.params[k] += h;
            let up = p.batch_grad(&data, &[0, 1], Parallelism::Sequential).unwrap().0;
            p.params[k] -= 2.0 * h;
            let down = p.batch_grad(&data, &[0, 1], Parallelism::Sequential).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            assert!(err < 1e-4, "param {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn parameter_count_matches_group_net() {
        let m = DeepSet::with_hidden(32, 84, 5, 10, 0).unwrap();
        let group = InitConfig::new(AlgebraDescriptor::group(3).unwrap(), vec![96, 32, 32, 32, 10])
            .build()
            .unwrap();
        let (a, b) = (m.param_count() as f64, group.param_len() as f64);
        assert!((a - b).abs() / b < 0.05, "DeepSet {a} vs group {b}");
    }

    #[test]
    fn training_reduces_loss() {
        let mut m = DeepSet::new(vec![4, 8, 8], 3, 0).unwrap();
        let features: Vec<Vec<Vec<f64>>> = (0..30).map(|i| set(i, 3, 4)).collect();
        let labels: Vec<u8> = features.iter().map(|z| (z[0][0] + z[1][0] + z[2][0] > 0.0) as u8).collect();
        let data = DigitSumDataset {
            d: 3,
            digits: vec![vec![]; 30],
            features,
            labels,
        };
        let cfg = DeepSetTraining {
            epochs: 40,
            batch_size: 8,
            lr: 1e-2,
            seed: 0,
            parallelism: Parallelism::default(),
        };
        let mut calls = 0;
        let losses = train_deepset(&mut m, &data, &cfg, &mut |_, _, _, _| {
            calls += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(calls, 40);
        assert!(losses[39] < 0.5 * losses[0]);
        assert!(m.accuracy(&data, Parallelism::Sequential).unwrap() > 0.8);
    }
}
