//! Reverse-mode differentiation at the level of algebra operations.
//!
//! For every backend the storage coordinates are orthogonal for the trace
//! pairing, so the adjoint of `x ↦ w·x` is `dy ↦ w*·dy` and the adjoint of
//! `w ↦ w·x` is `dy ↦ dy·x*`. The backward pass therefore needs only the
//! product and the involution of the algebra.

use super::data::SlotBatch;
use super::loss::{sample_loss, LossSpec};
use crate::algebra::kernels;
use crate::error::{Error, Result};
use crate::net::{activate, affine_apply, AlgebraTensor, Network};
use crate::par::{self, Parallelism};

const LANES: usize = 8;

/// Forward record of one sample: each layer's input and pre-activation.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<AlgebraTensor>,
    pre: Vec<AlgebraTensor>,
    output: AlgebraTensor,
}

impl Tape {
    pub fn record(net: &Network, x: &AlgebraTensor) -> Result<Self> {
        let mut inputs = Vec::with_capacity(net.depth());
        let mut pre = Vec::with_capacity(net.depth());
        let mut h = x.clone();
        for layer in net.layers() {
            let z = affine_apply(&layer.weights, layer.bias.as_ref(), &h)?;
            inputs.push(std::mem::replace(&mut h, z.clone()));
            activate(&mut h, layer.activation);
            pre.push(z);
        }
        Ok(Self { inputs, pre, output: h })
    }

    pub fn output(&self) -> &AlgebraTensor {
        &self.output
    }

    /// Accumulates `∂L/∂θ` into `grad` (flat parameter layout) given
    /// `dy = ∂L/∂output`. `adjoint` holds the involuted weights.
    pub fn backward(&self, net: &Network, adjoint: &Adjoint, dy: &[f64], grad: &mut [f64]) {
        let desc = net.descriptor();
        let s = desc.storage_len();
        let activated = desc.activated_indices();
        let offsets = net.param_offsets();
        let mut upstream = dy.to_vec();
        let mut xstar = vec![0.0; s];
        for (i, layer) in net.layers().iter().enumerate().rev() {
            let (rows, cols) = (layer.weights.rows(), layer.weights.cols());
            let mut dpre = upstream;
            if layer.activation != crate::net::Activation::Identity {
                for (e, z) in dpre.chunks_exact_mut(s).zip(self.pre[i].entries()) {
                    for &a in &activated {
                        e[a] *= layer.activation.derivative(z[a]);
                    }
                }
            }
            let (w_off, b_off) = offsets[i];
            let x = &self.inputs[i];
            for l in 0..cols {
                kernels::involution_into(desc, x.entry(l), &mut xstar);
                for k in 0..rows {
                    let at = w_off + (k * cols + l) * s;
                    kernels::mul_acc(desc, &dpre[k * s..(k + 1) * s], &xstar, &mut grad[at..at + s]);
                }
            }
            if let Some(b_off) = b_off {
                for (g, v) in grad[b_off..b_off + rows * s].iter_mut().zip(&dpre) {
                    *g += v;
                }
            }
            if i == 0 {
                break;
            }
            let wstar = &adjoint.weights[i];
            let mut dx = vec![0.0; cols * s];
            for k in 0..rows {
                let dk = &dpre[k * s..(k + 1) * s];
                for l in 0..cols {
                    kernels::mul_acc(desc, wstar.at(k, l), dk, &mut dx[l * s..(l + 1) * s]);
                }
            }
            upstream = dx;
        }
    }
}

/// Entrywise involutions of every weight matrix, computed once per batch.
#[derive(Debug, Clone)]
pub struct Adjoint {
    weights: Vec<AlgebraTensor>,
}

impl Adjoint {
    pub fn new(net: &Network) -> Self {
        Self {
            weights: net.layers().iter().map(|l| l.weights.involution()).collect(),
        }
    }
}

/// Loss and gradient of `Σ_slots mean_batch loss` by taping every sample.
/// Works for every backend and input kind.
pub fn grad_generic(
    net: &Network,
    batch: &[SlotBatch<'_>],
    spec: &LossSpec,
    mode: Parallelism,
) -> Result<(f64, Vec<f64>)> {
    let items: Vec<(usize, f64, &super::Example)> = batch
        .iter()
        .filter(|b| !b.examples.is_empty())
        .flat_map(|b| {
            let scale = 1.0 / b.examples.len() as f64;
            b.examples.iter().map(move |e| (b.slot, scale, *e))
        })
        .collect();
    if items.is_empty() {
        return Err(Error::Dataset("empty batch".into()));
    }
    let adjoint = Adjoint::new(net);
    let ranges = par::lanes(items.len(), LANES);
    let lanes = par::map_indexed(mode, ranges.len(), |r| -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; net.param_len()];
        let mut loss = 0.0;
        for &(slot, scale, ex) in &items[ranges[r].clone()] {
            let x = ex.input.to_tensor(net, slot)?;
            let tape = Tape::record(net, &x)?;
            let y = tape.output();
            let mut dy = vec![0.0; y.data().len()];
            let value = sample_loss(net.descriptor(), y.data(), &ex.target, spec, slot, scale, Some(&mut dy))?;
            loss += scale * value;
            tape.backward(net, &adjoint, &dy, &mut grad);
        }
        Ok((loss, grad))
    });
    let mut total = 0.0;
    let mut grad = vec![0.0; net.param_len()];
    for lane in lanes {
        let (l, g) = lane?;
        total += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((total, grad))
}

/// Loss only, same convention as [`grad_generic`].
pub fn loss_generic(net: &Network, batch: &[SlotBatch<'_>], spec: &LossSpec) -> Result<f64> {
    let mut total = 0.0;
    for b in batch.iter().filter(|b| !b.examples.is_empty()) {
        let scale = 1.0 / b.examples.len() as f64;
        for ex in &b.examples {
            let y = net.forward(&ex.input.to_tensor(net, b.slot)?)?;
            total += scale * sample_loss(net.descriptor(), y.data(), &ex.target, spec, b.slot, 1.0, None)?;
        }
    }
    Ok(total)
}
