use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{activate_in_place, default_bias, Activation, LayerSpec};
use super::AlgebraTensor;
use crate::algebra::{kernels, AlgebraDescriptor, AlgebraKind};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};

/// One affine map followed by an activation. `weights` has shape
/// `(out_width, in_width)`, `bias` shape `(out_width,)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: AlgebraTensor,
    pub bias: Option<AlgebraTensor>,
    pub activation: Activation,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            in_width: self.weights.cols(),
            out_width: self.weights.rows(),
            has_bias: self.bias.is_some(),
            activation: self.activation,
        }
    }
}

/// `f = σ_H ∘ W_H ∘ ⋯ ∘ σ_1 ∘ W_1` over one algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    descriptor: AlgebraDescriptor,
    layers: Vec<Layer>,
}

impl Network {
    pub fn from_layers(descriptor: AlgebraDescriptor, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            layer.spec().validate()?;
            let tensors = std::iter::once(&layer.weights).chain(layer.bias.as_ref());
            for t in tensors {
                if t.descriptor() != &descriptor {
                    return Err(Error::DescriptorMismatch {
                        left: descriptor.label(),
                        right: t.descriptor().label(),
                    });
                }
            }
            if layer.weights.shape().len() != 2 {
                return Err(Error::InvalidNetwork(format!("layer {i} weights are not a matrix")));
            }
            if let Some(b) = &layer.bias {
                if b.shape() != [layer.weights.rows()] {
                    return Err(Error::InvalidNetwork(format!("layer {i} bias shape")));
                }
            }
            if i > 0 && layers[i - 1].weights.rows() != layer.weights.cols() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} outputs {} but layer {i} expects {}",
                    i - 1,
                    layers[i - 1].weights.rows(),
                    layer.weights.cols()
                )));
            }
        }
        Ok(Self { descriptor, layers })
    }

    pub fn descriptor(&self) -> &AlgebraDescriptor {
        &self.descriptor
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `N_0, …, N_H`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].weights.cols())
            .chain(self.layers.iter().map(|l| l.weights.rows()))
            .collect()
    }

    /// Total number of stored real scalars across weights and biases.
    pub fn param_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.bias.as_ref().map_or(0, |b| b.data().len()))
            .sum()
    }

    pub fn param_bytes(&self) -> usize {
        self.param_len() * std::mem::size_of::<f64>()
    }

    /// Parameter buffers in canonical order: layer by layer, weights then bias.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.weights.data());
            if let Some(b) = &l.bias {
                out.push(b.data());
            }
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weights.data_mut());
            if let Some(b) = &mut l.bias {
                out.push(b.data_mut());
            }
        }
        out
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_len() {
            return Err(Error::StorageLength {
                expected: self.param_len(),
                found: params.len(),
            });
        }
        let mut off = 0;
        for s in self.param_slices_mut() {
            let n = s.len();
            s.copy_from_slice(&params[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Offsets of each layer's weight and bias buffers in the flat layout.
    pub fn param_offsets(&self) -> Vec<(usize, Option<usize>)> {
        let mut off = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = off;
                off += l.weights.data().len();
                let b = l.bias.as_ref().map(|b| {
                    let o = off;
                    off += b.data().len();
                    o
                });
                (w, b)
            })
            .collect()
    }

    pub fn forward(&self, x: &AlgebraTensor) -> Result<AlgebraTensor> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = affine_apply(&layer.weights, layer.bias.as_ref(), &h)?;
            activate(&mut h, layer.activation);
        }
        Ok(h)
    }

    /// Output of every layer (post-activation), first layer first.
    pub fn forward_layers(&self, x: &AlgebraTensor) -> Result<Vec<AlgebraTensor>> {
        let mut outs: Vec<AlgebraTensor> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = outs.last().unwrap_or(x);
            let mut h = affine_apply(&layer.weights, layer.bias.as_ref(), input)?;
            activate(&mut h, layer.activation);
            outs.push(h);
        }
        Ok(outs)
    }

    pub fn forward_batch(
        &self,
        xs: &[AlgebraTensor],
        mode: Parallelism,
    ) -> Result<Vec<AlgebraTensor>> {
        par::map_indexed(mode, xs.len(), |i| self.forward(&xs[i]))
            .into_iter()
            .collect()
    }
}

/// `y_k = Σ_l W[k, l] · x[l] (+ b[k])`.
pub fn affine_apply(
    weights: &AlgebraTensor,
    bias: Option<&AlgebraTensor>,
    x: &AlgebraTensor,
) -> Result<AlgebraTensor> {
    let desc = weights.descriptor();
    if x.descriptor() != desc {
        return Err(Error::DescriptorMismatch {
            left: desc.label(),
            right: x.descriptor().label(),
        });
    }
    let (rows, cols) = (weights.rows(), weights.cols());
    if weights.shape().len() != 2 || x.shape() != [cols] {
        return Err(Error::ShapeMismatch {
            expected: format!("input of length {cols}"),
            found: format!("{:?}", x.shape()),
        });
    }
    let mut y = match bias {
        Some(b) => {
            if b.descriptor() != desc || b.shape() != [rows] {
                return Err(Error::ShapeMismatch {
                    expected: format!("bias of length {rows}"),
                    found: format!("{:?}", b.shape()),
                });
            }
            b.clone()
        }
        None => AlgebraTensor::vector(desc, rows),
    };
    for k in 0..rows {
        let out = y.entry_mut(k);
        for l in 0..cols {
            kernels::mul_acc(desc, weights.at(k, l), x.entry(l), out);
        }
    }
    Ok(y)
}

/// Applies `act` entrywise: matrix backends only activate diagonal entries
/// (circulant: the diagonal coefficient), group backends every value.
pub fn activate(x: &mut AlgebraTensor, act: Activation) {
    if act == Activation::Identity {
        return;
    }
    let activated = x.descriptor().activated_indices();
    let s = x.descriptor().storage_len();
    for entry in x.data_mut().chunks_exact_mut(s) {
        activate_in_place(act, &activated, entry);
    }
}

#[derive(Debug, Clone)]
pub struct InitConfig {
    pub descriptor: AlgebraDescriptor,
    pub widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub bias: bool,
    pub seed: u64,
    pub offdiag_scale: f64,
}

impl InitConfig {
    pub fn new(descriptor: AlgebraDescriptor, widths: Vec<usize>) -> Self {
        let bias = default_bias(&descriptor);
        Self {
            descriptor,
            widths,
            hidden_activation: Activation::LeakyReLU,
            output_activation: Activation::Identity,
            bias,
            seed: 0,
            offdiag_scale: 0.1,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn offdiag_scale(mut self, scale: f64) -> Self {
        self.offdiag_scale = scale;
        self
    }

    pub fn bias(mut self, bias: bool) -> Self {
        self.bias = bias;
        self
    }

    pub fn hidden_activation(mut self, act: Activation) -> Self {
        self.hidden_activation = act;
        self
    }

    pub fn output_activation(mut self, act: Activation) -> Self {
        self.output_activation = act;
        self
    }

    /// Builds the network. Diagonal coefficients come from one random stream
    /// and off-diagonal coefficients from another, so the diagonal part of a
    /// dense or block-diagonal network matches the diagonal network drawn
    /// with the same seed.
    pub fn build(&self) -> Result<Network> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::InvalidNetwork(format!(
                "need at least two positive widths, got {:?}",
                self.widths
            )));
        }
        if !(self.offdiag_scale >= 0.0 && self.offdiag_scale.is_finite()) {
            return Err(Error::InvalidNetwork("offdiag_scale must be finite and ≥ 0".into()));
        }
        let desc = &self.descriptor;
        let mut diag_rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut off_rng = ChaCha8Rng::seed_from_u64(self.seed);
        off_rng.set_stream(1);

        let depth = self.widths.len() - 1;
        let mut layers = Vec::with_capacity(depth);
        for (i, w) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut weights = AlgebraTensor::zeros(desc, &[fan_out, fan_in]);
            for e in 0..fan_out * fan_in {
                init_element(
                    desc,
                    weights.entry_mut(e),
                    limit,
                    self.offdiag_scale,
                    &mut diag_rng,
                    &mut off_rng,
                );
            }
            let activation = if i + 1 == depth {
                self.output_activation
            } else {
                self.hidden_activation
            };
            layers.push(Layer {
                weights,
                bias: self.bias.then(|| AlgebraTensor::vector(desc, fan_out)),
                activation,
            });
        }
        Network::from_layers(desc.clone(), layers)
    }
}

fn symmetric_uniform(rng: &mut ChaCha8Rng, limit: f64) -> f64 {
    limit * (2.0 * rng.gen::<f64>() - 1.0)
}

fn init_element(
    desc: &AlgebraDescriptor,
    out: &mut [f64],
    limit: f64,
    offdiag_scale: f64,
    diag_rng: &mut ChaCha8Rng,
    off_rng: &mut ChaCha8Rng,
) {
    let d = desc.order();
    match desc.kind() {
        AlgebraKind::Diagonal => {
            for v in out.iter_mut() {
                *v = symmetric_uniform(diag_rng, limit);
            }
        }
        AlgebraKind::Dense | AlgebraKind::BlockDiagonal => {
            for i in 0..d {
                let idx = desc.entry_index(i, i).expect("diagonal entry");
                out[idx] = symmetric_uniform(diag_rng, limit);
            }
            for i in 0..d {
                for j in 0..d {
                    if i == j {
                        continue;
                    }
                    if let Some(idx) = desc.entry_index(i, j) {
                        out[idx] = symmetric_uniform(off_rng, limit * offdiag_scale);
                    }
                }
            }
        }
        AlgebraKind::Circulant | AlgebraKind::Group => {
            out[0] = symmetric_uniform(diag_rng, limit);
            for v in out[1..].iter_mut() {
                *v = symmetric_uniform(off_rng, limit * offdiag_scale);
            }
        }
    }
}

/// Convenience wrapper over [`InitConfig`] with default bias and an identity
/// output activation.
pub fn init_network(
    descriptor: &AlgebraDescriptor,
    widths: &[usize],
    activation: Activation,
    seed: u64,
    offdiag_scale: f64,
) -> Result<Network> {
    InitConfig::new(descriptor.clone(), widths.to_vec())
        .hidden_activation(activation)
        .seed(seed)
        .offdiag_scale(offdiag_scale)
        .build()
}
