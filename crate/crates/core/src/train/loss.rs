use crate::algebra::{self, AlgebraDescriptor, AlgebraKind};
use crate::error::{Error, Result};
use crate::net::AlgebraTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    MseDiagonal,
    CrossEntropyDiagonal,
    HuberDiagonal,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(LossKind::MseDiagonal),
            "cross_entropy" | "crossentropy" | "ce" => Ok(LossKind::CrossEntropyDiagonal),
            "huber" => Ok(LossKind::HuberDiagonal),
            other => Err(Error::InvalidNetwork(format!("unknown loss `{other}`"))),
        }
    }
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::MseDiagonal => "mse",
            LossKind::CrossEntropyDiagonal => "cross_entropy",
            LossKind::HuberDiagonal => "huber",
        }
    }
}

pub const HUBER_DELTA: f64 = 1.0;

/// Base loss on the active slot plus `offdiag_weight` times the squared
/// off-diagonal entries in the active row and column of every output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub offdiag_weight: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            offdiag_weight: 0.5,
        }
    }

    pub fn with_offdiag_weight(mut self, w: f64) -> Result<Self> {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidNetwork(format!("offdiag_weight must be ≥ 0, got {w}")));
        }
        self.offdiag_weight = w;
        Ok(self)
    }
}

/// Real-vector loss `ℓ(pred, target)`; when `grad` is given the gradient
/// with respect to `pred` is accumulated into it, scaled by `scale`.
pub fn base_loss(
    kind: LossKind,
    pred: &[f64],
    target: &[f64],
    scale: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let n = pred.len() as f64;
    match kind {
        LossKind::MseDiagonal => {
            let mut total = 0.0;
            let mut g = grad;
            for (i, (p, t)) in pred.iter().zip(target).enumerate() {
                let r = p - t;
                total += r * r;
                if let Some(g) = g.as_deref_mut() {
                    g[i] += scale * 2.0 * r / n;
                }
            }
            total / n
        }
        LossKind::HuberDiagonal => {
            let mut total = 0.0;
            let mut g = grad;
            for (i, (p, t)) in pred.iter().zip(target).enumerate() {
                let r = p - t;
                let (v, dv) = if r.abs() <= HUBER_DELTA {
                    (0.5 * r * r, r)
                } else {
                    (HUBER_DELTA * (r.abs() - 0.5 * HUBER_DELTA), HUBER_DELTA * r.signum())
                };
                total += v;
                if let Some(g) = g.as_deref_mut() {
                    g[i] += scale * dv / n;
                }
            }
            total / n
        }
        LossKind::CrossEntropyDiagonal => {
            let max = pred.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = pred.iter().map(|p| (p - max).exp()).sum();
            let log_z = max + sum.ln();
            let mass: f64 = target.iter().sum();
            let total: f64 = pred.iter().zip(target).map(|(p, t)| -t * (p - log_z)).sum();
            if let Some(g) = grad {
                for (i, (p, t)) in pred.iter().zip(target).enumerate() {
                    g[i] += scale * (mass * (p - log_z).exp() - t);
                }
            }
            total
        }
    }
}

/// Per-sample loss on a flat output buffer of `target.len()` elements,
/// with sub-model `slot` active (ignored for group algebras). When `dy` is
/// given, `scale × ∂loss/∂y` is accumulated into it.
pub fn sample_loss(
    desc: &AlgebraDescriptor,
    y: &[f64],
    target: &[f64],
    spec: &LossSpec,
    slot: usize,
    scale: f64,
    mut dy: Option<&mut [f64]>,
) -> Result<f64> {
    let s = desc.storage_len();
    let n_out = target.len();
    if y.len() != n_out * s {
        return Err(Error::ShapeMismatch {
            expected: format!("{n_out} outputs"),
            found: format!("{} outputs", y.len() / s.max(1)),
        });
    }
    if desc.kind() == AlgebraKind::Group {
        let inv = 1.0 / s as f64;
        let pred: Vec<f64> = y.chunks_exact(s).map(|e| e.iter().sum::<f64>() * inv).collect();
        let mut g = vec![0.0; n_out];
        let value = base_loss(spec.kind, &pred, target, scale, Some(&mut g));
        if let Some(dy) = dy {
            for (e, gk) in dy.chunks_exact_mut(s).zip(&g) {
                for v in e {
                    *v += gk * inv;
                }
            }
        }
        return Ok(value);
    }

    let mut pred = Vec::with_capacity(n_out);
    for e in y.chunks_exact(s) {
        pred.push(algebra::extract_from(desc, e, slot)?);
    }
    let mut g = vec![0.0; n_out];
    let mut value = base_loss(spec.kind, &pred, target, scale, Some(&mut g));
    if let Some(dy) = dy.as_deref_mut() {
        for (e, gk) in dy.chunks_exact_mut(s).zip(&g) {
            algebra::extract_grad_into(desc, slot, *gk, e)?;
        }
    }

    if spec.offdiag_weight > 0.0 && matches!(desc.kind(), AlgebraKind::Dense | AlgebraKind::BlockDiagonal) {
        let idx = offdiag_indices(desc, slot);
        let w = spec.offdiag_weight;
        for (k, e) in y.chunks_exact(s).enumerate() {
            for &i in &idx {
                value += w * e[i] * e[i];
                if let Some(dy) = dy.as_deref_mut() {
                    dy[k * s + i] += scale * 2.0 * w * e[i];
                }
            }
        }
    }
    Ok(value)
}

/// Storage indices of entries `(j, l)` and `(l, j)` for `l ≠ j`.
pub(crate) fn offdiag_indices(desc: &AlgebraDescriptor, j: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for l in 0..desc.order() {
        if l == j {
            continue;
        }
        out.extend(desc.entry_index(j, l));
        out.extend(desc.entry_index(l, j));
    }
    out
}

/// Loss of output `y` against an algebra-valued target `t`: the target's
/// active slot (or its mean over the group) is the real target vector.
pub fn loss_eval(y: &AlgebraTensor, t: &AlgebraTensor, spec: &LossSpec, active_submodel: usize) -> Result<f64> {
    if y.descriptor() != t.descriptor() {
        return Err(Error::DescriptorMismatch {
            left: y.descriptor().label(),
            right: t.descriptor().label(),
        });
    }
    if y.shape() != t.shape() || y.shape().len() != 1 {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", y.shape()),
            found: format!("{:?}", t.shape()),
        });
    }
    let desc = y.descriptor();
    let target: Vec<f64> = if desc.kind() == AlgebraKind::Group {
        t.entries().map(|e| e.iter().sum::<f64>() / e.len() as f64).collect()
    } else {
        t.extract_submodel(active_submodel)?
    };
    sample_loss(desc, y.data(), &target, spec, active_submodel, 1.0, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(kind: LossKind, pred: &[f64], target: &[f64]) {
        let mut g = vec![0.0; pred.len()];
        base_loss(kind, pred, target, 1.0, Some(&mut g));
        for i in 0..pred.len() {
            let mut p = pred.to_vec();
            p[i] += 1e-6;
            let up = base_loss(kind, &p, target, 1.0, None);
            p[i] -= 2e-6;
            let down = base_loss(kind, &p, target, 1.0, None);
            assert!(((up - down) / 2e-6 - g[i]).abs() < 1e-6, "{kind:?} coord {i}");
        }
    }

    #[test]
    fn base_loss_gradients() {
        let pred = [0.3, -1.7, 2.5, 0.0];
        let target = [0.0, 1.0, 0.0, 0.0];
        for kind in [LossKind::MseDiagonal, LossKind::HuberDiagonal, LossKind::CrossEntropyDiagonal] {
            fd(kind, &pred, &target);
        }
    }

    #[test]
    fn huber_branches() {
        assert_eq!(base_loss(LossKind::HuberDiagonal, &[0.5], &[0.0], 1.0, None), 0.125);
        assert_eq!(base_loss(LossKind::HuberDiagonal, &[3.0], &[0.0], 1.0, None), 2.5);
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let v = base_loss(LossKind::CrossEntropyDiagonal, &[0.0; 4], &[0.0, 0.0, 1.0, 0.0], 1.0, None);
        assert!((v - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_is_zero() {
        let desc = AlgebraDescriptor::dense(3).unwrap();
        let t = AlgebraTensor::embed_submodel(&desc, 1, &[0.5, -1.0]).unwrap();
        let spec = LossSpec::new(LossKind::MseDiagonal);
        assert_eq!(loss_eval(&t, &t, &spec, 1).unwrap(), 0.0);
    }

    #[test]
    fn offdiag_entry_costs_half_its_square() {
        let desc = AlgebraDescriptor::dense(2).unwrap();
        let spec = LossSpec::new(LossKind::MseDiagonal);
        let t = AlgebraTensor::embed_submodel(&desc, 0, &[1.0]).unwrap();
        for (entry, c) in [(1, 3.0), (2, -2.0)] {
            let mut y = t.clone();
            y.data_mut()[entry] = c;
            assert_eq!(loss_eval(&y, &t, &spec, 0).unwrap(), 0.5 * c * c);
        }
        // the (1,1) diagonal entry belongs to the other sub-model
        let mut y = t.clone();
        y.data_mut()[3] = 4.0;
        assert_eq!(loss_eval(&y, &t, &spec, 0).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_mse_equals_real_mse() {
        let desc = AlgebraDescriptor::dense(3).unwrap();
        let spec = LossSpec::new(LossKind::MseDiagonal);
        let y = AlgebraTensor::embed_submodel(&desc, 2, &[0.2, 0.4, -0.1]).unwrap();
        let t = AlgebraTensor::embed_submodel(&desc, 2, &[0.0, 1.0, 0.0]).unwrap();
        let real = base_loss(LossKind::MseDiagonal, &[0.2, 0.4, -0.1], &[0.0, 1.0, 0.0], 1.0, None);
        assert!((loss_eval(&y, &t, &spec, 2).unwrap() - real).abs() < 1e-15);
    }

    #[test]
    fn offdiag_gradient_vanishes_at_zero() {
        let desc = AlgebraDescriptor::block_diagonal(vec![2, 2]).unwrap();
        let spec = LossSpec::new(LossKind::HuberDiagonal);
        let y = AlgebraTensor::embed_submodel(&desc, 1, &[0.7, -0.2]).unwrap();
        let mut dy = vec![0.0; y.data().len()];
        sample_loss(&desc, y.data(), &[0.0, 0.0], &spec, 1, 1.0, Some(&mut dy)).unwrap();
        for k in 0..2 {
            for i in offdiag_indices(&desc, 1) {
                assert_eq!(dy[k * 8 + i], 0.0);
            }
        }
    }

    #[test]
    fn group_readout_is_mean() {
        let desc = AlgebraDescriptor::group(2).unwrap();
        let spec = LossSpec::new(LossKind::MseDiagonal);
        let y = AlgebraTensor::new(desc.clone(), vec![1], vec![1.0, 3.0]).unwrap();
        let t = AlgebraTensor::new(desc, vec![1], vec![2.0, 2.0]).unwrap();
        assert_eq!(loss_eval(&y, &t, &spec, 0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_mismatch() {
        let desc = AlgebraDescriptor::dense(2).unwrap();
        let spec = LossSpec::new(LossKind::MseDiagonal);
        let y = AlgebraTensor::vector(&desc, 2);
        let t = AlgebraTensor::vector(&desc, 3);
        assert!(loss_eval(&y, &t, &spec, 0).is_err());
        assert!(LossSpec::new(LossKind::MseDiagonal).with_offdiag_weight(-1.0).is_err());
    }
}
