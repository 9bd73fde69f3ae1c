use crate::error::{Error, Result};
use crate::net::Network;

/// Adam moments aligned to the flat parameter layout of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(param_len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
        }
    }

    pub fn for_network(net: &Network, lr: f64) -> Self {
        Self::new(net.param_len(), lr)
    }

    /// Bias-corrected Adam update of one contiguous parameter range starting
    /// at flat offset `offset`. Call [`Self::begin_step`] first.
    fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64]) {
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }

    fn begin_step(&mut self, params: usize, grads: usize) -> Result<()> {
        if params != self.m.len() || grads != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.m.len()),
                found: format!("{params} parameters, {grads} gradients"),
            });
        }
        self.step += 1;
        Ok(())
    }
}

/// One Adam step on a flat parameter vector.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) -> Result<()> {
    state.begin_step(params.len(), grads.len())?;
    state.update(0, params, grads);
    Ok(())
}

/// One Adam step applied in place to a network's parameters.
pub fn adam_step_network(net: &mut Network, grads: &[f64], state: &mut OptimizerState) -> Result<()> {
    state.begin_step(net.param_len(), grads.len())?;
    let mut off = 0;
    for slice in net.param_slices_mut() {
        let n = slice.len();
        state.update(off, slice, &grads[off..off + n]);
        off += n;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut st = OptimizerState::new(3, 1e-3);
        adam_step(&mut p, &[0.0; 3], &mut st).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![0.0; 4];
        let g = [0.5, -3.0, 1e-3, -1e3];
        let mut st = OptimizerState::new(4, 1e-4);
        adam_step(&mut p, &g, &mut st).unwrap();
        for (pi, gi) in p.iter().zip(&g) {
            // m̂ = g, v̂ = g², so the step is lr·g/(|g|+ε)
            let expected = -1e-4 * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_runs_agree() {
        let run = || {
            let mut p = vec![0.3, -0.1];
            let mut st = OptimizerState::new(2, 0.01);
            for i in 0..20 {
                let g = [p[0] - 1.0 + i as f64 * 0.01, 2.0 * p[1]];
                adam_step(&mut p, &g, &mut st).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_misaligned_buffers() {
        let mut st = OptimizerState::new(2, 0.01);
        assert!(adam_step(&mut [0.0; 3], &[0.0; 3], &mut st).is_err());
    }
}
