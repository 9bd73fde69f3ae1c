//! Fourier diagonalization of circulant matrices.
//!
//! A circulant matrix with first column `a` factors as `F Λ_a F*`, with
//! eigenvalues `λ_k = Σ_i a_i ω^{ik}` and `ω = exp(2π√-1 / d)`. Products of
//! circulant matrices multiply eigenvalues componentwise, so Fourier
//! component `k` behaves as an independent complex sub-model.

use std::f64::consts::TAU;

use num_complex::Complex64;

/// `ω^{m}` for `ω = exp(2π√-1 / d)`, reducing `m` modulo `d` first.
#[inline]
pub fn root_of_unity(d: usize, m: usize) -> Complex64 {
    let angle = TAU * ((m % d) as f64) / d as f64;
    Complex64::new(angle.cos(), angle.sin())
}

/// Eigenvalues of the circulant matrix with first column `a`.
pub fn dft(a: &[f64]) -> Vec<Complex64> {
    let d = a.len();
    (0..d)
        .map(|k| {
            a.iter()
                .enumerate()
                .map(|(i, &ai)| ai * root_of_unity(d, i * k))
                .sum()
        })
        .collect()
}

/// Inverse of [`dft`] for spectra of real circulant matrices; imaginary
/// residue is discarded.
pub fn inverse_dft(lambda: &[Complex64]) -> Vec<f64> {
    let d = lambda.len();
    (0..d)
        .map(|i| {
            let s: Complex64 = lambda
                .iter()
                .enumerate()
                .map(|(k, &l)| l * root_of_unity(d, (d - (i * k) % d) % d))
                .sum();
            s.re / d as f64
        })
        .collect()
}

/// Weight of the real cosine pattern that puts value 1 on Fourier slot `j`.
fn slot_weight(d: usize, j: usize) -> f64 {
    if j == 0 || 2 * j == d {
        1.0
    } else {
        2.0
    }
}

/// First column whose eigenvalue at slot `j` has real part `value`. For
/// slots without a real partner the conjugate slot `d - j` receives the same
/// value, since real storage keeps the spectrum Hermitian.
pub fn embed_slot(d: usize, j: usize, value: f64, out: &mut [f64]) {
    let w = slot_weight(d, j) * value / d as f64;
    for (i, o) in out.iter_mut().enumerate() {
        *o = w * (TAU * ((i * j) % d) as f64 / d as f64).cos();
    }
}

/// Real part of eigenvalue `j`.
pub fn extract_slot(a: &[f64], j: usize) -> f64 {
    let d = a.len();
    a.iter()
        .enumerate()
        .map(|(i, &ai)| ai * (TAU * ((i * j) % d) as f64 / d as f64).cos())
        .sum()
}

/// Gradient of [`extract_slot`] with respect to the stored column.
pub fn extract_slot_grad(d: usize, j: usize, upstream: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o += upstream * (TAU * ((i * j) % d) as f64 / d as f64).cos();
    }
}
