use nalgebra::DMatrix;

use super::{fourier, AlgebraDescriptor, AlgebraKind, SymmetricGroup};

/// Operator norm of an element: the largest singular value of its matrix
/// realization. Group elements use the left-regular representation
/// `(L_a)[g, h] = a(g h⁻¹)`, which contains every irreducible representation
/// of a finite group and therefore yields the same norm.
pub fn operator_norm(desc: &AlgebraDescriptor, data: &[f64]) -> f64 {
    let d = desc.order();
    match desc.kind() {
        AlgebraKind::Diagonal => data.iter().fold(0.0, |m, x| m.max(x.abs())),
        AlgebraKind::Dense => spectral_norm(d, data),
        AlgebraKind::BlockDiagonal => {
            let mut off = 0;
            let mut best: f64 = 0.0;
            for &s in desc.block_sizes() {
                best = best.max(spectral_norm(s, &data[off..off + s * s]));
                off += s * s;
            }
            best
        }
        // circulant matrices are normal: singular values are |eigenvalues|
        AlgebraKind::Circulant => fourier::dft(data)
            .iter()
            .fold(0.0, |m, l| m.max(l.norm())),
        AlgebraKind::Group => {
            let group = SymmetricGroup::cached(d).expect("valid descriptor");
            let n = group.len();
            let regular =
                DMatrix::from_fn(n, n, |g, h| data[group.compose(g, group.inverse(h))]);
            largest_singular_value(regular)
        }
    }
}

fn spectral_norm(d: usize, data: &[f64]) -> f64 {
    largest_singular_value(DMatrix::from_row_slice(d, d, data))
}

fn largest_singular_value(m: DMatrix<f64>) -> f64 {
    m.singular_values().iter().fold(0.0, |a: f64, &b| a.max(b))
}
