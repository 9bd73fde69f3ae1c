//! Slice-level arithmetic on raw element storage.
//!
//! These are the hot loops behind [`AlgebraElement`](super::AlgebraElement)
//! and the tensor code; callers guarantee slice lengths match the
//! descriptor's storage length.

use super::{AlgebraDescriptor, AlgebraKind, SymmetricGroup};

/// `out += a · b`.
pub fn mul_acc(desc: &AlgebraDescriptor, a: &[f64], b: &[f64], out: &mut [f64]) {
    let d = desc.order();
    match desc.kind() {
        AlgebraKind::Diagonal => {
            for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        AlgebraKind::Dense => square_mul_acc(d, a, b, out),
        AlgebraKind::BlockDiagonal => {
            let mut off = 0;
            for &s in desc.block_sizes() {
                let n = s * s;
                square_mul_acc(s, &a[off..off + n], &b[off..off + n], &mut out[off..off + n]);
                off += n;
            }
        }
        AlgebraKind::Circulant => {
            // (a ⊛ b)_i = Σ_k a_k b_{i-k mod d}
            for (k, &ak) in a.iter().enumerate() {
                if ak == 0.0 {
                    continue;
                }
                for i in k..d {
                    out[i] += ak * b[i - k];
                }
                for i in 0..k {
                    out[i] += ak * b[i + d - k];
                }
            }
        }
        AlgebraKind::Group => {
            // (a·b)(g) = Σ_h a(h) b(h⁻¹g)
            let group = SymmetricGroup::cached(d).expect("valid descriptor");
            for (h, &ah) in a.iter().enumerate() {
                if ah == 0.0 {
                    continue;
                }
                let row = group.compose_row(group.inverse(h));
                for (o, &idx) in out.iter_mut().zip(row) {
                    *o += ah * b[idx];
                }
            }
        }
    }
}

#[inline]
fn square_mul_acc(d: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let out_row = &mut out[i * d..(i + 1) * d];
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b[k * d..(k + 1) * d];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
}

/// `out = a*`.
pub fn involution_into(desc: &AlgebraDescriptor, a: &[f64], out: &mut [f64]) {
    let d = desc.order();
    match desc.kind() {
        AlgebraKind::Diagonal => out.copy_from_slice(a),
        AlgebraKind::Dense => transpose_into(d, a, out),
        AlgebraKind::BlockDiagonal => {
            let mut off = 0;
            for &s in desc.block_sizes() {
                let n = s * s;
                transpose_into(s, &a[off..off + n], &mut out[off..off + n]);
                off += n;
            }
        }
        AlgebraKind::Circulant => {
            for i in 0..d {
                out[i] = a[(d - i) % d];
            }
        }
        AlgebraKind::Group => {
            let group = SymmetricGroup::cached(d).expect("valid descriptor");
            for (g, o) in out.iter_mut().enumerate() {
                *o = a[group.inverse(g)];
            }
        }
    }
}

#[inline]
fn transpose_into(d: usize, a: &[f64], out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j];
        }
    }
}

/// Writes the unit element into `out`.
pub fn identity_into(desc: &AlgebraDescriptor, out: &mut [f64]) {
    out.fill(0.0);
    match desc.kind() {
        AlgebraKind::Diagonal => out.fill(1.0),
        AlgebraKind::Dense | AlgebraKind::BlockDiagonal => {
            for i in 0..desc.order() {
                let idx = desc.entry_index(i, i).expect("diagonal entry");
                out[idx] = 1.0;
            }
        }
        AlgebraKind::Circulant | AlgebraKind::Group => out[0] = 1.0,
    }
}

/// Right translation of a group function: `out(g) = a(g h)`.
pub fn right_translate_into(group: &SymmetricGroup, a: &[f64], h: usize, out: &mut [f64]) {
    for (g, o) in out.iter_mut().enumerate() {
        *o = a[group.compose(g, h)];
    }
}
