//! Finite-dimensional C*-algebra backends.
//!
//! Every backend stores real scalars in a flat buffer whose layout is fixed by
//! its [`AlgebraDescriptor`]:
//!
//! | kind            | storage                                   |
//! |-----------------|-------------------------------------------|
//! | `Diagonal`      | `d` diagonal entries                      |
//! | `Dense`         | `d × d` entries, row-major                |
//! | `BlockDiagonal` | each `d_i × d_i` block, row-major, in order |
//! | `Circulant`     | first column `a_1..a_d`                   |
//! | `Group`         | one value per element of `S_d`, lexicographic |
//!
//! The storage coordinates are orthogonal for the trace form `τ(a* b)` of
//! every backend (up to a constant factor), which is why the adjoint of a
//! product can be written with the product and the involution alone; see
//! [`crate::train::tape`].

mod codec;
mod descriptor;
mod fourier;
mod group;
pub mod kernels;
mod norm;

pub use codec::{read_descriptor, write_descriptor};
pub use descriptor::{AlgebraDescriptor, AlgebraKind, Block, MAX_GROUP_ORDER};
pub use fourier::{dft as dft_of_column, embed_slot, extract_slot, extract_slot_grad, inverse_dft, root_of_unity};
pub use group::SymmetricGroup;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// An element of one concrete algebra backend.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    descriptor: AlgebraDescriptor,
    data: Vec<f64>,
}

impl AlgebraElement {
    pub fn new(descriptor: AlgebraDescriptor, data: Vec<f64>) -> Result<Self> {
        let expected = descriptor.storage_len();
        if data.len() != expected {
            return Err(Error::StorageLength {
                expected,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("element entry {bad}")));
        }
        Ok(Self { descriptor, data })
    }

    pub fn zero(descriptor: &AlgebraDescriptor) -> Self {
        Self {
            data: vec![0.0; descriptor.storage_len()],
            descriptor: descriptor.clone(),
        }
    }

    pub fn identity(descriptor: &AlgebraDescriptor) -> Self {
        let mut data = vec![0.0; descriptor.storage_len()];
        kernels::identity_into(descriptor, &mut data);
        Self {
            data,
            descriptor: descriptor.clone(),
        }
    }

    /// Builds a dense or block-diagonal element from a full row-major
    /// `d × d` matrix, ignoring entries outside the block structure, or a
    /// diagonal element from the matrix diagonal.
    pub fn from_matrix(descriptor: &AlgebraDescriptor, matrix: &[f64]) -> Result<Self> {
        let d = descriptor.order();
        if !descriptor.kind().is_matrix() {
            return Err(Error::Unsupported(descriptor.kind()));
        }
        if matrix.len() != d * d {
            return Err(Error::StorageLength {
                expected: d * d,
                found: matrix.len(),
            });
        }
        let mut data = vec![0.0; descriptor.storage_len()];
        for i in 0..d {
            for j in 0..d {
                if let Some(idx) = descriptor.entry_index(i, j) {
                    data[idx] = matrix[i * d + j];
                }
            }
        }
        Self::new(descriptor.clone(), data)
    }

    /// Full `d × d` row-major matrix realization (matrix and circulant kinds).
    pub fn to_matrix(&self) -> Result<Vec<f64>> {
        let d = self.descriptor.order();
        let mut m = vec![0.0; d * d];
        match self.descriptor.kind() {
            AlgebraKind::Circulant => {
                for i in 0..d {
                    for j in 0..d {
                        m[i * d + j] = self.data[(i + d - j) % d];
                    }
                }
            }
            AlgebraKind::Group => return Err(Error::Unsupported(AlgebraKind::Group)),
            _ => {
                for i in 0..d {
                    for j in 0..d {
                        if let Some(idx) = self.descriptor.entry_index(i, j) {
                            m[i * d + j] = self.data[idx];
                        }
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn descriptor(&self) -> &AlgebraDescriptor {
        &self.descriptor
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.descriptor != other.descriptor {
            return Err(Error::DescriptorMismatch {
                left: self.descriptor.label(),
                right: other.descriptor.label(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self {
            descriptor: self.descriptor.clone(),
            data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            descriptor: self.descriptor.clone(),
            data,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            descriptor: self.descriptor.clone(),
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// Algebra product: pointwise, matrix, blockwise, circular convolution
    /// of first columns, or group convolution `(ab)(g) = Σ_h a(h) b(h⁻¹g)`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut data = vec![0.0; self.data.len()];
        kernels::mul_acc(&self.descriptor, &self.data, &other.data, &mut data);
        Ok(Self {
            descriptor: self.descriptor.clone(),
            data,
        })
    }

    pub fn involution(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        kernels::involution_into(&self.descriptor, &self.data, &mut data);
        Self {
            descriptor: self.descriptor.clone(),
            data,
        }
    }

    pub fn operator_norm(&self) -> f64 {
        norm::operator_norm(&self.descriptor, &self.data)
    }

    /// Eigenvalues `Λ_a` of a circulant element.
    pub fn circulant_dft(&self) -> Result<Vec<Complex64>> {
        if self.descriptor.kind() != AlgebraKind::Circulant {
            return Err(Error::WrongKind {
                expected: AlgebraKind::Circulant,
                found: self.descriptor.kind(),
            });
        }
        Ok(fourier::dft(&self.data))
    }

    /// Element carrying `value` on sub-model slot `j` and zero elsewhere.
    pub fn embed_scalar(descriptor: &AlgebraDescriptor, j: usize, value: f64) -> Result<Self> {
        let mut data = vec![0.0; descriptor.storage_len()];
        embed_into(descriptor, j, value, &mut data)?;
        Ok(Self {
            descriptor: descriptor.clone(),
            data,
        })
    }

    /// Value on sub-model slot `j`; left inverse of [`Self::embed_scalar`].
    pub fn extract_scalar(&self, j: usize) -> Result<f64> {
        extract_from(&self.descriptor, &self.data, j)
    }

    /// Writes the descriptor header followed by little-endian `f64` storage.
    pub fn write_to<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        write_descriptor(w, &self.descriptor)?;
        codec::write_f64s(w, &self.data)
    }

    pub fn read_from<R: std::io::Read>(r: &mut R) -> Result<Self> {
        let descriptor = read_descriptor(r)?;
        let data = codec::read_f64s(r, descriptor.storage_len())?;
        Self::new(descriptor, data)
    }
}

fn check_slot(desc: &AlgebraDescriptor, j: usize) -> Result<()> {
    match desc.submodel_count() {
        None => Err(Error::Unsupported(desc.kind())),
        Some(count) if j >= count => Err(Error::SubmodelOutOfRange { index: j, count }),
        Some(_) => Ok(()),
    }
}

/// Slice form of [`AlgebraElement::embed_scalar`]; `out` is overwritten.
pub fn embed_into(desc: &AlgebraDescriptor, j: usize, value: f64, out: &mut [f64]) -> Result<()> {
    check_slot(desc, j)?;
    if desc.kind() == AlgebraKind::Circulant {
        fourier::embed_slot(desc.order(), j, value, out);
    } else {
        out.fill(0.0);
        out[desc.entry_index(j, j).expect("slot checked")] = value;
    }
    Ok(())
}

/// Slice form of [`AlgebraElement::extract_scalar`].
pub fn extract_from(desc: &AlgebraDescriptor, data: &[f64], j: usize) -> Result<f64> {
    check_slot(desc, j)?;
    Ok(if desc.kind() == AlgebraKind::Circulant {
        fourier::extract_slot(data, j)
    } else {
        data[desc.entry_index(j, j).expect("slot checked")]
    })
}

/// Accumulates the gradient of [`extract_from`] into `out`.
pub fn extract_grad_into(
    desc: &AlgebraDescriptor,
    j: usize,
    upstream: f64,
    out: &mut [f64],
) -> Result<()> {
    check_slot(desc, j)?;
    if desc.kind() == AlgebraKind::Circulant {
        fourier::extract_slot_grad(desc.order(), j, upstream, out);
    } else {
        out[desc.entry_index(j, j).expect("slot checked")] += upstream;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(desc: &AlgebraDescriptor, data: &[f64]) -> AlgebraElement {
        AlgebraElement::new(desc.clone(), data.to_vec()).unwrap()
    }

    fn all_descriptors() -> Vec<AlgebraDescriptor> {
        vec![
            AlgebraDescriptor::diagonal(3).unwrap(),
            AlgebraDescriptor::dense(3).unwrap(),
            AlgebraDescriptor::block_diagonal(vec![2, 1]).unwrap(),
            AlgebraDescriptor::circulant(4).unwrap(),
            AlgebraDescriptor::group(3).unwrap(),
        ]
    }

    fn sample(desc: &AlgebraDescriptor, seed: u64) -> AlgebraElement {
        let n = desc.storage_len();
        let data = (0..n)
            .map(|i| (((i as u64 + 1) * 2654435761 + seed * 97) % 1000) as f64 / 250.0 - 2.0)
            .collect::<Vec<_>>();
        el(desc, &data)
    }

    #[test]
    fn add_examples() {
        let diag = AlgebraDescriptor::diagonal(2).unwrap();
        assert_eq!(
            el(&diag, &[1.0, 2.0]).add(&el(&diag, &[3.0, 4.0])).unwrap().data(),
            &[4.0, 6.0]
        );
        let dense = AlgebraDescriptor::dense(2).unwrap();
        let sum = el(&dense, &[1.0, 2.0, 3.0, 4.0])
            .add(&el(&dense, &[5.0, 6.0, 7.0, 8.0]))
            .unwrap();
        assert_eq!(sum.data(), &[6.0, 8.0, 10.0, 12.0]);
        for desc in all_descriptors() {
            let a = sample(&desc, 3);
            assert_eq!(a.add(&AlgebraElement::zero(&desc)).unwrap(), a);
        }
    }

    #[test]
    fn descriptor_mismatch_is_an_error() {
        let a = AlgebraElement::zero(&AlgebraDescriptor::dense(2).unwrap());
        let b = AlgebraElement::zero(&AlgebraDescriptor::diagonal(2).unwrap());
        assert!(matches!(a.add(&b), Err(Error::DescriptorMismatch { .. })));
        assert!(matches!(a.mul(&b), Err(Error::DescriptorMismatch { .. })));
    }

    #[test]
    fn rejects_bad_storage() {
        let desc = AlgebraDescriptor::dense(2).unwrap();
        assert!(AlgebraElement::new(desc.clone(), vec![0.0; 3]).is_err());
        assert!(AlgebraElement::new(desc, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn group_product_on_s2() {
        let desc = AlgebraDescriptor::group(2).unwrap();
        let ab = el(&desc, &[1.0, 2.0]).mul(&el(&desc, &[3.0, 4.0])).unwrap();
        assert_eq!(ab.data(), &[11.0, 10.0]);
    }

    #[test]
    fn unit_is_neutral() {
        for desc in all_descriptors() {
            let a = sample(&desc, 11);
            let one = AlgebraElement::identity(&desc);
            assert_eq!(a.mul(&one).unwrap(), a);
            assert_eq!(one.mul(&a).unwrap(), a);
            assert!((one.operator_norm() - 1.0).abs() < 1e-12, "{desc}");
        }
    }

    #[test]
    fn dense_noncommutativity_witness() {
        let desc = AlgebraDescriptor::dense(2).unwrap();
        let a = el(&desc, &[0.0, 1.0, 0.0, 0.0]);
        let b = el(&desc, &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(a.mul(&b).unwrap().data(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.mul(&a).unwrap().data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn involution_examples() {
        let dense = AlgebraDescriptor::dense(2).unwrap();
        assert_eq!(
            el(&dense, &[1.0, 2.0, 3.0, 4.0]).involution().data(),
            &[1.0, 3.0, 2.0, 4.0]
        );
        let s2 = AlgebraDescriptor::group(2).unwrap();
        assert_eq!(el(&s2, &[1.0, 2.0]).involution().data(), &[1.0, 2.0]);
        for desc in all_descriptors() {
            let a = sample(&desc, 5);
            assert_eq!(a.involution().involution(), a);
        }
    }

    #[test]
    fn circulant_involution_is_transpose() {
        let desc = AlgebraDescriptor::circulant(4).unwrap();
        let a = el(&desc, &[1.0, 2.0, 3.0, 4.0]);
        let m = a.to_matrix().unwrap();
        let mt = a.involution().to_matrix().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[i * 4 + j], mt[j * 4 + i]);
            }
        }
    }

    #[test]
    fn norm_examples() {
        let diag = AlgebraDescriptor::diagonal(2).unwrap();
        assert_eq!(el(&diag, &[3.0, -4.0]).operator_norm(), 4.0);
        let circ = AlgebraDescriptor::circulant(2).unwrap();
        assert!((el(&circ, &[1.0, 1.0]).operator_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circulant_product_matches_matrix_product() {
        let desc = AlgebraDescriptor::circulant(5).unwrap();
        let a = sample(&desc, 1);
        let b = sample(&desc, 2);
        let ab = a.mul(&b).unwrap().to_matrix().unwrap();
        let (ma, mb) = (a.to_matrix().unwrap(), b.to_matrix().unwrap());
        for i in 0..5 {
            for j in 0..5 {
                let direct: f64 = (0..5).map(|k| ma[i * 5 + k] * mb[k * 5 + j]).sum();
                assert!((direct - ab[i * 5 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dft_requires_circulant() {
        let a = AlgebraElement::zero(&AlgebraDescriptor::dense(2).unwrap());
        assert!(matches!(a.circulant_dft(), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn embed_examples() {
        let dense = AlgebraDescriptor::dense(3).unwrap();
        let e = AlgebraElement::embed_scalar(&dense, 1, 5.0).unwrap();
        let mut expected = vec![0.0; 9];
        expected[4] = 5.0;
        assert_eq!(e.data(), expected.as_slice());
        for desc in all_descriptors() {
            match desc.submodel_count() {
                None => {
                    assert!(AlgebraElement::embed_scalar(&desc, 0, 1.0).is_err());
                }
                Some(count) => {
                    for j in 0..count {
                        let e = AlgebraElement::embed_scalar(&desc, j, -1.25).unwrap();
                        assert!((e.extract_scalar(j).unwrap() + 1.25).abs() < 1e-12);
                    }
                    assert!(matches!(
                        AlgebraElement::embed_scalar(&desc, count, 1.0),
                        Err(Error::SubmodelOutOfRange { .. })
                    ));
                }
            }
        }
    }

    #[test]
    fn diagonal_product_stays_on_slot() {
        let desc = AlgebraDescriptor::diagonal(4).unwrap();
        let e = AlgebraElement::embed_scalar(&desc, 2, 3.0).unwrap();
        let w = sample(&desc, 9);
        let p = w.mul(&e).unwrap();
        for (i, &v) in p.data().iter().enumerate() {
            if i != 2 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn serialization_round_trip() {
        for desc in all_descriptors() {
            let a = sample(&desc, 4);
            let mut buf = Vec::new();
            a.write_to(&mut buf).unwrap();
            let back = AlgebraElement::read_from(&mut buf.as_slice()).unwrap();
            assert_eq!(a, back);
        }
    }
}
