use std::io::{Read, Write};

use crate::algebra::{self, kernels, read_descriptor, write_descriptor, AlgebraDescriptor, AlgebraElement};
use crate::error::{Error, Result};

/// A vector or matrix whose entries are elements of one algebra, stored as
/// one flat buffer of consecutive element storages.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraTensor {
    descriptor: AlgebraDescriptor,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl AlgebraTensor {
    pub fn new(descriptor: AlgebraDescriptor, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::ShapeMismatch {
                expected: "rank 1 or 2".into(),
                found: format!("{shape:?}"),
            });
        }
        let expected = shape.iter().product::<usize>() * descriptor.storage_len();
        if data.len() != expected {
            return Err(Error::StorageLength {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            descriptor,
            shape,
            data,
        })
    }

    pub fn zeros(descriptor: &AlgebraDescriptor, shape: &[usize]) -> Self {
        let n = shape.iter().product::<usize>() * descriptor.storage_len();
        Self {
            descriptor: descriptor.clone(),
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn vector(descriptor: &AlgebraDescriptor, len: usize) -> Self {
        Self::zeros(descriptor, &[len])
    }

    pub fn from_elements(shape: &[usize], elements: &[AlgebraElement]) -> Result<Self> {
        let first = elements.first().ok_or_else(|| Error::ShapeMismatch {
            expected: "at least one element".into(),
            found: "0".into(),
        })?;
        let descriptor = first.descriptor().clone();
        if shape.iter().product::<usize>() != elements.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{shape:?}"),
                found: format!("{} elements", elements.len()),
            });
        }
        let mut data = Vec::with_capacity(elements.len() * descriptor.storage_len());
        for e in elements {
            if e.descriptor() != &descriptor {
                return Err(Error::DescriptorMismatch {
                    left: descriptor.label(),
                    right: e.descriptor().label(),
                });
            }
            data.extend_from_slice(e.data());
        }
        Self::new(descriptor, shape.to_vec(), data)
    }

    /// Embeds a real vector on sub-model slot `j`: entry `i` is `x_i` placed
    /// on slot `j`, everything else zero.
    pub fn embed_submodel(descriptor: &AlgebraDescriptor, j: usize, x: &[f64]) -> Result<Self> {
        let mut t = Self::vector(descriptor, x.len());
        let stride = descriptor.storage_len();
        for (chunk, &v) in t.data.chunks_exact_mut(stride).zip(x) {
            algebra::embed_into(descriptor, j, v, chunk)?;
        }
        Ok(t)
    }

    /// Slot-`j` values of every entry; left inverse of [`Self::embed_submodel`].
    pub fn extract_submodel(&self, j: usize) -> Result<Vec<f64>> {
        self.entries()
            .map(|e| algebra::extract_from(&self.descriptor, e, j))
            .collect()
    }

    pub fn descriptor(&self) -> &AlgebraDescriptor {
        &self.descriptor
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    /// Number of algebra entries.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
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

    pub fn entry(&self, i: usize) -> &[f64] {
        let s = self.descriptor.storage_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn entry_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.descriptor.storage_len();
        &mut self.data[i * s..(i + 1) * s]
    }

    /// Entry `(row, col)` of a matrix-shaped tensor.
    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        self.entry(row * self.cols() + col)
    }

    pub fn element(&self, i: usize) -> AlgebraElement {
        AlgebraElement::new(self.descriptor.clone(), self.entry(i).to_vec())
            .expect("tensor entries are valid elements")
    }

    pub fn entries(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.descriptor.storage_len())
    }

    /// Entrywise involution.
    pub fn involution(&self) -> Self {
        let s = self.descriptor.storage_len();
        let mut data = vec![0.0; self.data.len()];
        for (src, dst) in self.data.chunks_exact(s).zip(data.chunks_exact_mut(s)) {
            kernels::involution_into(&self.descriptor, src, dst);
        }
        Self {
            descriptor: self.descriptor.clone(),
            shape: self.shape.clone(),
            data,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_descriptor(w, &self.descriptor)?;
        w.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for &s in &self.shape {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let descriptor = read_descriptor(r)?;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let rank = u32::from_le_bytes(b4) as usize;
        if rank == 0 || rank > 2 {
            return Err(Error::Checkpoint(format!("tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            r.read_exact(&mut b4)?;
            shape.push(u32::from_le_bytes(b4) as usize);
        }
        let n = shape.iter().product::<usize>() * descriptor.storage_len();
        let mut data = vec![0.0; n];
        let mut b8 = [0u8; 8];
        for v in data.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        Self::new(descriptor, shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_extract_round_trip() {
        for desc in [
            AlgebraDescriptor::diagonal(3).unwrap(),
            AlgebraDescriptor::dense(3).unwrap(),
            AlgebraDescriptor::block_diagonal(vec![1, 2]).unwrap(),
            AlgebraDescriptor::circulant(3).unwrap(),
        ] {
            let x = [0.5, -1.0, 2.0, 0.0];
            for j in 0..3 {
                let t = AlgebraTensor::embed_submodel(&desc, j, &x).unwrap();
                let back = t.extract_submodel(j).unwrap();
                for (a, b) in x.iter().zip(&back) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
        let group = AlgebraDescriptor::group(3).unwrap();
        assert!(AlgebraTensor::embed_submodel(&group, 0, &[1.0]).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let desc = AlgebraDescriptor::block_diagonal(vec![2, 1]).unwrap();
        let data: Vec<f64> = (0..2 * 3 * 5).map(|i| i as f64 * 0.25 - 3.0).collect();
        let t = AlgebraTensor::new(desc, vec![2, 3], data).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(AlgebraTensor::read_from(&mut buf.as_slice()).unwrap(), t);
    }
}
