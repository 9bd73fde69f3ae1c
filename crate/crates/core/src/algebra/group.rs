//! Enumerated symmetric groups `S_d` with composition and inverse tables.
//!
//! Permutations are stored as image arrays, `p[i]` being the image of `i`
//! (0-based), and enumerated in lexicographic order so the identity is at
//! index 0. Composition is `(p ∘ q)(i) = p(q(i))`.

use std::sync::OnceLock;

use super::descriptor::MAX_GROUP_ORDER;
use super::{AlgebraDescriptor, AlgebraElement};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricGroup {
    degree: usize,
    elements: Vec<Vec<usize>>,
    compose: Vec<usize>,
    inverse: Vec<usize>,
}

impl SymmetricGroup {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_GROUP_ORDER {
            return Err(Error::InvalidDescriptor(format!(
                "symmetric group degree must be in 1..={MAX_GROUP_ORDER}, got {degree}"
            )));
        }
        let elements = lexicographic_permutations(degree);
        let n = elements.len();
        let index_of = |p: &[usize]| -> usize { permutation_rank(p) };

        let mut compose = vec![0; n * n];
        let mut scratch = vec![0; degree];
        for (i, p) in elements.iter().enumerate() {
            for (j, q) in elements.iter().enumerate() {
                for (k, s) in scratch.iter_mut().enumerate() {
                    *s = p[q[k]];
                }
                compose[i * n + j] = index_of(&scratch);
            }
        }
        let inverse = elements
            .iter()
            .map(|p| {
                let mut inv = vec![0; degree];
                for (i, &pi) in p.iter().enumerate() {
                    inv[pi] = i;
                }
                index_of(&inv)
            })
            .collect();

        Ok(Self {
            degree,
            elements,
            compose,
            inverse,
        })
    }

    /// Shared instance for `S_degree`.
    pub fn cached(degree: usize) -> Result<&'static SymmetricGroup> {
        static CACHE: [OnceLock<SymmetricGroup>; MAX_GROUP_ORDER] =
            [const { OnceLock::new() }; MAX_GROUP_ORDER];
        if degree == 0 || degree > MAX_GROUP_ORDER {
            return Err(Error::InvalidDescriptor(format!(
                "symmetric group degree must be in 1..={MAX_GROUP_ORDER}, got {degree}"
            )));
        }
        Ok(CACHE[degree - 1].get_or_init(|| Self::new(degree).expect("degree checked")))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn element(&self, index: usize) -> &[usize] {
        &self.elements[index]
    }

    /// Index of `elements[i] ∘ elements[j]`.
    #[inline]
    pub fn compose(&self, i: usize, j: usize) -> usize {
        self.compose[i * self.elements.len() + j]
    }

    /// Row `i` of the composition table: `j ↦ index of elements[i] ∘ elements[j]`.
    #[inline]
    pub fn compose_row(&self, i: usize) -> &[usize] {
        let n = self.elements.len();
        &self.compose[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn inverse(&self, i: usize) -> usize {
        self.inverse[i]
    }

    pub fn inverse_table(&self) -> &[usize] {
        &self.inverse
    }

    pub fn index_of(&self, perm: &[usize]) -> Option<usize> {
        if perm.len() != self.degree {
            return None;
        }
        let mut seen = vec![false; self.degree];
        for &p in perm {
            if p >= self.degree || std::mem::replace(&mut seen[p], true) {
                return None;
            }
        }
        Some(permutation_rank(perm))
    }

    /// Encodes `z` (one feature vector per position) as `n` group functions
    /// with `x(g) = g·z`. Position blocks are concatenated, `g` moves the
    /// block at position `k` to position `g(k)`, and function `block * dim + c`
    /// carries coordinate `c` of block `block`: its value at `g` is
    /// `z[g⁻¹(block)][c]`.
    pub fn lift(&self, z: &[Vec<f64>]) -> Result<Vec<AlgebraElement>> {
        if z.len() != self.degree {
            return Err(Error::ShapeMismatch {
                expected: format!("{} feature vectors", self.degree),
                found: format!("{}", z.len()),
            });
        }
        let dim = z[0].len();
        if z.iter().any(|v| v.len() != dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("feature vectors of length {dim}"),
                found: "ragged feature vectors".into(),
            });
        }
        let mut data = vec![0.0; self.degree * dim * self.len()];
        self.lift_into(z.iter().map(Vec::as_slice), dim, &mut data);
        let desc = AlgebraDescriptor::group(self.degree)?;
        let stride = self.len();
        data.chunks_exact(stride)
            .map(|c| AlgebraElement::new(desc.clone(), c.to_vec()))
            .collect()
    }

    /// Flat variant of [`SymmetricGroup::lift`]: writes `degree * dim`
    /// consecutive group functions into `out`.
    pub fn lift_into<'a>(
        &self,
        z: impl IntoIterator<Item = &'a [f64]>,
        dim: usize,
        out: &mut [f64],
    ) {
        let n = self.len();
        let blocks: Vec<&[f64]> = z.into_iter().collect();
        debug_assert_eq!(out.len(), self.degree * dim * n);
        for g in 0..n {
            let inv = &self.elements[self.inverse[g]];
            for block in 0..self.degree {
                let src = blocks[inv[block]];
                for (c, &v) in src.iter().enumerate() {
                    out[(block * dim + c) * n + g] = v;
                }
            }
        }
    }
}

fn lexicographic_permutations(degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..degree).collect();
    loop {
        out.push(current.clone());
        // next permutation in lexicographic order
        let Some(i) = (0..degree.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1])
        else {
            break;
        };
        let j = (i + 1..degree).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

/// Lexicographic rank of a permutation (Lehmer code).
fn permutation_rank(p: &[usize]) -> usize {
    let n = p.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = p[i + 1..].iter().filter(|&&q| q < p[i]).count();
        rank = rank * (n - i) + smaller;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_first_and_inverses() {
        for d in 1..=5 {
            let g = SymmetricGroup::new(d).unwrap();
            assert_eq!(g.element(0), (0..d).collect::<Vec<_>>().as_slice());
            for i in 0..g.len() {
                assert_eq!(g.compose(i, g.inverse(i)), 0);
                assert_eq!(g.compose(g.inverse(i), i), 0);
                assert_eq!(g.compose(0, i), i);
            }
        }
    }

    #[test]
    fn lexicographic_order() {
        let g = SymmetricGroup::new(3).unwrap();
        let expected = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(g.element(i), e);
            assert_eq!(g.index_of(e), Some(i));
        }
        assert_eq!(g.index_of(&[0, 0, 1]), None);
    }

    #[test]
    fn composition_is_associative_exhaustively() {
        for d in 1..=4 {
            let g = SymmetricGroup::new(d).unwrap();
            let n = g.len();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        assert_eq!(g.compose(g.compose(a, b), c), g.compose(a, g.compose(b, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn composition_matches_direct_application() {
        let g = SymmetricGroup::new(4).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                let p = g.element(i);
                let q = g.element(j);
                let pq: Vec<usize> = (0..4).map(|k| p[q[k]]).collect();
                assert_eq!(g.element(g.compose(i, j)), pq.as_slice());
            }
        }
    }

    #[test]
    fn lift_two_items() {
        let g = SymmetricGroup::new(2).unwrap();
        let x = g.lift(&[vec![1.5], vec![-2.0]]).unwrap();
        // function 0 is block 0, function 1 is block 1
        assert_eq!(x[0].data(), &[1.5, -2.0]);
        assert_eq!(x[1].data(), &[-2.0, 1.5]);
    }

    #[test]
    fn lift_matches_bruteforce_reindexing() {
        let g = SymmetricGroup::new(3).unwrap();
        let z = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let x = g.lift(&z).unwrap();
        for (gi, perm) in g.elements().iter().enumerate() {
            // g·z places item k at position perm[k]
            let mut permuted = vec![vec![0.0; 2]; 3];
            for k in 0..3 {
                permuted[perm[k]] = z[k].clone();
            }
            for block in 0..3 {
                for c in 0..2 {
                    assert_eq!(x[block * 2 + c].data()[gi], permuted[block][c]);
                }
            }
        }
        // identity recovers z in order
        for block in 0..3 {
            for c in 0..2 {
                assert_eq!(x[block * 2 + c].data()[0], z[block][c]);
            }
        }
    }

    #[test]
    fn lift_rejects_wrong_shapes() {
        let g = SymmetricGroup::new(3).unwrap();
        assert!(g.lift(&[vec![1.0], vec![2.0]]).is_err());
        assert!(g.lift(&[vec![1.0], vec![2.0], vec![3.0, 4.0]]).is_err());
    }
}
