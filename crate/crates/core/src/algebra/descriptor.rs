use std::fmt;

use crate::error::{Error, Result};

/// Largest symmetric group order supported (6! = 720 elements).
pub const MAX_GROUP_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgebraKind {
    Diagonal,
    Dense,
    BlockDiagonal,
    Circulant,
    Group,
}

impl AlgebraKind {
    pub fn tag(self) -> u8 {
        match self {
            AlgebraKind::Diagonal => 0,
            AlgebraKind::Dense => 1,
            AlgebraKind::BlockDiagonal => 2,
            AlgebraKind::Circulant => 3,
            AlgebraKind::Group => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => AlgebraKind::Diagonal,
            1 => AlgebraKind::Dense,
            2 => AlgebraKind::BlockDiagonal,
            3 => AlgebraKind::Circulant,
            4 => AlgebraKind::Group,
            _ => return None,
        })
    }

    /// Matrix kinds whose sub-models live on the matrix diagonal.
    pub fn is_matrix(self) -> bool {
        matches!(
            self,
            AlgebraKind::Diagonal | AlgebraKind::Dense | AlgebraKind::BlockDiagonal
        )
    }
}

/// Identifies one concrete finite-dimensional C*-algebra.
///
/// `order` is the matrix order `d`, or the `d` of the symmetric group `S_d`
/// for [`AlgebraKind::Group`]. `block_sizes` is non-empty only for
/// block-diagonal algebras.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlgebraDescriptor {
    kind: AlgebraKind,
    order: usize,
    block_sizes: Vec<usize>,
}

impl AlgebraDescriptor {
    pub fn new(kind: AlgebraKind, order: usize, block_sizes: Vec<usize>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidDescriptor("order must be positive".into()));
        }
        match kind {
            AlgebraKind::BlockDiagonal => {
                if block_sizes.is_empty() || block_sizes.contains(&0) {
                    return Err(Error::InvalidDescriptor(
                        "block sizes must be positive and non-empty".into(),
                    ));
                }
                let total: usize = block_sizes.iter().sum();
                if total != order {
                    return Err(Error::InvalidDescriptor(format!(
                        "block sizes sum to {total}, order is {order}"
                    )));
                }
            }
            _ if !block_sizes.is_empty() => {
                return Err(Error::InvalidDescriptor(format!(
                    "block sizes only apply to block-diagonal algebras, got {kind:?}"
                )));
            }
            AlgebraKind::Group if order > MAX_GROUP_ORDER => {
                return Err(Error::InvalidDescriptor(format!(
                    "symmetric group order {order} exceeds {MAX_GROUP_ORDER}"
                )));
            }
            _ => {}
        }
        Ok(Self {
            kind,
            order,
            block_sizes,
        })
    }

    pub fn diagonal(d: usize) -> Result<Self> {
        Self::new(AlgebraKind::Diagonal, d, Vec::new())
    }

    pub fn dense(d: usize) -> Result<Self> {
        Self::new(AlgebraKind::Dense, d, Vec::new())
    }

    pub fn block_diagonal(block_sizes: Vec<usize>) -> Result<Self> {
        let order = block_sizes.iter().sum();
        Self::new(AlgebraKind::BlockDiagonal, order, block_sizes)
    }

    pub fn circulant(d: usize) -> Result<Self> {
        Self::new(AlgebraKind::Circulant, d, Vec::new())
    }

    pub fn group(d: usize) -> Result<Self> {
        Self::new(AlgebraKind::Group, d, Vec::new())
    }

    pub fn kind(&self) -> AlgebraKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Number of stored real scalars per element.
    pub fn storage_len(&self) -> usize {
        let d = self.order;
        match self.kind {
            AlgebraKind::Diagonal | AlgebraKind::Circulant => d,
            AlgebraKind::Dense => d * d,
            AlgebraKind::BlockDiagonal => self.block_sizes.iter().map(|b| b * b).sum(),
            AlgebraKind::Group => (1..=d).product(),
        }
    }

    /// Number of independent sub-model slots, `None` for group algebras.
    pub fn submodel_count(&self) -> Option<usize> {
        match self.kind {
            AlgebraKind::Group => None,
            _ => Some(self.order),
        }
    }

    /// Blocks as `(row offset, size, storage offset)`. Diagonal and dense
    /// algebras are reported as `d` unit blocks and one full block.
    pub fn blocks(&self) -> Vec<Block> {
        match self.kind {
            AlgebraKind::Diagonal => (0..self.order)
                .map(|i| Block {
                    offset: i,
                    size: 1,
                    storage_offset: i,
                })
                .collect(),
            AlgebraKind::Dense => vec![Block {
                offset: 0,
                size: self.order,
                storage_offset: 0,
            }],
            AlgebraKind::BlockDiagonal => {
                let mut offset = 0;
                let mut storage_offset = 0;
                self.block_sizes
                    .iter()
                    .map(|&size| {
                        let b = Block {
                            offset,
                            size,
                            storage_offset,
                        };
                        offset += size;
                        storage_offset += size * size;
                        b
                    })
                    .collect()
            }
            AlgebraKind::Circulant | AlgebraKind::Group => Vec::new(),
        }
    }

    /// Block containing matrix row/column `slot` (matrix kinds only).
    pub fn block_of(&self, slot: usize) -> Option<Block> {
        self.blocks()
            .into_iter()
            .find(|b| slot >= b.offset && slot < b.offset + b.size)
    }

    /// Storage index of matrix entry `(row, col)`, or `None` when the entry
    /// is structurally zero. Matrix kinds only.
    pub fn entry_index(&self, row: usize, col: usize) -> Option<usize> {
        let d = self.order;
        if row >= d || col >= d {
            return None;
        }
        match self.kind {
            AlgebraKind::Diagonal => (row == col).then_some(row),
            AlgebraKind::Dense => Some(row * d + col),
            AlgebraKind::BlockDiagonal => {
                let b = self.block_of(row)?;
                if col < b.offset || col >= b.offset + b.size {
                    return None;
                }
                Some(b.storage_offset + (row - b.offset) * b.size + (col - b.offset))
            }
            AlgebraKind::Circulant | AlgebraKind::Group => None,
        }
    }

    /// Storage indices the activation treats nonlinearly: matrix diagonals,
    /// the circulant diagonal coefficient, or every value of a group function.
    pub fn activated_indices(&self) -> Vec<usize> {
        match self.kind {
            AlgebraKind::Diagonal | AlgebraKind::Group => (0..self.storage_len()).collect(),
            AlgebraKind::Dense | AlgebraKind::BlockDiagonal => (0..self.order)
                .filter_map(|i| self.entry_index(i, i))
                .collect(),
            AlgebraKind::Circulant => vec![0],
        }
    }

    /// Short human-readable label, also accepted by [`str::parse`].
    pub fn label(&self) -> String {
        match self.kind {
            AlgebraKind::Diagonal => format!("diagonal:{}", self.order),
            AlgebraKind::Dense => format!("dense:{}", self.order),
            AlgebraKind::Circulant => format!("circulant:{}", self.order),
            AlgebraKind::Group => format!("group:{}", self.order),
            AlgebraKind::BlockDiagonal => {
                let sizes: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
                format!("block:{}", sizes.join("+"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub size: usize,
    pub storage_offset: usize,
}

impl fmt::Display for AlgebraDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for AlgebraDescriptor {
    type Err = Error;

    /// Parses `diagonal:4`, `dense:4`, `circulant:8`, `group:3`, `block:2+3`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidDescriptor(format!("cannot parse algebra `{s}`"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        let num = |a: &str| a.trim().parse::<usize>().map_err(|_| bad());
        match kind.trim() {
            "diagonal" => Self::diagonal(num(arg)?),
            "dense" => Self::dense(num(arg)?),
            "circulant" => Self::circulant(num(arg)?),
            "group" => Self::group(num(arg)?),
            "block" => {
                let sizes = arg.split('+').map(num).collect::<Result<Vec<_>>>()?;
                Self::block_diagonal(sizes)
            }
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_lengths() {
        assert_eq!(AlgebraDescriptor::diagonal(4).unwrap().storage_len(), 4);
        assert_eq!(AlgebraDescriptor::dense(3).unwrap().storage_len(), 9);
        assert_eq!(
            AlgebraDescriptor::block_diagonal(vec![2, 1, 3]).unwrap().storage_len(),
            14
        );
        assert_eq!(AlgebraDescriptor::circulant(5).unwrap().storage_len(), 5);
        assert_eq!(AlgebraDescriptor::group(4).unwrap().storage_len(), 24);
    }

    #[test]
    fn rejects_bad_descriptors() {
        assert!(AlgebraDescriptor::dense(0).is_err());
        assert!(AlgebraDescriptor::group(7).is_err());
        assert!(AlgebraDescriptor::new(AlgebraKind::BlockDiagonal, 5, vec![2, 2]).is_err());
        assert!(AlgebraDescriptor::new(AlgebraKind::Dense, 4, vec![2, 2]).is_err());
        assert!(AlgebraDescriptor::block_diagonal(vec![2, 0]).is_err());
    }

    #[test]
    fn block_entry_indices() {
        let desc = AlgebraDescriptor::block_diagonal(vec![2, 1]).unwrap();
        assert_eq!(desc.entry_index(0, 1), Some(1));
        assert_eq!(desc.entry_index(1, 0), Some(2));
        assert_eq!(desc.entry_index(2, 2), Some(4));
        assert_eq!(desc.entry_index(0, 2), None);
        assert_eq!(desc.activated_indices(), vec![0, 3, 4]);
    }

    #[test]
    fn parse_labels() {
        for s in ["diagonal:4", "dense:2", "block:2+3", "circulant:8", "group:3"] {
            let d: AlgebraDescriptor = s.parse().unwrap();
            assert_eq!(d.label(), s);
        }
        assert!("tensor:3".parse::<AlgebraDescriptor>().is_err());
    }
}
