//! Binary layout: `u8` kind tag, `u32` order, `u32` block count, block sizes
//! as `u32`, all little-endian; element storage follows as `f64` LE.

use std::io::{Read, Write};

use super::{AlgebraDescriptor, AlgebraKind};
use crate::error::{Error, Result};

pub fn write_descriptor<W: Write>(w: &mut W, desc: &AlgebraDescriptor) -> Result<()> {
    w.write_all(&[desc.kind().tag()])?;
    w.write_all(&(desc.order() as u32).to_le_bytes())?;
    w.write_all(&(desc.block_sizes().len() as u32).to_le_bytes())?;
    for &b in desc.block_sizes() {
        w.write_all(&(b as u32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_descriptor<R: Read>(r: &mut R) -> Result<AlgebraDescriptor> {
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let kind = AlgebraKind::from_tag(tag[0])
        .ok_or_else(|| Error::InvalidDescriptor(format!("unknown kind tag {}", tag[0])))?;
    let order = read_u32(r)? as usize;
    let nblocks = read_u32(r)? as usize;
    if nblocks > order {
        return Err(Error::InvalidDescriptor(format!(
            "{nblocks} blocks for order {order}"
        )));
    }
    let blocks = (0..nblocks)
        .map(|_| read_u32(r).map(|b| b as usize))
        .collect::<Result<Vec<_>>>()?;
    AlgebraDescriptor::new(kind, order, blocks)
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}
