//! Checkpoint layout, little-endian throughout:
//!
//! ```text
//! "CSNET1" | config digest (32 bytes, SHA-256) | descriptor | u32 depth
//! per layer: u8 activation | u8 has_bias | weights tensor | [bias tensor]
//! u64 epoch | u8 has_optimizer
//! optimizer: u64 step | f64 lr, β1, β2, ε | u64 len | m | v
//! ```

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::adam::OptimizerState;
use crate::algebra::{read_descriptor, write_descriptor};
use crate::error::{Error, Result};
use crate::net::{Activation, AlgebraTensor, Layer, Network};

pub const MAGIC: &[u8; 6] = b"CSNET1";

pub type ConfigDigest = [u8; 32];

pub fn config_digest(config_text: &str) -> ConfigDigest {
    Sha256::digest(config_text.as_bytes()).into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub digest: ConfigDigest,
    pub epoch: u64,
    pub network: Network,
    pub optimizer: Option<OptimizerState>,
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.digest)?;
        write_descriptor(w, self.network.descriptor())?;
        w.write_all(&(self.network.depth() as u32).to_le_bytes())?;
        for layer in self.network.layers() {
            w.write_all(&[layer.activation.tag(), u8::from(layer.bias.is_some())])?;
            layer.weights.write_to(w)?;
            if let Some(b) = &layer.bias {
                b.write_to(w)?;
            }
        }
        w.write_all(&self.epoch.to_le_bytes())?;
        w.write_all(&[u8::from(self.optimizer.is_some())])?;
        if let Some(opt) = &self.optimizer {
            w.write_all(&opt.step.to_le_bytes())?;
            for v in [opt.lr, opt.beta1, opt.beta2, opt.eps] {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&(opt.m.len() as u64).to_le_bytes())?;
            for v in opt.m.iter().chain(&opt.v) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let magic: [u8; 6] = read_array(r)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let digest: ConfigDigest = read_array(r)?;
        let descriptor = read_descriptor(r)?;
        let depth = u32::from_le_bytes(read_array(r)?) as usize;
        let mut layers = Vec::with_capacity(depth.min(1024));
        for _ in 0..depth {
            let [act, has_bias] = read_array::<2, _>(r)?;
            let activation = Activation::from_tag(act)
                .ok_or_else(|| Error::Checkpoint(format!("unknown activation tag {act}")))?;
            let weights = AlgebraTensor::read_from(r)?;
            let bias = match has_bias {
                0 => None,
                1 => Some(AlgebraTensor::read_from(r)?),
                other => return Err(Error::Checkpoint(format!("bias flag {other}"))),
            };
            layers.push(Layer {
                weights,
                bias,
                activation,
            });
        }
        let network = Network::from_layers(descriptor, layers)?;
        let epoch = read_u64(r)?;
        let optimizer = match read_array::<1, _>(r)?[0] {
            0 => None,
            1 => {
                let step = read_u64(r)?;
                let (lr, beta1, beta2, eps) = (read_f64(r)?, read_f64(r)?, read_f64(r)?, read_f64(r)?);
                let len = read_u64(r)? as usize;
                if len != network.param_len() {
                    return Err(Error::Checkpoint(format!(
                        "optimizer holds {len} moments for {} parameters",
                        network.param_len()
                    )));
                }
                let mut m = vec![0.0; len];
                let mut v = vec![0.0; len];
                for x in m.iter_mut().chain(v.iter_mut()) {
                    *x = read_f64(r)?;
                }
                Some(OptimizerState {
                    lr,
                    beta1,
                    beta2,
                    eps,
                    step,
                    m,
                    v,
                })
            }
            other => return Err(Error::Checkpoint(format!("optimizer flag {other}"))),
        };
        Ok(Self {
            digest,
            epoch,
            network,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraDescriptor;
    use crate::net::{init_network, InitConfig};

    #[test]
    fn round_trip_preserves_forward_bits() {
        for desc in [
            AlgebraDescriptor::dense(3).unwrap(),
            AlgebraDescriptor::block_diagonal(vec![1, 2]).unwrap(),
            AlgebraDescriptor::group(3).unwrap(),
        ] {
            let net = InitConfig::new(desc.clone(), vec![2, 4, 3]).seed(3).build().unwrap();
            let mut opt = OptimizerState::for_network(&net, 1e-3);
            opt.step = 7;
            opt.m.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1);
            let ck = Checkpoint {
                digest: config_digest("task = classify"),
                epoch: 2,
                network: net.clone(),
                optimizer: Some(opt),
            };
            let mut buf = Vec::new();
            ck.write_to(&mut buf).unwrap();
            assert_eq!(&buf[..6], MAGIC);
            let back = Checkpoint::read_from(&mut buf.as_slice()).unwrap();
            assert_eq!(back, ck);
            let x = AlgebraTensor::new(desc.clone(), vec![2], (0..2 * desc.storage_len()).map(|i| i as f64 * 0.3 - 1.0).collect())
                .unwrap();
            let a = net.forward(&x).unwrap();
            let b = back.network.forward(&x).unwrap();
            assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn rejects_corruption() {
        let net = init_network(&AlgebraDescriptor::diagonal(2).unwrap(), &[2, 2], Activation::Tanh, 0, 0.1).unwrap();
        let ck = Checkpoint {
            digest: [0; 32],
            epoch: 0,
            network: net,
            optimizer: None,
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read_from(&mut bad.as_slice()).is_err());
        for cut in [3, 20, buf.len() - 1] {
            assert!(Checkpoint::read_from(&mut &buf[..cut]).is_err());
        }
    }
}
