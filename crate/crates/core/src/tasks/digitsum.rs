//! Sum-of-digits: classify the sum of `d` digit images (sum < 10) from
//! their frozen 32-dim encodings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::classify::{classification_data, one_hot, CLASSES};
use super::idx::ImageDataset;
use super::partition::SubmodelPartition;
use crate::algebra::{AlgebraDescriptor, SymmetricGroup};
use crate::error::{Error, Result};
use crate::net::{AlgebraTensor, InitConfig, Network};
use crate::par::Parallelism;
use crate::train::{predict_slot, train_loop, Example, Input, LossKind, LossSpec, TrainConfig};

pub const FEATURE_DIM: usize = 32;

/// Maps a 28×28 image to a `FEATURE_DIM` vector. Never trained further.
#[derive(Debug, Clone)]
pub enum DigitEncoder {
    /// First two layers of a real MLP classifier (784→64→32).
    Mlp(Network),
    /// Fixed Gaussian projection followed by tanh.
    RandomProjection { weights: Vec<f64>, input_len: usize },
}

impl DigitEncoder {
    /// Trains a 784→64→32→10 classifier for one epoch and keeps its
    /// penultimate layer.
    pub fn train_mlp(ds: &ImageDataset, seed: u64, mode: Parallelism) -> Result<Self> {
        let widths = vec![ds.image_len(), 64, FEATURE_DIM, CLASSES];
        let net = InitConfig::new(AlgebraDescriptor::diagonal(1)?, widths).seed(seed).build()?;
        let all = SubmodelPartition {
            subsets: vec![(0..ds.len()).collect()],
        };
        let mut cfg = TrainConfig::new(LossSpec::new(LossKind::CrossEntropyDiagonal));
        cfg.epochs = 1;
        cfg.lr = 1e-3;
        cfg.seed = seed;
        cfg.parallelism = mode;
        let out = train_loop(net, &classification_data(ds, &all), &cfg, &mut |_, _| Ok(vec![]))?;
        let layers = out.network.layers()[..2].to_vec();
        Ok(DigitEncoder::Mlp(Network::from_layers(out.network.descriptor().clone(), layers)?))
    }

    pub fn random_projection(input_len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (input_len as f64).sqrt()).expect("positive sigma");
        let weights = (0..FEATURE_DIM * input_len).map(|_| normal.sample(&mut rng)).collect();
        DigitEncoder::RandomProjection { weights, input_len }
    }

    /// Features of every image in `ds`.
    pub fn encode_all(&self, ds: &ImageDataset, mode: Parallelism) -> Result<Vec<Vec<f64>>> {
        let images: Vec<&[f64]> = (0..ds.len()).map(|i| ds.image(i)).collect();
        match self {
            DigitEncoder::Mlp(net) => predict_slot(net, &images, 0, mode),
            DigitEncoder::RandomProjection { weights, input_len } => {
                if ds.image_len() != *input_len {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{input_len} pixels"),
                        found: format!("{}", ds.image_len()),
                    });
                }
                Ok(images
                    .iter()
                    .map(|x| {
                        weights
                            .chunks_exact(*input_len)
                            .map(|w| w.iter().zip(*x).map(|(a, b)| a * b).sum::<f64>().tanh())
                            .collect()
                    })
                    .collect())
            }
        }
    }
}

/// Tuples of digit features labelled with the digit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitSumDataset {
    pub d: usize,
    /// `features[t][k]` encodes digit `k` of tuple `t`.
    pub features: Vec<Vec<Vec<f64>>>,
    pub digits: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl DigitSumDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Lifted group inputs `x(g) = g·z` with one-hot targets.
    pub fn group_examples(&self) -> Result<Vec<Example>> {
        let group = SymmetricGroup::cached(self.d)?;
        self.features
            .iter()
            .zip(&self.labels)
            .map(|(z, &label)| {
                let elems = group.lift(z)?;
                let x = AlgebraTensor::from_elements(&[elems.len()], &elems)?;
                Ok(Example::new(Input::tensor(x), one_hot(label)))
            })
            .collect()
    }
}

/// Samples `size` tuples uniformly among digit tuples with sum < 10, then a
/// random image of each digit from `ds`; `features` holds the encoding of
/// every image in `ds`.
pub fn build_digit_sum(
    ds: &ImageDataset,
    features: &[Vec<f64>],
    d: usize,
    size: usize,
    seed: u64,
) -> Result<DigitSumDataset> {
    if features.len() != ds.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} encodings", ds.len()),
            found: format!("{}", features.len()),
        });
    }
    if d == 0 {
        return Err(Error::Dataset("tuples need at least one digit".into()));
    }
    let by_class = ds.by_class();
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::Dataset("every digit class needs at least one image".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DigitSumDataset {
        d,
        features: Vec::with_capacity(size),
        digits: Vec::with_capacity(size),
        labels: Vec::with_capacity(size),
    };
    while out.len() < size {
        let digits: Vec<u8> = (0..d).map(|_| rng.gen_range(0..10u8)).collect();
        let sum: u32 = digits.iter().map(|&v| u32::from(v)).sum();
        if sum >= 10 {
            continue;
        }
        let z = digits
            .iter()
            .map(|&v| {
                let pool = &by_class[v as usize];
                features[pool[rng.gen_range(0..pool.len())]].clone()
            })
            .collect();
        out.features.push(z);
        out.digits.push(digits);
        out.labels.push(sum as u8);
    }
    Ok(out)
}

/// Accuracy of a group network with mean-over-G readout.
pub fn group_accuracy(net: &Network, examples: &[Example], labels: &[u8], mode: Parallelism) -> Result<f64> {
    let group_len = net.descriptor().storage_len();
    let preds = crate::par::map_indexed(mode, examples.len(), |i| -> Result<usize> {
        let x = examples[i].input.to_tensor(net, 0)?;
        let y = net.forward(&x)?;
        let scores: Vec<f64> = y.entries().map(|e| e.iter().sum::<f64>() / group_len as f64).collect();
        Ok(super::classify::argmax(&scores))
    });
    let mut correct = 0;
    for (p, &l) in preds.into_iter().zip(labels) {
        correct += usize::from(p? == l as usize);
    }
    Ok(correct as f64 / labels.len().max(1) as f64)
}
