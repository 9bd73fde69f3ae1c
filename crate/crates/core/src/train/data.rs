use std::sync::Arc;

use crate::error::{Error, Result};
use crate::net::{AlgebraTensor, Network};

/// Network input for one example.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    /// Real vector, embedded on the active sub-model's slot at run time.
    Real(Arc<[f64]>),
    /// Ready-made algebra-valued input, e.g. a lifted group input.
    Tensor(Arc<AlgebraTensor>),
}

impl Input {
    pub fn real(v: Vec<f64>) -> Self {
        Input::Real(v.into())
    }

    pub fn tensor(t: AlgebraTensor) -> Self {
        Input::Tensor(Arc::new(t))
    }

    pub fn width(&self) -> usize {
        match self {
            Input::Real(v) => v.len(),
            Input::Tensor(t) => t.len(),
        }
    }

    /// The algebra-valued input seen by sub-model `slot`.
    pub fn to_tensor(&self, net: &Network, slot: usize) -> Result<AlgebraTensor> {
        match self {
            Input::Real(v) => AlgebraTensor::embed_submodel(net.descriptor(), slot, v),
            Input::Tensor(t) => Ok((**t).clone()),
        }
    }
}

/// One training example: input plus real target vector for the active slot
/// (one-hot for classification).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Input,
    pub target: Vec<f64>,
}

impl Example {
    pub fn new(input: Input, target: Vec<f64>) -> Self {
        Self { input, target }
    }
}

/// Examples of one sub-model inside a training step.
#[derive(Debug, Clone)]
pub struct SlotBatch<'a> {
    pub slot: usize,
    pub examples: Vec<&'a Example>,
}

/// Per-sub-model datasets. Partition `j` trains sub-model `j`; group
/// algebras use a single partition.
#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub partitions: Vec<Vec<Example>>,
}

impl TrainData {
    pub fn new(partitions: Vec<Vec<Example>>) -> Self {
        Self { partitions }
    }

    pub fn len(&self) -> usize {
        self.partitions.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn check(&self, net: &Network) -> Result<()> {
        let desc = net.descriptor();
        let slots = desc.submodel_count().unwrap_or(1);
        if self.partitions.is_empty() || self.partitions.len() > slots {
            return Err(Error::Dataset(format!(
                "{} partitions for {} sub-models",
                self.partitions.len(),
                slots
            )));
        }
        let widths = net.widths();
        let (n_in, n_out) = (widths[0], *widths.last().expect("nonempty"));
        for ex in self.partitions.iter().flatten() {
            if ex.input.width() != n_in || ex.target.len() != n_out {
                return Err(Error::Dataset(format!(
                    "example has {}→{} values, network expects {n_in}→{n_out}",
                    ex.input.width(),
                    ex.target.len()
                )));
            }
            if let Input::Tensor(t) = &ex.input {
                if t.descriptor() != desc {
                    return Err(Error::DescriptorMismatch {
                        left: desc.label(),
                        right: t.descriptor().label(),
                    });
                }
            }
        }
        Ok(())
    }
}
