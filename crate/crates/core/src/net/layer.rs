use crate::algebra::AlgebraDescriptor;
use crate::error::{Error, Result};

pub const LEAKY_RELU_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    LeakyReLU,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyReLU => {
                if x >= 0.0 {
                    x
                } else {
                    LEAKY_RELU_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyReLU => {
                if x >= 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::LeakyReLU => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::LeakyReLU,
            1 => Activation::Tanh,
            2 => Activation::Identity,
            _ => return None,
        })
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "leaky_relu" | "leakyrelu" | "leaky-relu" => Ok(Activation::LeakyReLU),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::InvalidNetwork(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_width: usize,
    pub out_width: usize,
    pub has_bias: bool,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_width == 0 || self.out_width == 0 {
            return Err(Error::InvalidNetwork(format!(
                "layer widths must be positive, got {}→{}",
                self.in_width, self.out_width
            )));
        }
        Ok(())
    }
}

/// Applies `act` to one element in place: the activated coordinates of the
/// backend go through the nonlinearity, all others pass through unchanged.
#[inline]
pub fn activate_in_place(act: Activation, activated: &[usize], entry: &mut [f64]) {
    if act == Activation::Identity {
        return;
    }
    for &i in activated {
        entry[i] = act.apply(entry[i]);
    }
}

pub(crate) fn default_bias(desc: &AlgebraDescriptor) -> bool {
    desc.kind() != crate::algebra::AlgebraKind::Group
}
