//! Algebra-valued tensors, layers and the forward pass.

mod layer;
mod network;
mod tensor;

pub use layer::{activate_in_place, Activation, LayerSpec, LEAKY_RELU_SLOPE};
pub use network::{activate, affine_apply, init_network, InitConfig, Layer, Network};
pub use tensor::AlgebraTensor;
