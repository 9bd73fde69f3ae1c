//! Neural networks whose parameters live in finite-dimensional C*-algebras.
//!
//! The crate is layered bottom-up:
//!
//! * [`algebra`]: element storage, products, involution, norms for diagonal,
//!   dense, block-diagonal and circulant matrices and for the group algebra
//!   of `S_d`;
//! * [`net`]: algebra-valued tensors, affine layers, activations and the
//!   forward pass;
//! * [`train`]: losses, reverse-mode gradients, Adam, the training loop and
//!   checkpoints;
//! * [`tasks`]: datasets for sub-model classification, 2D implicit
//!   representation and the sum-of-digits task, plus the DeepSet baseline;
//! * [`bench`]: storage and timing measurements across backends.

pub mod algebra;
pub mod bench;
pub mod error;
pub mod net;
pub mod par;
pub mod tasks;
pub mod train;

pub use algebra::{AlgebraDescriptor, AlgebraElement, AlgebraKind, SymmetricGroup};
pub use error::{Error, Result};
pub use net::{Activation, AlgebraTensor, Network};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
