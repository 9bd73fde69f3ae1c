//! Gradients, losses, Adam and the training loop.

mod adam;
mod checkpoint;
mod data;
mod loss;
mod slot;
mod tape;
mod trainer;

pub use adam::{adam_step, adam_step_network, OptimizerState};
pub use checkpoint::{config_digest, Checkpoint, ConfigDigest, MAGIC};
pub use data::{Example, Input, SlotBatch, TrainData};
pub use loss::{base_loss, loss_eval, sample_loss, LossKind, LossSpec, HUBER_DELTA};
pub use slot::{grad_slot, predict_slot, supports as slot_engine_supports};
pub use tape::{grad_generic, loss_generic, Adjoint, Tape};
pub use trainer::{
    epoch_order, steps_per_epoch, train_loop, EvalPoint, Evaluator, MetricLog, MetricRow, TrainConfig,
    TrainOutcome, METRICS_HEADER,
};

use crate::error::Result;
use crate::net::Network;
use crate::par::Parallelism;

/// Loss and exact gradient of `Σ_slots mean_batch loss`, aligned with
/// [`Network::flat_params`]. Matrix backends with real inputs take the
/// batched GEMM path; everything else is taped per sample.
pub fn grad(
    net: &Network,
    batch: &[SlotBatch<'_>],
    spec: &LossSpec,
    mode: Parallelism,
) -> Result<(f64, Vec<f64>)> {
    if slot::supports(net, batch) {
        slot::grad_slot(net, batch, spec, mode)
    } else {
        tape::grad_generic(net, batch, spec, mode)
    }
}
