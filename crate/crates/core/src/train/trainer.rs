use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step_network, OptimizerState};
use super::checkpoint::{Checkpoint, ConfigDigest};
use super::data::{SlotBatch, TrainData};
use super::grad;
use super::loss::LossSpec;
use crate::error::{Error, Result};
use crate::net::Network;
use crate::par::Parallelism;

pub const METRICS_HEADER: &str = "epoch,step,loss,metric_name,metric_value,submodel";

/// One row of the metric log. `submodel = None` marks an aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub metric_name: String,
    pub metric_value: f64,
    pub submodel: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricLog {
    pub rows: Vec<MetricRow>,
}

impl MetricLog {
    pub fn push(&mut self, row: MetricRow) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let sub = r.submodel.map_or_else(|| "all".to_string(), |s| s.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.step, r.loss, r.metric_name, r.metric_value, sub
            );
        }
        out
    }

    pub fn last(&self, name: &str, submodel: Option<usize>) -> Option<f64> {
        self.rows
            .iter()
            .rev()
            .find(|r| r.metric_name == name && r.submodel == submodel)
            .map(|r| r.metric_value)
    }

    /// `(step, value)` for every row of `name` and `submodel`.
    pub fn series(&self, name: &str, submodel: Option<usize>) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric_name == name && r.submodel == submodel)
            .map(|r| (r.step, r.metric_value))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub loss: LossSpec,
    /// Stop after this many optimizer steps, even mid-epoch.
    pub max_steps: Option<usize>,
    /// Also evaluate every this many steps (epoch ends always evaluate).
    pub eval_every: Option<usize>,
    pub shuffle: bool,
    pub parallelism: Parallelism,
    pub checkpoint_path: Option<PathBuf>,
    pub config_digest: ConfigDigest,
}

impl TrainConfig {
    pub fn new(loss: LossSpec) -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 1e-4,
            seed: 0,
            loss,
            max_steps: None,
            eval_every: None,
            shuffle: true,
            parallelism: Parallelism::default(),
            checkpoint_path: None,
            config_digest: [0; 32],
        }
    }
}

/// Where an evaluation happens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

pub type Evaluator<'a> = dyn FnMut(&Network, EvalPoint) -> Result<Vec<(String, f64, Option<usize>)>> + 'a;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub optimizer: OptimizerState,
    pub log: MetricLog,
    pub steps: usize,
}

/// Visiting order of partition `submodel` in `epoch`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize, submodel: usize, shuffle: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((epoch as u64) << 20) | submodel as u64);
        order.shuffle(&mut rng);
    }
    order
}

/// Number of steps in one epoch: every partition advances in lockstep by
/// `batch` examples until the largest one is exhausted.
pub fn steps_per_epoch(data: &TrainData, batch: usize) -> usize {
    let n = data.partitions.iter().map(Vec::len).max().unwrap_or(0);
    n.div_ceil(batch.max(1))
}

/// Runs Adam over `data`. Each step draws one minibatch per partition;
/// the step loss is the sum over partitions of their minibatch means.
pub fn train_loop(
    mut net: Network,
    data: &TrainData,
    cfg: &TrainConfig,
    evaluator: &mut Evaluator<'_>,
) -> Result<TrainOutcome> {
    data.check(&net)?;
    if cfg.batch_size == 0 {
        return Err(Error::Dataset("batch_size must be positive".into()));
    }
    let mut opt = OptimizerState::for_network(&net, cfg.lr);
    let mut log = MetricLog::default();
    let per_epoch = steps_per_epoch(data, cfg.batch_size);
    let mut step = 0usize;
    let limit = cfg.max_steps.unwrap_or(usize::MAX);
    let mut record = |log: &mut MetricLog, net: &Network, point: EvalPoint| -> Result<()> {
        for (name, value, submodel) in evaluator(net, point)? {
            log.push(MetricRow {
                epoch: point.epoch,
                step: point.step,
                loss: point.loss,
                metric_name: name,
                metric_value: value,
                submodel,
            });
        }
        Ok(())
    };

    'epochs: for epoch in 1..=cfg.epochs {
        let orders: Vec<Vec<usize>> = data
            .partitions
            .iter()
            .enumerate()
            .map(|(j, p)| epoch_order(p.len(), cfg.seed, epoch, j, cfg.shuffle))
            .collect();
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0usize;
        let mut last_loss = f64::NAN;
        for s in 0..per_epoch {
            if step >= limit {
                break;
            }
            let batch: Vec<SlotBatch<'_>> = data
                .partitions
                .iter()
                .enumerate()
                .filter_map(|(j, p)| {
                    let lo = s * cfg.batch_size;
                    (lo < p.len()).then(|| SlotBatch {
                        slot: j,
                        examples: orders[j][lo..(lo + cfg.batch_size).min(p.len())]
                            .iter()
                            .map(|&i| &p[i])
                            .collect(),
                    })
                })
                .collect();
            let (loss, g) = grad(&net, &batch, &cfg.loss, cfg.parallelism)?;
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "loss {loss} at epoch {epoch}, step {}",
                    step + 1
                )));
            }
            adam_step_network(&mut net, &g, &mut opt)?;
            step += 1;
            epoch_steps += 1;
            epoch_loss += loss;
            last_loss = loss;
            let end_of_epoch = s + 1 == per_epoch || step >= limit;
            if let Some(every) = cfg.eval_every {
                if step.is_multiple_of(every) && !end_of_epoch {
                    record(&mut log, &net, EvalPoint { epoch, step, loss })?;
                }
            }
        }
        if epoch_steps == 0 {
            break 'epochs;
        }
        let mean = epoch_loss / epoch_steps as f64;
        log.push(MetricRow {
            epoch,
            step,
            loss: last_loss,
            metric_name: "train_loss".into(),
            metric_value: mean,
            submodel: None,
        });
        record(&mut log, &net, EvalPoint { epoch, step, loss: last_loss })?;
        if let Some(path) = &cfg.checkpoint_path {
            Checkpoint {
                digest: cfg.config_digest,
                epoch: epoch as u64,
                network: net.clone(),
                optimizer: Some(opt.clone()),
            }
            .save(path)?;
        }
        if step >= limit {
            break;
        }
    }
    Ok(TrainOutcome {
        network: net,
        optimizer: opt,
        log,
        steps: step,
    })
}
