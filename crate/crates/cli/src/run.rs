//! One experiment run: data, model, training and the artifacts of a
//! self-describing run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use csnet::par::Parallelism;
use csnet::tasks::{
    build_digit_sum, classification_data, group_accuracy, load_digits, nir_fixtures, partition_balanced,
    submodel_accuracy, train_deepset, DataSource, DeepSet, DeepSetTraining, DigitEncoder, ImageDataset,
    NirDataset, RgbImage, Split, CLASSES, FEATURE_DIM,
};
use csnet::train::{
    config_digest, train_loop, ConfigDigest, EvalPoint, LossSpec, MetricLog, MetricRow, TrainConfig, TrainData,
};
use csnet::net::InitConfig;
use csnet::Network;

use crate::config::{EncoderKind, ExperimentConfig, Model, Task};
use crate::plot::{curve_csv, save_png, Series};
use crate::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.txt";
pub const RUN_FILE: &str = "run.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// A final number reported by a run. `submodel = None` is an aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryMetric {
    pub name: String,
    pub submodel: Option<usize>,
    pub value: f64,
}

impl SummaryMetric {
    fn new(name: &str, submodel: Option<usize>, value: f64) -> Self {
        Self {
            name: name.into(),
            submodel,
            value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub metrics: Vec<SummaryMetric>,
    pub log: MetricLog,
    pub seconds: f64,
}

impl RunSummary {
    pub fn get(&self, name: &str, submodel: Option<usize>) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.name == name && m.submodel == submodel)
            .map(|m| m.value)
    }
}

/// The headline metric compared across runs of a task.
pub fn primary_metric(task: Task) -> &'static str {
    match task {
        Task::Classify => "mean_test_accuracy",
        Task::Nir2d => "mean_psnr",
        Task::DigitSum => "test_accuracy",
    }
}

pub fn summary_csv(metrics: &[SummaryMetric]) -> String {
    let mut out = String::from("metric,submodel,value\n");
    for m in metrics {
        let sub = m.submodel.map_or_else(|| "all".into(), |s| s.to_string());
        let _ = writeln!(out, "{},{sub},{}", m.name, m.value);
    }
    out
}

pub fn parse_summary(text: &str) -> anyhow::Result<Vec<SummaryMetric>> {
    let mut lines = text.lines();
    anyhow::ensure!(lines.next() == Some("metric,submodel,value"), "not a summary file");
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            anyhow::ensure!(f.len() == 3, "bad summary line `{l}`");
            let submodel = if f[1] == "all" { None } else { Some(f[1].parse()?) };
            Ok(SummaryMetric::new(f[0], submodel, f[2].parse()?))
        })
        .collect()
}

fn hex(digest: &ConfigDigest) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn describe(src: &DataSource) -> String {
    match src {
        DataSource::Idx(p) => format!("idx {}", p.display()),
        DataSource::Synthetic { per_class, seed } => format!("synthetic per_class={per_class} seed={seed}"),
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes the CSV and, if possible, a PNG of a curve.
fn write_curve(dir: &Path, stem: &str, x: &str, y: &str, series: &[Series]) -> CliResult<()> {
    write(dir, &format!("{stem}.csv"), curve_csv(x, y, series))?;
    if let Err(e) = save_png(&dir.join(format!("{stem}.png")), series) {
        eprintln!("warning: could not render {stem}.png: {e}");
    }
    Ok(())
}

struct RunContext {
    mode: Parallelism,
    dir: PathBuf,
    digest: ConfigDigest,
    info: Vec<(String, String)>,
}

impl RunContext {
    fn train_config(&self, cfg: &ExperimentConfig) -> CliResult<TrainConfig> {
        let mut tc = TrainConfig::new(LossSpec::new(cfg.loss).with_offdiag_weight(cfg.offdiag_weight)?);
        tc.epochs = cfg.epochs;
        tc.batch_size = cfg.batch_size;
        tc.lr = cfg.lr;
        tc.seed = cfg.seed;
        tc.parallelism = self.mode;
        tc.checkpoint_path = Some(self.dir.join(CHECKPOINT_FILE));
        tc.config_digest = self.digest;
        Ok(tc)
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.info.push((key.into(), value.to_string()));
    }
}

fn network(cfg: &ExperimentConfig, input: usize, output: usize) -> CliResult<Network> {
    let mut widths = vec![input];
    widths.extend(&cfg.hidden);
    widths.push(output);
    Ok(InitConfig::new(cfg.algebra.clone(), widths)
        .seed(cfg.seed)
        .offdiag_scale(cfg.offdiag_scale)
        .build()?)
}

/// Runs `cfg` and fills its output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunSummary> {
    let start = Instant::now();
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    write(&cfg.output, CONFIG_FILE, &cfg.canonical)?;
    let mut ctx = RunContext {
        mode: if cfg.parallel {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        },
        dir: cfg.output.clone(),
        digest: config_digest(&cfg.canonical),
        info: Vec::new(),
    };
    let (metrics, log) = match cfg.task {
        Task::Classify => run_classify(cfg, &mut ctx)?,
        Task::Nir2d => run_nir(cfg, &mut ctx)?,
        Task::DigitSum => run_digitsum(cfg, &mut ctx)?,
    };
    write(&ctx.dir, METRICS_FILE, log.to_csv())?;
    write(&ctx.dir, SUMMARY_FILE, summary_csv(&metrics))?;
    let seconds = start.elapsed().as_secs_f64();

    let mut info = format!(
        "version = {}\ntask = {}\nvariant = {}\nseed = {}\nconfig_digest = {}\n",
        csnet::VERSION,
        cfg.task.name(),
        cfg.variant(),
        cfg.seed,
        hex(&ctx.digest)
    );
    for (k, v) in &ctx.info {
        let _ = writeln!(info, "{k} = {v}");
    }
    let _ = writeln!(info, "seconds = {seconds:.1}");
    write(&ctx.dir, RUN_FILE, info)?;
    Ok(RunSummary {
        dir: ctx.dir,
        metrics,
        log,
        seconds,
    })
}

/// The first `per_class` images of every class (all when 0).
fn take_per_class(ds: ImageDataset, per_class: usize) -> ImageDataset {
    if per_class == 0 {
        return ds;
    }
    let mut keep: Vec<usize> = ds
        .by_class()
        .into_iter()
        .flat_map(|c| c.into_iter().take(per_class))
        .collect();
    keep.sort_unstable();
    ds.select(&keep)
}

type Outcome = (Vec<SummaryMetric>, MetricLog);

fn run_classify(cfg: &ExperimentConfig, ctx: &mut RunContext) -> CliResult<Outcome> {
    let d = cfg.algebra.submodel_count().expect("validated non-group algebra");
    let dir = cfg.data_dir.as_deref();
    let (train, train_src) = load_digits(dir, Split::Train, cfg.per_class * d, cfg.seed)?;
    // one fixed test set for every seed keeps comparisons paired
    let (test, test_src) = load_digits(dir, Split::Test, cfg.test_per_class, 0)?;
    let test = take_per_class(test, cfg.test_per_class);
    let partition = partition_balanced(&train, d, Some(cfg.per_class), cfg.seed)?;
    let data = classification_data(&train, &partition);
    let net = network(cfg, train.image_len(), CLASSES)?;
    ctx.note("train_data", describe(&train_src));
    ctx.note("test_data", describe(&test_src));
    ctx.note("test_size", test.len());
    ctx.note("parameters", net.param_len());

    let tc = ctx.train_config(cfg)?;
    let mode = ctx.mode;
    let mut eval = |net: &Network, p: EvalPoint| -> csnet::Result<Vec<(String, f64, Option<usize>)>> {
        if !p.epoch.is_multiple_of(cfg.eval_every) && p.epoch != cfg.epochs {
            return Ok(vec![]);
        }
        let mut rows = Vec::with_capacity(d + 1);
        let mut sum = 0.0;
        for j in 0..d {
            let acc = submodel_accuracy(net, &test, j, mode)?;
            sum += acc;
            rows.push(("test_accuracy".to_string(), acc, Some(j)));
        }
        rows.push(("mean_test_accuracy".to_string(), sum / d as f64, None));
        eprintln!("epoch {:>3}  loss {:.4}  mean accuracy {:.4}", p.epoch, p.loss, sum / d as f64);
        Ok(rows)
    };
    let out = train_loop(net, &data, &tc, &mut eval)?;

    let mut metrics = Vec::new();
    let mut table = String::from("submodel,test_accuracy\n");
    for j in 0..d {
        let acc = out.log.last("test_accuracy", Some(j)).unwrap_or(f64::NAN);
        let _ = writeln!(table, "{j},{acc}");
        metrics.push(SummaryMetric::new("test_accuracy", Some(j), acc));
    }
    write(&ctx.dir, "accuracy.csv", table)?;
    let mean = out.log.series("mean_test_accuracy", None);
    metrics.push(SummaryMetric::new(
        "mean_test_accuracy",
        None,
        mean.last().map_or(f64::NAN, |p| p.1),
    ));
    metrics.push(SummaryMetric::new(
        "train_loss",
        None,
        out.log.last("train_loss", None).unwrap_or(f64::NAN),
    ));
    let epochs: Vec<(f64, f64)> = out
        .log
        .rows
        .iter()
        .filter(|r| r.metric_name == "mean_test_accuracy")
        .map(|r| (r.epoch as f64, r.metric_value))
        .collect();
    write_curve(&ctx.dir, "accuracy_curve", "epoch", "mean_test_accuracy", &[Series::new(cfg.variant(), epochs)])?;
    Ok((metrics, out.log))
}

fn nir_images(cfg: &ExperimentConfig, d: usize) -> CliResult<Vec<RgbImage>> {
    if cfg.images.is_empty() {
        let mut all = nir_fixtures(cfg.image_size);
        if d > all.len() {
            return Err(CliError::Usage(format!(
                "only {} bundled images; pass `images` for {d} sub-models",
                all.len()
            )));
        }
        all.truncate(d);
        return Ok(all);
    }
    if cfg.images.len() != d {
        return Err(CliError::Usage(format!(
            "{} images given for {d} sub-models",
            cfg.images.len()
        )));
    }
    Ok(cfg.images.iter().map(|p| RgbImage::load(p)).collect::<csnet::Result<_>>()?)
}

fn run_nir(cfg: &ExperimentConfig, ctx: &mut RunContext) -> CliResult<Outcome> {
    let d = cfg.algebra.submodel_count().expect("validated non-group algebra");
    let images = nir_images(cfg, d)?;
    let ds = NirDataset::new(images, cfg.seed)?;
    let data: TrainData = ds.train_data();
    let net = network(cfg, ds.features[0].len(), 3)?;
    ctx.note(
        "images",
        if cfg.images.is_empty() {
            format!("bundled {}x{}", ds.width, ds.height)
        } else {
            cfg.images.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
        },
    );
    ctx.note("parameters", net.param_len());

    let recon_dir = ctx.dir.join("reconstructions");
    fs::create_dir_all(&recon_dir)?;
    for (j, im) in ds.images.iter().enumerate() {
        im.save(&recon_dir.join(format!("target_{j}.png")))?;
    }

    let mut tc = ctx.train_config(cfg)?;
    let per_epoch = data.partitions[0].len().div_ceil(cfg.batch_size);
    tc.epochs = cfg.iterations.div_ceil(per_epoch);
    tc.max_steps = Some(cfg.iterations);
    tc.eval_every = Some(gcd(cfg.eval_every, cfg.image_every));
    let mode = ctx.mode;
    let mut eval = |net: &Network, p: EvalPoint| -> csnet::Result<Vec<(String, f64, Option<usize>)>> {
        let at_eval = p.step.is_multiple_of(cfg.eval_every) || p.step == cfg.iterations;
        let at_image = p.step.is_multiple_of(cfg.image_every) || p.step == cfg.iterations;
        if !at_eval && !at_image {
            return Ok(vec![]);
        }
        let mut rows = Vec::new();
        let mut sum = 0.0;
        for (j, truth) in ds.images.iter().enumerate() {
            let recon = ds.reconstruct(net, j, mode)?;
            if at_image {
                recon.save(&recon_dir.join(format!("step{:05}_sub{j}.png", p.step)))?;
            }
            let v = csnet::tasks::psnr(&recon.data, &truth.data)?;
            sum += v;
            rows.push(("psnr".to_string(), v, Some(j)));
        }
        rows.push(("mean_psnr".to_string(), sum / d as f64, None));
        if !at_eval {
            return Ok(vec![]);
        }
        eprintln!("step {:>5}  loss {:.5}  mean psnr {:.2} dB", p.step, p.loss, sum / d as f64);
        Ok(rows)
    };
    let out = train_loop(net, &data, &tc, &mut eval)?;

    let mut metrics = Vec::new();
    for j in 0..d {
        metrics.push(SummaryMetric::new("psnr", Some(j), out.log.last("psnr", Some(j)).unwrap_or(f64::NAN)));
    }
    metrics.push(SummaryMetric::new(
        "mean_psnr",
        None,
        out.log.last("mean_psnr", None).unwrap_or(f64::NAN),
    ));
    let mut series = vec![Series::new(
        "mean",
        out.log.series("mean_psnr", None).into_iter().map(|(s, v)| (s as f64, v)).collect(),
    )];
    for j in 0..d {
        series.push(Series::new(
            format!("sub{j}"),
            out.log.series("psnr", Some(j)).into_iter().map(|(s, v)| (s as f64, v)).collect(),
        ));
    }
    write_curve(&ctx.dir, "psnr_curve", "step", "psnr", &series)?;
    Ok((metrics, out.log))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn run_digitsum(cfg: &ExperimentConfig, ctx: &mut RunContext) -> CliResult<Outcome> {
    let d = cfg.algebra.order();
    let mode = ctx.mode;
    let dir = cfg.data_dir.as_deref();
    let (train_pool, train_src) = load_digits(dir, Split::Train, cfg.per_class, cfg.seed)?;
    let (test_pool, test_src) = load_digits(dir, Split::Test, cfg.test_per_class, cfg.seed)?;
    let encoder = match cfg.encoder {
        EncoderKind::Mlp => DigitEncoder::train_mlp(&train_pool, cfg.seed, mode)?,
        EncoderKind::Random => DigitEncoder::random_projection(train_pool.image_len(), cfg.seed),
    };
    let train_features = encoder.encode_all(&train_pool, mode)?;
    let test_features = encoder.encode_all(&test_pool, mode)?;
    let train = build_digit_sum(&train_pool, &train_features, d, cfg.train_size, cfg.seed)?;
    let test = build_digit_sum(&test_pool, &test_features, d, cfg.test_size, cfg.seed ^ 0x7e57_0000)?;
    ctx.note("train_data", describe(&train_src));
    ctx.note("test_data", describe(&test_src));

    let mut log = MetricLog::default();
    let accuracy;
    let params;
    match cfg.model {
        Model::CStar => {
            let examples = train.group_examples()?;
            let test_examples = test.group_examples()?;
            let input = examples[0].input.width();
            let net = network(cfg, input, CLASSES)?;
            params = net.param_len();
            let data = TrainData::new(vec![examples]);
            let tc = ctx.train_config(cfg)?;
            let mut eval = |net: &Network, p: EvalPoint| -> csnet::Result<Vec<(String, f64, Option<usize>)>> {
                if !p.epoch.is_multiple_of(cfg.eval_every) && p.epoch != cfg.epochs {
                    return Ok(vec![]);
                }
                let acc = group_accuracy(net, &test_examples, &test.labels, mode)?;
                eprintln!("epoch {:>3}  loss {:.4}  test accuracy {acc:.4}", p.epoch, p.loss);
                Ok(vec![("test_accuracy".into(), acc, None)])
            };
            let out = train_loop(net, &data, &tc, &mut eval)?;
            log = out.log;
            accuracy = log.last("test_accuracy", None).unwrap_or(f64::NAN);
        }
        Model::DeepSet => {
            let mut model = DeepSet::with_hidden(FEATURE_DIM, cfg.deepset_hidden, cfg.deepset_layers, CLASSES, cfg.seed)?;
            params = model.param_count();
            let dc = DeepSetTraining {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                lr: cfg.lr,
                seed: cfg.seed,
                parallelism: mode,
            };
            let rows = &mut log;
            let mut on_epoch = |m: &DeepSet, epoch: usize, loss: f64, step: usize| -> csnet::Result<()> {
                let mut push = |name: &str, value: f64| {
                    rows.push(MetricRow {
                        epoch,
                        step,
                        loss,
                        metric_name: name.into(),
                        metric_value: value,
                        submodel: None,
                    })
                };
                push("train_loss", loss);
                if epoch.is_multiple_of(cfg.eval_every) || epoch == cfg.epochs {
                    let acc = m.accuracy(&test, mode)?;
                    eprintln!("epoch {epoch:>3}  loss {loss:.4}  test accuracy {acc:.4}");
                    push("test_accuracy", acc);
                }
                Ok(())
            };
            train_deepset(&mut model, &train, &dc, &mut on_epoch)?;
            accuracy = log.last("test_accuracy", None).unwrap_or(f64::NAN);
        }
    }
    ctx.note("parameters", params);
    let curve: Vec<(f64, f64)> = log
        .rows
        .iter()
        .filter(|r| r.metric_name == "test_accuracy")
        .map(|r| (r.epoch as f64, r.metric_value))
        .collect();
    write_curve(&ctx.dir, "accuracy_curve", "epoch", "test_accuracy", &[Series::new(cfg.variant(), curve)])?;
    let metrics = vec![
        SummaryMetric::new("test_accuracy", None, accuracy),
        SummaryMetric::new("parameters", None, params as f64),
        SummaryMetric::new("train_loss", None, log.last("train_loss", None).unwrap_or(f64::NAN)),
    ];
    Ok((metrics, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_round_trip() {
        let m = vec![
            SummaryMetric::new("test_accuracy", Some(1), 0.5),
            SummaryMetric::new("mean_test_accuracy", None, 0.625),
        ];
        assert_eq!(parse_summary(&summary_csv(&m)).unwrap(), m);
        assert!(parse_summary("nope\n").is_err());
    }

    #[test]
    fn per_class_subset() {
        let ds = csnet::tasks::synthetic_digits(3, 1);
        let sub = take_per_class(ds.clone(), 2);
        assert_eq!(sub.len(), 20);
        assert_eq!(take_per_class(ds, 0).len(), 30);
    }
}
