//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key has a
//! task-dependent default, so a config only needs `task` (and usually
//! `algebra`). Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use csnet::train::LossKind;
use csnet::{AlgebraDescriptor, AlgebraKind};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classify,
    Nir2d,
    DigitSum,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Nir2d => "nir2d",
            Task::DigitSum => "digitsum",
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "classify" => Ok(Task::Classify),
            "nir2d" => Ok(Task::Nir2d),
            "digitsum" => Ok(Task::DigitSum),
            other => Err(usage(format!("unknown task `{other}` (classify, nir2d, digitsum)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Algebra-valued network.
    CStar,
    /// Sum-pooling baseline for digitsum.
    DeepSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Mlp,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub algebra: AlgebraDescriptor,
    pub model: Model,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub offdiag_scale: f64,
    pub offdiag_weight: f64,
    pub per_class: usize,
    pub test_per_class: usize,
    pub data_dir: Option<PathBuf>,
    pub output: PathBuf,
    pub images: Vec<PathBuf>,
    pub image_size: usize,
    pub eval_every: usize,
    pub image_every: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub encoder: EncoderKind,
    pub deepset_hidden: usize,
    pub deepset_layers: usize,
    pub parallel: bool,
    /// Canonical `key = value` text of every resolved setting.
    pub canonical: String,
}

pub const KEYS: &[&str] = &[
    "task",
    "algebra",
    "model",
    "hidden",
    "epochs",
    "iterations",
    "batch_size",
    "lr",
    "seed",
    "loss",
    "offdiag_scale",
    "offdiag_weight",
    "per_class",
    "test_per_class",
    "data_dir",
    "output",
    "images",
    "image_size",
    "eval_every",
    "image_every",
    "train_size",
    "test_size",
    "encoder",
    "deepset_hidden",
    "deepset_layers",
    "parallel",
];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn defaults(task: Task) -> BTreeMap<&'static str, &'static str> {
    let common = [
        ("model", "cstar"),
        ("seed", "0"),
        ("offdiag_weight", "0.5"),
        ("data_dir", ""),
        ("output", ""),
        ("images", ""),
        ("image_size", "128"),
        ("image_every", "100"),
        ("iterations", "0"),
        ("train_size", "1000"),
        ("test_size", "10000"),
        ("encoder", "mlp"),
        ("deepset_hidden", "84"),
        ("deepset_layers", "5"),
        ("parallel", "true"),
        ("per_class", "20"),
        ("test_per_class", "100"),
    ];
    let specific: &[(&str, &str)] = match task {
        Task::Classify => &[
            ("algebra", "dense:5"),
            ("hidden", "32,32"),
            ("epochs", "10"),
            ("batch_size", "8"),
            ("lr", "3e-4"),
            ("loss", "mse"),
            ("offdiag_scale", "0.1"),
            ("eval_every", "1"),
        ],
        Task::Nir2d => &[
            ("algebra", "dense:5"),
            ("hidden", "64,64,64"),
            ("epochs", "0"),
            ("iterations", "500"),
            ("batch_size", "1024"),
            ("lr", "1e-3"),
            ("loss", "huber"),
            ("offdiag_scale", "0.1"),
            ("eval_every", "25"),
        ],
        Task::DigitSum => &[
            ("algebra", "group:3"),
            ("hidden", "32,32,32"),
            ("epochs", "100"),
            ("batch_size", "32"),
            ("lr", "1e-3"),
            ("loss", "ce"),
            ("offdiag_scale", "1.0"),
            ("eval_every", "10"),
            ("per_class", "200"),
        ],
    };
    common.iter().chain(specific).copied().collect()
}

/// Parses `key = value` lines into a map; later lines win.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Parses a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| usage(format!("{key}: cannot parse `{v}`")))
}

fn list(key: &str, v: &str) -> Result<Vec<usize>, CliError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(key, x.trim())).collect()
}

impl ExperimentConfig {
    pub fn from_text(text: &str, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut map = parse_pairs(text)?;
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(map)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text, overrides)
    }

    pub fn from_map(user: BTreeMap<String, String>) -> Result<Self, CliError> {
        if let Some(bad) = user.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(usage(format!("unknown key `{bad}`")));
        }
        let task = Task::parse(user.get("task").ok_or_else(|| usage("missing key `task`"))?)?;
        let mut map: BTreeMap<String, String> =
            defaults(task).into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        map.extend(user);
        let get = |k: &str| map.get(k).map(String::as_str).unwrap_or("");

        let algebra: AlgebraDescriptor = get("algebra")
            .parse()
            .map_err(|e| usage(format!("algebra: {e}")))?;
        let model = match get("model") {
            "cstar" => Model::CStar,
            "deepset" => Model::DeepSet,
            other => return Err(usage(format!("model: unknown `{other}` (cstar, deepset)"))),
        };
        let loss: LossKind = get("loss").parse().map_err(|e| usage(format!("loss: {e}")))?;
        let encoder = match get("encoder") {
            "mlp" => EncoderKind::Mlp,
            "random" => EncoderKind::Random,
            other => return Err(usage(format!("encoder: unknown `{other}` (mlp, random)"))),
        };
        let parallel = match get("parallel") {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => return Err(usage(format!("parallel: expected true/false, got `{other}`"))),
        };
        let seed: u64 = num("seed", get("seed"))?;
        let label = if model == Model::DeepSet {
            "deepset".to_string()
        } else {
            algebra.label().replace([':', '+'], "-")
        };
        let output = match get("output") {
            "" => PathBuf::from("runs").join(format!("{}-{label}-seed{seed}", task.name())),
            p => PathBuf::from(p),
        };
        let opt_path = |k: &str| (!get(k).is_empty()).then(|| PathBuf::from(get(k)));

        let cfg = ExperimentConfig {
            task,
            algebra,
            model,
            hidden: list("hidden", get("hidden"))?,
            epochs: num("epochs", get("epochs"))?,
            iterations: num("iterations", get("iterations"))?,
            batch_size: num("batch_size", get("batch_size"))?,
            lr: num("lr", get("lr"))?,
            seed,
            loss,
            offdiag_scale: num("offdiag_scale", get("offdiag_scale"))?,
            offdiag_weight: num("offdiag_weight", get("offdiag_weight"))?,
            per_class: num("per_class", get("per_class"))?,
            test_per_class: num("test_per_class", get("test_per_class"))?,
            data_dir: opt_path("data_dir"),
            output,
            images: get("images")
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
                .collect(),
            image_size: num("image_size", get("image_size"))?,
            eval_every: num("eval_every", get("eval_every"))?,
            image_every: num("image_every", get("image_every"))?,
            train_size: num("train_size", get("train_size"))?,
            test_size: num("test_size", get("test_size"))?,
            encoder,
            deepset_hidden: num("deepset_hidden", get("deepset_hidden"))?,
            deepset_layers: num("deepset_layers", get("deepset_layers"))?,
            parallel,
            canonical: String::new(),
        };
        cfg.validate()?;
        let mut canonical = String::new();
        for (k, v) in &map {
            // output location does not change results
            if k != "output" {
                let _ = writeln!(canonical, "{k} = {v}");
            }
        }
        Ok(ExperimentConfig { canonical, ..cfg })
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("batch_size", self.batch_size),
            ("eval_every", self.eval_every),
            ("image_every", self.image_every),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(usage(format!("{k} must be positive")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(usage("lr must be positive"));
        }
        if !(self.offdiag_scale >= 0.0 && self.offdiag_weight >= 0.0) {
            return Err(usage("offdiag_scale and offdiag_weight must be ≥ 0"));
        }
        if self.hidden.contains(&0) {
            return Err(usage("hidden widths must be positive"));
        }
        let kind = self.algebra.kind();
        match self.task {
            Task::DigitSum => {
                if kind != AlgebraKind::Group {
                    return Err(usage("digitsum needs a group algebra (e.g. group:3), also for model = deepset"));
                }
                if self.epochs == 0 || self.train_size == 0 || self.test_size == 0 {
                    return Err(usage("digitsum needs epochs, train_size and test_size > 0"));
                }
            }
            Task::Classify | Task::Nir2d => {
                if kind == AlgebraKind::Group {
                    return Err(usage(format!("{} needs a matrix or circulant algebra", self.task.name())));
                }
                if self.model == Model::DeepSet {
                    return Err(usage("model = deepset is only available for digitsum"));
                }
                if self.task == Task::Classify && (self.epochs == 0 || self.per_class == 0) {
                    return Err(usage("classify needs epochs and per_class > 0"));
                }
                if self.task == Task::Nir2d && self.iterations == 0 {
                    return Err(usage("nir2d needs iterations > 0"));
                }
            }
        }
        Ok(())
    }

    /// Short name of the compared variant (algebra label or `deepset`).
    pub fn variant(&self) -> String {
        match self.model {
            Model::DeepSet => "deepset".into(),
            Model::CStar => self.algebra.label(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::from_text("task = classify # comment\nalgebra = diagonal:2\n", &[]).unwrap();
        assert_eq!(c.epochs, 10);
        assert_eq!(c.hidden, vec![32, 32]);
        assert_eq!(c.output, PathBuf::from("runs/classify-diagonal-2-seed0"));
        let c = ExperimentConfig::from_text(
            "task = classify\nalgebra = diagonal:2\n",
            &[("seed".into(), "4".into()), ("algebra".into(), "block:2+3".into())],
        )
        .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.algebra.label(), "block:2+3");
        assert!(c.canonical.contains("seed = 4\n"));
        assert!(!c.canonical.contains("output"));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "task = teleport",
            "algebra = dense:2",
            "task = classify\nwidth = 3",
            "task = classify\nalgebra = dense",
            "task = classify\nlr = fast",
            "task = digitsum\nalgebra = dense:3",
            "task = classify\nalgebra = group:3",
            "task = classify\nmodel = deepset",
            "task = classify\nbatch_size = 0",
            "task = nir2d\niterations = 0",
            "task classify",
        ] {
            let err = ExperimentConfig::from_text(text, &[]).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn digitsum_baseline_is_allowed() {
        let c = ExperimentConfig::from_text("task = digitsum\nmodel = deepset\n", &[]).unwrap();
        assert_eq!(c.variant(), "deepset");
        assert_eq!(c.algebra.order(), 3);
    }
}
