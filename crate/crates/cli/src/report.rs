//! Aggregates finished runs: mean ± std of the headline metric per variant.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::config::{ExperimentConfig, Task};
use crate::run::{parse_summary, primary_metric, CONFIG_FILE, SUMMARY_FILE};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct VariantStats {
    pub variant: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single run).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub task: Task,
    pub metric: &'static str,
    pub variants: Vec<VariantStats>,
    /// Index into `variants` of the highest mean.
    pub best: usize,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct RunRecord {
    task: Task,
    variant: String,
    value: f64,
}

fn read_run(dir: &Path) -> CliResult<RunRecord> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).with_context(|| format!("{} is not a run directory", dir.display()))?;
    let cfg = ExperimentConfig::from_text(&text, &[])
        .map_err(|e| anyhow::anyhow!("{}: {e}", cfg_path.display()))?;
    let summary_path = dir.join(SUMMARY_FILE);
    let summary = fs::read_to_string(&summary_path)
        .with_context(|| format!("{} has no summary (unfinished run?)", dir.display()))?;
    let metric = primary_metric(cfg.task);
    let value = parse_summary(&summary)
        .with_context(|| summary_path.display().to_string())?
        .into_iter()
        .find(|m| m.name == metric && m.submodel.is_none())
        .map(|m| m.value)
        .ok_or_else(|| anyhow::anyhow!("{} lacks {metric}", summary_path.display()))?;
    Ok(RunRecord {
        task: cfg.task,
        variant: cfg.variant(),
        value,
    })
}

/// Groups ≥ 2 runs of one task by variant (algebra or baseline).
pub fn build_report(dirs: &[PathBuf]) -> CliResult<Report> {
    if dirs.len() < 2 {
        return Err(CliError::Usage("report needs at least two run directories".into()));
    }
    let runs = dirs.iter().map(|d| read_run(d)).collect::<CliResult<Vec<_>>>()?;
    let task = runs[0].task;
    if let Some(other) = runs.iter().find(|r| r.task != task) {
        return Err(CliError::Usage(format!(
            "runs mix tasks `{}` and `{}`",
            task.name(),
            other.task.name()
        )));
    }
    let mut variants: Vec<VariantStats> = Vec::new();
    for r in runs {
        match variants.iter_mut().find(|v| v.variant == r.variant) {
            Some(v) => v.values.push(r.value),
            None => variants.push(VariantStats {
                variant: r.variant,
                values: vec![r.value],
                mean: 0.0,
                std: 0.0,
            }),
        }
    }
    for v in &mut variants {
        (v.mean, v.std) = mean_std(&v.values);
    }
    let best = (0..variants.len())
        .max_by(|&a, &b| variants[a].mean.total_cmp(&variants[b].mean).then(b.cmp(&a)))
        .unwrap_or(0);
    Ok(Report {
        task,
        metric: primary_metric(task),
        variants,
        best,
    })
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "task {}  metric {}", self.task.name(), self.metric)?;
        writeln!(f, "{:<20} {:>4} {:>12} {:>10}", "variant", "runs", "mean", "std")?;
        for (i, v) in self.variants.iter().enumerate() {
            let mark = if i == self.best && self.variants.len() > 1 { "  <- higher" } else { "" };
            writeln!(
                f,
                "{:<20} {:>4} {:>12.4} {:>10.4}{mark}",
                v.variant,
                v.values.len(),
                v.mean,
                v.std
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_run(root: &Path, name: &str, config: &str, summary: &str) -> PathBuf {
        let dir = root.join(name);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join(CONFIG_FILE), config).unwrap();
        fs::write(dir.join(SUMMARY_FILE), summary).unwrap();
        dir
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn groups_variants_and_flags_higher_mean() {
        let tmp = tempfile::tempdir().unwrap();
        let acc = |v: f64| format!("metric,submodel,value\nmean_test_accuracy,all,{v}\n");
        let dirs = vec![
            fake_run(tmp.path(), "a0", "task = classify\nalgebra = diagonal:2\n", &acc(0.5)),
            fake_run(tmp.path(), "a1", "task = classify\nalgebra = diagonal:2\nseed = 1\n", &acc(0.7)),
            fake_run(tmp.path(), "b0", "task = classify\nalgebra = dense:2\n", &acc(0.8)),
        ];
        let r = build_report(&dirs).unwrap();
        assert_eq!(r.variants.len(), 2);
        assert!((r.variants[0].mean - 0.6).abs() < 1e-12);
        assert_eq!(r.variants[r.best].variant, "dense:2");
        assert!(r.to_string().contains("dense:2                 1       0.8000     0.0000  <- higher"));
    }

    #[test]
    fn rejects_single_run_and_mixed_tasks() {
        let tmp = tempfile::tempdir().unwrap();
        let a = fake_run(tmp.path(), "a", "task = classify\n", "metric,submodel,value\nmean_test_accuracy,all,1\n");
        assert_eq!(build_report(std::slice::from_ref(&a)).unwrap_err().exit_code(), 2);
        let b = fake_run(tmp.path(), "b", "task = nir2d\n", "metric,submodel,value\nmean_psnr,all,20\n");
        assert_eq!(build_report(&[a.clone(), b]).unwrap_err().exit_code(), 2);
        let missing = tmp.path().join("missing");
        assert_eq!(build_report(&[a, missing]).unwrap_err().exit_code(), 1);
    }
}
