//! Cartesian sweeps over config keys, one child process per combination.

use std::path::{Path, PathBuf};
use std::process::{Child, Command};

use crate::config::{parse_override, ExperimentConfig};
use crate::{CliError, CliResult};

/// Parses `key=v1,v2,...`. Values are split on `|` instead when present,
/// for keys whose values contain commas (`hidden=32,32|64,64`).
pub fn parse_vary(s: &str) -> CliResult<(String, Vec<String>)> {
    let (key, values) = parse_override(s)?;
    let sep = if values.contains('|') { '|' } else { ',' };
    let values: Vec<String> = values.split(sep).map(|v| v.trim().to_string()).collect();
    if values.iter().any(String::is_empty) {
        return Err(CliError::Usage(format!("--vary {s}: empty value")));
    }
    Ok((key, values))
}

/// Every combination of the varied values, first key slowest.
pub fn combinations(varies: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut out = vec![Vec::new()];
    for (key, values) in varies {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    out
}

/// Directory name of one combination, e.g. `algebra=dense-5_seed=1`.
pub fn run_name(combo: &[(String, String)]) -> String {
    combo
        .iter()
        .map(|(k, v)| {
            let v: String = v
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '-' })
                .collect();
            format!("{k}={v}")
        })
        .collect::<Vec<_>>()
        .join("_")
}

pub struct SweepJob {
    pub dir: PathBuf,
    pub overrides: Vec<(String, String)>,
}

/// Validates every combination and lays out one output directory each
/// below `root` (default: the base config's output).
pub fn plan(
    config: &Path,
    base: &[(String, String)],
    varies: &[(String, Vec<String>)],
    root: Option<&Path>,
) -> CliResult<Vec<SweepJob>> {
    if varies.is_empty() {
        return Err(CliError::Usage("sweep needs at least one --vary".into()));
    }
    let root = match root {
        Some(r) => r.to_path_buf(),
        None => ExperimentConfig::load(config, base)?.output,
    };
    combinations(varies)
        .into_iter()
        .map(|combo| {
            let dir = root.join(run_name(&combo));
            let mut overrides = base.to_vec();
            overrides.extend(combo);
            overrides.push(("output".into(), dir.display().to_string()));
            ExperimentConfig::load(config, &overrides)?;
            Ok(SweepJob { dir, overrides })
        })
        .collect()
}

/// Runs `exe run <config> --set ...` for every job, `jobs` at a time.
pub fn execute(exe: &Path, config: &Path, plan: &[SweepJob], jobs: usize) -> CliResult<Vec<PathBuf>> {
    let mut failures = Vec::new();
    for batch in plan.chunks(jobs.max(1)) {
        let children = batch
            .iter()
            .map(|job| {
                let mut cmd = Command::new(exe);
                cmd.arg("run").arg(config).stdout(std::io::stderr());
                for (k, v) in &job.overrides {
                    cmd.arg("--set").arg(format!("{k}={v}"));
                }
                eprintln!("sweep: starting {}", job.dir.display());
                Ok((job, cmd.spawn()?))
            })
            .collect::<CliResult<Vec<(&SweepJob, Child)>>>()?;
        for (job, mut child) in children {
            let status = child.wait()?;
            if !status.success() {
                failures.push(format!("{} ({status})", job.dir.display()));
            }
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!("failed runs: {}", failures.join(", "))));
    }
    Ok(plan.iter().map(|j| j.dir.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vary_parsing() {
        assert_eq!(parse_vary("seed=0,1,2").unwrap(), ("seed".into(), vec!["0".into(), "1".into(), "2".into()]));
        assert_eq!(parse_vary("hidden=32,32|64").unwrap().1, vec!["32,32", "64"]);
        assert!(parse_vary("seed").is_err());
        assert!(parse_vary("seed=1,,2").is_err());
    }

    #[test]
    fn cartesian_product_order() {
        let v = vec![
            ("a".to_string(), vec!["1".to_string(), "2".to_string()]),
            ("b".to_string(), vec!["x".to_string(), "y".to_string(), "z".to_string()]),
        ];
        let c = combinations(&v);
        assert_eq!(c.len(), 6);
        assert_eq!(run_name(&c[0]), "a=1_b=x");
        assert_eq!(run_name(&c[5]), "a=2_b=z");
        assert_eq!(run_name(&[("algebra".into(), "block:2+3".into())]), "algebra=block-2-3");
    }

    #[test]
    fn plan_validates_each_combination() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tmp.path().join("c.txt");
        std::fs::write(&cfg, "task = classify\nalgebra = dense:2\n").unwrap();
        let ok = plan(&cfg, &[], &[parse_vary("seed=0,1").unwrap()], Some(tmp.path())).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[1].dir, tmp.path().join("seed=1"));
        let bad = plan(&cfg, &[], &[parse_vary("algebra=dense:2,group:3").unwrap()], None);
        assert_eq!(bad.err().unwrap().exit_code(), 2);
        assert!(plan(&cfg, &[], &[], None).is_err());
    }
}
