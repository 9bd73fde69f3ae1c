use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csnet::bench::{bench_forward, default_cases, to_csv};
use csnet::par::Parallelism;
use csnet_cli::config::parse_override;
use csnet_cli::report::build_report;
use csnet_cli::{checks, sweep, run_experiment, CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "csnet", version, about = "Train and compare algebra-valued networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        config: PathBuf,
        /// Override a config key (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every combination of the varied keys as separate processes.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...` (use `|` between values that contain commas).
        #[arg(long, required = true, value_name = "KEY=V1,V2")]
        vary: Vec<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Parent directory of the runs (default: the config's output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare finished runs: mean ± std per variant.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Quick numerical checks of the library.
    Selftest,
    /// Single-threaded forward timings and parameter storage per backend.
    Bench {
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn overrides(set: &[String]) -> CliResult<Vec<(String, String)>> {
    set.iter().map(|s| parse_override(s)).collect()
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run {
            config,
            set,
            seed,
            output,
        } => {
            let mut ov = overrides(&set)?;
            ov.extend(seed.map(|s| ("seed".to_string(), s.to_string())));
            ov.extend(output.map(|o| ("output".to_string(), o.display().to_string())));
            let cfg = ExperimentConfig::load(&config, &ov)?;
            let summary = run_experiment(&cfg)?;
            for m in summary.metrics.iter().filter(|m| m.submodel.is_none()) {
                println!("{} = {}", m.name, m.value);
            }
            println!("run directory: {}", summary.dir.display());
        }
        Command::Sweep {
            config,
            vary,
            set,
            jobs,
            out,
        } => {
            let varies = vary.iter().map(|v| sweep::parse_vary(v)).collect::<CliResult<Vec<_>>>()?;
            let plan = sweep::plan(&config, &overrides(&set)?, &varies, out.as_deref())?;
            let exe = std::env::current_exe()?;
            for dir in sweep::execute(&exe, &config, &plan, jobs)? {
                println!("{}", dir.display());
            }
        }
        Command::Report { dirs } => print!("{}", build_report(&dirs)?),
        Command::Selftest => {
            let results = checks::quick_suite();
            for c in &results {
                println!("{c}");
            }
            if results.iter().any(|c| !c.passed) {
                return Err(CliError::Runtime(anyhow::anyhow!("selftest failed")));
            }
        }
        Command::Bench {
            width,
            depth,
            repetitions,
            out,
        } => {
            if width == 0 || depth == 0 {
                return Err(CliError::Usage("width and depth must be positive".into()));
            }
            let mut results = Vec::new();
            for mut case in default_cases(width, depth)? {
                case.repetitions = repetitions;
                results.push(bench_forward(&case, Parallelism::Sequential).map_err(|e| CliError::Usage(e.to_string()))?);
            }
            let csv = to_csv(&results);
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
