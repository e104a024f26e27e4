//! `ebe` command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ebe::envs::EnvKind;
use ebe::error::{EbeError, Result};
use ebe::harness::{
    diagnostic_csv, entropy_diagnostic, read_csv, render_curves, run_experiment, summary_csv, write_atomic,
    write_outputs, ExperimentConfig, Phase, PlotOptions, METRICS,
};
use ebe::learners::{value_iteration_oracle, QModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ebe", version, about = "Entropy-based exploration experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a multi-seed sweep from a config file.
    Run {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output_dir in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seed list (overrides seeds in the config).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Write the exact chain Q-values as CSV.
    Oracle {
        /// Discount factor in (0, 1).
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Bellman residual at which value iteration stops.
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Mean episode entropy and reward of saved models under greedy play.
    Diagnose {
        /// Model files written by `run`.
        #[arg(required = true)]
        models: Vec<PathBuf>,
        /// Environment: chain or mini_breakout.
        #[arg(long, default_value = "chain")]
        env: String,
        /// Greedy episodes per model.
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Step cap per episode.
        #[arg(long, default_value_t = 50)]
        max_steps: usize,
        /// Environment seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render learning curves from run CSV files.
    Plot {
        /// CSV files written by `run`.
        #[arg(required = true)]
        csvs: Vec<PathBuf>,
        /// Comma-separated metrics: reward, steps, h0, sq_error, wall_ms.
        #[arg(long, value_delimiter = ',', default_value = "reward")]
        metric: Vec<String>,
        /// Smoothing weight in [0, 1).
        #[arg(long, default_value_t = 0.99)]
        smooth: f64,
        /// Row phase to plot: train or test.
        #[arg(long, default_value = "train")]
        phase: String,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

enum Outcome {
    Done,
    Usage(String),
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(EbeError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file", path.display()),
        )))
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Run { config, out, seeds } => {
            require_file(&config)?;
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seeds) = seeds {
                if seeds.is_empty() {
                    return Ok(Outcome::Usage("--seeds needs at least one seed".into()));
                }
                let mut unique = seeds.clone();
                unique.sort_unstable();
                unique.dedup();
                if unique.len() != seeds.len() {
                    return Ok(Outcome::Usage("--seeds contains duplicates".into()));
                }
                cfg.seeds = seeds;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let result = run_experiment(&cfg)?;
            write_outputs(&cfg, &result, &cfg.output_dir)?;
            for cell in result.cells.iter().filter(|c| c.failure.is_some()) {
                eprintln!(
                    "warning: {} seed {} failed: {}",
                    cell.strategy,
                    cell.seed,
                    cell.failure.as_deref().unwrap_or_default()
                );
            }
            print!("{}", summary_csv(&result.summary));
            Ok(Outcome::Done)
        }
        Command::Oracle { gamma, out, tolerance } => {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Ok(Outcome::Usage(format!("--gamma {gamma} is outside the legal range (0, 1)")));
            }
            if !(tolerance > 0.0) {
                return Ok(Outcome::Usage(format!("--tolerance {tolerance} must be positive")));
            }
            let q = value_iteration_oracle(gamma, tolerance)?;
            let mut csv = String::from("state,action,q\n");
            for s in 0..q.states() {
                for (a, name) in ["left", "right"].iter().enumerate() {
                    writeln!(csv, "{s},{name},{}", q.get(s, a)).expect("writing to a string");
                }
            }
            write_atomic(&out, csv.as_bytes())?;
            Ok(Outcome::Done)
        }
        Command::Diagnose { models, env, episodes, max_steps, seed, out } => {
            let Some(kind) = EnvKind::parse(&env) else {
                return Ok(Outcome::Usage(format!("--env {env:?} must be chain or mini_breakout")));
            };
            if episodes == 0 || max_steps == 0 {
                return Ok(Outcome::Usage("--episodes and --max-steps must be at least 1".into()));
            }
            for m in &models {
                require_file(m)?;
            }
            let loaded = models
                .iter()
                .map(|p| {
                    let model = QModel::load(p).map_err(|e| EbeError::ModelFormat(format!("{}: {e}", p.display())))?;
                    Ok((p.display().to_string(), model))
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = entropy_diagnostic(&loaded, kind, episodes, max_steps, seed)?;
            let csv = diagnostic_csv(&rows);
            match out {
                Some(path) => write_atomic(&path, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            Ok(Outcome::Done)
        }
        Command::Plot { csvs, metric, smooth, phase, out } => {
            if let Some(bad) = metric.iter().find(|m| !METRICS.contains(&m.as_str())) {
                return Ok(Outcome::Usage(format!("unknown metric {bad:?}; expected one of {}", METRICS.join(", "))));
            }
            if !(0.0..1.0).contains(&smooth) {
                return Ok(Outcome::Usage(format!("--smooth {smooth} is outside the legal range [0, 1)")));
            }
            let phase = match Phase::parse(&phase) {
                Some(p @ (Phase::Train | Phase::Test)) => p,
                _ => return Ok(Outcome::Usage(format!("--phase {phase:?} must be train or test"))),
            };
            for c in &csvs {
                require_file(c)?;
            }
            let mut rows = Vec::new();
            for c in &csvs {
                rows.extend(read_csv(c)?);
            }
            let svg = render_curves(&rows, &PlotOptions { metrics: metric, smoothing: smooth, phase })?;
            write_atomic(&out, svg.as_bytes())?;
            Ok(Outcome::Done)
        }
    }
}
