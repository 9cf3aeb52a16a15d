use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use arc_cli::experiment::{run_compare, run_regions, run_solve, write_quantizer, CompareOptions};
use arc_cli::ExperimentConfig;
use arc_core::Method;
use clap::{Parser, Subcommand};

/// Adaptive robust portfolio control experiments.
///
/// Thread count follows RAYON_NUM_THREADS; outputs do not depend on it.
#[derive(Parser)]
#[command(name = "arc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and simulate all four methods for every horizon.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write long-form wealth paths.
        #[arg(long)]
        paths: bool,
    },
    /// Trace the confidence regions along one simulated path.
    Regions {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print an n-point standard normal quantizer as `point,weight`.
    Quantizer {
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Solve one method and write its value tables.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// true | robust | adaptive | adaptive_robust
        #[arg(long)]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(config: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compare { config, out, seed, paths } => {
            let cfg = load(&config, seed)?;
            let dir = out_dir(&cfg, out);
            let reports = run_compare(&cfg, &dir, CompareOptions { write_paths: paths })?;
            for r in &reports {
                println!(
                    "{:<16} T={:<5} mean={:>10.4} std={:>9.4} var95={:>9.4} glr={:.4}",
                    r.method, r.horizon, r.mean, r.std, r.var95, r.glr
                );
            }
            eprintln!("wrote {}", dir.join("comparison.csv").display());
        }
        Command::Regions { config, out, seed } => {
            let cfg = load(&config, seed)?;
            let dir = out_dir(&cfg, out);
            let rows = run_regions(&cfg, &dir)?;
            let inside = rows.iter().filter(|r| r.contains_true).count();
            eprintln!(
                "wrote {} ({} of {} steps contain the true parameter)",
                dir.join("regions.csv").display(),
                inside,
                rows.len()
            );
        }
        Command::Quantizer { n } => {
            write_quantizer(n, std::io::stdout().lock())?;
        }
        Command::Solve { config, method, out, seed } => {
            let cfg = load(&config, seed)?;
            let dir = out_dir(&cfg, out);
            for path in run_solve(&cfg, method, &dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
