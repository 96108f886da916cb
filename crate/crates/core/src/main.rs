use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::error;

use robust_beam::config::ExperimentConfig;
use robust_beam::experiments::{run_montecarlo, run_solve, run_sweep};
use robust_beam::robust::Status;
use robust_beam::Error;

/// Robust divergence angle for a drifting inter-satellite laser link.
#[derive(Parser)]
#[command(name = "robust-beam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cutting-plane loop and write its convergence trace.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the adversary's layered graph at the final angle.
        #[arg(long)]
        dump_graph: bool,
    },
    /// Worst-case rate of every scheme over the horizon sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Sum rates of every scheme on randomly sampled scenarios.
    Montecarlo {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            config.output_dir = dir.clone();
        }
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring worker threads")?;
        }
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROBUST_BEAM_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Solve { common, .. }
        | Command::Sweep { common }
        | Command::Montecarlo { common } => common,
    };
    let config = match common.load() {
        Ok(c) => c,
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let out = config.output_dir.clone();
    let outcome = match cli.command {
        Command::Solve { dump_graph, .. } => run_solve(&config, &out, dump_graph).map(|r| {
            println!(
                "{:?}: theta* = {:e} urad, UB = {:e} Gbit/s, LB = {:e} Gbit/s, {} iterations",
                r.status,
                r.theta_star.microrad(),
                r.ub_final * 1e-9,
                r.lb_final * 1e-9,
                r.trace.len()
            );
            match r.status {
                Status::Converged => 0,
                Status::IterationLimit => 2,
            }
        }),
        Command::Sweep { .. } => run_sweep(&config, &out).map(|rep| {
            for r in &rep.rows {
                println!(
                    "T = {:>2} {}: theta = {:e} urad, worst per-slot rate = {:e} Gbit/s",
                    r.slots,
                    r.scheme,
                    r.theta * 1e6,
                    r.per_slot() * 1e-9
                );
            }
            0
        }),
        Command::Montecarlo { .. } => run_montecarlo(&config, &out).map(|rep| {
            for s in &rep.schemes {
                println!(
                    "{}: theta = {:e} urad, mean = {:e} Gbit/s, min = {:e} Gbit/s, {} outliers",
                    s.scheme,
                    s.theta_murad,
                    s.stats.mean,
                    s.stats.min,
                    s.stats.outliers.len()
                );
            }
            println!(
                "{} samples, {} attempts, RA below guarantee: {}",
                rep.count, rep.total_attempts, rep.ra_below_guarantee
            );
            0
        }),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidParameter { .. } | Error::Config(_) => 1,
                Error::SamplingExhausted { .. } => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
