mod config;
mod driver;
mod output;
mod rates;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use trough::traces::{default_regions, synthetic_trace, write_packet_log, write_prices, SyntheticLogConfig};

use config::{Overrides, RunConfig};
use driver::Mode;

/// Failure classes, mapped to distinct exit codes.
#[derive(Debug)]
pub enum AppError {
    /// Unusable input: bad config, missing or malformed trace files.
    Config(anyhow::Error),
    /// A run failed or outputs could not be written.
    Runtime(anyhow::Error),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "trough", version, about = "Trough-filling controllers for geo-distributed datacenters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config.
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of slots.
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory (default: results/<config hash prefix>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: number of logical cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured controllers and write per-slot metrics.
    Run(ExperimentArgs),
    /// Run the configured controllers side by side and print a table.
    Compare(ExperimentArgs),
    /// Validate a config and print its effective form (defaults and
    /// overrides applied).
    Check {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Windowed, rate-normalized service of finished runs.
    Rates {
        /// A run directory or an experiment directory.
        dir: PathBuf,
        /// Window length in slots; repeatable (default: 1 and 1000).
        #[arg(long = "window")]
        windows: Vec<usize>,
    },
    /// Generate a synthetic one-day packet log and hourly price file.
    GenTrace {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        slots: Option<usize>,
        /// Mean traffic per slot, in Mbit.
        #[arg(long)]
        mean_mbit: Option<f64>,
    },
}

fn experiment(args: ExperimentArgs, mode: Mode) -> Result<(), AppError> {
    let overrides = Overrides {
        seed: args.seed,
        horizon: args.horizon,
        out: args.out,
    };
    let cfg = RunConfig::load(&args.config, &overrides).map_err(AppError::Config)?;
    if args.jobs == Some(0) {
        return Err(AppError::Config(anyhow::anyhow!("--jobs must be >= 1")));
    }
    let out = driver::default_out(&cfg);
    let report = driver::execute(&cfg, mode, &out, args.jobs)?;
    if mode == Mode::Compare || report.entries.len() > 1 {
        print!("{}", driver::render_table(&report.entries));
    } else if let Some(e) = report.entries.first() {
        match (e.avg_cost, e.delay) {
            (Some(c), d) => println!(
                "{}: avg cost {c:.4}, delay {}",
                e.controller,
                d.map_or("-".into(), |d| format!("{d:.4}"))
            ),
            _ => println!("{}: failed", e.controller),
        }
    }
    println!("results in {}", out.display());
    if report.failed > 0 {
        return Err(AppError::Runtime(anyhow::anyhow!(
            "{} of {} runs failed; see summary.json",
            report.failed,
            report.entries.len()
        )));
    }
    Ok(())
}

fn rates(dir: &Path, windows: Vec<usize>) -> Result<(), AppError> {
    let explicit = !windows.is_empty();
    let windows = if explicit { windows } else { rates::DEFAULT_WINDOWS.to_vec() };
    let stats = rates::analyze(dir, &windows, explicit).map_err(AppError::Config)?;
    println!("{:<40} {:>8} {:>8} {:>10} {:>10}", "run", "window", "count", "zero_frac", "cv");
    for s in stats {
        println!(
            "{:<40} {:>8} {:>8} {:>10.4} {:>10.4}",
            format!("{} ({})", s.run.display(), s.controller),
            s.window,
            s.windows,
            s.zero_fraction,
            s.cv
        );
    }
    Ok(())
}

fn gen_trace(out: &Path, seed: Option<u64>, slots: Option<usize>, mean_mbit: Option<f64>) -> anyhow::Result<()> {
    let mut cfg = SyntheticLogConfig::default();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = slots {
        cfg.slots = s;
    }
    if let Some(m) = mean_mbit {
        cfg.mean_mbit_per_slot = m;
    }
    let (packets, prices) = synthetic_trace(&cfg, &default_regions())?;
    output::write_atomic(&out.join("packets.csv"), |w| Ok(write_packet_log(&packets, w)?))?;
    output::write_atomic(&out.join("prices.csv"), |w| Ok(write_prices(&prices, w)?))?;
    println!("{} packets, {} price rows in {}", packets.len(), prices.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TROUGH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => experiment(a, Mode::Run),
        Command::Compare(a) => experiment(a, Mode::Compare),
        Command::Check { config, seed, horizon } => {
            let overrides = Overrides {
                seed,
                horizon,
                out: None,
            };
            RunConfig::load(&config, &overrides).map(|c| println!("{}", c.to_json())).map_err(AppError::Config)
        }
        Command::Rates { dir, windows } => rates(&dir, windows),
        Command::GenTrace {
            out,
            seed,
            slots,
            mean_mbit,
        } => gen_trace(&out, seed, slots, mean_mbit)
            .context("generating the trace")
            .map_err(AppError::Runtime),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (AppError::Config(err) | AppError::Runtime(err)) = &e;
            eprintln!("error: {err:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
