use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use monitored_core::single_site::SingleSiteProtocol;
use monitored_runner::chi_bench::{chi_benchmark, write_report};
use monitored_runner::lab::{lab_rows, write_lab_csv, LabConfig};
use monitored_runner::presets::PRESETS;
use monitored_runner::{default_workers, preset, resume, run, RunConfig, RunReport};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Exit status when at least one cell has more than 10% failed trajectories.
const EXIT_DEGRADED: u8 = 3;

#[derive(Parser)]
#[command(name = "monitored", version, about = "Monitored hard-core boson chains: ensembles, sweeps, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a configuration (or a named preset).
    Run {
        #[arg(long, required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Defaults to $MONITORED_WORKERS or the number of cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Override output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finish an interrupted run in an existing artifact directory.
    Resume {
        dir: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare window entropy and cluster length across bond dimensions.
    ChiBench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        chi: Vec<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Single-site Monte Carlo vs deterministic evolution as CSV on stdout.
    SingleSite {
        #[arg(long, default_value_t = 0.3)]
        occupation: f64,
        #[arg(long, default_value_t = 0.05)]
        strength: f64,
        #[arg(long, default_value_t = 1.0)]
        interval: f64,
        #[arg(long, default_value_t = 4)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, value_enum, default_value = "nonhermitian")]
        protocol: Protocol,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the named presets.
    Presets,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Protocol {
    Conventional,
    Nonhermitian,
}

fn report(r: &RunReport) -> ExitCode {
    println!("{} cells ({} executed) in {}", r.cells.len(), r.executed, r.dir.display());
    let degraded = r.degraded();
    for c in &degraded {
        eprintln!("degraded: {} ({} failed)", c.cell.key(), c.summary.n_failed);
    }
    if degraded.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DEGRADED)
    }
}

fn main_inner() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, preset: name, workers, out } => {
            let mut cfg = match (config, name) {
                (Some(path), None) => RunConfig::load(&path)?,
                (None, Some(name)) => preset(&name)?,
                _ => bail!("give exactly one of --config and --preset"),
            };
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            Ok(report(&run(&cfg, workers.unwrap_or_else(default_workers))?))
        }
        Command::Resume { dir, workers } => Ok(report(&resume(&dir, workers.unwrap_or_else(default_workers))?)),
        Command::ChiBench { config, chi, workers } => {
            let cfg = RunConfig::load(&config)?;
            let rep = chi_benchmark(&cfg, &chi, workers.unwrap_or_else(default_workers))?;
            write_report(&cfg, &rep)?;
            for c in &rep.comparisons {
                println!(
                    "{} chi {} vs {}: entropy {:.2} sigma, cluster {:.2} sigma -> {}",
                    c.cell.key(),
                    c.chi_a,
                    c.chi_b,
                    c.entropy_sigmas,
                    c.cluster_sigmas,
                    if c.agree { "agree" } else { "DISAGREE" }
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SingleSite { occupation, strength, interval, steps, trials, protocol, seed, out } => {
            let protocol = match protocol {
                Protocol::Conventional => SingleSiteProtocol::Conventional,
                Protocol::Nonhermitian => SingleSiteProtocol::Nonhermitian,
            };
            let rows = lab_rows(&LabConfig { occupation, strength, interval, steps, trials, protocol, seed })?;
            match out {
                Some(path) => write_lab_csv(&rows, std::fs::File::create(path)?)?,
                None => write_lab_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets => {
            for p in PRESETS {
                println!("{:<28} {}{}", p.name, p.description, if p.production { " [production]" } else { "" });
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match main_inner() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
