//! `renewal-lab`: batch experiments on renewal chains and their interval maps.
//!
//! Exit codes: 0 success, 2 config or input error, 3 mathematical
//! precondition violated, 4 truncation or tolerance failure, 1 anything else.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use renewal_core::chain::RenewalChain;
use renewal_core::ErrorKind;

use crate::commands::{Ctx, ToleranceError};
use crate::config::{ConfigError, ExperimentConfig};
use crate::output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "renewal-lab", version, about = "Convergence-rate experiments on renewal chains")]
struct Cli {
    /// JSON experiment descriptor.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Chain truncation N (overrides `chain.truncation`).
    #[arg(long, global = true)]
    truncation: Option<usize>,
    /// Do not print the summary to stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Basic quantities of the chain.
    Chain {
        #[command(subcommand)]
        cmd: ChainCmd,
    },
    /// Exact convergence curves from evolving distributions.
    Rates {
        #[command(subcommand)]
        cmd: RatesCmd,
    },
    /// Truncated operators, eigenvectors and generating functions.
    Spectral {
        #[command(subcommand)]
        cmd: SpectralCmd,
    },
    /// Monte Carlo on the intermittent interval map.
    Map {
        #[command(subcommand)]
        cmd: MapCmd,
    },
    /// Power-series diagnostics of the return law.
    Series {
        #[command(subcommand)]
        cmd: SeriesCmd,
    },
}

#[derive(Debug, Subcommand)]
enum ChainCmd {
    Info,
}

#[derive(Debug, Subcommand)]
enum RatesCmd {
    /// ‖νPⁿ - π‖₁ on a grid.
    Distance,
    /// (νPⁿ - π)·u on a grid.
    Correlation,
    /// m₁²(p¹¹ₙ - π₁) / Σ_{ℓ>n} d_ℓ.
    #[command(name = "lemma2")]
    ExcessRatio,
    /// Scaled correlations against the predicted constant.
    Constant,
    /// Ratio asymptotics for null-recurrent chains.
    Null,
}

#[derive(Debug, Subcommand)]
enum SpectralCmd {
    Factorize,
    Eigen,
    Gf,
}

#[derive(Debug, Subcommand)]
enum MapCmd {
    Simulate,
    Correlate,
    Entrance,
    Kac,
    Frequency,
}

#[derive(Debug, Subcommand)]
enum SeriesCmd {
    Probe,
}

impl Command {
    fn name(&self) -> String {
        let (group, sub) = match self {
            Command::Chain { cmd } => ("chain", format!("{cmd:?}")),
            Command::Rates { cmd: RatesCmd::ExcessRatio } => ("rates", "lemma2".to_string()),
            Command::Rates { cmd } => ("rates", format!("{cmd:?}")),
            Command::Spectral { cmd } => ("spectral", format!("{cmd:?}")),
            Command::Map { cmd } => ("map", format!("{cmd:?}")),
            Command::Series { cmd } => ("series", format!("{cmd:?}")),
        };
        format!("{group} {}", sub.to_lowercase())
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| config::config_error("--config is required"))?;
    let (mut cfg, bytes) = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(n) = cli.truncation {
        if n == 0 {
            return Err(config::config_error("--truncation must be positive"));
        }
        cfg.chain.truncation = n;
    }
    // overrides are part of the experiment identity
    let mut identity = bytes;
    identity.extend_from_slice(format!("\nseed={:?};truncation={}", cfg.seed, cfg.chain.truncation).as_bytes());

    let chain = RenewalChain::build(cfg.law(), cfg.chain.truncation).context("building the chain")?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let name = cli.command.name();
    let out = OutputDir::create(dir, &identity, cfg.seed, &name)?;
    let ctx = Ctx {
        cfg: &cfg,
        chain: &chain,
        out: &out,
    };
    let results = match &cli.command {
        Command::Chain { cmd: ChainCmd::Info } => commands::chain_info(&ctx),
        Command::Rates { cmd } => match cmd {
            RatesCmd::Distance => commands::rates_distance(&ctx),
            RatesCmd::Correlation => commands::rates_correlation(&ctx),
            RatesCmd::ExcessRatio => commands::rates_renewal_excess(&ctx),
            RatesCmd::Constant => commands::rates_constant(&ctx),
            RatesCmd::Null => commands::rates_null(&ctx),
        },
        Command::Spectral { cmd } => match cmd {
            SpectralCmd::Factorize => commands::spectral_factorize(&ctx),
            SpectralCmd::Eigen => commands::spectral_eigen(&ctx),
            SpectralCmd::Gf => commands::spectral_gf(&ctx),
        },
        Command::Map { cmd } => match cmd {
            MapCmd::Simulate => commands::map_simulate(&ctx),
            MapCmd::Correlate => commands::map_correlate(&ctx),
            MapCmd::Entrance => commands::map_entrance(&ctx),
            MapCmd::Kac => commands::map_kac(&ctx),
            MapCmd::Frequency => commands::map_frequency(&ctx),
        },
        Command::Series { cmd: SeriesCmd::Probe } => commands::series_probe(&ctx),
    }?;
    if !cli.quiet {
        println!("{}", serde_json::to_string_pretty(&results)?);
        println!("wrote {}", out.path().display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<ToleranceError>().is_some() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<renewal_core::Error>() {
            return match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Precondition => 3,
                ErrorKind::Truncation => 4,
                ErrorKind::Io => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
