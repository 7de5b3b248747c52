//! Batch front-end for the lost-sales laboratory.
//!
//! One JSON config file drives every subcommand; `--seed`, `--out`, and
//! `--threads` override it from the command line. Each run writes its
//! artifacts atomically into the output directory together with a manifest
//! recording the config hash, root seed, and a checksum per output, so
//! exact-mode runs can be verified byte for byte.
//!
//! Exit codes: 0 success, 1 verification failure, 2 config/usage error,
//! 3 work-budget exceeded.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{RunContext, Status};
use config::ExperimentConfig;
use lostsales::report::sha256_hex;

#[derive(Parser)]
#[command(
    name = "lostsales",
    version,
    about = "Periodic-review lost-sales inventory laboratory",
    arg_required_else_help = true
)]
struct Cli {
    /// Experiment config (JSON). Required by every subcommand except
    /// `verify`, which falls back to built-in reference instances.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for grid dispatch and replications.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Instance scalars: quantile Q, newsvendor floor g, best constant z,
    /// Theta rates, and the asymptotic lead-time thresholds.
    Constants,
    /// Stationary supremum law, argmax law, and certified tail bounds.
    Lindley,
    /// Grid search for the best constant order rate.
    ZSearch,
    /// Exact finite-horizon dynamic program.
    Dp,
    /// Monte Carlo policy evaluation plus one trajectory dump.
    Simulate,
    /// Window-functional minimization: the start-state lower bound.
    LowerBound,
    /// Optimality-gap certificate for the constant-rate policy.
    Gap,
    /// cost(pi_z)/OPT over the configured grid, as CSV.
    RatioTable,
    /// Run the acceptance suite; nonzero exit on any failure.
    Verify {
        /// Comma-separated criterion ids (default: all eleven).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Lindley => "lindley",
            Command::ZSearch => "z-search",
            Command::Dp => "dp",
            Command::Simulate => "simulate",
            Command::LowerBound => "lower-bound",
            Command::Gap => "gap",
            Command::RatioTable => "ratio-table",
            Command::Verify { .. } => "verify",
        }
    }
}

/// Minimal stand-in config for `verify` without `--config`: the suite pins
/// its own instances, so only seed and output directory matter.
fn verify_default_config() -> ExperimentConfig {
    let text = r#"{ "demand": { "atoms": [0, 2], "probs": [0.5, 0.5], "unit": 1 } }"#;
    serde_json::from_str(text).expect("built-in default config is valid")
}

fn load_config(cli: &Cli) -> Result<(ExperimentConfig, String), String> {
    let (mut cfg, hash) = match &cli.config {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            let cfg: ExperimentConfig = serde_json::from_slice(&bytes)
                .map_err(|e| format!("config {}: {e}", path.display()))?;
            (cfg, sha256_hex(&bytes))
        }
        None => match cli.command {
            Command::Verify { .. } => {
                let cfg = verify_default_config();
                let hash = sha256_hex(b"builtin-verify-defaults");
                (cfg, hash)
            }
            _ => return Err(format!("{} requires --config", cli.command.name())),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok((cfg, hash))
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        // Ignore a pool that is already initialized: only the first build
        // in a process can win, and that is fine for a CLI.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let (cfg, config_sha256) = match load_config(&cli) {
        Ok(loaded) => loaded,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(2);
        }
    };

    let mut ctx = RunContext::new(cfg, cli.command.name(), config_sha256);
    let outcome = match &cli.command {
        Command::Constants => commands::cmd_constants(&mut ctx),
        Command::Lindley => commands::cmd_lindley(&mut ctx),
        Command::ZSearch => commands::cmd_z_search(&mut ctx),
        Command::Dp => commands::cmd_dp(&mut ctx),
        Command::Simulate => commands::cmd_simulate(&mut ctx),
        Command::LowerBound => commands::cmd_lower_bound(&mut ctx),
        Command::Gap => commands::cmd_gap(&mut ctx),
        Command::RatioTable => commands::cmd_ratio_table(&mut ctx),
        Command::Verify { criteria } => commands::cmd_verify(&mut ctx, criteria),
    };

    let status = match outcome {
        Ok(status) => status,
        Err(e) => {
            eprintln!("{}: {e}", cli.command.name());
            return ExitCode::from(commands::exit_code_for(&e));
        }
    };
    if let Err(e) = ctx.finish() {
        eprintln!("manifest: {e}");
        return ExitCode::from(2);
    }
    match status {
        Status::Clean => ExitCode::SUCCESS,
        Status::VerificationFailed => ExitCode::from(1),
    }
}
