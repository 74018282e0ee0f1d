//! `ags`: generate synthetic grouped counts, fit the hierarchical Poisson model, compare
//! the approximate sampler against the exact-likelihood baseline, and export the
//! approximation-quality curve.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use ags_core::{Family, SamplerKind};
use clap::{Parser, Subcommand};

use commands::GenArgs;
use config::{ModelArgs, OutputArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ags", version, about = "Approximate Gibbs sampling for hierarchical Poisson regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its true coefficients
    Gen {
        /// large (positive counts up to ~1e6) or small (floored counts up to --y-max)
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long)]
        groups: usize,
        /// Observations per group
        #[arg(long)]
        per_group: usize,
        #[arg(long)]
        covariates: usize,
        /// Upper bound of the group scale (small family)
        #[arg(long)]
        y_max: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Base name of the output files
        #[arg(long, default_value = "synthetic")]
        name: String,
        /// Remove observations with zero counts
        #[arg(long)]
        drop_zeros: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fit one sampler and write draws, diagnostics and a summary
    Fit {
        #[command(flatten)]
        model: ModelArgs,
        /// ags or mwg [default: ags]
        #[arg(long, value_parser = parse_sampler)]
        sampler: Option<SamplerKind>,
        /// Seed of the chain random streams [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fit both samplers with the same seed and tabulate T_s, E_s, R2 and RMSE
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// KS distance and mean error of the Gaussian log-gamma approximation for small counts
    KsCurve {
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: ags_core::Error| e.to_string())
}

fn parse_sampler(s: &str) -> Result<SamplerKind, String> {
    s.parse().map_err(|e: ags_core::Error| e.to_string())
}

fn output_dir(o: &OutputArgs) -> PathBuf {
    o.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen {
            family,
            groups,
            per_group,
            covariates,
            y_max,
            seed,
            name,
            drop_zeros,
            output,
        } => commands::cmd_gen(&GenArgs {
            family,
            groups,
            per_group,
            covariates,
            y_max,
            seed,
            name,
            drop_zeros,
            output_dir: output_dir(&output),
        }),
        Command::Fit {
            model,
            sampler,
            seed,
            output,
        } => RunConfig::resolve(&model, &output, sampler, seed).and_then(|c| commands::cmd_fit(&c)),
        Command::Compare { model, seed, output } => {
            RunConfig::resolve(&model, &output, None, Some(seed)).and_then(|c| commands::cmd_compare(&c))
        }
        Command::KsCurve { output } => commands::cmd_ks_curve(&output_dir(&output)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
