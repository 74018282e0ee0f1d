//! Run settings merged from flags, an optional TOML file and built-in defaults.
//!
//! Flags win over the file, the file wins over the defaults. The output directory
//! may also come from `AGS_OUTPUT_DIR`, which ranks between the flag and the file.

use std::path::{Path, PathBuf};

use ags_core::{ChainConfig, Init, PriorConfig, SamplerKind};
use clap::Args;
use serde::Deserialize;

/// Keys accepted in a `--config` file. All are optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub output_dir: Option<PathBuf>,
    pub sampler: Option<String>,
    pub m: Option<f64>,
    pub tau2: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub warmup: Option<usize>,
    pub keep: Option<usize>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
    pub init: Option<String>,
    pub shift_counts: Option<u64>,
    pub step_scale: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for the written files [env: AGS_OUTPUT_DIR; default: .]
    #[arg(long, short = 'o', env = "AGS_OUTPUT_DIR", hide_env = true)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Input CSV with header group,x1,...,xK,y
    #[arg(long, short = 'i')]
    pub input: PathBuf,

    /// TOML file with default settings
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Prior mean of the covariate means [default: 0]
    #[arg(long)]
    pub m: Option<f64>,
    /// Prior variance of the covariate means [default: 1]
    #[arg(long)]
    pub tau2: Option<f64>,
    /// Shape parameter of the variance prior [default: 1]
    #[arg(long)]
    pub a: Option<f64>,
    /// Scale parameter of the variance prior [default: 1]
    #[arg(long)]
    pub b: Option<f64>,

    /// Warm-up iterations per chain, discarded [default: 5000]
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Retained iterations per chain [default: 5000]
    #[arg(long)]
    pub keep: Option<usize>,
    /// Number of chains [default: 4]
    #[arg(long)]
    pub chains: Option<usize>,
    /// Chain initialization: prior-draw or zeros [default: prior-draw]
    #[arg(long)]
    pub init: Option<String>,

    /// Add this positive constant to every count before fitting
    #[arg(long)]
    pub shift_counts: Option<u64>,

    /// Initial random-walk scale of the Metropolis baseline [default: 0.1]
    #[arg(long)]
    pub step_scale: Option<f64>,

    /// Write NA instead of wall-clock figures so that outputs depend only on the seed
    #[arg(long)]
    pub omit_timing: bool,
}

/// Fully resolved settings for `fit` and `compare`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub sampler: SamplerKind,
    pub prior: PriorConfig,
    pub chains: ChainConfig,
    pub shift_counts: Option<u64>,
    pub step_scale: Option<f64>,
    pub omit_timing: bool,
}

impl RunConfig {
    pub fn resolve(
        model: &ModelArgs,
        output: &OutputArgs,
        sampler: Option<SamplerKind>,
        seed: Option<u64>,
    ) -> Result<Self, String> {
        let file = match &model.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let defaults = ChainConfig::default();
        let prior_defaults = PriorConfig::default();

        let sampler = match (sampler, &file.sampler) {
            (Some(s), _) => s,
            (None, Some(s)) => s.parse().map_err(|e: ags_core::Error| e.to_string())?,
            (None, None) => SamplerKind::Ags,
        };
        let init = match model.init.as_ref().or(file.init.as_ref()) {
            Some(s) => s.parse::<Init>().map_err(|e| e.to_string())?,
            None => Init::PriorDraw,
        };
        let prior = PriorConfig::new(
            model.m.or(file.m).unwrap_or(prior_defaults.m),
            model.tau2.or(file.tau2).unwrap_or(prior_defaults.tau2),
            model.a.or(file.a).unwrap_or(prior_defaults.a),
            model.b.or(file.b).unwrap_or(prior_defaults.b),
        )
        .map_err(|e| e.to_string())?;
        let chains = ChainConfig {
            n_warmup: model.warmup.or(file.warmup).unwrap_or(defaults.n_warmup),
            n_keep: model.keep.or(file.keep).unwrap_or(defaults.n_keep),
            n_chains: model.chains.or(file.chains).unwrap_or(defaults.n_chains),
            seed: seed.or(file.seed).unwrap_or(defaults.seed),
            init,
        };
        chains.validate().map_err(|e| e.to_string())?;
        let shift_counts = model.shift_counts.or(file.shift_counts);
        if shift_counts == Some(0) {
            return Err("--shift-counts must be a positive integer".into());
        }
        Ok(RunConfig {
            input: model.input.clone(),
            output_dir: output
                .output_dir
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            sampler,
            prior,
            chains,
            shift_counts,
            step_scale: model.step_scale.or(file.step_scale),
            omit_timing: model.omit_timing,
        })
    }
}
