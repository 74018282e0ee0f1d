//! Approximate Gibbs sampling for hierarchical Bayesian Poisson regression.
//!
//! Counts `y[i]` in group `j` follow `Poisson(exp(sum_k w[j,k] x[i,k]))` with
//! `w[j,k] ~ N(mu[k], sigma2[k])`, `mu[k] ~ N(m, tau2)` and an inverse-gamma prior on
//! `sigma2[k]`. The approximate sampler ([`run_ags`]) replaces each Poisson factor by a
//! Gaussian in the log-mean, which makes every conditional conjugate. [`run_mwg`] is an
//! exact-likelihood Metropolis-within-Gibbs reference.
//!
//! ```
//! use ags_core::{generate_large, run_ags, AgsConfig, ChainConfig, PriorConfig, SynthSpec};
//!
//! let synth = generate_large(&SynthSpec::large(3, 10, 2, 7)).unwrap();
//! let data = synth.data.into_dataset(None).unwrap();
//! let config = AgsConfig::from(ChainConfig { n_warmup: 50, n_keep: 50, n_chains: 2, ..Default::default() });
//! let out = run_ags(&data, &PriorConfig::default(), &config).unwrap();
//! assert_eq!(out.draws[0].len(), 50);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ags;
pub mod conjugate;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod mwg;
pub mod sampler;
pub mod special;
pub mod synth;

pub use ags::{ags_sweep, coefficient_conditional, run_ags, AgsConfig, CoefficientConditional};
pub use conjugate::{draw_gaussian, draw_inverse_gamma, mu_conditional, sigma2_conditional, GaussianParams, InvGammaParams};
pub use diagnostics::{
    characteristics, effective_sample_size, posterior_predictive_fit, r_squared, rmse, DataCharacteristics,
    DiagnosticsReport, EssInput,
};
pub use error::{Error, Result};
pub use model::{
    linear_predictor, log_poisson_likelihood, parameter_names, ChainOutput, ChainStats, Group, GroupedCountDataset,
    ModelState, PriorConfig, RawDataset, SamplerKind,
};
pub use mwg::{mwg_coefficient_step, run_mwg, MwgConfig};
pub use sampler::{ChainConfig, Init};
pub use special::{ks_curve, ks_distance, log_gamma_approx, psi0, psi1, KsPoint, LogGammaApprox, PolygammaTable};
pub use synth::{generate, generate_large, generate_small, Family, SynthSpec, SyntheticDataset};
