//! Multi-chain driver shared by both samplers.
//!
//! Every chain draws from its own ChaCha8 stream: the key comes from the run seed and
//! the stream id is the chain index, so a chain's draws do not depend on how chains
//! are scheduled across threads.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conjugate::{draw_gaussian, draw_inverse_gamma, GaussianParams, InvGammaParams};
use crate::error::{Error, Result};
use crate::model::{ChainOutput, ChainStats, GroupedCountDataset, ModelState, PriorConfig, SamplerKind};

/// How the first state of each chain is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// `mu[k] ~ N(m, tau2)`, `sigma2[k] ~ IG(a, b)`, `w[j,k] ~ N(mu[k], sigma2[k])`.
    #[default]
    PriorDraw,
    /// All coefficients and means zero, unit variances.
    Zeros,
}

impl std::str::FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior-draw" | "prior" => Ok(Init::PriorDraw),
            "zeros" => Ok(Init::Zeros),
            other => Err(Error::Config(format!(
                "unknown init '{other}' (expected prior-draw or zeros)"
            ))),
        }
    }
}

/// Chain layout shared by both samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub n_warmup: usize,
    pub n_keep: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub init: Init,
}

impl Default for ChainConfig {
    /// Four chains of 10000 iterations, the first 5000 discarded.
    fn default() -> Self {
        ChainConfig {
            n_warmup: 5000,
            n_keep: 5000,
            n_chains: 4,
            seed: 0,
            init: Init::PriorDraw,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_keep == 0 {
            return Err(Error::Config("number of retained draws must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::Config("number of chains must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

pub fn initial_state(
    data: &GroupedCountDataset,
    prior: &PriorConfig,
    init: Init,
    rng: &mut ChaCha8Rng,
) -> Result<ModelState> {
    let (j, k) = (data.num_groups(), data.num_covariates());
    match init {
        Init::Zeros => Ok(ModelState::zeros(j, k)),
        Init::PriorDraw => {
            let mut mu = Vec::with_capacity(k);
            let mut sigma2 = Vec::with_capacity(k);
            for _ in 0..k {
                mu.push(draw_gaussian(
                    GaussianParams {
                        mean: prior.m,
                        variance: prior.tau2,
                    },
                    rng,
                ));
                sigma2.push(draw_inverse_gamma(
                    InvGammaParams {
                        shape: prior.a,
                        scale: prior.b,
                    },
                    rng,
                )?);
            }
            let mut w = Vec::with_capacity(j * k);
            for _ in 0..j {
                for kk in 0..k {
                    w.push(draw_gaussian(
                        GaussianParams {
                            mean: mu[kk],
                            variance: sigma2[kk],
                        },
                        rng,
                    ));
                }
            }
            ModelState::new(j, k, w, mu, sigma2)
        }
    }
}

/// One chain's transition kernel.
pub(crate) trait Kernel {
    /// Prepares per-chain caches for `state`; called once before the first sweep.
    fn start(&mut self, state: &ModelState);

    fn sweep(&mut self, state: &mut ModelState, rng: &mut ChaCha8Rng, warmup: bool) -> Result<()>;

    /// Called once when warm-up ends.
    fn end_warmup(&mut self) {}

    fn finish(&mut self, _stats: &mut ChainStats) {}
}

pub(crate) fn run_chains<K, F>(
    sampler: SamplerKind,
    data: &GroupedCountDataset,
    prior: &PriorConfig,
    config: &ChainConfig,
    make_kernel: F,
) -> Result<ChainOutput>
where
    K: Kernel,
    F: Fn() -> K + Sync,
{
    config.validate()?;
    prior.validate()?;
    let started = Instant::now();
    let results: Vec<Result<(Vec<ModelState>, ChainStats)>> = (0..config.n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = chain_rng(config.seed, chain);
            let mut state = initial_state(data, prior, config.init, &mut rng)?;
            let mut kernel = make_kernel();
            let mut kept = Vec::with_capacity(config.n_keep);

            let t0 = Instant::now();
            kernel.start(&state);
            for _ in 0..config.n_warmup {
                kernel.sweep(&mut state, &mut rng, true)?;
            }
            kernel.end_warmup();
            for _ in 0..config.n_keep {
                kernel.sweep(&mut state, &mut rng, false)?;
                kept.push(state.clone());
            }
            let seconds = t0.elapsed().as_secs_f64();

            let mut stats = ChainStats {
                seed: config.seed,
                stream: chain as u64,
                seconds,
                acceptance_rate: None,
                step_scales_after_warmup: None,
                step_scales_final: None,
            };
            kernel.finish(&mut stats);
            Ok((kept, stats))
        })
        .collect();

    let mut draws = Vec::with_capacity(config.n_chains);
    let mut chains = Vec::with_capacity(config.n_chains);
    for r in results {
        let (d, s) = r?;
        draws.push(d);
        chains.push(s);
    }
    Ok(ChainOutput {
        sampler,
        draws,
        warmup_count: config.n_warmup,
        retained_count: config.n_keep,
        wall_seconds: started.elapsed().as_secs_f64().max(f64::MIN_POSITIVE),
        chains,
    })
}

/// Updates `mu[k]` and then `sigma2[k]` from their conjugate conditionals.
pub(crate) fn update_hyperparameters<R: RngCore + ?Sized>(
    state: &mut ModelState,
    k: usize,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<()> {
    let column = state.w_column(k);
    let mu = draw_gaussian(
        crate::conjugate::mu_conditional(&column, state.sigma2()[k], prior)?,
        rng,
    );
    state.set_mu(k, mu);
    let s2 = draw_inverse_gamma(crate::conjugate::sigma2_conditional(&column, mu, prior)?, rng)?;
    state.set_sigma2(k, s2);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_per_chain_and_repeat_per_seed() {
        let a: Vec<u64> = (0..4).map(|_| chain_rng(9, 0).random()).collect();
        let b: u64 = chain_rng(9, 1).random();
        assert_eq!(a[0], a[3]);
        assert_ne!(a[0], b);
    }

    #[test]
    fn config_rejects_zero_keep() {
        let c = ChainConfig {
            n_keep: 0,
            ..ChainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
