//! Metropolis-within-Gibbs reference sampler.
//!
//! Hyperparameters use the same conjugate draws as the approximate sampler. Each
//! coefficient takes one Gaussian random-walk Metropolis step against its exact
//! conditional
//!
//! ```text
//! log p(w[j,k] | -) = sum_i [y[i] * eta[i] - exp(eta[i])] - (w[j,k] - mu[k])^2 / (2 sigma2[k]) + const
//! ```
//!
//! Each coefficient has its own step scale. During warm-up the log scale follows a
//! Robbins–Monro recursion toward the target acceptance rate; afterwards it is frozen.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{dot, ChainOutput, ChainStats, GroupedCountDataset, ModelState, PriorConfig, SamplerKind};
use crate::sampler::{run_chains, update_hyperparameters, ChainConfig, Kernel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwgConfig {
    pub chains: ChainConfig,
    /// Initial random-walk standard deviation for every coefficient.
    pub step_scale: f64,
    /// Acceptance rate the warm-up adaptation aims for.
    pub adapt_target: f64,
    /// Time scale of the adaptation gain, in iterations: the gain at warm-up
    /// iteration `t` is `(1 + t / adapt_window)^-0.6`.
    pub adapt_window: usize,
}

impl Default for MwgConfig {
    fn default() -> Self {
        MwgConfig {
            chains: ChainConfig::default(),
            step_scale: 0.1,
            adapt_target: 0.44,
            adapt_window: 50,
        }
    }
}

impl From<ChainConfig> for MwgConfig {
    fn from(chains: ChainConfig) -> Self {
        MwgConfig {
            chains,
            ..MwgConfig::default()
        }
    }
}

impl MwgConfig {
    pub fn validate(&self) -> Result<()> {
        self.chains.validate()?;
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::Config(format!("step scale must be positive, got {}", self.step_scale)));
        }
        if !(self.adapt_target > 0.0 && self.adapt_target < 1.0) {
            return Err(Error::Config(format!(
                "adaptation target must lie in (0, 1), got {}",
                self.adapt_target
            )));
        }
        if self.adapt_window == 0 {
            return Err(Error::Config("adaptation window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Unnormalized log of the exact conditional of `w[j,k]` at `value`, all else fixed.
pub fn log_exact_conditional(
    j: usize,
    k: usize,
    value: f64,
    state: &ModelState,
    data: &GroupedCountDataset,
) -> f64 {
    let g = data.group(j);
    let kk = data.num_covariates();
    let w = state.w_row(j);
    let mut lp = 0.0;
    for (i, &y) in g.counts().iter().enumerate() {
        let row = g.row(i, kk);
        let eta = dot(w, row) + row[k] * (value - w[k]);
        lp += y as f64 * eta - eta.exp();
    }
    let d = value - state.mu()[k];
    lp - d * d / (2.0 * state.sigma2()[k])
}

/// Metropolis acceptance test for a symmetric proposal.
///
/// A non-finite current target accepts any proposal with a larger (or finite) target;
/// if both are `-inf` the move is rejected.
#[inline]
pub fn accept<R: Rng + ?Sized>(log_current: f64, log_proposed: f64, rng: &mut R) -> bool {
    let delta = log_proposed - log_current;
    if delta >= 0.0 {
        return true;
    }
    if delta.is_nan() {
        return false;
    }
    let u: f64 = rng.random();
    u.ln() < delta
}

/// One random-walk Metropolis step for `w[j,k]` with proposal sd `step_scale`.
/// Updates `state` in place and reports whether the move was accepted.
pub fn mwg_coefficient_step<R: Rng + ?Sized>(
    j: usize,
    k: usize,
    state: &mut ModelState,
    data: &GroupedCountDataset,
    step_scale: f64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    state.check_matches(data)?;
    if j >= data.num_groups() || k >= data.num_covariates() {
        return Err(Error::Config(format!("coefficient ({j}, {k}) out of bounds")));
    }
    let current = state.w(j, k);
    let z: f64 = StandardNormal.sample(rng);
    let proposal = current + step_scale * z;
    let lc = log_exact_conditional(j, k, current, state, data);
    let lp = log_exact_conditional(j, k, proposal, state, data);
    if accept(lc, lp, rng) {
        state.set_w(j, k, proposal);
        Ok((proposal, true))
    } else {
        Ok((current, false))
    }
}

struct GroupData {
    n: usize,
    /// Column-major `k x n`.
    x: Vec<f64>,
    y: Vec<f64>,
}

struct MwgChain<'a> {
    groups: &'a [GroupData],
    k: usize,
    prior: PriorConfig,
    config: MwgConfig,
    eta: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    scratch_eta: Vec<f64>,
    scratch_lambda: Vec<f64>,
    log_scale: Vec<f64>,
    adapt_iter: usize,
    sweeps: usize,
    accepted: u64,
    proposed: u64,
    scales_after_warmup: Option<Vec<f64>>,
}

impl<'a> MwgChain<'a> {
    fn new(groups: &'a [GroupData], k: usize, prior: PriorConfig, config: MwgConfig) -> Self {
        let max_n = groups.iter().map(|g| g.n).max().unwrap_or(0);
        MwgChain {
            groups,
            k,
            prior,
            config,
            eta: groups.iter().map(|g| vec![0.0; g.n]).collect(),
            lambda: groups.iter().map(|g| vec![1.0; g.n]).collect(),
            scratch_eta: vec![0.0; max_n],
            scratch_lambda: vec![0.0; max_n],
            log_scale: vec![config.step_scale.ln(); groups.len() * k],
            adapt_iter: 0,
            sweeps: 0,
            accepted: 0,
            proposed: 0,
            scales_after_warmup: None,
        }
    }

    fn refresh(&mut self, state: &ModelState) {
        for (j, g) in self.groups.iter().enumerate() {
            let eta = &mut self.eta[j];
            eta.fill(0.0);
            for h in 0..self.k {
                let w = state.w(j, h);
                for (e, x) in eta.iter_mut().zip(&g.x[h * g.n..(h + 1) * g.n]) {
                    *e += w * x;
                }
            }
            for (l, e) in self.lambda[j].iter_mut().zip(eta.iter()) {
                *l = e.exp();
            }
        }
    }

    fn step(&mut self, state: &mut ModelState, j: usize, k: usize, rng: &mut ChaCha8Rng) -> bool {
        let g = &self.groups[j];
        let n = g.n;
        let x = &g.x[k * n..(k + 1) * n];
        let eta = &self.eta[j];
        let lambda = &self.lambda[j];
        let current = state.w(j, k);
        let scale = self.log_scale[j * self.k + k].exp();
        let z: f64 = StandardNormal.sample(rng);
        let delta = scale * z;
        let proposal = current + delta;

        let mut lc = 0.0;
        let mut lp = 0.0;
        let new_eta = &mut self.scratch_eta[..n];
        let new_lambda = &mut self.scratch_lambda[..n];
        for i in 0..n {
            let e = eta[i] + x[i] * delta;
            let l = e.exp();
            lc += g.y[i] * eta[i] - lambda[i];
            lp += g.y[i] * e - l;
            new_eta[i] = e;
            new_lambda[i] = l;
        }
        let mu = state.mu()[k];
        let s2 = state.sigma2()[k];
        lc -= (current - mu) * (current - mu) / (2.0 * s2);
        lp -= (proposal - mu) * (proposal - mu) / (2.0 * s2);

        let ok = accept(lc, lp, rng);
        if ok {
            state.set_w(j, k, proposal);
            self.eta[j].copy_from_slice(new_eta);
            self.lambda[j].copy_from_slice(new_lambda);
        }
        ok
    }
}

impl Kernel for MwgChain<'_> {
    fn start(&mut self, state: &ModelState) {
        self.refresh(state);
    }

    fn sweep(&mut self, state: &mut ModelState, rng: &mut ChaCha8Rng, warmup: bool) -> Result<()> {
        // incremental eta updates drift slowly; resync periodically
        if self.sweeps % 64 == 63 {
            self.refresh(state);
        }
        self.sweeps += 1;
        let gain = if warmup {
            let t = self.adapt_iter as f64 / self.config.adapt_window as f64;
            self.adapt_iter += 1;
            Some((1.0 + t).powf(-0.6))
        } else {
            None
        };
        for k in 0..self.k {
            update_hyperparameters(state, k, &self.prior, rng)?;
            for j in 0..self.groups.len() {
                let ok = self.step(state, j, k, rng);
                match gain {
                    Some(gain) => {
                        let target = self.config.adapt_target;
                        let hit = if ok { 1.0 } else { 0.0 };
                        let ls = &mut self.log_scale[j * self.k + k];
                        *ls = (*ls + gain * (hit - target)).clamp(-30.0, 10.0);
                    }
                    None => {
                        self.proposed += 1;
                        self.accepted += ok as u64;
                    }
                }
            }
        }
        Ok(())
    }

    fn end_warmup(&mut self) {
        self.scales_after_warmup = Some(self.log_scale.iter().map(|l| l.exp()).collect());
    }

    fn finish(&mut self, stats: &mut ChainStats) {
        stats.acceptance_rate = Some(self.accepted as f64 / self.proposed.max(1) as f64);
        stats.step_scales_after_warmup = self.scales_after_warmup.take();
        stats.step_scales_final = Some(self.log_scale.iter().map(|l| l.exp()).collect());
    }
}

/// Runs independent Metropolis-within-Gibbs chains with warm-up step-size adaptation.
pub fn run_mwg(data: &GroupedCountDataset, prior: &PriorConfig, config: &MwgConfig) -> Result<ChainOutput> {
    config.validate()?;
    let k = data.num_covariates();
    let groups: Vec<GroupData> = data
        .groups()
        .iter()
        .map(|g| {
            let n = g.len();
            let mut x = vec![0.0; k * n];
            for i in 0..n {
                for (h, &v) in g.row(i, k).iter().enumerate() {
                    x[h * n + i] = v;
                }
            }
            GroupData {
                n,
                x,
                y: g.counts().iter().map(|&y| y as f64).collect(),
            }
        })
        .collect();
    run_chains(SamplerKind::Mwg, data, prior, &config.chains, || {
        MwgChain::new(&groups, k, *prior, *config)
    })
}
