//! Data and parameter types for the hierarchical Poisson log-normal model.
//!
//! Each count `y[i]` in group `j` is Poisson with log-mean `sum_k w[j,k] * x[i,k]`.
//! Coefficients of covariate `k` share a Gaussian prior `N(mu[k], sigma2[k])`,
//! with `mu[k] ~ N(m, tau2)` and an inverse-gamma prior on `sigma2[k]`.
//!
//! Indices are 0-based here; everything written for users is 1-based.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// One group of observations: `n` rows of `k` covariates plus the counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    label: String,
    /// Row-major `n x k`.
    x: Vec<f64>,
    y: Vec<u64>,
    covariate: Option<f64>,
}

impl Group {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<u64>, covariate: Option<f64>) -> Self {
        Group {
            label: label.into(),
            x,
            y,
            covariate,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.y
    }

    /// Row-major covariate block.
    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    /// Group-level covariate (only set by the synthetic generators).
    pub fn group_covariate(&self) -> Option<f64> {
        self.covariate
    }

    pub fn row(&self, i: usize, k: usize) -> &[f64] {
        &self.x[i * k..(i + 1) * k]
    }
}

/// Grouped counts that may still contain zeros. This is what the generators
/// emit and what CSV parsing produces before the positivity check.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    k: usize,
    groups: Vec<Group>,
}

impl RawDataset {
    pub fn new(k: usize, groups: Vec<Group>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("at least one covariate is required".into()));
        }
        if groups.is_empty() {
            return Err(Error::Config("at least one group is required".into()));
        }
        for g in &groups {
            if g.is_empty() {
                return Err(Error::Config(format!("group '{}' has no observations", g.label)));
            }
            if g.x.len() != g.y.len() * k {
                return Err(Error::Config(format!(
                    "group '{}': {} covariate values for {} rows of {} covariates",
                    g.label,
                    g.x.len(),
                    g.y.len(),
                    k
                )));
            }
            if let Some(bad) = g.x.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "group '{}': non-finite covariate value {bad}",
                    g.label
                )));
            }
        }
        Ok(RawDataset { k, groups })
    }

    pub fn num_covariates(&self) -> usize {
        self.k
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn num_observations(&self) -> usize {
        self.groups.iter().map(Group::len).sum()
    }

    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.groups.iter().flat_map(|g| g.y.iter().copied())
    }

    /// Drops observations with a zero count, and groups left empty by that.
    pub fn without_zeros(&self) -> Result<RawDataset> {
        let k = self.k;
        let groups: Vec<Group> = self
            .groups
            .iter()
            .filter_map(|g| {
                let keep: Vec<usize> = (0..g.len()).filter(|&i| g.y[i] > 0).collect();
                if keep.is_empty() {
                    return None;
                }
                let x = keep.iter().flat_map(|&i| g.row(i, k).iter().copied()).collect();
                let y = keep.iter().map(|&i| g.y[i]).collect();
                Some(Group::new(g.label.clone(), x, y, g.covariate))
            })
            .collect();
        RawDataset::new(k, groups)
    }

    /// Adds `shift` to every count (if given) and then requires all counts to be positive.
    ///
    /// The Gaussian approximation of the coefficient conditional is only defined for
    /// positive counts, so zeros are rejected unless a shift is requested.
    pub fn into_dataset(mut self, shift: Option<u64>) -> Result<GroupedCountDataset> {
        if let Some(s) = shift {
            if s == 0 {
                return Err(Error::Config("count shift must be a positive integer".into()));
            }
            for g in &mut self.groups {
                for y in &mut g.y {
                    *y = y.checked_add(s).ok_or_else(|| {
                        Error::Config(format!("count {y} overflows when shifted by {s}"))
                    })?;
                }
            }
        }
        for g in &self.groups {
            if let Some(i) = g.y.iter().position(|&y| y == 0) {
                return Err(Error::Domain(format!(
                    "group '{}', observation {}: zero count; the Gaussian approximation \
                     requires positive counts (use a count shift to add a positive constant)",
                    g.label,
                    i + 1
                )));
            }
        }
        Ok(GroupedCountDataset::from_positive(self))
    }
}

/// Grouped count data with all counts `>= 1`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCountDataset {
    k: usize,
    groups: Vec<Group>,
    ln_factorial: Vec<Vec<f64>>,
    max_count: u64,
}

impl GroupedCountDataset {
    /// Builds a dataset, rejecting any zero count.
    pub fn new(k: usize, groups: Vec<Group>) -> Result<Self> {
        RawDataset::new(k, groups)?.into_dataset(None)
    }

    /// Skips the positivity check. Only for exercising invariant guards in tests.
    #[cfg(test)]
    pub(crate) fn from_raw_unchecked(raw: RawDataset) -> Self {
        Self::from_positive(raw)
    }

    fn from_positive(raw: RawDataset) -> Self {
        let ln_factorial = raw
            .groups
            .iter()
            .map(|g| g.y.iter().map(|&y| ln_gamma(y as f64 + 1.0)).collect())
            .collect();
        let max_count = raw.counts().max().unwrap_or(1);
        GroupedCountDataset {
            k: raw.k,
            groups: raw.groups,
            ln_factorial,
            max_count,
        }
    }

    pub fn num_covariates(&self) -> usize {
        self.k
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_observations(&self) -> usize {
        self.groups.iter().map(Group::len).sum()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, j: usize) -> &Group {
        &self.groups[j]
    }

    pub fn max_count(&self) -> u64 {
        self.max_count
    }

    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.groups.iter().flat_map(|g| g.y.iter().copied())
    }

    /// `ln(y!)` for observation `i` of group `j`.
    pub fn ln_factorial(&self, j: usize, i: usize) -> f64 {
        self.ln_factorial[j][i]
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            k: self.k,
            groups: self.groups.clone(),
        }
    }
}

/// Current values of all model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    j: usize,
    k: usize,
    /// Row-major `J x K`.
    w: Vec<f64>,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

impl ModelState {
    pub fn new(j: usize, k: usize, w: Vec<f64>, mu: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        if j == 0 || k == 0 {
            return Err(Error::Config("state needs J >= 1 and K >= 1".into()));
        }
        if w.len() != j * k || mu.len() != k || sigma2.len() != k {
            return Err(Error::Config(format!(
                "state dimensions do not match J={j}, K={k}: w has {}, mu has {}, sigma2 has {}",
                w.len(),
                mu.len(),
                sigma2.len()
            )));
        }
        if w.iter().chain(&mu).chain(&sigma2).any(|v| !v.is_finite()) {
            return Err(Error::Domain("state entries must be finite".into()));
        }
        if let Some(s) = sigma2.iter().find(|&&s| s <= 0.0) {
            return Err(Error::Domain(format!("sigma2 must be positive, got {s}")));
        }
        Ok(ModelState { j, k, w, mu, sigma2 })
    }

    /// All coefficients zero, group means zero, unit variances.
    pub fn zeros(j: usize, k: usize) -> Self {
        ModelState {
            j,
            k,
            w: vec![0.0; j * k],
            mu: vec![0.0; k],
            sigma2: vec![1.0; k],
        }
    }

    pub fn num_groups(&self) -> usize {
        self.j
    }

    pub fn num_covariates(&self) -> usize {
        self.k
    }

    pub fn w(&self, j: usize, k: usize) -> f64 {
        self.w[j * self.k + k]
    }

    pub fn set_w(&mut self, j: usize, k: usize, value: f64) {
        self.w[j * self.k + k] = value;
    }

    pub fn w_row(&self, j: usize) -> &[f64] {
        &self.w[j * self.k..(j + 1) * self.k]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.w
    }

    /// Coefficients of covariate `k` across all groups.
    pub fn w_column(&self, k: usize) -> Vec<f64> {
        (0..self.j).map(|j| self.w(j, k)).collect()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn set_mu(&mut self, k: usize, value: f64) {
        self.mu[k] = value;
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn set_sigma2(&mut self, k: usize, value: f64) {
        self.sigma2[k] = value;
    }

    /// Number of scalar parameters, `J*K + 2K`.
    pub fn num_parameters(&self) -> usize {
        self.j * self.k + 2 * self.k
    }

    /// Parameters flattened as `w` (row-major), then `mu`, then `sigma2`.
    /// Matches [`parameter_names`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        out.extend_from_slice(&self.w);
        out.extend_from_slice(&self.mu);
        out.extend_from_slice(&self.sigma2);
        out
    }

    pub fn check_matches(&self, data: &GroupedCountDataset) -> Result<()> {
        if self.j != data.num_groups() || self.k != data.num_covariates() {
            return Err(Error::Config(format!(
                "state is J={}, K={} but data is J={}, K={}",
                self.j,
                self.k,
                data.num_groups(),
                data.num_covariates()
            )));
        }
        Ok(())
    }
}

/// 1-based parameter names in the order used by [`ModelState::flatten`].
pub fn parameter_names(j: usize, k: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(j * k + 2 * k);
    for jj in 1..=j {
        for kk in 1..=k {
            names.push(format!("w[{jj},{kk}]"));
        }
    }
    names.extend((1..=k).map(|kk| format!("mu[{kk}]")));
    names.extend((1..=k).map(|kk| format!("sigma2[{kk}]")));
    names
}

/// Hyperprior constants.
///
/// `mu[k] ~ N(m, tau2)`. The variance update draws
/// `sigma2[k] | w, mu ~ IG((a + J)/2, (b + sum_j (w[j,k] - mu[k])^2)/2)`, i.e. the prior
/// on `sigma2[k]` acts as `IG(a/2, b/2)` with density
/// `p(s) = (b/2)^(a/2) / Gamma(a/2) * s^(-a/2 - 1) * exp(-(b/2)/s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub m: f64,
    pub tau2: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for PriorConfig {
    /// `N(0, 1)` for the group means and `IG(1, 1)` for the variances.
    fn default() -> Self {
        PriorConfig {
            m: 0.0,
            tau2: 1.0,
            a: 1.0,
            b: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn new(m: f64, tau2: f64, a: f64, b: f64) -> Result<Self> {
        let prior = PriorConfig { m, tau2, a, b };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m.is_finite() {
            return Err(Error::Domain(format!("prior mean must be finite, got {}", self.m)));
        }
        for (name, v) in [("tau2", self.tau2), ("a", self.a), ("b", self.b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which sampler produced a [`ChainOutput`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Ags,
    Mwg,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Ags => "ags",
            SamplerKind::Mwg => "mwg",
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ags" => Ok(SamplerKind::Ags),
            "mwg" => Ok(SamplerKind::Mwg),
            other => Err(Error::Config(format!("unknown sampler '{other}' (expected ags or mwg)"))),
        }
    }
}

/// Per-chain bookkeeping recorded alongside the draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats {
    pub seed: u64,
    /// Index of the RNG stream derived from `seed`; equals the chain index.
    pub stream: u64,
    /// Wall time of the sweep loop only.
    pub seconds: f64,
    /// Metropolis acceptance rate over retained iterations (MWG only).
    pub acceptance_rate: Option<f64>,
    /// Random-walk scales when warm-up ended and when sampling ended (MWG only).
    pub step_scales_after_warmup: Option<Vec<f64>>,
    pub step_scales_final: Option<Vec<f64>>,
}

/// Retained draws of all chains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub sampler: SamplerKind,
    /// `draws[c][t]` is retained state `t` of chain `c`.
    pub draws: Vec<Vec<ModelState>>,
    pub warmup_count: usize,
    pub retained_count: usize,
    pub wall_seconds: f64,
    pub chains: Vec<ChainStats>,
}

impl ChainOutput {
    pub fn num_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn iterations(&self) -> usize {
        self.warmup_count + self.retained_count
    }

    pub fn num_groups(&self) -> usize {
        self.first().map_or(0, ModelState::num_groups)
    }

    pub fn num_covariates(&self) -> usize {
        self.first().map_or(0, ModelState::num_covariates)
    }

    fn first(&self) -> Option<&ModelState> {
        self.draws.first().and_then(|c| c.first())
    }

    pub fn parameter_names(&self) -> Vec<String> {
        parameter_names(self.num_groups(), self.num_covariates())
    }

    /// Draws of flattened parameter `p` as a `chains x retained` array.
    pub fn series(&self, p: usize) -> Vec<Vec<f64>> {
        let j = self.num_groups();
        let k = self.num_covariates();
        self.draws
            .iter()
            .map(|chain| {
                chain
                    .iter()
                    .map(|s| {
                        if p < j * k {
                            s.w[p]
                        } else if p < j * k + k {
                            s.mu[p - j * k]
                        } else {
                            s.sigma2[p - j * k - k]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Posterior mean of every flattened parameter across all chains.
    pub fn posterior_mean(&self) -> Result<Vec<f64>> {
        let first = self
            .first()
            .ok_or_else(|| Error::Config("chain output holds no retained draws".into()))?;
        let mut sum = vec![0.0; first.num_parameters()];
        let mut count = 0usize;
        for s in self.draws.iter().flatten() {
            for (acc, v) in sum.iter_mut().zip(s.flatten()) {
                *acc += v;
            }
            count += 1;
        }
        Ok(sum.into_iter().map(|s| s / count as f64).collect())
    }

    /// Posterior-mean coefficients as a `J x K` state with the mean hyperparameters.
    pub fn posterior_mean_state(&self) -> Result<ModelState> {
        let mean = self.posterior_mean()?;
        let j = self.num_groups();
        let k = self.num_covariates();
        ModelState::new(
            j,
            k,
            mean[..j * k].to_vec(),
            mean[j * k..j * k + k].to_vec(),
            mean[j * k + k..].to_vec(),
        )
    }

    /// Sampling seconds per 1000 iterations, averaged over chains.
    pub fn seconds_per_1000(&self) -> f64 {
        let iters = self.iterations().max(1) as f64;
        let total: f64 = self.chains.iter().map(|c| c.seconds / iters * 1000.0).sum();
        total / self.chains.len().max(1) as f64
    }
}

/// `sum_k w[j,k] * x[i,k]`, the log of the Poisson mean of observation `i` in group `j`.
pub fn linear_predictor(
    state: &ModelState,
    data: &GroupedCountDataset,
    j: usize,
    i: usize,
) -> Result<f64> {
    state.check_matches(data)?;
    let group = data
        .groups
        .get(j)
        .ok_or_else(|| Error::Config(format!("group index {j} out of bounds")))?;
    if i >= group.len() {
        return Err(Error::Config(format!(
            "observation index {i} out of bounds for group {j} with {} rows",
            group.len()
        )));
    }
    Ok(dot(state.w_row(j), group.row(i, data.k)))
}

/// Full Poisson log-likelihood, `sum_ij [y*eta - exp(eta) - ln(y!)]`.
pub fn log_poisson_likelihood(state: &ModelState, data: &GroupedCountDataset) -> Result<f64> {
    state.check_matches(data)?;
    let k = data.k;
    let mut total = 0.0;
    for (j, g) in data.groups.iter().enumerate() {
        let w = state.w_row(j);
        for (i, &y) in g.y.iter().enumerate() {
            let eta = dot(w, g.row(i, k));
            total += y as f64 * eta - eta.exp() - data.ln_factorial[j][i];
        }
    }
    Ok(total)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
