//! Approximate Gibbs sampler.
//!
//! Replacing each Poisson likelihood factor by the Gaussian `N(eta | psi0(y), psi1(y))`
//! makes the conditional of every coefficient Gaussian. For coefficient `(j, k)`:
//!
//! ```text
//! denom    = sigma2[k] * sum_i x[i,k]^2 / psi1(y[i]) + 1
//! var_hat  = sigma2[k] / denom
//! mean_hat = (mu[k] + sigma2[k] * sum_i x[i,k] / psi1(y[i]) * (psi0(y[i]) - sum_{h != k} x[i,h] w[j,h])) / denom
//! ```
//!
//! with the sum over the observations of group `j`.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ChainOutput, GroupedCountDataset, ModelState, PriorConfig, SamplerKind};
use crate::sampler::{run_chains, update_hyperparameters, ChainConfig, Kernel};
use crate::special::{PolygammaTable, DEFAULT_ASYMPTOTIC_THRESHOLD};

/// Parameters of the Gaussian conditional of `w[j,k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientConditional {
    pub j: usize,
    pub k: usize,
    pub mean_hat: f64,
    pub var_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgsConfig {
    pub chains: ChainConfig,
    /// Counts above this use asymptotic polygamma values instead of the table.
    pub asymptotic_threshold: u64,
}

impl Default for AgsConfig {
    fn default() -> Self {
        AgsConfig {
            chains: ChainConfig::default(),
            asymptotic_threshold: DEFAULT_ASYMPTOTIC_THRESHOLD,
        }
    }
}

impl From<ChainConfig> for AgsConfig {
    fn from(chains: ChainConfig) -> Self {
        AgsConfig {
            chains,
            ..AgsConfig::default()
        }
    }
}

/// Conditional of `w[j,k]` evaluated directly from the data.
pub fn coefficient_conditional(
    j: usize,
    k: usize,
    state: &ModelState,
    data: &GroupedCountDataset,
    table: &PolygammaTable,
) -> Result<CoefficientConditional> {
    state.check_matches(data)?;
    if j >= data.num_groups() || k >= data.num_covariates() {
        return Err(Error::Config(format!("coefficient ({j}, {k}) out of bounds")));
    }
    let sigma2 = state.sigma2()[k];
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2[{k}] must be positive, got {sigma2}")));
    }
    let group = data.group(j);
    let kk = data.num_covariates();
    let w = state.w_row(j);
    let mut precision_sum = 0.0;
    let mut weighted = 0.0;
    for (i, &y) in group.counts().iter().enumerate() {
        if y == 0 {
            return Err(Error::Invariant(format!(
                "zero count at group {}, observation {}",
                j + 1,
                i + 1
            )));
        }
        let row = group.row(i, kk);
        let others: f64 = (0..kk).filter(|&h| h != k).map(|h| row[h] * w[h]).sum();
        let p1 = table.psi1(y);
        precision_sum += row[k] * row[k] / p1;
        weighted += row[k] / p1 * (table.psi0(y) - others);
    }
    let denom = sigma2 * precision_sum + 1.0;
    Ok(CoefficientConditional {
        j,
        k,
        mean_hat: (state.mu()[k] + sigma2 * weighted) / denom,
        var_hat: sigma2 / denom,
    })
}

/// Per-dataset quantities that do not change during sampling.
#[derive(Debug, Clone)]
pub struct AgsPrecomputed {
    k: usize,
    groups: Vec<GroupCache>,
}

#[derive(Debug, Clone)]
struct GroupCache {
    n: usize,
    /// Column-major `k x n` covariates.
    x: Vec<f64>,
    /// `x[i,k] / psi1(y[i])`, column-major.
    x_over_psi1: Vec<f64>,
    /// `sum_i x[i,k]^2 / psi1(y[i])`.
    precision: Vec<f64>,
    psi0: Vec<f64>,
}

impl AgsPrecomputed {
    pub fn new(data: &GroupedCountDataset, table: &PolygammaTable) -> Result<Self> {
        let k = data.num_covariates();
        let mut groups = Vec::with_capacity(data.num_groups());
        for (j, g) in data.groups().iter().enumerate() {
            let n = g.len();
            let mut x = vec![0.0; k * n];
            let mut x_over_psi1 = vec![0.0; k * n];
            let mut precision = vec![0.0; k];
            let mut psi0 = Vec::with_capacity(n);
            for (i, &y) in g.counts().iter().enumerate() {
                if y == 0 {
                    return Err(Error::Invariant(format!(
                        "zero count at group {}, observation {}",
                        j + 1,
                        i + 1
                    )));
                }
                let p1 = table.psi1(y);
                psi0.push(table.psi0(y));
                for (h, &v) in g.row(i, k).iter().enumerate() {
                    x[h * n + i] = v;
                    x_over_psi1[h * n + i] = v / p1;
                    precision[h] += v * v / p1;
                }
            }
            groups.push(GroupCache {
                n,
                x,
                x_over_psi1,
                precision,
                psi0,
            });
        }
        Ok(AgsPrecomputed { k, groups })
    }
}

/// Recompute the linear predictors from scratch every this many sweeps.
const ETA_REFRESH: usize = 64;

/// Chain-local state of the sampler: the current linear predictor of every observation.
struct AgsChain<'a> {
    pre: &'a AgsPrecomputed,
    prior: PriorConfig,
    eta: Vec<Vec<f64>>,
    sweeps: usize,
}

impl<'a> AgsChain<'a> {
    fn new(pre: &'a AgsPrecomputed, prior: PriorConfig) -> Self {
        AgsChain {
            pre,
            prior,
            eta: pre.groups.iter().map(|g| vec![0.0; g.n]).collect(),
            sweeps: 0,
        }
    }

    fn refresh(&mut self, state: &ModelState) {
        let k = self.pre.k;
        for (j, (g, eta)) in self.pre.groups.iter().zip(&mut self.eta).enumerate() {
            eta.fill(0.0);
            for h in 0..k {
                let w = state.w(j, h);
                for (e, x) in eta.iter_mut().zip(&g.x[h * g.n..(h + 1) * g.n]) {
                    *e += w * x;
                }
            }
        }
    }

    fn sweep_inner<R: RngCore + ?Sized>(&mut self, state: &mut ModelState, rng: &mut R) -> Result<()> {
        if self.sweeps.is_multiple_of(ETA_REFRESH) {
            self.refresh(state);
        }
        self.sweeps += 1;
        let n_groups = self.pre.groups.len();
        for k in 0..self.pre.k {
            update_hyperparameters(state, k, &self.prior, rng)?;
            let mu = state.mu()[k];
            let sigma2 = state.sigma2()[k];
            for j in 0..n_groups {
                let g = &self.pre.groups[j];
                let eta = &mut self.eta[j];
                let cols = k * g.n..(k + 1) * g.n;
                let a = &g.x_over_psi1[cols.clone()];
                let w_old = state.w(j, k);
                // sum_i a_i (psi0_i - (eta_i - x_ik w_jk))
                let mut acc = 0.0;
                for ((ai, p0), e) in a.iter().zip(&g.psi0).zip(eta.iter()) {
                    acc += ai * (p0 - e);
                }
                acc += w_old * g.precision[k];
                let denom = sigma2 * g.precision[k] + 1.0;
                let mean = (mu + sigma2 * acc) / denom;
                let var = sigma2 / denom;
                let z: f64 = StandardNormal.sample(rng);
                let w_new = mean + var.sqrt() * z;
                let delta = w_new - w_old;
                for (e, x) in eta.iter_mut().zip(&g.x[cols]) {
                    *e += x * delta;
                }
                state.set_w(j, k, w_new);
            }
        }
        Ok(())
    }
}

impl Kernel for AgsChain<'_> {
    fn start(&mut self, state: &ModelState) {
        self.sweeps = 0;
        self.refresh(state);
    }

    fn sweep(&mut self, state: &mut ModelState, rng: &mut ChaCha8Rng, _warmup: bool) -> Result<()> {
        self.sweep_inner(state, rng)
    }
}

/// One full sweep: for each covariate `k`, draw `mu[k]`, then `sigma2[k]`, then
/// `w[j,k]` for every group.
pub fn ags_sweep<R: RngCore + ?Sized>(
    state: &mut ModelState,
    data: &GroupedCountDataset,
    prior: &PriorConfig,
    table: &PolygammaTable,
    rng: &mut R,
) -> Result<()> {
    state.check_matches(data)?;
    let pre = AgsPrecomputed::new(data, table)?;
    let mut chain = AgsChain::new(&pre, *prior);
    chain.sweep_inner(state, rng)
}

/// Runs independent approximate Gibbs chains and keeps the post-warm-up draws.
pub fn run_ags(data: &GroupedCountDataset, prior: &PriorConfig, config: &AgsConfig) -> Result<ChainOutput> {
    let table = PolygammaTable::with_threshold(data.max_count(), config.asymptotic_threshold);
    let pre = AgsPrecomputed::new(data, &table)?;
    run_chains(SamplerKind::Ags, data, prior, &config.chains, || AgsChain::new(&pre, *prior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Group;
    use crate::sampler::{chain_rng, Init};
    use approx::assert_relative_eq;

    fn dataset(groups: Vec<(Vec<f64>, Vec<u64>)>, k: usize) -> GroupedCountDataset {
        GroupedCountDataset::new(
            k,
            groups
                .into_iter()
                .enumerate()
                .map(|(j, (x, y))| Group::new((j + 1).to_string(), x, y, None))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_covariate_recovers_prior() {
        let data = dataset(vec![(vec![0.0, 1.0, 0.0, 2.0, 0.0, -1.0], vec![3, 9, 27])], 2);
        let state = ModelState::new(1, 2, vec![0.4, 0.7], vec![1.3, -0.2], vec![0.8, 2.0]).unwrap();
        let table = PolygammaTable::new(data.max_count());
        let c = coefficient_conditional(0, 0, &state, &data, &table).unwrap();
        assert_eq!(c.mean_hat, 1.3);
        assert_eq!(c.var_hat, 0.8);
    }

    #[test]
    fn single_observation_hand_value() {
        let data = dataset(vec![(vec![1.0], vec![1])], 1);
        let state = ModelState::zeros(1, 1);
        let table = PolygammaTable::new(1);
        let c = coefficient_conditional(0, 0, &state, &data, &table).unwrap();
        let denom = 1.0 / 1.6449340668482264 + 1.0;
        assert_relative_eq!(c.var_hat, 1.0 / denom, max_relative = 1e-12);
        assert_relative_eq!(c.var_hat, 0.621918741743296, epsilon = 1e-12);
        assert_relative_eq!(c.mean_hat, -0.218234424871452, epsilon = 1e-12);
    }

    #[test]
    fn shrinkage_lies_between_prior_and_data() {
        let table = PolygammaTable::new(100);
        for (x, y, mu) in [(0.5, 12u64, -1.0), (2.0, 3, 4.0), (1.0, 80, 0.0)] {
            let data = dataset(vec![(vec![x], vec![y])], 1);
            let state = ModelState::new(1, 1, vec![0.0], vec![mu], vec![1.5]).unwrap();
            let c = coefficient_conditional(0, 0, &state, &data, &table).unwrap();
            let target = table.psi0(y) / x;
            let (lo, hi) = if mu < target { (mu, target) } else { (target, mu) };
            assert!(c.mean_hat > lo && c.mean_hat < hi, "{c:?}");
        }
    }

    #[test]
    fn zero_count_is_invariant_violation() {
        let raw = crate::model::RawDataset::new(1, vec![Group::new("1", vec![1.0, 2.0], vec![3, 0], None)])
            .unwrap();
        let data = GroupedCountDataset::from_raw_unchecked(raw);
        let table = PolygammaTable::new(3);
        let err = coefficient_conditional(0, 0, &ModelState::zeros(1, 1), &data, &table).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)), "{err}");
        assert!(matches!(AgsPrecomputed::new(&data, &table), Err(Error::Invariant(_))));
    }

    #[test]
    fn fast_sweep_matches_direct_conditional() {
        // Replays one sweep with the direct formula and the same random numbers.
        let data = dataset(
            vec![
                (vec![0.5, 1.0, 1.5, 0.2, 0.9, 0.4], vec![4, 11, 7]),
                (vec![1.1, 0.3, 0.2, 0.8], vec![20, 2]),
            ],
            2,
        );
        let prior = PriorConfig::default();
        let table = PolygammaTable::new(data.max_count());
        let start = ModelState::new(2, 2, vec![0.3, -0.1, 0.5, 0.2], vec![0.1, 0.0], vec![0.7, 1.2]).unwrap();

        let mut fast = start.clone();
        let mut rng = chain_rng(5, 0);
        ags_sweep(&mut fast, &data, &prior, &table, &mut rng).unwrap();

        let mut slow = start;
        let mut rng = chain_rng(5, 0);
        for k in 0..2 {
            update_hyperparameters(&mut slow, k, &prior, &mut rng).unwrap();
            for j in 0..2 {
                let c = coefficient_conditional(j, k, &slow, &data, &table).unwrap();
                let z: f64 = StandardNormal.sample(&mut rng);
                slow.set_w(j, k, c.mean_hat + c.var_hat.sqrt() * z);
            }
        }
        for (a, b) in fast.flatten().iter().zip(slow.flatten()) {
            assert_relative_eq!(*a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn sweep_touches_every_parameter() {
        let data = dataset(vec![(vec![0.5, 1.0], vec![4, 11]), (vec![0.2, 0.4], vec![3, 5])], 1);
        let state = ModelState::zeros(2, 1);
        let mut next = state.clone();
        let table = PolygammaTable::new(11);
        ags_sweep(&mut next, &data, &PriorConfig::default(), &table, &mut chain_rng(1, 0)).unwrap();
        let changed = state
            .flatten()
            .iter()
            .zip(next.flatten())
            .filter(|(a, b)| **a != *b)
            .count();
        assert_eq!(changed, 4);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let data = dataset(vec![(vec![0.5, 1.0, 1.5], vec![4, 11, 30])], 1);
        let config = AgsConfig::from(ChainConfig {
            n_warmup: 20,
            n_keep: 30,
            n_chains: 3,
            seed: 42,
            init: Init::PriorDraw,
        });
        let a = run_ags(&data, &PriorConfig::default(), &config).unwrap();
        let b = run_ags(&data, &PriorConfig::default(), &config).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_ne!(a.draws[0], a.draws[1]);
    }

    #[test]
    fn single_retained_draw() {
        let data = dataset(vec![(vec![0.5], vec![4])], 1);
        let config = AgsConfig::from(ChainConfig {
            n_warmup: 0,
            n_keep: 1,
            n_chains: 2,
            seed: 1,
            init: Init::Zeros,
        });
        let out = run_ags(&data, &PriorConfig::default(), &config).unwrap();
        assert_eq!(out.draws.len(), 2);
        assert!(out.draws.iter().all(|c| c.len() == 1));
        assert!(out.wall_seconds > 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn variance_never_exceeds_prior(
                rows in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 1u64..500), 1..15),
                sigma2 in 0.01f64..10.0,
                mu in -2.0f64..2.0,
                w in -1.0f64..1.0,
            ) {
                let x: Vec<f64> = rows.iter().flat_map(|r| [r.0, r.1]).collect();
                let y: Vec<u64> = rows.iter().map(|r| r.2).collect();
                let data = dataset(vec![(x, y)], 2);
                let state = ModelState::new(1, 2, vec![w, -w], vec![mu, 0.0], vec![sigma2, 1.0]).unwrap();
                let table = PolygammaTable::new(500);
                let c = coefficient_conditional(0, 0, &state, &data, &table).unwrap();
                prop_assert!(c.var_hat > 0.0 && c.var_hat <= sigma2);
                let all_zero = rows.iter().all(|r| r.0 == 0.0);
                prop_assert_eq!(c.var_hat == sigma2, all_zero);
            }

            #[test]
            fn invariant_to_observation_order(
                rows in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 1u64..500), 2..15),
            ) {
                let make = |rows: &[(f64, f64, u64)]| {
                    let x: Vec<f64> = rows.iter().flat_map(|r| [r.0, r.1]).collect();
                    let y: Vec<u64> = rows.iter().map(|r| r.2).collect();
                    dataset(vec![(x, y)], 2)
                };
                let mut rev = rows.clone();
                rev.reverse();
                let state = ModelState::new(1, 2, vec![0.2, -0.4], vec![0.1, 0.0], vec![0.9, 1.0]).unwrap();
                let table = PolygammaTable::new(500);
                let a = coefficient_conditional(0, 1, &state, &make(&rows), &table).unwrap();
                let b = coefficient_conditional(0, 1, &state, &make(&rev), &table).unwrap();
                prop_assert!((a.mean_hat - b.mean_hat).abs() <= 1e-9 * a.mean_hat.abs().max(1.0));
                prop_assert!((a.var_hat - b.var_hat).abs() <= 1e-12 * a.var_hat);
            }
        }
    }
}
