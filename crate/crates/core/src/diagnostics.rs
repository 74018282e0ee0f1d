//! Multi-chain effective sample size, fit metrics and dataset summaries.

use crate::error::{Error, Result};
use crate::model::{linear_predictor, ChainOutput, GroupedCountDataset};

/// Draws of one scalar estimand: `m` chains of `n` draws each.
#[derive(Debug, Clone, PartialEq)]
pub struct EssInput {
    samples: Vec<Vec<f64>>,
}

impl EssInput {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        let m = samples.len();
        if m < 2 {
            return Err(Error::Config(format!("effective sample size needs at least 2 chains, got {m}")));
        }
        let n = samples[0].len();
        if n < 4 {
            return Err(Error::Config(format!("effective sample size needs at least 4 draws per chain, got {n}")));
        }
        if samples.iter().any(|c| c.len() != n) {
            return Err(Error::Config("chains have different lengths".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite draw".into()));
        }
        Ok(EssInput { samples })
    }

    pub fn num_chains(&self) -> usize {
        self.samples.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Pooled estimate of the marginal posterior variance.
    pub fn var_plus(&self) -> f64 {
        let m = self.num_chains() as f64;
        let n = self.draws_per_chain() as f64;
        let means: Vec<f64> = self.samples.iter().map(|c| mean(c)).collect();
        let grand = mean(&means);
        let within: f64 = self
            .samples
            .iter()
            .zip(&means)
            .map(|(c, &mj)| c.iter().map(|v| (v - mj).powi(2)).sum::<f64>() / (n - 1.0))
            .sum();
        let between: f64 = means.iter().map(|mj| (mj - grand).powi(2)).sum();
        (n - 1.0) / (m * n) * within + between / (m - 1.0)
    }

    /// Mean squared difference of draws `t` apart, pooled over chains.
    pub fn variogram(&self, t: usize) -> f64 {
        let m = self.num_chains() as f64;
        let n = self.draws_per_chain();
        let sum: f64 = self
            .samples
            .iter()
            .map(|c| c.windows(t + 1).map(|w| (w[t] - w[0]).powi(2)).sum::<f64>())
            .sum();
        sum / (m * (n - t) as f64)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `mn / (1 + 2 sum_{t<=T} rho_t)`, capped at `mn`.
///
/// `rho_t = 1 - V_t / (2 var+)` for lags `1..=n-2`. The sum stops at the first odd
/// `T` with `rho_{T+1} + rho_{T+2} < 0`; without such a `T` all lags are summed.
/// Constant draws have no defined variance and give [`Error::Undefined`].
pub fn effective_sample_size(input: &EssInput) -> Result<f64> {
    let m = input.num_chains();
    let n = input.draws_per_chain();
    let var_plus = input.var_plus();
    if !(var_plus > 0.0) {
        return Err(Error::Undefined("draws are constant, so the pooled variance is zero".into()));
    }
    let max_lag = n - 2;
    // rho[t] for t = 1..=max_lag; index 0 unused
    let mut rho = vec![0.0; max_lag + 1];
    for (t, r) in rho.iter_mut().enumerate().skip(1) {
        *r = 1.0 - input.variogram(t) / (2.0 * var_plus);
    }
    let mut last = max_lag;
    let mut t = 1;
    while t + 2 <= max_lag {
        if rho[t + 1] + rho[t + 2] < 0.0 {
            last = t;
            break;
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let denom = 1.0 + 2.0 * rho[1..=last].iter().sum::<f64>();
    if denom <= 0.0 {
        return Ok(total);
    }
    Ok((total / denom).min(total))
}

/// Monte Carlo standard error of the pooled mean, `sd / sqrt(ess)`.
pub fn monte_carlo_se(input: &EssInput) -> Result<f64> {
    let ess = effective_sample_size(input)?;
    let all: Vec<f64> = input.samples().iter().flatten().copied().collect();
    let mu = mean(&all);
    let var = all.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (all.len() - 1) as f64;
    Ok((var / ess).sqrt())
}

pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Config(format!("length mismatch: {} counts, {} predictions", y.len(), y_hat.len())));
    }
    if y.len() < 2 {
        return Err(Error::Config("R^2 needs at least two observations".into()));
    }
    let ybar = mean(y);
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::Undefined("R^2 is undefined for constant counts".into()));
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Config(format!("length mismatch: {} counts, {} predictions", y.len(), y_hat.len())));
    }
    if y.is_empty() {
        return Err(Error::Config("RMSE needs at least one observation".into()));
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Fitted means `exp(sum_k wbar[j,k] x[i,j,k])` in dataset order, `wbar` being the
/// posterior mean over all retained draws of all chains.
pub fn fitted_means(output: &ChainOutput, data: &GroupedCountDataset) -> Result<Vec<f64>> {
    let state = output.posterior_mean_state()?;
    let mut out = Vec::with_capacity(data.num_observations());
    for j in 0..data.num_groups() {
        for i in 0..data.group(j).len() {
            out.push(linear_predictor(&state, data, j, i)?.exp());
        }
    }
    Ok(out)
}

/// `(R^2, RMSE)` of the posterior-mean fit. An undefined R^2 comes back as NaN.
pub fn posterior_predictive_fit(output: &ChainOutput, data: &GroupedCountDataset) -> Result<(f64, f64)> {
    let y_hat = fitted_means(output, data)?;
    let y: Vec<f64> = data.counts().map(|c| c as f64).collect();
    let r2 = match r_squared(&y, &y_hat) {
        Ok(v) => v,
        Err(Error::Undefined(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok((r2, rmse(&y, &y_hat)?))
}

/// Count summaries: size, range, and the share of zeros and of counts in `1..=5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataCharacteristics {
    pub n_d: usize,
    /// `(min, max)`; `None` for no data.
    pub range: Option<(u64, u64)>,
    /// Percent of zero counts.
    pub pct_zero: f64,
    /// Percent of counts in `1..=5`.
    pub pct_one_to_five: f64,
}

pub fn characteristics(counts: impl IntoIterator<Item = u64>) -> DataCharacteristics {
    let mut n = 0usize;
    let mut zeros = 0usize;
    let mut small = 0usize;
    let mut range: Option<(u64, u64)> = None;
    for y in counts {
        n += 1;
        if y == 0 {
            zeros += 1;
        } else if y <= 5 {
            small += 1;
        }
        range = Some(match range {
            None => (y, y),
            Some((lo, hi)) => (lo.min(y), hi.max(y)),
        });
    }
    let pct = |c: usize| if n == 0 { f64::NAN } else { 100.0 * c as f64 / n as f64 };
    DataCharacteristics {
        n_d: n,
        range,
        pct_zero: pct(zeros),
        pct_one_to_five: pct(small),
    }
}

/// Convergence, speed and fit summary of one sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub sampler: String,
    pub num_groups: usize,
    pub num_covariates: usize,
    /// Per flattened parameter; NaN where undefined.
    pub ess: Vec<f64>,
    /// Mean over the parameters whose ESS is defined.
    pub mean_ess: f64,
    /// Sampling seconds per 1000 iterations, averaged over chains.
    pub t_s: f64,
    /// `mean_ess / t_s`.
    pub e_s: f64,
    pub r2: f64,
    pub rmse: f64,
    pub characteristics: DataCharacteristics,
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    /// Characteristics describe the counts the sampler saw; callers holding the
    /// unshifted counts may replace them.
    pub fn compute(output: &ChainOutput, data: &GroupedCountDataset) -> Result<Self> {
        let names = output.parameter_names();
        let mut notes = Vec::new();
        let mut ess = Vec::with_capacity(names.len());
        if output.num_chains() < 2 || output.retained_count < 4 {
            notes.push(format!(
                "ESS needs at least 2 chains of 4 draws (got {} of {}); reported as NaN",
                output.num_chains(),
                output.retained_count
            ));
            ess = vec![f64::NAN; names.len()];
        } else {
            for (p, name) in names.iter().enumerate() {
                let value = match EssInput::new(output.series(p)).and_then(|i| effective_sample_size(&i)) {
                    Ok(v) => v,
                    Err(e) => {
                        notes.push(format!("ESS of {name} undefined: {e}"));
                        f64::NAN
                    }
                };
                ess.push(value);
            }
        }
        let defined: Vec<f64> = ess.iter().copied().filter(|v| v.is_finite()).collect();
        let mean_ess = if defined.is_empty() { f64::NAN } else { mean(&defined) };
        let t_s = output.seconds_per_1000();
        let (r2, rmse) = posterior_predictive_fit(output, data)?;
        if r2.is_nan() {
            notes.push("R^2 undefined: counts are constant".into());
        }
        Ok(DiagnosticsReport {
            sampler: output.sampler.name().to_string(),
            num_groups: output.num_groups(),
            num_covariates: output.num_covariates(),
            ess,
            mean_ess,
            t_s,
            e_s: mean_ess / t_s,
            r2,
            rmse,
            characteristics: characteristics(data.counts()),
            notes,
        })
    }
}
