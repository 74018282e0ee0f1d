//! Synthetic grouped count data.
//!
//! Both families draw per-observation covariates from fixed uniform ranges, a
//! group-level scale `x_group[j]` and coefficients `w[j,k]`, then set
//!
//! ```text
//! y[i,j] = minmax_j(exp(sum_k w[j,k] x[i,j,k])) * x_group[j]
//! ```
//!
//! rounded to the nearest integer (large family) or floored (small family). The
//! min-max rescaling runs over the observations of each group.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::model::{Group, ModelState, RawDataset};

/// Uniform ranges of covariates `x1..x6`.
pub const COVARIATE_RANGES: [(f64, f64); 6] = [
    (0.1, 2.0),
    (0.1, 1.0),
    (0.1, 0.5),
    (1.0, 10.0),
    (0.5, 5.0),
    (10.0, 100.0),
];

/// Large family: group scale `U(1e4, 1e6)`.
pub const LARGE_GROUP_RANGE: (f64, f64) = (1e4, 1e6);
/// Large family coefficients: `N(mean, variance)`.
pub const LARGE_COEFFICIENT: (f64, f64) = (0.001, 0.001);
/// Small family coefficients: `N(mean, variance)`.
pub const SMALL_COEFFICIENT: (f64, f64) = (0.1, 0.1);
/// Rate of the truncated exponential group scale in the small family.
pub const SMALL_GROUP_RATE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Positive large counts, rounded to the nearest integer.
    Large,
    /// Small counts, floored (so zeros occur).
    Small,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "large" => Ok(Family::Large),
            "small" => Ok(Family::Small),
            other => Err(Error::Config(format!("unknown family '{other}' (expected large or small)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub family: Family,
    pub groups: usize,
    pub n_per_group: usize,
    pub covariates: usize,
    /// Upper bound of the group scale; small family only.
    pub y_max: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn large(groups: usize, n_per_group: usize, covariates: usize, seed: u64) -> Self {
        SynthSpec {
            family: Family::Large,
            groups,
            n_per_group,
            covariates,
            y_max: f64::NAN,
            seed,
        }
    }

    pub fn small(groups: usize, n_per_group: usize, covariates: usize, y_max: f64, seed: u64) -> Self {
        SynthSpec {
            family: Family::Small,
            groups,
            n_per_group,
            covariates,
            y_max,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.n_per_group == 0 {
            return Err(Error::Config("need at least one group and one observation per group".into()));
        }
        let max_k = match self.family {
            Family::Large => 6,
            Family::Small => 5,
        };
        if self.covariates == 0 || self.covariates > max_k {
            return Err(Error::Config(format!(
                "{:?} family supports 1..={max_k} covariates, got {}",
                self.family, self.covariates
            )));
        }
        if self.family == Family::Small && !(self.y_max > 1.0 && self.y_max.is_finite()) {
            return Err(Error::Config(format!("y_max must exceed 1, got {}", self.y_max)));
        }
        Ok(())
    }
}

/// A generated dataset together with the coefficients that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub data: RawDataset,
    /// Generating coefficients, `J x K` row-major.
    pub true_w: Vec<f64>,
    pub group_scale: Vec<f64>,
}

impl SyntheticDataset {
    /// Generating coefficients as a state (hyperparameters set to the generator's prior).
    pub fn true_state(&self) -> ModelState {
        let j = self.data.groups().len();
        let k = self.data.num_covariates();
        ModelState::new(j, k, self.true_w.clone(), vec![0.0; k], vec![1.0; k])
            .expect("generator produces finite coefficients")
    }
}

/// Truncated exponential on `[lower, upper]` with density proportional to `exp(rate * x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncExpParams {
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncExpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) || !(self.lower < self.upper) {
            return Err(Error::Config(format!("invalid truncated exponential {self:?}")));
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        (self.rate * (x - self.lower)).exp_m1() / (self.rate * (self.upper - self.lower)).exp_m1()
    }
}

/// Inverse-CDF draw from [`TruncExpParams`].
pub fn sample_trunc_exp<R: Rng + ?Sized>(params: &TruncExpParams, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let span = params.upper - params.lower;
    let x = params.lower + (u * (params.rate * span).exp_m1()).ln_1p() / params.rate;
    x.clamp(params.lower, params.upper)
}

/// `(v - min) / (max - min)`; a constant input maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Config("cannot normalize an empty list".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - lo) / span).collect())
}

pub fn generate(spec: &SynthSpec) -> Result<SyntheticDataset> {
    match spec.family {
        Family::Large => generate_large(spec),
        Family::Small => generate_small(spec),
    }
}

/// Large-count family. Counts that round to zero are raised to one.
pub fn generate_large(spec: &SynthSpec) -> Result<SyntheticDataset> {
    if spec.family != Family::Large {
        return Err(Error::Config("generate_large needs a large-family spec".into()));
    }
    spec.validate()?;
    let scale = Uniform::new(LARGE_GROUP_RANGE.0, LARGE_GROUP_RANGE.1)
        .map_err(|e| Error::Config(e.to_string()))?;
    build(spec, LARGE_COEFFICIENT, |rng| scale.sample(rng), |v| v.round().max(1.0))
}

/// Small-count family with a truncated-exponential group scale. Zeros are kept.
pub fn generate_small(spec: &SynthSpec) -> Result<SyntheticDataset> {
    if spec.family != Family::Small {
        return Err(Error::Config("generate_small needs a small-family spec".into()));
    }
    spec.validate()?;
    let texp = TruncExpParams {
        rate: SMALL_GROUP_RATE,
        lower: 1.0,
        upper: spec.y_max,
    };
    build(spec, SMALL_COEFFICIENT, |rng| sample_trunc_exp(&texp, rng), f64::floor)
}

fn build(
    spec: &SynthSpec,
    coefficient: (f64, f64),
    mut group_scale: impl FnMut(&mut ChaCha8Rng) -> f64,
    to_count: impl Fn(f64) -> f64,
) -> Result<SyntheticDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.covariates;
    let n = spec.n_per_group;
    let normal = Normal::new(coefficient.0, coefficient.1.sqrt()).map_err(|e| Error::Config(e.to_string()))?;
    let uniforms = COVARIATE_RANGES[..k]
        .iter()
        .map(|&(lo, hi)| Uniform::new(lo, hi).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let mut groups = Vec::with_capacity(spec.groups);
    let mut true_w = Vec::with_capacity(spec.groups * k);
    let mut scales = Vec::with_capacity(spec.groups);
    for j in 0..spec.groups {
        let scale = group_scale(&mut rng);
        let w: Vec<f64> = (0..k).map(|_| normal.sample(&mut rng)).collect();
        let mut x = Vec::with_capacity(n * k);
        for _ in 0..n {
            x.extend(uniforms.iter().map(|u| u.sample(&mut rng)));
        }
        let means: Vec<f64> = x.chunks(k).map(|row| crate::model::dot(&w, row).exp()).collect();
        let y = min_max_normalize(&means)?
            .into_iter()
            .map(|v| to_count(v * scale) as u64)
            .collect();
        groups.push(Group::new((j + 1).to_string(), x, y, Some(scale)));
        true_w.extend(w);
        scales.push(scale);
    }
    Ok(SyntheticDataset {
        data: RawDataset::new(k, groups)?,
        true_w,
        group_scale: scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::characteristics;

    #[test]
    fn min_max_examples() {
        assert_eq!(min_max_normalize(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(min_max_normalize(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(min_max_normalize(&[-1.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(min_max_normalize(&[]).is_err());
    }

    #[test]
    fn large_family_shape() {
        let s = generate_large(&SynthSpec::large(10, 20, 2, 1)).unwrap();
        assert_eq!(s.data.num_observations(), 200);
        assert_eq!(s.data.groups().len(), 10);
        assert_eq!(s.data.num_covariates(), 2);
        assert_eq!(s.true_w.len(), 20);
        for (g, &scale) in s.data.groups().iter().zip(&s.group_scale) {
            assert!(g.counts().iter().all(|&y| y >= 1 && (y as f64) <= scale.round()));
            assert!(g.counts().iter().all(|&y| y <= 1_000_000));
        }
        assert!(s.data.clone().into_dataset(None).is_ok());
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::small(8, 30, 5, 10.0, 4);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 5, ..spec };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn small_counts_bounded_by_y_max() {
        let s = generate_small(&SynthSpec::small(40, 40, 5, 5.0, 3)).unwrap();
        assert!(s.data.counts().all(|y| y <= 5));
        assert_eq!(s.data.num_observations(), 1600);
    }

    #[test]
    fn small_family_produces_zeros() {
        for seed in 0..5 {
            for y_max in [5.0, 10.0] {
                let s = generate_small(&SynthSpec::small(8, 40, 5, y_max, seed)).unwrap();
                let c = characteristics(s.data.counts());
                assert!(c.pct_zero > 0.0, "seed {seed}, y_max {y_max}");
            }
        }
    }

    #[test]
    fn generator_bounds() {
        assert!(SynthSpec::large(1, 1, 7, 0).validate().is_err());
        assert!(SynthSpec::small(1, 1, 6, 5.0, 0).validate().is_err());
        assert!(SynthSpec::small(1, 1, 5, 1.0, 0).validate().is_err());
        assert!(SynthSpec::large(1, 1, 6, 0).validate().is_ok());
    }

    #[test]
    fn trunc_exp_degenerate_interval() {
        let p = TruncExpParams {
            rate: 0.7,
            lower: 1.0,
            upper: 1.0 + 1e-12,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert!((sample_trunc_exp(&p, &mut rng) - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn trunc_exp_matches_analytic_cdf() {
        let p = TruncExpParams {
            rate: 0.7,
            lower: 1.0,
            upper: 10.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n).map(|_| sample_trunc_exp(&p, &mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        // analytic CDF written out independently of TruncExpParams::cdf
        let norm = (0.7f64 * 10.0).exp() - (0.7f64 * 1.0).exp();
        let cdf = |x: f64| ((0.7 * x).exp() - 0.7f64.exp()) / norm;
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "{ks}");
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!(mean > 5.5, "{mean}");
        assert!(draws.iter().all(|&x| (1.0..=10.0).contains(&x)));
    }
}
