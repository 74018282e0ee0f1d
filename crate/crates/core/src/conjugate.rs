//! Closed-form conditionals of the hyperparameters `mu[k]` and `sigma2[k]`.
//!
//! The inverse-gamma law is parameterized by shape `a` and scale `b` with density
//! `p(s) = b^a / Gamma(a) * s^(-a-1) * exp(-b/s)`, so its mean is `b / (a - 1)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::PriorConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaParams {
    pub shape: f64,
    pub scale: f64,
}

/// Gaussian conditional of `mu[k]` given the `J` coefficients of covariate `k`.
pub fn mu_conditional(w_column: &[f64], sigma2_k: f64, prior: &PriorConfig) -> Result<GaussianParams> {
    if w_column.is_empty() {
        return Err(Error::Config("mu conditional needs at least one group".into()));
    }
    if !(sigma2_k > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2_k}")));
    }
    Ok(mu_conditional_from_sum(w_column.iter().sum(), w_column.len(), sigma2_k, prior))
}

#[inline]
pub(crate) fn mu_conditional_from_sum(
    w_sum: f64,
    groups: usize,
    sigma2_k: f64,
    prior: &PriorConfig,
) -> GaussianParams {
    let precision = 1.0 / prior.tau2 + groups as f64 / sigma2_k;
    GaussianParams {
        mean: (prior.m / prior.tau2 + w_sum / sigma2_k) / precision,
        variance: 1.0 / precision,
    }
}

/// Inverse-gamma conditional of `sigma2[k]`: shape `(a + J)/2`,
/// scale `(b + sum_j (w[j,k] - mu[k])^2)/2`.
pub fn sigma2_conditional(w_column: &[f64], mu_k: f64, prior: &PriorConfig) -> Result<InvGammaParams> {
    if w_column.is_empty() {
        return Err(Error::Config("sigma2 conditional needs at least one group".into()));
    }
    let sse: f64 = w_column.iter().map(|w| (w - mu_k) * (w - mu_k)).sum();
    Ok(InvGammaParams {
        shape: (prior.a + w_column.len() as f64) / 2.0,
        scale: (prior.b + sse) / 2.0,
    })
}

pub fn draw_gaussian<R: Rng + ?Sized>(params: GaussianParams, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    params.mean + params.variance.sqrt() * z
}

/// `1 / Gamma(shape, scale = 1/scale)`.
pub fn draw_inverse_gamma<R: Rng + ?Sized>(params: InvGammaParams, rng: &mut R) -> Result<f64> {
    if !(params.shape > 0.0 && params.scale > 0.0) {
        return Err(Error::Domain(format!(
            "inverse-gamma needs positive shape and scale, got {params:?}"
        )));
    }
    let gamma = Gamma::new(params.shape, 1.0 / params.scale)
        .map_err(|e| Error::Domain(format!("inverse-gamma {params:?}: {e}")))?;
    let g: f64 = gamma.sample(rng);
    Ok(1.0 / g)
}
