//! Polygamma functions at positive integers and the Gaussian approximation of
//! the log-gamma density.
//!
//! If `z ~ Gamma(y, 1)` then `v = ln z` has density
//! `p(v | y) = exp(v*y - e^v) / (y-1)!`, with mean `psi0(y)` and variance `psi1(y)`.
//! As a function of `v` this is exactly the Poisson likelihood of a count `y` with
//! log-mean `v`, which is what makes the Gaussian `N(psi0(y), psi1(y))` usable as a
//! conjugate stand-in for the likelihood.

use std::f64::consts::PI;

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

const PI2_OVER_6: f64 = PI * PI / 6.0;

/// Counts above this use the asymptotic expansions instead of the table.
pub const DEFAULT_ASYMPTOTIC_THRESHOLD: u64 = 1_000_000;

/// Digamma at a positive integer: `-gamma + sum_{t=1}^{n-1} 1/t`.
pub fn psi0(n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("psi0 needs a positive integer, got {n}")));
    }
    Ok((1..n).fold(-EULER_GAMMA, |acc, t| acc + 1.0 / t as f64))
}

/// Trigamma at a positive integer: `pi^2/6 - sum_{t=1}^{n-1} 1/t^2`.
pub fn psi1(n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("psi1 needs a positive integer, got {n}")));
    }
    // Summing the small terms first keeps the difference accurate for larger n.
    let partial: f64 = (1..n).rev().map(|t| 1.0 / (t as f64 * t as f64)).sum();
    Ok(PI2_OVER_6 - partial)
}

/// `ln y - 1/(2y)`; absolute error below `1/(12 y^2)`.
pub fn psi0_asymptotic(y: f64) -> f64 {
    y.ln() - 0.5 / y
}

/// `1/y + 1/(2 y^2)`; absolute error below `1/(6 y^3)`.
pub fn psi1_asymptotic(y: f64) -> f64 {
    1.0 / y + 0.5 / (y * y)
}

/// Gaussian matched to the first two moments of `ln z`, `z ~ Gamma(shape, scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGammaApprox {
    pub mean: f64,
    pub variance: f64,
}

impl LogGammaApprox {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, v: f64) -> f64 {
        let d = v - self.mean;
        (-d * d / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }

    pub fn cdf(&self, v: f64) -> f64 {
        0.5 * erfc(-(v - self.mean) / (2.0 * self.variance).sqrt())
    }
}

/// Gaussian approximation of the log-gamma density with shape `y` and unit scale.
pub fn log_gamma_approx(y: u64) -> Result<LogGammaApprox> {
    if y < 1 {
        return Err(Error::Domain(
            "the log-gamma approximation only applies to positive counts".into(),
        ));
    }
    Ok(LogGammaApprox {
        mean: psi0(y)?,
        variance: psi1(y)?,
    })
}

/// Exact density of `v = ln z` for `z ~ Gamma(y, 1)`, evaluated in log space.
pub fn true_loggamma_pdf(v: f64, y: u64) -> Result<f64> {
    Ok(true_loggamma_log_pdf(v, y)?.exp())
}

pub fn true_loggamma_log_pdf(v: f64, y: u64) -> Result<f64> {
    if y < 1 {
        return Err(Error::Domain(format!("log-gamma shape must be positive, got {y}")));
    }
    Ok(v * y as f64 - v.exp() - ln_gamma(y as f64))
}

/// Memoized `psi0(y)`, `psi1(y)` for `1 <= y <= max`, with the asymptotic forms above
/// `threshold`. Read-only after construction.
#[derive(Debug, Clone)]
pub struct PolygammaTable {
    psi0: Vec<f64>,
    psi1: Vec<f64>,
    threshold: u64,
}

impl PolygammaTable {
    pub fn new(max_count: u64) -> Self {
        Self::with_threshold(max_count, DEFAULT_ASYMPTOTIC_THRESHOLD)
    }

    pub fn with_threshold(max_count: u64, threshold: u64) -> Self {
        let top = max_count.min(threshold).max(1) as usize;
        let mut psi0 = vec![0.0; top + 1];
        psi0[1] = -EULER_GAMMA;
        for n in 1..top {
            psi0[n + 1] = psi0[n] + 1.0 / n as f64;
        }
        // psi1 decays like 1/n, so the upward recurrence from pi^2/6 loses digits to
        // cancellation. Run it downward from a tail value instead: psi1(n) = psi1(n+1) + 1/n^2.
        let mut psi1 = vec![0.0; top + 1];
        psi1[top] = trigamma_tail(top as f64);
        for n in (1..top).rev() {
            psi1[n] = psi1[n + 1] + 1.0 / (n as f64 * n as f64);
        }
        PolygammaTable {
            psi0,
            psi1,
            threshold,
        }
    }

    /// Largest count served from the table.
    pub fn table_max(&self) -> u64 {
        (self.psi0.len() - 1) as u64
    }

    #[inline]
    pub fn psi0(&self, y: u64) -> f64 {
        match self.psi0.get(y as usize) {
            Some(&v) if y >= 1 => v,
            _ if y > self.threshold => psi0_asymptotic(y as f64),
            _ => psi0(y).unwrap_or(f64::NAN),
        }
    }

    #[inline]
    pub fn psi1(&self, y: u64) -> f64 {
        match self.psi1.get(y as usize) {
            Some(&v) if y >= 1 => v,
            _ if y > self.threshold => psi1_asymptotic(y as f64),
            _ => psi1(y).unwrap_or(f64::NAN),
        }
    }
}

/// Trigamma at a positive integer from its asymptotic series (small n summed exactly).
fn trigamma_tail(n: f64) -> f64 {
    let mut x = n;
    let mut acc = 0.0;
    // shift into the regime where the series is accurate to ~1e-17
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + 0.5 * inv2
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)))
}

/// Evenly spaced grid over `mean ± half_width_sds * sd` of the approximation for `y`.
pub fn default_ks_grid(y: u64, points: usize, half_width_sds: f64) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Config("a KS grid needs at least two points".into()));
    }
    let approx = log_gamma_approx(y)?;
    let lo = approx.mean - half_width_sds * approx.sd();
    let hi = approx.mean + half_width_sds * approx.sd();
    let h = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + h * i as f64).collect())
}

/// Grid for [`quadrature_mean`]: the exact density's left tail only decays like
/// `exp(y v)`, so the grid reaches much further left than the KS grid.
pub fn mean_grid(y: u64) -> Result<Vec<f64>> {
    let approx = log_gamma_approx(y)?;
    let lo = approx.mean - 40.0 * approx.sd();
    let hi = approx.mean + KS_GRID_HALF_WIDTH * approx.sd();
    let points = 4 * KS_GRID_POINTS;
    let h = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + h * i as f64).collect())
}

/// Minimum grid size used by the KS computations.
pub const KS_GRID_POINTS: usize = 4097;
/// Half width of the KS grid in approximate standard deviations.
pub const KS_GRID_HALF_WIDTH: f64 = 8.0;

/// Largest absolute gap between a CDF obtained by trapezoidal integration of
/// `pdf` over `grid` and the reference `cdf`, evaluated at the grid points.
///
/// Mass left of `grid[0]` is ignored, so the grid has to start in the far tail.
pub fn ks_distance_between(
    grid: &[f64],
    pdf: impl Fn(f64) -> f64,
    cdf: impl Fn(f64) -> f64,
) -> Result<f64> {
    check_grid(grid)?;
    let mut prev_v = grid[0];
    let mut prev_p = pdf(prev_v);
    let mut integral = 0.0;
    let mut worst = cdf(prev_v).abs();
    for &v in &grid[1..] {
        let p = pdf(v);
        integral += 0.5 * (p + prev_p) * (v - prev_v);
        worst = worst.max((integral - cdf(v)).abs());
        prev_v = v;
        prev_p = p;
    }
    Ok(worst.min(1.0))
}

/// KS distance between the exact log-gamma law for count `y` and its Gaussian approximation.
pub fn ks_distance(y: u64, grid: &[f64]) -> Result<f64> {
    let approx = log_gamma_approx(y)?;
    let ln_norm = ln_gamma(y as f64);
    let yf = y as f64;
    ks_distance_between(
        grid,
        |v| (v * yf - v.exp() - ln_norm).exp(),
        |v| approx.cdf(v),
    )
}

/// Mean of the exact log-gamma density by trapezoidal quadrature over `grid`.
pub fn quadrature_mean(y: u64, grid: &[f64]) -> Result<f64> {
    check_grid(grid)?;
    let ln_norm = ln_gamma(y as f64);
    let yf = y as f64;
    let pdf = |v: f64| (v * yf - v.exp() - ln_norm).exp();
    let mut mass = 0.0;
    let mut first = 0.0;
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (pa, pb) = (pdf(a), pdf(b));
        mass += 0.5 * (pa + pb) * (b - a);
        first += 0.5 * (a * pa + b * pb) * (b - a);
    }
    Ok(first / mass)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("KS grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("KS grid must be strictly increasing".into()));
    }
    Ok(())
}

/// One row of the approximation-quality curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsPoint {
    pub y: u64,
    pub ks_distance: f64,
    pub abs_mean_error: f64,
}

/// Counts reported in the approximation-quality curve.
pub const KS_CURVE_COUNTS: [u64; 6] = [1, 2, 3, 5, 10, 20];

/// KS distance on the default grid and absolute error of the approximate mean, per count.
pub fn ks_curve(counts: &[u64]) -> Result<Vec<KsPoint>> {
    counts
        .iter()
        .map(|&y| {
            let grid = default_ks_grid(y, KS_GRID_POINTS, KS_GRID_HALF_WIDTH)?;
            Ok(KsPoint {
                y,
                ks_distance: ks_distance(y, &grid)?,
                abs_mean_error: (quadrature_mean(y, &mean_grid(y)?)? - psi0(y)?).abs(),
            })
        })
        .collect()
}
