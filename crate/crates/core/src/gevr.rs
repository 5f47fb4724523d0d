//! Non-stationary generalised extreme value regression (GEVR).
//!
//! Location, scale and shape each trend linearly over the observation window
//! (see [`crate::trend`]). The log density is the standard complete form
//!
//! ```text
//! log f(x) = -log σ - (1 + 1/ξ) log z - z^(-1/ξ),   z = 1 + ξ (x - μ) / σ > 0
//! log f(x) = -log σ - y - exp(-y),                  y = (x - μ) / σ,  ξ = 0
//! ```
//!
//! and the T-year return value is the `p = 1 - 1/T` quantile.

use serde::{Deserialize, Serialize};

use crate::data_model::AnnualSeries;
use crate::error::{Error, Result};
use crate::trend::{param_at, ChangePeriod, InvalidExtrapolation, Window};

/// Below this `|ξ|` the Gumbel (ξ = 0) branch is used.
pub const GUMBEL_TOLERANCE: f64 = 1e-8;

/// Prior support of the shape parameter, open interval.
pub const XI_LOWER: f64 = -1.0;
pub const XI_UPPER: f64 = 0.2;

pub const PARAM_NAMES: [&str; 6] = ["mu0", "mu1", "sigma0", "sigma1", "xi0", "xi1"];

/// Base-year values and window-total changes of (μ, σ, ξ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevrParams {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub xi0: f64,
    pub xi1: f64,
}

impl GevrParams {
    pub fn stationary(mu: f64, sigma: f64, xi: f64) -> Self {
        GevrParams {
            mu0: mu,
            mu1: 0.0,
            sigma0: sigma,
            sigma1: 0.0,
            xi0: xi,
            xi1: 0.0,
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        GevrParams {
            mu0: v[0],
            mu1: v[1],
            sigma0: v[2],
            sigma1: v[3],
            xi0: v[4],
            xi1: v[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.mu0, self.mu1, self.sigma0, self.sigma1, self.xi0, self.xi1]
    }

    /// `(μ_t, σ_t, ξ_t)` in year `t`.
    pub fn at(&self, t: i32, window: Window) -> (f64, f64, f64) {
        (
            param_at(self.mu0, self.mu1, t, window),
            param_at(self.sigma0, self.sigma1, t, window),
            param_at(self.xi0, self.xi1, t, window),
        )
    }

    /// Prior support: σ > 0 and ξ in (-1, 0.2) at both window endpoints,
    /// hence everywhere inside the window.
    pub fn in_support(&self, window: Window) -> bool {
        window.endpoints().iter().all(|&t| {
            let (mu, sigma, xi) = self.at(t, window);
            mu.is_finite() && sigma > 0.0 && xi > XI_LOWER && xi < XI_UPPER
        })
    }
}

/// Return period T with exceedance probability 1/T per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSpec {
    pub period: f64,
}

impl Default for ReturnSpec {
    fn default() -> Self {
        ReturnSpec { period: 100.0 }
    }
}

impl ReturnSpec {
    pub fn new(period: f64) -> Result<Self> {
        if !(period >= 2.0) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!("return period must be >= 2, got {period}")));
        }
        Ok(ReturnSpec { period })
    }

    /// Non-exceedance probability `1 - 1/T`.
    pub fn p(&self) -> f64 {
        1.0 - 1.0 / self.period
    }
}

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("scale must be positive and finite, got {sigma}")))
    }
}

/// Log density without the scale check; `-inf` outside the support.
#[inline]
pub(crate) fn log_density_unchecked(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let y = (x - mu) / sigma;
    if xi.abs() < GUMBEL_TOLERANCE {
        return -sigma.ln() - y - (-y).exp();
    }
    let xy = xi * y;
    if xy <= -1.0 {
        return f64::NEG_INFINITY;
    }
    let log_z = xy.ln_1p();
    -sigma.ln() - (1.0 + 1.0 / xi) * log_z - (-log_z / xi).exp()
}

/// GEV log density. Points outside the support give `-inf`.
pub fn gev_log_density(x: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    check_scale(sigma)?;
    Ok(log_density_unchecked(x, mu, sigma, xi))
}

/// GEV distribution function.
pub fn gev_cdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let y = (x - mu) / sigma;
    if xi.abs() < GUMBEL_TOLERANCE {
        return (-(-y).exp()).exp();
    }
    let xy = xi * y;
    if xy <= -1.0 {
        // below the lower endpoint (ξ > 0) or above the upper endpoint (ξ < 0)
        return if xi > 0.0 { 0.0 } else { 1.0 };
    }
    (-(-xy.ln_1p() / xi).exp()).exp()
}

/// Inverse of [`gev_cdf`] for `u` in (0, 1).
pub fn gev_quantile(u: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let e = -u.ln();
    if xi.abs() < GUMBEL_TOLERANCE {
        mu - sigma * e.ln()
    } else {
        mu + sigma / xi * (-xi * e.ln()).exp_m1()
    }
}

/// Sum of year-by-year log densities; `-inf` if any year has σ_t <= 0 or an
/// observation outside its support.
pub fn log_likelihood_values(values: &[f64], window: Window, theta: &GevrParams) -> f64 {
    let mut total = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let (mu, sigma, xi) = theta.at(window.base_year + i as i32, window);
        if !(sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        total += log_density_unchecked(x, mu, sigma, xi);
        if total == f64::NEG_INFINITY {
            return total;
        }
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Log-likelihood of an annual series, with the trend window taken from the
/// series' base year and span.
pub fn gevr_log_likelihood(s: &AnnualSeries, theta: &GevrParams) -> f64 {
    log_likelihood_values(&s.values, Window::new(s.base_year, s.span), theta)
}

/// T-year return value of a GEV(μ, σ, ξ).
pub fn return_value(mu: f64, sigma: f64, xi: f64, spec: ReturnSpec) -> Result<f64> {
    check_scale(sigma)?;
    Ok(gev_quantile(spec.p(), mu, sigma, xi))
}

/// Return value in year `t`, rejecting draws whose extrapolated scale is
/// non-positive or shape is at or below -1.
pub fn return_value_at_year(
    theta: &GevrParams,
    t: i32,
    window: Window,
    spec: ReturnSpec,
) -> Result<f64, InvalidExtrapolation> {
    let (mu, sigma, xi) = theta.at(t, window);
    if !(sigma > 0.0) {
        return Err(InvalidExtrapolation {
            year: t,
            parameter: "sigma",
            value: sigma,
        });
    }
    if !(xi > XI_LOWER) {
        return Err(InvalidExtrapolation {
            year: t,
            parameter: "xi",
            value: xi,
        });
    }
    Ok(gev_quantile(spec.p(), mu, sigma, xi))
}

/// Change in return value between the two years of `period`.
pub fn delta_q(
    theta: &GevrParams,
    window: Window,
    period: ChangePeriod,
    spec: ReturnSpec,
) -> Result<f64, InvalidExtrapolation> {
    let q_from = return_value_at_year(theta, period.from, window, spec)?;
    let q_to = return_value_at_year(theta, period.to, window, spec)?;
    Ok(q_to - q_from)
}
