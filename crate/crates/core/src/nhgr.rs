//! Non-homogeneous Gaussian regression (NHGR): annual means modelled as
//! `N(α_t, β_t²)` with linearly trending mean and standard deviation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_model::AnnualSeries;
use crate::error::{Error, Result};
use crate::trend::{param_at, ChangePeriod, InvalidExtrapolation, Window};

pub const PARAM_NAMES: [&str; 4] = ["alpha0", "alpha1", "beta0", "beta1"];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NhgrParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl NhgrParams {
    pub fn stationary(alpha: f64, beta: f64) -> Self {
        NhgrParams {
            alpha0: alpha,
            alpha1: 0.0,
            beta0: beta,
            beta1: 0.0,
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        NhgrParams {
            alpha0: v[0],
            alpha1: v[1],
            beta0: v[2],
            beta1: v[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.alpha0, self.alpha1, self.beta0, self.beta1]
    }

    pub fn at(&self, t: i32, window: Window) -> (f64, f64) {
        (
            param_at(self.alpha0, self.alpha1, t, window),
            param_at(self.beta0, self.beta1, t, window),
        )
    }

    /// Prior support at both window endpoints: β > 0, and α > 0 unless
    /// `positive_mean` is false.
    pub fn in_support(&self, window: Window, positive_mean: bool) -> bool {
        window.endpoints().iter().all(|&t| {
            let (alpha, beta) = self.at(t, window);
            alpha.is_finite() && beta > 0.0 && (!positive_mean || alpha > 0.0)
        })
    }
}

#[inline]
fn log_density_unchecked(x: f64, alpha: f64, beta: f64) -> f64 {
    let r = (x - alpha) / beta;
    -HALF_LN_2PI - beta.ln() - 0.5 * r * r
}

/// Gaussian log density `-log(2πβ²)/2 - (x-α)²/(2β²)`.
pub fn nhgr_log_density(x: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive and finite, got {beta}")));
    }
    Ok(log_density_unchecked(x, alpha, beta))
}

/// Sum of year-by-year log densities; `-inf` if any β_t <= 0, or any α_t <= 0
/// when `positive_mean` is set.
pub fn log_likelihood_values(values: &[f64], window: Window, theta: &NhgrParams, positive_mean: bool) -> f64 {
    let mut total = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let (alpha, beta) = theta.at(window.base_year + i as i32, window);
        if !(beta > 0.0) || (positive_mean && !(alpha > 0.0)) {
            return f64::NEG_INFINITY;
        }
        total += log_density_unchecked(x, alpha, beta);
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Log-likelihood of an annual series under the positive-mean prior.
pub fn nhgr_log_likelihood(s: &AnnualSeries, theta: &NhgrParams) -> f64 {
    log_likelihood_values(&s.values, Window::new(s.base_year, s.span), theta, true)
}

fn valid_at(theta: &NhgrParams, t: i32, window: Window) -> Result<(f64, f64), InvalidExtrapolation> {
    let (alpha, beta) = theta.at(t, window);
    if beta > 0.0 {
        Ok((alpha, beta))
    } else {
        Err(InvalidExtrapolation {
            year: t,
            parameter: "beta",
            value: beta,
        })
    }
}

/// One predictive draw `M_t ~ N(α_t, β_t²)`.
pub fn predict_mean_draw<R: Rng + ?Sized>(
    theta: &NhgrParams,
    t: i32,
    window: Window,
    rng: &mut R,
) -> Result<f64, InvalidExtrapolation> {
    let (alpha, beta) = valid_at(theta, t, window)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(alpha + beta * z)
}

/// Deterministic mean change `α_to - α_from`.
pub fn delta_m_parametric(theta: &NhgrParams, window: Window, period: ChangePeriod) -> f64 {
    // years times slope before dividing keeps round inputs exact
    f64::from(period.to - period.from) * theta.alpha1 / (window.span - 1) as f64
}

/// Predictive change `M_to - M_from` with independent draws for each year.
pub fn delta_m_predictive<R: Rng + ?Sized>(
    theta: &NhgrParams,
    window: Window,
    period: ChangePeriod,
    rng: &mut R,
) -> Result<f64, InvalidExtrapolation> {
    // validate both years before consuming randomness
    valid_at(theta, period.from, window)?;
    valid_at(theta, period.to, window)?;
    let m_from = predict_mean_draw(theta, period.from, window, rng)?;
    let m_to = predict_mean_draw(theta, period.to, window, rng)?;
    Ok(m_to - m_from)
}
