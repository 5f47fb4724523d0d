//! Linear-in-time parameter trends shared by both regression models.

use serde::{Deserialize, Serialize};

/// Observation window: base year and nominal number of years P.
///
/// A trended parameter is `eta0 + (t - base_year) / (P - 1) * eta1`, so `eta0`
/// is the value in the base year and `eta1` the total change by the last
/// year of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub base_year: i32,
    pub span: usize,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            base_year: 2015,
            span: 86,
        }
    }
}

impl Window {
    /// # Panics
    /// If `span < 2`.
    pub fn new(base_year: i32, span: usize) -> Self {
        assert!(span >= 2, "window span must be at least 2 years");
        Window { base_year, span }
    }

    pub fn end_year(&self) -> i32 {
        self.base_year + self.span as i32 - 1
    }

    /// Fraction of the window elapsed at year `t`; may fall outside [0, 1]
    /// when extrapolating.
    pub fn fraction(&self, t: i32) -> f64 {
        f64::from(t - self.base_year) / (self.span - 1) as f64
    }

    /// The two years at which support constraints are checked.
    pub fn endpoints(&self) -> [i32; 2] {
        [self.base_year, self.end_year()]
    }
}

/// Pair of years over which changes are reported (2025 to 2125 by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangePeriod {
    pub from: i32,
    pub to: i32,
}

impl Default for ChangePeriod {
    fn default() -> Self {
        ChangePeriod { from: 2025, to: 2125 }
    }
}

/// A posterior draw whose parameters are invalid when extrapolated to `year`.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("parameter {parameter} = {value} is invalid in extrapolated year {year}")]
pub struct InvalidExtrapolation {
    pub year: i32,
    pub parameter: &'static str,
    pub value: f64,
}

/// Value in year `t` of a parameter with base-year value `eta0` and
/// window-total change `eta1`.
pub fn param_at(eta0: f64, eta1: f64, t: i32, window: Window) -> f64 {
    eta0 + window.fraction(t) * eta1
}
