//! Adaptive Metropolis–Hastings sampler for the GEVR and NHGR posteriors.
//!
//! Priors are uniform on each model's support, so the acceptance ratio is a
//! likelihood ratio and candidates outside the support are always rejected.
//! Proposals run in two phases:
//!
//! * iterations `1..=n_S`: random walk `N(θ, s²I)` with `s = fixed_step_sd`;
//! * afterwards, the mixture `(1-β) N(θ, c²Σ_k) + β N(θ, s²/d · I)`, where
//!   `Σ_k` is the empirical covariance of every state so far and
//!   `c² = 2.38²/d`.
//!
//! With [`ProposalScaling::Literal`] the mixture uses `2.38²Σ_k` and
//! `0.1²/4 · I` instead, independent of dimension.
//!
//! Rejected iterations repeat the current state, so the retained chain
//! always has exactly `n_I` rows.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_model::{csv_error, AnnualSeries};
use crate::error::{Error, Result};
use crate::gevr::{self, GevrParams, XI_LOWER, XI_UPPER};
use crate::nhgr::{self, NhgrParams};
use crate::rng::{stream_rng, StreamRng};
use crate::stats;
use crate::trend::{InvalidExtrapolation, Window};

/// Jitter added to the diagonal of the empirical covariance before use.
pub const COVARIANCE_JITTER: f64 = 1e-10;

const OPTIMAL_SCALE: f64 = 2.38;

/// Which regression model a chain samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gevr,
    Nhgr,
}

impl ModelKind {
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Gevr => &gevr::PARAM_NAMES,
            ModelKind::Nhgr => &nhgr::PARAM_NAMES,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gevr" => Ok(ModelKind::Gevr),
            "nhgr" => Ok(ModelKind::Nhgr),
            _ => Err(Error::parse("model", s, "expected gevr or nhgr")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalScaling {
    /// `2.38²/d · Σ` and `0.1²/d · I`.
    #[default]
    DimensionScaled,
    /// `2.38² · Σ` and `0.1²/4 · I` regardless of dimension.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Iterations using the fixed random-walk proposal (n_S).
    pub adapt_start: usize,
    /// Burn-in iterations, including the fixed phase (n_B).
    pub burn_in: usize,
    /// Retained draws (n_I).
    pub retained: usize,
    /// Weight of the small fixed-step component in the adaptive mixture.
    pub mixture_weight: f64,
    pub fixed_step_sd: f64,
    pub seed: u64,
    /// Random stream within `seed`; see [`crate::rng`].
    pub stream: u64,
    pub scaling: ProposalScaling,
    pub max_init_attempts: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            adapt_start: 2000,
            burn_in: 5000,
            retained: 10_000,
            mixture_weight: 0.05,
            fixed_step_sd: 0.1,
            seed: 0,
            stream: 0,
            scaling: ProposalScaling::DimensionScaled,
            max_init_attempts: 1000,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.adapt_start == 0 || self.adapt_start >= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "need 0 < adapt-start ({}) < burn-in ({})",
                self.adapt_start, self.burn_in
            )));
        }
        if self.retained == 0 {
            return Err(Error::InvalidArgument("need at least one retained draw".into()));
        }
        if !(self.mixture_weight > 0.0 && self.mixture_weight < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mixture weight must lie in (0, 1), got {}",
                self.mixture_weight
            )));
        }
        if !(self.fixed_step_sd > 0.0) {
            return Err(Error::InvalidArgument("fixed step sd must be positive".into()));
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.burn_in + self.retained
    }

    /// Scale factor applied to the empirical covariance.
    pub fn adaptive_factor(&self, dim: usize) -> f64 {
        match self.scaling {
            ProposalScaling::DimensionScaled => OPTIMAL_SCALE * OPTIMAL_SCALE / dim as f64,
            ProposalScaling::Literal => OPTIMAL_SCALE * OPTIMAL_SCALE,
        }
    }

    /// Per-component variance of the small-step mixture component.
    pub fn small_step_variance(&self, dim: usize) -> f64 {
        let s2 = self.fixed_step_sd * self.fixed_step_sd;
        match self.scaling {
            ProposalScaling::DimensionScaled => s2 / dim as f64,
            ProposalScaling::Literal => s2 / 4.0,
        }
    }
}

/// A posterior known up to a constant, restricted to its prior support.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;

    fn param_names(&self) -> Vec<String>;

    /// Log-likelihood at `theta`, or `-inf` outside the prior support.
    fn log_posterior(&self, theta: &[f64]) -> f64;

    /// A random starting candidate; may be rejected by the caller if its
    /// log posterior is not finite.
    fn initial_candidate(&self, rng: &mut StreamRng) -> Vec<f64>;

    /// Extra context for initialization failures.
    fn describe(&self) -> String {
        String::new()
    }
}

fn moments(values: &[f64]) -> (f64, f64) {
    let m = stats::mean(values);
    let n = values.len();
    let var = if n > 1 {
        values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (m, var.sqrt())
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// GEVR posterior with uniform priors: σ > 0 and ξ in (-1, 0.2) at the
/// window endpoints, μ unbounded.
#[derive(Debug, Clone)]
pub struct GevrTarget {
    values: Vec<f64>,
    window: Window,
}

impl GevrTarget {
    pub fn new(values: Vec<f64>, window: Window) -> Self {
        GevrTarget { values, window }
    }

    pub fn from_series(s: &AnnualSeries) -> Self {
        GevrTarget::new(s.values.clone(), Window::new(s.base_year, s.span))
    }
}

impl LogTarget for GevrTarget {
    fn dim(&self) -> usize {
        6
    }

    fn param_names(&self) -> Vec<String> {
        gevr::PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn log_posterior(&self, theta: &[f64]) -> f64 {
        let p = GevrParams::from_slice(theta);
        if !p.in_support(self.window) {
            return f64::NEG_INFINITY;
        }
        gevr::log_likelihood_values(&self.values, self.window, &p)
    }

    fn initial_candidate(&self, rng: &mut StreamRng) -> Vec<f64> {
        // Gumbel moment estimates, jittered on the data scale
        let (m, sd) = moments(&self.values);
        let sigma = sd * 6f64.sqrt() / std::f64::consts::PI;
        let mu = m - 0.577_215_664_901_532_9 * sigma;
        let xi0 = rng.random_range(XI_LOWER..XI_UPPER);
        vec![
            mu + 0.1 * sigma * normal(rng),
            0.1 * sigma * normal(rng),
            sigma * (0.1 * normal(rng)).exp(),
            0.05 * sigma * normal(rng),
            xi0,
            0.0,
        ]
    }

    fn describe(&self) -> String {
        let (m, sd) = moments(&self.values);
        format!("{} values, mean {m}, sd {sd}", self.values.len())
    }
}

/// NHGR posterior with uniform priors: β > 0 (and α > 0 unless relaxed) at
/// the window endpoints.
#[derive(Debug, Clone)]
pub struct NhgrTarget {
    values: Vec<f64>,
    window: Window,
    positive_mean: bool,
}

impl NhgrTarget {
    pub fn new(values: Vec<f64>, window: Window, positive_mean: bool) -> Self {
        NhgrTarget {
            values,
            window,
            positive_mean,
        }
    }

    pub fn from_series(s: &AnnualSeries) -> Self {
        NhgrTarget::new(s.values.clone(), Window::new(s.base_year, s.span), true)
    }
}

impl LogTarget for NhgrTarget {
    fn dim(&self) -> usize {
        4
    }

    fn param_names(&self) -> Vec<String> {
        nhgr::PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn log_posterior(&self, theta: &[f64]) -> f64 {
        let p = NhgrParams::from_slice(theta);
        if !p.in_support(self.window, self.positive_mean) {
            return f64::NEG_INFINITY;
        }
        nhgr::log_likelihood_values(&self.values, self.window, &p, self.positive_mean)
    }

    fn initial_candidate(&self, rng: &mut StreamRng) -> Vec<f64> {
        let (m, sd) = moments(&self.values);
        vec![
            m + 0.1 * sd * normal(rng),
            0.1 * sd * normal(rng),
            sd * (0.1 * normal(rng)).exp(),
            0.0,
        ]
    }

    fn describe(&self) -> String {
        let (m, sd) = moments(&self.values);
        format!("{} values, mean {m}, sd {sd}", self.values.len())
    }
}

/// Draws starting candidates until one has finite log posterior.
pub fn init_state<T: LogTarget + ?Sized>(target: &T, max_attempts: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
    for _ in 0..max_attempts {
        let candidate = target.initial_candidate(rng);
        if target.log_posterior(&candidate).is_finite() {
            return Ok(candidate);
        }
    }
    Err(Error::Initialization {
        attempts: max_attempts,
        diagnostics: target.describe(),
    })
}

/// Streaming mean and covariance (Welford update).
#[derive(Debug, Clone)]
pub struct RunningCovariance {
    count: usize,
    mean: DVector<f64>,
    comoment: DMatrix<f64>,
}

impl RunningCovariance {
    pub fn new(dim: usize) -> Self {
        RunningCovariance {
            count: 0,
            mean: DVector::zeros(dim),
            comoment: DMatrix::zeros(dim, dim),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta_after = &x - &self.mean;
        self.comoment.ger(1.0, &delta, &delta_after, 1.0);
    }

    /// Sample covariance (n - 1 denominator); `None` with fewer than two
    /// observations.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        if self.count < 2 {
            return None;
        }
        // symmetrize away rounding asymmetry from the rank-one updates
        let c = &self.comoment / (self.count - 1) as f64;
        Some((&c + c.transpose()) * 0.5)
    }

    /// Covariance plus `COVARIANCE_JITTER · I`.
    pub fn regularized(&self) -> Option<DMatrix<f64>> {
        self.covariance().map(|c| {
            let n = c.nrows();
            c + DMatrix::identity(n, n) * COVARIANCE_JITTER
        })
    }
}

/// Which proposal component produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalBranch {
    Fixed,
    Adaptive,
    SmallStep,
}

/// Draws a candidate for iteration `k` (1-based). `covariance` is the
/// regularized empirical covariance of past states; when it is missing or
/// not positive definite the small-step component is used.
pub fn propose(
    current: &[f64],
    k: usize,
    covariance: Option<&DMatrix<f64>>,
    cfg: &ChainConfig,
    rng: &mut StreamRng,
) -> (Vec<f64>, ProposalBranch) {
    let d = current.len();
    if k <= cfg.adapt_start {
        let s = cfg.fixed_step_sd;
        return (current.iter().map(|x| x + s * normal(rng)).collect(), ProposalBranch::Fixed);
    }
    let small_step = rng.random::<f64>() < cfg.mixture_weight;
    if !small_step {
        if let Some(chol) = covariance.and_then(|c| (c * cfg.adaptive_factor(d)).cholesky()) {
            let z = DVector::from_iterator(d, (0..d).map(|_| normal(rng)));
            let step = chol.l() * z;
            return (
                current.iter().zip(step.iter()).map(|(x, s)| x + s).collect(),
                ProposalBranch::Adaptive,
            );
        }
    }
    let s = cfg.small_step_variance(d).sqrt();
    (current.iter().map(|x| x + s * normal(rng)).collect(), ProposalBranch::SmallStep)
}

/// Metropolis–Hastings acceptance for symmetric proposals and flat priors.
pub fn mh_accept(log_current: f64, log_candidate: f64, rng: &mut StreamRng) -> bool {
    if !(log_candidate > f64::NEG_INFINITY) {
        return false;
    }
    let log_ratio = log_candidate - log_current;
    if log_ratio >= 0.0 {
        return true;
    }
    rng.random::<f64>().ln() < log_ratio
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub proposed: usize,
    pub accepted: usize,
}

impl PhaseStats {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Fixed,
    Adaptive,
}

/// Retained posterior draws with acceptance bookkeeping and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub param_names: Vec<String>,
    /// Row-major `retained × dim`.
    pub draws: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    pub fixed: PhaseStats,
    pub adaptive: PhaseStats,
    pub config: ChainConfig,
    /// Empirical covariance at the end of the run, row-major.
    pub final_covariance: Vec<f64>,
}

impl PosteriorChain {
    pub fn dim(&self) -> usize {
        self.param_names.len()
    }

    pub fn len(&self) -> usize {
        self.log_likelihood.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_likelihood.is_empty()
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.draws[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks(self.dim())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter().map(|row| row[j]).collect()
    }

    /// Accepted / proposed for the phase; `None` if the phase was empty.
    pub fn acceptance_rate(&self, phase: Phase) -> Option<f64> {
        match phase {
            Phase::Fixed => self.fixed.rate(),
            Phase::Adaptive => self.adaptive.rate(),
        }
    }
}

/// Runs the two-phase adaptive sampler on any target.
pub fn run_chain_on<T: LogTarget + ?Sized>(target: &T, cfg: &ChainConfig) -> Result<PosteriorChain> {
    cfg.validate()?;
    let d = target.dim();
    let mut rng = stream_rng(cfg.seed, cfg.stream);
    let mut current = init_state(target, cfg.max_init_attempts, &mut rng)?;
    let mut log_current = target.log_posterior(&current);

    let mut history = RunningCovariance::new(d);
    history.update(&current);
    let mut fixed = PhaseStats::default();
    let mut adaptive = PhaseStats::default();
    let mut draws = Vec::with_capacity(cfg.retained * d);
    let mut log_likelihood = Vec::with_capacity(cfg.retained);

    for k in 1..=cfg.total_iterations() {
        let covariance = if k > cfg.adapt_start { history.regularized() } else { None };
        let (candidate, _) = propose(&current, k, covariance.as_ref(), cfg, &mut rng);
        let log_candidate = target.log_posterior(&candidate);
        let accepted = mh_accept(log_current, log_candidate, &mut rng);
        let stats = if k <= cfg.adapt_start { &mut fixed } else { &mut adaptive };
        stats.proposed += 1;
        if accepted {
            stats.accepted += 1;
            current = candidate;
            log_current = log_candidate;
        }
        history.update(&current);
        if k > cfg.burn_in {
            draws.extend_from_slice(&current);
            log_likelihood.push(log_current);
        }
    }

    let final_covariance = history
        .covariance()
        .map(|c| c.transpose().as_slice().to_vec())
        .unwrap_or_else(|| vec![0.0; d * d]);
    Ok(PosteriorChain {
        param_names: target.param_names(),
        draws,
        log_likelihood,
        fixed,
        adaptive,
        config: *cfg,
        final_covariance,
    })
}

/// Fits `model` to an annual series.
pub fn run_chain(s: &AnnualSeries, model: ModelKind, cfg: &ChainConfig) -> Result<PosteriorChain> {
    match model {
        ModelKind::Gevr => run_chain_on(&GevrTarget::from_series(s), cfg),
        ModelKind::Nhgr => run_chain_on(&NhgrTarget::from_series(s), cfg),
    }
}

/// A functional evaluated on every draw of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDraws {
    pub values: Vec<f64>,
    /// Draws dropped because the functional was undefined for them.
    pub excluded: usize,
}

/// Applies `f` to each draw; draws where `f` fails (or returns a non-finite
/// value) are excluded and counted.
pub fn posterior_functional<I, F>(draws: I, mut f: F) -> Result<FunctionalDraws>
where
    I: IntoIterator,
    F: FnMut(I::Item) -> Result<f64, InvalidExtrapolation>,
{
    let mut values = Vec::new();
    let mut excluded = 0;
    for draw in draws {
        match f(draw) {
            Ok(v) if v.is_finite() => values.push(v),
            _ => excluded += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::NoValidDraws { excluded });
    }
    Ok(FunctionalDraws { values, excluded })
}

/// Writes `draw,<params…>,log_likelihood` rows.
pub fn write_chain_csv(path: &Path, chain: &PosteriorChain) -> Result<()> {
    let mut out = Vec::with_capacity(chain.len() * 16 * (chain.dim() + 2));
    write!(out, "draw,{},log_likelihood", chain.param_names.join(",")).expect("write to Vec");
    out.push(b'\n');
    for (i, row) in chain.iter().enumerate() {
        write!(out, "{}", i + 1).expect("write to Vec");
        for v in row {
            write!(out, ",{v}").expect("write to Vec");
        }
        writeln!(out, ",{}", chain.log_likelihood[i]).expect("write to Vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Draws read back from a chain CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub param_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub log_likelihood: Vec<f64>,
}

pub fn read_chain_csv(path: &Path) -> Result<ChainTable> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, 1, e))?.clone();
    let n = headers.len();
    if n < 3 || &headers[0] != "draw" || &headers[n - 1] != "log_likelihood" {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header 'draw,<params>,log_likelihood'".into(),
        });
    }
    let param_names: Vec<String> = headers.iter().skip(1).take(n - 2).map(String::from).collect();
    let mut rows = Vec::new();
    let mut log_likelihood = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(path, line, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().skip(1).map(|f| f.trim().parse::<f64>()).collect();
        let mut parsed = parsed.map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line,
            message: format!("bad number: {e}"),
        })?;
        log_likelihood.push(parsed.pop().expect("header has >= 3 columns"));
        rows.push(parsed);
    }
    Ok(ChainTable {
        param_names,
        rows,
        log_likelihood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Flat target on R^d: every candidate is accepted.
    struct Flat(usize);

    impl LogTarget for Flat {
        fn dim(&self) -> usize {
            self.0
        }
        fn param_names(&self) -> Vec<String> {
            (0..self.0).map(|i| format!("x{i}")).collect()
        }
        fn log_posterior(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn initial_candidate(&self, _: &mut StreamRng) -> Vec<f64> {
            vec![0.0; self.0]
        }
    }

    /// Finite only at the origin: every move is rejected.
    struct Pinned;

    impl LogTarget for Pinned {
        fn dim(&self) -> usize {
            2
        }
        fn param_names(&self) -> Vec<String> {
            vec!["a".into(), "b".into()]
        }
        fn log_posterior(&self, theta: &[f64]) -> f64 {
            if theta.iter().all(|&x| x == 0.0) {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        fn initial_candidate(&self, _: &mut StreamRng) -> Vec<f64> {
            vec![0.0; 2]
        }
    }

    fn small_cfg() -> ChainConfig {
        ChainConfig {
            adapt_start: 200,
            burn_in: 500,
            retained: 1000,
            seed: 11,
            ..ChainConfig::default()
        }
    }

    fn sd(xs: &[f64]) -> f64 {
        let m = stats::mean(xs);
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        let bad = ChainConfig {
            adapt_start: 5000,
            ..ChainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChainConfig {
            retained: 0,
            ..ChainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChainConfig {
            mixture_weight: 1.0,
            ..ChainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fixed_phase_step_has_sd_point_one() {
        let cfg = ChainConfig::default();
        let mut rng = stream_rng(1, 0);
        let steps: Vec<f64> = (0..50_000)
            .map(|_| propose(&[3.0], 1, None, &cfg, &mut rng).0[0] - 3.0)
            .collect();
        assert!((sd(&steps) - 0.1).abs() < 0.002);
    }

    #[test]
    fn small_step_component_scales_with_dimension() {
        let cfg = ChainConfig {
            mixture_weight: 0.999_999,
            ..ChainConfig::default()
        };
        let cov = DMatrix::identity(4, 4);
        let mut rng = stream_rng(2, 0);
        let mut steps = Vec::new();
        for _ in 0..20_000 {
            let (c, branch) = propose(&[0.0; 4], 3000, Some(&cov), &cfg, &mut rng);
            if branch == ProposalBranch::SmallStep {
                steps.push(c[0]);
            }
        }
        // sqrt(0.1² / 4) = 0.05, the same as the literal 0.1²/4 form at d = 4
        assert!((sd(&steps) - 0.05).abs() < 0.001);
        assert!((cfg.small_step_variance(4) - 0.1f64.powi(2) / 4.0).abs() < 1e-18);
        let literal = ChainConfig {
            scaling: ProposalScaling::Literal,
            ..cfg
        };
        assert!((literal.small_step_variance(6) - 0.0025).abs() < 1e-15);
        assert_eq!(literal.adaptive_factor(6), 2.38 * 2.38);
    }

    #[test]
    fn adaptive_component_uses_scaled_covariance() {
        let cfg = ChainConfig {
            mixture_weight: 1e-9,
            ..ChainConfig::default()
        };
        let cov = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let mut rng = stream_rng(3, 0);
        let xs: Vec<f64> = (0..40_000)
            .map(|_| propose(&[0.0, 0.0], 3000, Some(&cov), &cfg, &mut rng).0[0])
            .collect();
        // sd = 2.38 * 2 / sqrt(2)
        let expected = 2.38 * 2.0 / 2f64.sqrt();
        assert!((sd(&xs) / expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn mixture_frequency_matches_weight() {
        let cfg = ChainConfig::default();
        let cov = DMatrix::identity(6, 6);
        let mut rng = stream_rng(4, 0);
        let n = 100_000;
        let small = (0..n)
            .filter(|_| propose(&[0.0; 6], 2001, Some(&cov), &cfg, &mut rng).1 == ProposalBranch::SmallStep)
            .count();
        let frac = small as f64 / n as f64;
        assert!((frac - 0.05).abs() < 0.003, "{frac}");
    }

    #[test]
    fn non_positive_definite_covariance_falls_back() {
        let cfg = ChainConfig {
            mixture_weight: 1e-9,
            ..ChainConfig::default()
        };
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let mut rng = stream_rng(5, 0);
        assert_eq!(propose(&[0.0, 0.0], 3000, Some(&cov), &cfg, &mut rng).1, ProposalBranch::SmallStep);
        assert_eq!(propose(&[0.0, 0.0], 3000, None, &cfg, &mut rng).1, ProposalBranch::SmallStep);
    }

    #[test]
    fn acceptance_rule() {
        let mut rng = stream_rng(6, 0);
        assert!(mh_accept(-10.0, -9.0, &mut rng));
        assert!(mh_accept(-10.0, -10.0, &mut rng));
        assert!(!mh_accept(-10.0, f64::NEG_INFINITY, &mut rng));
        assert!(!mh_accept(-10.0, f64::NAN, &mut rng));
        let n = 100_000;
        let hits = (0..n).filter(|_| mh_accept(0.0, -std::f64::consts::LN_2, &mut rng)).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn covariance_examples() {
        let mut rc = RunningCovariance::new(2);
        rc.update(&[1.0, 2.0]);
        assert!(rc.covariance().is_none());
        rc.update(&[1.0, 2.0]);
        assert_eq!(rc.covariance().unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(rc.regularized().unwrap(), DMatrix::identity(2, 2) * COVARIANCE_JITTER);

        let mut rc = RunningCovariance::new(2);
        rc.update(&[0.0, 0.0]);
        rc.update(&[2.0, 0.0]);
        assert_eq!(rc.covariance().unwrap(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn streaming_covariance_matches_batch() {
        let mut rng = stream_rng(8, 0);
        let rows: Vec<[f64; 3]> = (0..1000)
            .map(|_| {
                let a = normal(&mut rng);
                let b = normal(&mut rng);
                [10.0 + a, 0.5 * a + b, -3.0 * b + 100.0]
            })
            .collect();
        let mut rc = RunningCovariance::new(3);
        rows.iter().for_each(|r| rc.update(r));
        // two-pass batch oracle
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..3).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let cov = rc.covariance().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let batch = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0);
                assert!((cov[(i, j)] - batch).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn acceptance_rate_extremes() {
        let chain = run_chain_on(&Flat(3), &small_cfg()).unwrap();
        assert_eq!(chain.acceptance_rate(Phase::Fixed), Some(1.0));
        assert_eq!(chain.acceptance_rate(Phase::Adaptive), Some(1.0));
        let chain = run_chain_on(&Pinned, &small_cfg()).unwrap();
        assert_eq!(chain.acceptance_rate(Phase::Fixed), Some(0.0));
        assert_eq!(chain.acceptance_rate(Phase::Adaptive), Some(0.0));
        assert!(chain.iter().all(|row| row == [0.0, 0.0]));
    }

    #[test]
    fn chain_lengths_and_determinism() {
        let cfg = small_cfg();
        let a = run_chain_on(&Flat(2), &cfg).unwrap();
        let b = run_chain_on(&Flat(2), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
        assert_eq!(a.fixed.proposed + a.adaptive.proposed, 1500);
        let one = run_chain_on(&Flat(2), &ChainConfig { retained: 1, ..cfg }).unwrap();
        assert_eq!(one.len(), 1);
        let other = run_chain_on(&Flat(2), &ChainConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.draws, other.draws);
    }

    #[test]
    fn gevr_start_is_valid_and_in_shape_support() {
        let values: Vec<f64> = (0..86).map(|i| 30.0 + ((i * 37) % 11) as f64 * 0.3).collect();
        let target = GevrTarget::new(values, Window::default());
        let mut rng = stream_rng(9, 0);
        for _ in 0..20 {
            let start = init_state(&target, 1000, &mut rng).unwrap();
            assert!(target.log_posterior(&start).is_finite());
            assert!(start[4] > -1.0 && start[4] < 0.2);
        }
    }

    #[test]
    fn constant_data_fails_initialization() {
        let mut rng = stream_rng(10, 0);
        let target = GevrTarget::new(vec![5.0; 86], Window::default());
        let err = init_state(&target, 1000, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Initialization { attempts: 1000, .. }));
        let target = NhgrTarget::new(vec![5.0; 86], Window::default(), true);
        assert!(init_state(&target, 50, &mut rng).is_err());
    }

    #[test]
    fn retained_draws_stay_in_support() {
        let values: Vec<f64> = (0..86).map(|i| 20.0 + ((i * 13) % 7) as f64).collect();
        let target = GevrTarget::new(values, Window::default());
        let chain = run_chain_on(&target, &small_cfg()).unwrap();
        for (row, ll) in chain.iter().zip(&chain.log_likelihood) {
            assert!(GevrParams::from_slice(row).in_support(Window::default()));
            assert!(ll.is_finite());
        }
    }

    #[test]
    fn functional_excludes_and_counts() {
        let draws = vec![vec![1.0], vec![-1.0], vec![2.0]];
        let bad = InvalidExtrapolation {
            year: 2125,
            parameter: "sigma",
            value: -1.0,
        };
        let out = posterior_functional(&draws, |d| if d[0] > 0.0 { Ok(d[0]) } else { Err(bad) }).unwrap();
        assert_eq!(out, FunctionalDraws { values: vec![1.0, 2.0], excluded: 1 });
        let ident = posterior_functional(&draws, |d| Ok(d[0])).unwrap();
        assert_eq!(ident.excluded, 0);
        assert!(matches!(
            posterior_functional(&draws, |_| Err(bad)),
            Err(Error::NoValidDraws { excluded: 3 })
        ));
    }

    #[test]
    fn chain_csv_round_trip_is_exact() {
        let chain = run_chain_on(&Flat(2), &small_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_chain_csv(&path, &chain).unwrap();
        let table = read_chain_csv(&path).unwrap();
        assert_eq!(table.param_names, ["x0", "x1"]);
        assert_eq!(table.rows.len(), chain.len());
        for (row, orig) in table.rows.iter().zip(chain.iter()) {
            assert_eq!(row.as_slice(), orig);
        }
    }
}
