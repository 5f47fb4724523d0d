//! Synthetic data with known truth, and end-to-end coverage checks.
//!
//! Replicate `r` draws its data from stream `2r` and fits its chain on
//! stream `2r + 1` of the master seed, so replicates are independent and
//! results do not depend on execution order.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{AnnualSeries, DatasetKey, EnsembleId, Region, Scenario, Statistic, Variable, ZoneId};
use crate::error::{Error, Result};
use crate::gevr::{self, GevrParams, ReturnSpec, GUMBEL_TOLERANCE};
use crate::mcmc::{self, ChainConfig, ModelKind};
use crate::nhgr::{self, NhgrParams};
use crate::rng::{stream_rng, StreamRng};
use crate::stats;
use crate::synoptic::Observation;
use crate::trend::{ChangePeriod, Window};

/// Generating model and its true parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "lowercase")]
pub enum Truth {
    Gevr(GevrParams),
    Nhgr(NhgrParams),
}

impl Truth {
    pub fn model(&self) -> ModelKind {
        match self {
            Truth::Gevr(_) => ModelKind::Gevr,
            Truth::Nhgr(_) => ModelKind::Nhgr,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Truth::Gevr(p) => p.to_array().to_vec(),
            Truth::Nhgr(p) => p.to_array().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub truth: Truth,
    pub base_year: i32,
    /// Years per series (P).
    pub span: usize,
    pub n_replicates: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn window(&self) -> Window {
        Window::new(self.base_year, self.span)
    }

    pub fn validate(&self) -> Result<()> {
        if self.span < 2 {
            return Err(Error::InvalidArgument(format!("span must be at least 2, got {}", self.span)));
        }
        if self.n_replicates == 0 {
            return Err(Error::InvalidArgument("need at least one replicate".into()));
        }
        let inside = match self.truth {
            Truth::Gevr(p) => p.in_support(self.window()),
            Truth::Nhgr(p) => p.in_support(self.window(), true),
        };
        if !inside {
            return Err(Error::InvalidArgument(format!("truth {:?} lies outside the prior support", self.truth)));
        }
        Ok(())
    }

    /// Key `SIM_tas_SSP585_r{r+1}i1p1f1_{max|mean}_GL` for replicate `r`.
    pub fn key(&self, replicate: usize) -> DatasetKey {
        let statistic = match self.truth {
            Truth::Gevr(_) => Statistic::Max,
            Truth::Nhgr(_) => Statistic::Mean,
        };
        DatasetKey::new(
            "SIM",
            Variable::Tas,
            Scenario::Ssp585,
            EnsembleId::new(replicate as u32 + 1, 1, 1, 1),
            statistic,
            Region::Zone(ZoneId::Global),
        )
        .expect("synthetic key is well formed")
    }

    pub fn data_stream(replicate: usize) -> u64 {
        2 * replicate as u64
    }

    pub fn chain_stream(replicate: usize) -> u64 {
        2 * replicate as u64 + 1
    }
}

/// One GEV draw by inverse transform.
pub fn sample_gev(mu: f64, sigma: f64, xi: f64, rng: &mut StreamRng) -> f64 {
    let u: f64 = rng.sample(Open01);
    let e = -u.ln();
    if xi.abs() < GUMBEL_TOLERANCE {
        mu - sigma * e.ln()
    } else {
        mu + sigma / xi * (e.powf(-xi) - 1.0)
    }
}

pub fn gevr_values(truth: &GevrParams, window: Window, rng: &mut StreamRng) -> Vec<f64> {
    (0..window.span)
        .map(|i| {
            let (mu, sigma, xi) = truth.at(window.base_year + i as i32, window);
            sample_gev(mu, sigma, xi, rng)
        })
        .collect()
}

pub fn nhgr_values(truth: &NhgrParams, window: Window, rng: &mut StreamRng) -> Vec<f64> {
    (0..window.span)
        .map(|i| {
            let (alpha, beta) = truth.at(window.base_year + i as i32, window);
            let z: f64 = rng.sample(StandardNormal);
            alpha + beta * z
        })
        .collect()
}

fn replicate_series(spec: &SyntheticSpec, r: usize) -> AnnualSeries {
    let window = spec.window();
    let mut rng = stream_rng(spec.seed, SyntheticSpec::data_stream(r));
    let values = match &spec.truth {
        Truth::Gevr(p) => gevr_values(p, window, &mut rng),
        Truth::Nhgr(p) => nhgr_values(p, window, &mut rng),
    };
    AnnualSeries::new(spec.key(r), spec.base_year, values)
}

/// All replicate series of a spec (GEVR or NHGR truth).
pub fn gen_series(spec: &SyntheticSpec) -> Result<Vec<AnnualSeries>> {
    spec.validate()?;
    Ok((0..spec.n_replicates).map(|r| replicate_series(spec, r)).collect())
}

pub fn gen_gevr_series(spec: &SyntheticSpec) -> Result<Vec<AnnualSeries>> {
    if spec.truth.model() != ModelKind::Gevr {
        return Err(Error::InvalidArgument("spec truth is not a GEVR model".into()));
    }
    gen_series(spec)
}

pub fn gen_nhgr_series(spec: &SyntheticSpec) -> Result<Vec<AnnualSeries>> {
    if spec.truth.model() != ModelKind::Nhgr {
        return Err(Error::InvalidArgument("spec truth is not an NHGR model".into()));
    }
    gen_series(spec)
}

/// True mixed-model parameters; `gamma[j]` is the effect of scenario `j+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmmTruth {
    pub iota: f64,
    pub gamma: [f64; 3],
    pub tau_delta: f64,
    pub tau_zeta: f64,
    pub tau_eps: f64,
}

/// Balanced design: every ensemble of every model has `per_cell`
/// observations under each scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmmDesign {
    pub models: usize,
    pub ensembles: usize,
    pub per_cell: usize,
}

/// Observations from `ι + γ_j + δ_k + ζ_k(ℓ) + ε`, with model `k` labelled
/// `m{k}` and ensemble `ℓ` labelled `e{ℓ}`.
pub fn gen_lmm_dataset(truth: &LmmTruth, design: &LmmDesign, seed: u64) -> Vec<Observation> {
    let mut rng = stream_rng(seed, 0);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let mut obs = Vec::with_capacity(design.models * design.ensembles * design.per_cell * 3);
    for k in 0..design.models {
        let delta = truth.tau_delta * normal();
        for l in 0..design.ensembles {
            let zeta = truth.tau_zeta * normal();
            for j in 1..=3 {
                let scenario = Scenario::from_index(j).expect("three scenarios");
                for _ in 0..design.per_cell {
                    obs.push(Observation {
                        value: truth.iota + truth.gamma[j - 1] + delta + zeta + truth.tau_eps * normal(),
                        scenario,
                        model: format!("m{}", k + 1),
                        ensemble: format!("e{}", l + 1),
                    });
                }
            }
        }
    }
    obs
}

/// Coverage of one quantity across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub name: String,
    pub truth: f64,
    pub covered: usize,
    pub total: usize,
    pub fraction: f64,
    /// 95% Wilson score interval for the coverage probability.
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    /// Per-quantity indicator, aligned with [`CoverageReport::quantities`];
    /// empty when the fit failed.
    pub covered: Vec<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub level: f64,
    pub quantities: Vec<Coverage>,
    pub replicates: Vec<ReplicateOutcome>,
    pub failed_fits: usize,
}

/// Wilson score interval at 95% for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// True value of the change functional (ΔQ for GEVR, parametric ΔM for NHGR).
pub fn true_delta(spec: &SyntheticSpec, period: ChangePeriod, rspec: ReturnSpec) -> Result<f64> {
    match spec.truth {
        Truth::Gevr(p) => gevr::delta_q(&p, spec.window(), period, rspec)
            .map_err(|e| Error::InvalidArgument(format!("truth has no change value: {e}"))),
        Truth::Nhgr(p) => Ok(nhgr::delta_m_parametric(&p, spec.window(), period)),
    }
}

fn covers(values: &mut [f64], truth: f64, level: f64) -> bool {
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    stats::quantile_sorted(values, tail) <= truth && truth <= stats::quantile_sorted(values, 1.0 - tail)
}

#[allow(clippy::too_many_arguments)]
fn replicate_outcome(
    spec: &SyntheticSpec,
    cfg: &ChainConfig,
    r: usize,
    truth: &[f64],
    delta_truth: f64,
    level: f64,
    period: ChangePeriod,
    rspec: ReturnSpec,
) -> Result<Vec<bool>> {
    let series = replicate_series(spec, r);
    let chain_cfg = ChainConfig {
        seed: spec.seed,
        stream: SyntheticSpec::chain_stream(r),
        ..*cfg
    };
    let chain = mcmc::run_chain(&series, spec.truth.model(), &chain_cfg)?;
    let mut covered: Vec<bool> = (0..chain.dim())
        .map(|j| covers(&mut chain.column(j), truth[j], level))
        .collect();
    let window = spec.window();
    let mut delta = match spec.truth {
        Truth::Gevr(_) => mcmc::posterior_functional(chain.iter(), |d| {
            gevr::delta_q(&GevrParams::from_slice(d), window, period, rspec)
        })?,
        Truth::Nhgr(_) => mcmc::posterior_functional(chain.iter(), |d| {
            Ok(nhgr::delta_m_parametric(&NhgrParams::from_slice(d), window, period))
        })?,
    };
    covered.push(covers(&mut delta.values, delta_truth, level));
    Ok(covered)
}

/// Simulates `n_datasets` replicates, fits each, and records whether every
/// true parameter and the true change value lie inside the central
/// `level` credible interval. Failed fits are counted, not fatal.
pub fn coverage_experiment(spec: &SyntheticSpec, cfg: &ChainConfig, n_datasets: usize, level: f64) -> Result<CoverageReport> {
    spec.validate()?;
    cfg.validate()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("credible level must lie in (0, 1), got {level}")));
    }
    let period = ChangePeriod::default();
    let rspec = ReturnSpec::default();
    let truth = spec.truth.to_vec();
    let delta_truth = true_delta(spec, period, rspec)?;
    let mut names: Vec<String> = spec.truth.model().param_names().iter().map(|s| s.to_string()).collect();
    names.push(match spec.truth {
        Truth::Gevr(_) => "delta_Q".into(),
        Truth::Nhgr(_) => "delta_M".into(),
    });

    let replicates: Vec<ReplicateOutcome> = (0..n_datasets)
        .into_par_iter()
        .map(|r| match replicate_outcome(spec, cfg, r, &truth, delta_truth, level, period, rspec) {
            Ok(covered) => ReplicateOutcome {
                replicate: r,
                covered,
                error: None,
            },
            Err(e) => ReplicateOutcome {
                replicate: r,
                covered: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect();

    let ok: Vec<&ReplicateOutcome> = replicates.iter().filter(|o| o.error.is_none()).collect();
    let truths: Vec<f64> = truth.iter().copied().chain(std::iter::once(delta_truth)).collect();
    let quantities = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let covered = ok.iter().filter(|o| o.covered[i]).count();
            let total = ok.len();
            let (ci_lower, ci_upper) = wilson_interval(covered, total);
            Coverage {
                name,
                truth: truths[i],
                covered,
                total,
                fraction: if total > 0 { covered as f64 / total as f64 } else { f64::NAN },
                ci_lower,
                ci_upper,
            }
        })
        .collect();
    Ok(CoverageReport {
        level,
        quantities,
        failed_fits: replicates.len() - ok.len(),
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gevr_spec(truth: GevrParams) -> SyntheticSpec {
        SyntheticSpec {
            truth: Truth::Gevr(truth),
            base_year: 2015,
            span: 86,
            n_replicates: 3,
            seed: 99,
        }
    }

    #[test]
    fn gumbel_exceedance_of_return_value() {
        let mut rng = stream_rng(1, 0);
        let n = 1_000_000;
        let q = gevr::return_value(0.0, 1.0, 0.0, ReturnSpec::default()).unwrap();
        let exceed = (0..n).filter(|_| sample_gev(0.0, 1.0, 0.0, &mut rng) > q).count();
        assert!((exceed as f64 / n as f64 - 0.01).abs() < 0.0003);
    }

    #[test]
    fn location_trend_shifts_the_final_year() {
        let truth = GevrParams {
            mu1: 10.0,
            ..GevrParams::stationary(0.0, 1.0, 0.0)
        };
        let w = Window::default();
        let mut rng = stream_rng(2, 0);
        let n = 20_000;
        let (mut first, mut last) = (0.0, 0.0);
        for _ in 0..n {
            let v = gevr_values(&truth, w, &mut rng);
            first += v[0];
            last += v[85];
        }
        // Gumbel sd = π/√6; difference of two means has sd ≈ 0.0128
        assert!(((last - first) / n as f64 - 10.0).abs() < 0.05);
    }

    #[test]
    fn nhgr_year_means_follow_alpha() {
        let truth = NhgrParams {
            alpha0: 5.0,
            alpha1: 3.0,
            beta0: 1.0,
            beta1: 0.5,
        };
        let w = Window::new(2015, 3);
        let mut rng = stream_rng(3, 0);
        let n = 40_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            for (s, v) in sums.iter_mut().zip(nhgr_values(&truth, w, &mut rng)) {
                *s += v;
            }
        }
        for (i, s) in sums.iter().enumerate() {
            let (alpha, beta) = truth.at(2015 + i as i32, w);
            assert!((s / n as f64 - alpha).abs() < 4.0 * beta / (n as f64).sqrt());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = gevr_spec(GevrParams::stationary(10.0, 2.0, -0.1));
        let a = gen_gevr_series(&spec).unwrap();
        assert_eq!(a, gen_gevr_series(&spec).unwrap());
        assert_ne!(a[0].values, a[1].values);
        assert_eq!(a[2].key.file_stem(), "SIM_tas_SSP585_r3i1p1f1_max_GL");
        assert!(gen_nhgr_series(&spec).is_err());
    }

    #[test]
    fn truth_outside_support_is_rejected() {
        let spec = gevr_spec(GevrParams::stationary(10.0, 2.0, 0.3));
        assert!(spec.validate().is_err());
    }

    #[test]
    fn lmm_without_variance_gives_cell_means() {
        let truth = LmmTruth {
            iota: 1.0,
            gamma: [0.0, 2.0, 5.0],
            tau_delta: 0.0,
            tau_zeta: 0.0,
            tau_eps: 0.0,
        };
        let obs = gen_lmm_dataset(&truth, &LmmDesign { models: 2, ensembles: 2, per_cell: 3 }, 1);
        assert_eq!(obs.len(), 36);
        for o in obs {
            assert_eq!(o.value, 1.0 + truth.gamma[o.scenario.index() - 1]);
        }
    }

    #[test]
    fn wilson_interval_brackets_the_estimate() {
        let (lo, hi) = wilson_interval(95, 100);
        assert!(lo < 0.95 && 0.95 < hi && lo > 0.88 && hi < 0.98);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn single_dataset_report() {
        let spec = gevr_spec(GevrParams::stationary(10.0, 2.0, -0.1));
        let cfg = ChainConfig {
            adapt_start: 200,
            burn_in: 1000,
            retained: 2000,
            ..ChainConfig::default()
        };
        let report = coverage_experiment(&spec, &cfg, 1, 0.95).unwrap();
        assert_eq!(report.quantities.len(), 7);
        assert_eq!(report.replicates.len(), 1);
        for q in &report.quantities {
            assert!(q.covered <= 1 && q.total == 1);
        }
        assert_eq!(report, coverage_experiment(&spec, &cfg, 1, 0.95).unwrap());
    }
}
