//! Linear mixed-effects model with scenario fixed effects and nested
//! model / ensemble random effects:
//!
//! `y = ι + γ_j + δ_k + ζ_k(ℓ) + ε`, with `δ ~ N(0, τ_δ²)`, `ζ ~ N(0, τ_ζ²)`,
//! `ε ~ N(0, τ_ε²)`.
//!
//! Observations are collapsed to per-(model, ensemble, scenario) sufficient
//! statistics, so cost scales with the number of cells, not draws. Writing
//! `Var(y) = τ_ε² H` with `H = I + ρ_δ Z_δZ_δ' + ρ_ζ Z_ζZ_ζ'`, the fixed
//! effects and `τ_ε²` are profiled out by generalized least squares and the
//! profiled likelihood is minimized over `(√ρ_δ, √ρ_ζ)` by Nelder–Mead from
//! several starts. `H` is block diagonal by model, and each block is
//! inverted through the Woodbury identity on a `(1 + E_k)`-square system.

use std::collections::BTreeMap;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data_model::Scenario;
use crate::error::{Error, Result};

/// Ratio at which a variance component is treated as unbounded.
const MAX_RATIO_ROOT: f64 = 1e6;

/// One response value with its design labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub value: f64,
    pub scenario: Scenario,
    pub model: String,
    pub ensemble: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    #[default]
    Ml,
    Reml,
}

impl std::str::FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Ok(FitMethod::Ml),
            "reml" => Ok(FitMethod::Reml),
            _ => Err(Error::parse("fit method", s, "expected ml or reml")),
        }
    }
}

/// Scenario coefficients with SSP126 as reference. Differences for absent
/// scenarios are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEffects {
    pub intercept_plus_g1: f64,
    pub g2_minus_g1: Option<f64>,
    pub g3_minus_g1: Option<f64>,
}

/// Fixed-effects-only (ordinary least squares) fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeFit {
    pub effects: ScenarioEffects,
    pub tau_fe: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    pub effects: ScenarioEffects,
    pub tau_delta: f64,
    pub tau_zeta: f64,
    pub tau_eps: f64,
    /// Standard deviation of the raw response.
    pub tau_r: f64,
    pub tau_fe: f64,
    /// `None` when the response is constant.
    pub r2_fe: Option<f64>,
    pub r2_me: Option<f64>,
    pub log_likelihood: f64,
    pub fe_log_likelihood: f64,
    pub n_obs: usize,
    pub method: FitMethod,
}

/// `(1 - (τ_FE/τ_R)², 1 - (τ_ε/τ_R)²)`.
pub fn r_squared(tau_r: f64, tau_fe: f64, tau_eps: f64) -> Result<(f64, f64)> {
    if !(tau_r > 0.0) {
        return Err(Error::Numerical(format!("R² is undefined for total sd {tau_r}")));
    }
    Ok((1.0 - (tau_fe / tau_r).powi(2), 1.0 - (tau_eps / tau_r).powi(2)))
}

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    n: f64,
    sum: f64,
}

/// Per-model block: cells indexed by `[ensemble][scenario column]`.
#[derive(Debug, Clone)]
struct ModelBlock {
    cells: Vec<Vec<Cell>>,
}

/// Collapsed design: centred response, fixed-effect columns
/// `[1, scenario 2?, scenario 3?]`, and per-model blocks.
#[derive(Debug, Clone)]
struct Design {
    n: f64,
    centre: f64,
    /// Present scenarios, reference first.
    scenarios: Vec<Scenario>,
    blocks: Vec<ModelBlock>,
    /// `[X y]' [X y]` over all observations (centred y).
    cross: DMatrix<f64>,
    tss: f64,
}

impl Design {
    fn build(obs: &[Observation]) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        if let Some(o) = obs.iter().find(|o| !o.value.is_finite()) {
            return Err(Error::Validation(format!("non-finite response {} in model {}", o.value, o.model)));
        }
        let mut scenarios: Vec<Scenario> = obs.iter().map(|o| o.scenario).collect();
        scenarios.sort();
        scenarios.dedup();
        if scenarios[0] != Scenario::Ssp126 {
            return Err(Error::Validation("reference scenario SSP126 is absent".into()));
        }
        let col = |s: Scenario| scenarios.iter().position(|&x| x == s).expect("collected above");
        let p = scenarios.len();

        let n = obs.len() as f64;
        let centre = obs.iter().map(|o| o.value).sum::<f64>() / n;

        let mut index: BTreeMap<&str, BTreeMap<&str, Vec<Cell>>> = BTreeMap::new();
        let mut cross = DMatrix::zeros(p + 1, p + 1);
        let mut tss = 0.0;
        for o in obs {
            let y = o.value - centre;
            let j = col(o.scenario);
            let cell = &mut index.entry(&o.model).or_default().entry(&o.ensemble).or_insert_with(|| vec![Cell::default(); p])[j];
            cell.n += 1.0;
            cell.sum += y;
            tss += y * y;
        }
        let blocks: Vec<ModelBlock> = index
            .into_values()
            .map(|ens| ModelBlock {
                cells: ens.into_values().collect(),
            })
            .collect();
        // X'X and X'y from cell totals; y'y from the raw pass
        for b in &blocks {
            for e in &b.cells {
                for (j, c) in e.iter().enumerate() {
                    let x = fixed_row(j, p);
                    for r in 0..p {
                        for s in 0..p {
                            cross[(r, s)] += c.n * x[r] * x[s];
                        }
                        cross[(r, p)] += c.sum * x[r];
                    }
                }
            }
        }
        for r in 0..p {
            cross[(p, r)] = cross[(r, p)];
        }
        cross[(p, p)] = tss;
        Ok(Design {
            n,
            centre,
            scenarios,
            blocks,
            cross,
            tss,
        })
    }

    fn p(&self) -> usize {
        self.scenarios.len()
    }

    fn n_models(&self) -> usize {
        self.blocks.len()
    }

    fn max_ensembles(&self) -> usize {
        self.blocks.iter().map(|b| b.cells.len()).max().unwrap_or(0)
    }

    /// `[X y]' H⁻¹ [X y]` and `log|H|` for random-effect sd ratios `(a, b)`.
    fn weighted_cross(&self, a: f64, b: f64) -> Option<(DMatrix<f64>, f64)> {
        let p = self.p();
        let mut s = self.cross.clone();
        let mut log_det = 0.0;
        for block in &self.blocks {
            let e = block.cells.len();
            let q = 1 + e;
            // Γ^{1/2} Z'Z Γ^{1/2} and Γ^{1/2} Z' [X y]
            let scale: Vec<f64> = std::iter::once(a).chain(std::iter::repeat_n(b, e)).collect();
            let mut zz = DMatrix::<f64>::zeros(q, q);
            let mut zm = DMatrix::<f64>::zeros(q, p + 1);
            for (l, cells) in block.cells.iter().enumerate() {
                for (j, c) in cells.iter().enumerate() {
                    if c.n == 0.0 {
                        continue;
                    }
                    zz[(0, 0)] += c.n;
                    zz[(0, l + 1)] += c.n;
                    zz[(l + 1, 0)] += c.n;
                    zz[(l + 1, l + 1)] += c.n;
                    let x = fixed_row(j, p);
                    for r in 0..p {
                        zm[(0, r)] += c.n * x[r];
                        zm[(l + 1, r)] += c.n * x[r];
                    }
                    zm[(0, p)] += c.sum;
                    zm[(l + 1, p)] += c.sum;
                }
            }
            for r in 0..q {
                for c in 0..q {
                    zz[(r, c)] *= scale[r] * scale[c];
                }
                for c in 0..=p {
                    zm[(r, c)] *= scale[r];
                }
            }
            let a_mat = DMatrix::identity(q, q) + zz;
            let chol = a_mat.cholesky()?;
            log_det += 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let solved = chol.solve(&zm);
            s -= zm.transpose() * solved;
        }
        Some((s, log_det))
    }

    /// GLS solution: coefficients, quadratic form Q, and `log|X'H⁻¹X|`.
    fn gls(&self, a: f64, b: f64) -> Option<(DVector<f64>, f64, f64, f64)> {
        let p = self.p();
        let (s, log_det_h) = self.weighted_cross(a, b)?;
        let xx = s.view((0, 0), (p, p)).into_owned();
        let xy = s.view((0, p), (p, 1)).column(0).into_owned();
        let chol = xx.cholesky()?;
        let beta = chol.solve(&xy);
        let q = (s[(p, p)] - xy.dot(&beta)).max(0.0);
        let log_det_xx = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Some((beta, q, log_det_h, log_det_xx))
    }

    /// Profiled deviance `-2ℓ` with `τ_ε²` at its optimum.
    fn deviance(&self, a: f64, b: f64, method: FitMethod) -> f64 {
        if !(a.abs() <= MAX_RATIO_ROOT && b.abs() <= MAX_RATIO_ROOT) {
            return f64::INFINITY;
        }
        let Some((_, q, log_det_h, log_det_xx)) = self.gls(a, b) else {
            return f64::INFINITY;
        };
        let dof = match method {
            FitMethod::Ml => self.n,
            FitMethod::Reml => self.n - self.p() as f64,
        };
        let sigma2 = q / dof;
        let mut dev = dof * (2.0 * std::f64::consts::PI * sigma2).ln() + log_det_h + dof;
        if method == FitMethod::Reml {
            dev += log_det_xx;
        }
        if dev.is_nan() {
            f64::INFINITY
        } else {
            dev
        }
    }

    fn effects(&self, beta: &DVector<f64>) -> ScenarioEffects {
        let diff = |s: Scenario| self.scenarios.iter().position(|&x| x == s).map(|j| beta[j]);
        ScenarioEffects {
            intercept_plus_g1: beta[0] + self.centre,
            g2_minus_g1: diff(Scenario::Ssp245),
            g3_minus_g1: diff(Scenario::Ssp585),
        }
    }
}

/// Fixed-effect design row for scenario column `j`: intercept plus one
/// indicator per non-reference scenario.
fn fixed_row(j: usize, p: usize) -> Vec<f64> {
    let mut x = vec![0.0; p];
    x[0] = 1.0;
    if j > 0 {
        x[j] = 1.0;
    }
    x
}

/// Ordinary least squares on scenario indicators. `τ_FE` uses the
/// likelihood's denominator: `n` for ML and `n - p` for REML.
pub fn fe_only_fit(obs: &[Observation], method: FitMethod) -> Result<FeFit> {
    fe_fit(&Design::build(obs)?, method)
}

fn fe_fit(design: &Design, method: FitMethod) -> Result<FeFit> {
    let (beta, rss, _, _) = design
        .gls(0.0, 0.0)
        .ok_or_else(|| Error::Numerical("singular fixed-effect design".into()))?;
    let dof = dof(design, method)?;
    Ok(FeFit {
        effects: design.effects(&beta),
        tau_fe: (rss / dof).sqrt(),
        log_likelihood: -0.5 * design.deviance(0.0, 0.0, method),
    })
}

fn dof(design: &Design, method: FitMethod) -> Result<f64> {
    let dof = match method {
        FitMethod::Ml => design.n,
        FitMethod::Reml => design.n - design.p() as f64,
    };
    if dof <= 0.0 {
        return Err(Error::Validation(format!(
            "{} observations cannot support {} fixed effects",
            design.n,
            design.p()
        )));
    }
    Ok(dof)
}

struct Deviance<'a> {
    design: &'a Design,
    method: FitMethod,
    fix_a: bool,
    fix_b: bool,
}

impl Deviance<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        let a = if self.fix_a { 0.0 } else { x[0] };
        let b = if self.fix_b { 0.0 } else { x[x.len() - 1] };
        self.design.deviance(a, b, self.method)
    }

    fn unpack(&self, x: &[f64]) -> (f64, f64) {
        let a = if self.fix_a { 0.0 } else { x[0].abs() };
        let b = if self.fix_b { 0.0 } else { x[x.len() - 1].abs() };
        (a, b)
    }
}

impl CostFunction for Deviance<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(x))
    }
}

fn minimize(objective: Deviance<'_>, start: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let step = |v: f64| 0.25 * v.abs().max(0.2);
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut v = start.clone();
        v[i] += step(start[i]);
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-12).ok()?;
    let result = Executor::new(objective, solver)
        .configure(|s| s.max_iters(2000))
        .run()
        .ok()?;
    let state = result.state();
    let best = state.best_param.clone()?;
    Some((best, state.best_cost))
}

/// Maximum-likelihood (or REML) fit of the nested mixed model.
///
/// With one model `τ_δ` is fixed at 0; when every model has a single
/// ensemble `τ_ζ` is fixed at 0. One model with one ensemble is an error.
pub fn lmm_fit(obs: &[Observation], method: FitMethod) -> Result<LmmFit> {
    let design = Design::build(obs)?;
    let fix_a = design.n_models() < 2;
    let fix_b = design.max_ensembles() < 2;
    if fix_a && fix_b {
        return Err(Error::Unidentifiable {
            component: "tau_delta",
            reason: "a single model with a single ensemble leaves no random-effect replication".into(),
        });
    }
    let fe = fe_fit(&design, method)?;
    let dof = dof(&design, method)?;
    let tau_r = (design.tss / design.n).sqrt();

    let exact = fe.tau_fe <= 1e-12 * (1.0 + design.centre.abs());
    let (a, b) = if exact {
        (0.0, 0.0)
    } else {
        let objective = |fa: bool, fb: bool| Deviance {
            design: &design,
            method,
            fix_a: fa,
            fix_b: fb,
        };
        let free = usize::from(!fix_a) + usize::from(!fix_b);
        let grid = [0.1, 1.0, 10.0];
        let mut best = (vec![0.0; free], objective(fix_a, fix_b).eval(&vec![0.0; free]));
        let starts: Vec<Vec<f64>> = if free == 2 {
            grid.iter().flat_map(|&u| grid.iter().map(move |&v| vec![u, v])).collect()
        } else {
            grid.iter().map(|&u| vec![u]).collect()
        };
        for start in starts {
            if let Some((x, f)) = minimize(objective(fix_a, fix_b), start) {
                if f < best.1 {
                    best = (x, f);
                }
            }
        }
        let mut best = (objective(fix_a, fix_b).unpack(&best.0), best.1);
        // boundary solutions: drop a component when that does not worsen the fit
        if free == 2 {
            for (drop_a, drop_b) in [(true, false), (false, true)] {
                let kept = if drop_a { best.0 .1 } else { best.0 .0 };
                let obj = objective(drop_a, drop_b);
                if let Some((x, f)) = minimize(obj, vec![kept.max(0.1)]) {
                    let ab = objective(drop_a, drop_b).unpack(&x);
                    if f <= best.1 + 1e-9 {
                        best = (ab, f.min(best.1));
                    }
                }
            }
        }
        let zero = design.deviance(0.0, 0.0, method);
        if zero <= best.1 + 1e-9 {
            best = ((0.0, 0.0), zero);
        }
        best.0
    };

    let (beta, q, _, _) = design
        .gls(a, b)
        .ok_or_else(|| Error::Numerical("mixed-model system is not positive definite".into()))?;
    let tau_eps = (q / dof).sqrt();
    let (r2_fe, r2_me) = match r_squared(tau_r, fe.tau_fe, tau_eps) {
        Ok((f, m)) => (Some(f), Some(m)),
        Err(_) => (None, None),
    };
    let log_likelihood = if exact {
        fe.log_likelihood
    } else {
        -0.5 * design.deviance(a, b, method)
    };
    Ok(LmmFit {
        effects: design.effects(&beta),
        tau_delta: a * tau_eps,
        tau_zeta: b * tau_eps,
        tau_eps,
        tau_r,
        tau_fe: fe.tau_fe,
        r2_fe,
        r2_me,
        log_likelihood,
        fe_log_likelihood: fe.log_likelihood,
        n_obs: obs.len(),
        method,
    })
}
