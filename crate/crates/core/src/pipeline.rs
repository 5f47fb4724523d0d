//! File-level orchestration behind the command-line subcommands.
//!
//! Every output file `X` gets a sidecar `X.json` holding the tool version,
//! the subcommand parameters, SHA-256 digests of the inputs and any
//! output-specific details; each run also writes `climext-{command}.json`
//! into the output directory. Sidecars contain no timestamps or absolute
//! output paths, so reruns are byte-identical.
//!
//! File names follow the dataset-key stem
//! `{gcm}_{variable}_{scenario}_{ensemble}_{statistic}_{zone}`:
//!
//! | output           | name                                  |
//! |------------------|---------------------------------------|
//! | annual series    | `{stem}.csv`                          |
//! | posterior chain  | `{stem}.{gevr,nhgr}.chain.csv`        |
//! | change draws     | `{stem}.delta-{Q,M-parametric,M-predictive}.csv` |
//! | summaries        | `table2.csv`, `boxwhisker.csv`, `table3.csv` |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::aggregate::{self, AggregateOptions, Extreme, GridSeries, MeanWeighting};
use crate::data_model::{
    read_series_csv, save_manifest, validate_series, write_series_csv, AnnualSeries, DatasetKey, EnsembleId,
    ManifestEntry, Region, Scenario, SeriesIssue, Statistic, Variable, ZoneId, DEFAULT_OUTLIER_IQR_MULTIPLE,
};
use crate::error::{Error, Result};
use crate::gevr::{self, GevrParams, ReturnSpec};
use crate::mcmc::{self, ChainConfig, ModelKind, Phase, PosteriorChain};
use crate::nhgr::{self, NhgrParams};
use crate::rng::{stream_id, stream_rng};
use crate::simulator::{self, LmmDesign, LmmTruth, SyntheticSpec};
use crate::synoptic::{self, DeltaDraws, DeltaKind, FitMethod};
use crate::trend::{ChangePeriod, Window};

pub const TOOL: &str = "climext";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        context: path.display().to_string(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        context: path.display().to_string(),
        source: e,
    })
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes the per-output sidecar.
fn write_sidecar<P: Serialize>(
    command: &str,
    params: &P,
    inputs: &[InputDigest],
    output: &Path,
    details: serde_json::Value,
) -> Result<()> {
    let meta = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "parameters": params,
        "inputs": inputs,
        "output": file_name(output),
        "details": details,
    });
    write_json(&sidecar_path(output), &meta)
}

/// Outcome of a subcommand run.
#[derive(Debug, Default)]
pub struct RunReport {
    pub outputs: Vec<PathBuf>,
    /// Per-input failures that did not stop the run.
    pub failures: Vec<(PathBuf, Error)>,
}

impl RunReport {
    /// The most severe failure when no output was produced, or when
    /// `strict` and anything failed.
    pub fn into_result(mut self, strict: bool) -> Result<RunReport> {
        if !self.failures.is_empty() && (strict || self.outputs.is_empty()) {
            self.failures.sort_by_key(|(_, e)| std::cmp::Reverse(e.kind().exit_code()));
            return Err(self.failures.swap_remove(0).1);
        }
        Ok(self)
    }
}

fn write_run_record<P: Serialize>(out: &Path, command: &str, params: &P, report: &RunReport) -> Result<()> {
    let mut outputs: Vec<String> = report.outputs.iter().map(|p| file_name(p)).collect();
    outputs.sort();
    let failures: Vec<_> = report
        .failures
        .iter()
        .map(|(p, e)| json!({"input": p.display().to_string(), "kind": e.kind().as_str(), "error": e.to_string()}))
        .collect();
    write_json(
        &out.join(format!("climext-{command}.json")),
        &json!({
            "tool": TOOL,
            "version": VERSION,
            "command": command,
            "parameters": params,
            "outputs": outputs,
            "failures": failures,
        }),
    )
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// Runs `f` on every input in a pool of `jobs` threads (0 = all cores),
/// keeping input order.
fn parallel_map<T, F>(inputs: &[PathBuf], jobs: usize, f: F) -> Result<Vec<(PathBuf, Result<T>)>>
where
    T: Send,
    F: Fn(&Path) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| inputs.par_iter().map(|p| (p.clone(), f(p))).collect()))
}

// ---- aggregate ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateStatistic {
    Max,
    Min,
    Mean,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateParams {
    pub grid: PathBuf,
    pub gcm: String,
    pub variable: Variable,
    pub scenario: Scenario,
    pub ensemble: EnsembleId,
    pub statistic: AggregateStatistic,
    /// `GL` gives the area-weighted mean of band means for `mean`, and the
    /// extreme over all locations otherwise.
    pub zones: Vec<ZoneId>,
    pub skip_missing: bool,
    pub cos_latitude: bool,
    /// Optional centred moving-median smoothing half-width in years.
    pub median_half_window: Option<usize>,
}

fn aggregate_zone(g: &GridSeries, zone: ZoneId, p: &AggregateParams) -> Result<Vec<f64>> {
    let opts = AggregateOptions {
        skip_missing: p.skip_missing,
        mean_weighting: if p.cos_latitude {
            MeanWeighting::CosLatitude
        } else {
            MeanWeighting::Unweighted
        },
    };
    match (p.statistic, zone) {
        (AggregateStatistic::Max, _) => aggregate::spatial_extreme(g, zone, Extreme::Max, opts),
        (AggregateStatistic::Min, _) => aggregate::spatial_extreme(g, zone, Extreme::Min, opts),
        (AggregateStatistic::Mean, ZoneId::Global) => {
            let bands: Vec<Vec<f64>> = ZoneId::BANDS
                .iter()
                .map(|&z| aggregate::zone_mean(g, z, opts))
                .collect::<Result<_>>()?;
            let refs: [&[f64]; 5] = std::array::from_fn(|i| bands[i].as_slice());
            aggregate::global_mean(refs, &aggregate::zone_area_fractions())
        }
        (AggregateStatistic::Mean, _) => aggregate::zone_mean(g, zone, opts),
    }
}

/// One annual series file per requested zone.
pub fn cmd_aggregate(p: &AggregateParams, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let grid = GridSeries::read_csv(&p.grid)?;
    if grid.years.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Validation(format!("{}: grid years are not consecutive", p.grid.display())));
    }
    let base_year = *grid
        .years
        .first()
        .ok_or_else(|| Error::Validation(format!("{}: grid has no years", p.grid.display())))?;
    let statistic = match p.statistic {
        AggregateStatistic::Max => Statistic::Max,
        AggregateStatistic::Min => Statistic::Min,
        AggregateStatistic::Mean => Statistic::Mean,
    };
    let inputs = [digest_file(&p.grid)?];
    let mut report = RunReport::default();
    for &zone in &p.zones {
        let key = DatasetKey::new(p.gcm.clone(), p.variable, p.scenario, p.ensemble, statistic, Region::Zone(zone))?;
        let mut values = aggregate_zone(&grid, zone, p)?;
        if let Some(h) = p.median_half_window {
            values = aggregate::moving_median_smooth(&values, h);
        }
        let series = AnnualSeries::new(key, base_year, values);
        let validation = validate_series(&series, DEFAULT_OUTLIER_IQR_MULTIPLE);
        if let Some(v) = validation.violations().next() {
            return Err(Error::Validation(format!("{}: {v}", series.key)));
        }
        let path = out.join(format!("{}.csv", series.key.file_stem()));
        write_series_csv(&path, &series)?;
        let outliers: Vec<String> = validation.outliers().map(SeriesIssue::to_string).collect();
        write_sidecar("aggregate", p, &inputs, &path, json!({ "zone": zone, "outliers": outliers }))?;
        report.outputs.push(path);
    }
    write_run_record(out, "aggregate", p, &report)?;
    Ok(report)
}

// ---- fit ----

#[derive(Debug, Clone, Serialize)]
pub struct FitParams {
    pub inputs: Vec<PathBuf>,
    pub model: ModelKind,
    pub window: Window,
    /// `seed` is the master seed; `stream` is replaced per input.
    pub chain: ChainConfig,
    pub jobs: usize,
}

pub fn chain_file_name(key: &DatasetKey, model: ModelKind) -> String {
    let model = match model {
        ModelKind::Gevr => "gevr",
        ModelKind::Nhgr => "nhgr",
    };
    format!("{}.{model}.chain.csv", key.file_stem())
}

/// Reads a series for fitting: checks it against the window and flips
/// minima to negated minima.
pub fn load_fit_series(path: &Path, window: Window) -> Result<AnnualSeries> {
    let key = DatasetKey::from_path(path)?;
    let mut s = read_series_csv(path, key)?;
    if s.base_year != window.base_year {
        return Err(Error::Validation(format!(
            "{}: series starts in {}, window base year is {}",
            path.display(),
            s.base_year,
            window.base_year
        )));
    }
    s.span = window.span;
    if let Some(v) = validate_series(&s, DEFAULT_OUTLIER_IQR_MULTIPLE).violations().next() {
        return Err(Error::Validation(format!("{}: {v}", path.display())));
    }
    if s.key.statistic == Statistic::Min {
        s = aggregate::negate(&s)?;
    }
    Ok(s)
}

/// Chain configuration used for a series: master seed with a stream derived
/// from the dataset key.
pub fn chain_config_for(key: &DatasetKey, base: &ChainConfig) -> ChainConfig {
    ChainConfig {
        stream: stream_id(&key.file_stem()),
        ..*base
    }
}

fn chain_details(chain: &PosteriorChain, window: Window, model: ModelKind) -> serde_json::Value {
    json!({
        "model": model,
        "window": window,
        "config": chain.config,
        "acceptance_fixed": chain.acceptance_rate(Phase::Fixed),
        "acceptance_adaptive": chain.acceptance_rate(Phase::Adaptive),
        "draws": chain.len(),
    })
}

/// One chain per input series, fitted in parallel.
pub fn cmd_fit(p: &FitParams, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    p.chain.validate()?;
    let results = parallel_map(&p.inputs, p.jobs, |path| {
        let series = load_fit_series(path, p.window)?;
        let cfg = chain_config_for(&series.key, &p.chain);
        let chain = mcmc::run_chain(&series, p.model, &cfg)?;
        let target = out.join(chain_file_name(&series.key, p.model));
        mcmc::write_chain_csv(&target, &chain)?;
        write_sidecar("fit", p, &[digest_file(path)?], &target, chain_details(&chain, p.window, p.model))?;
        Ok(target)
    })?;
    let mut report = RunReport::default();
    for (input, r) in results {
        match r {
            Ok(o) => report.outputs.push(o),
            Err(e) => report.failures.push((input, e)),
        }
    }
    write_run_record(out, "fit", p, &report)?;
    Ok(report)
}

// ---- delta ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaRequest {
    /// Return-value change from GEVR chains.
    Q,
    /// Mean change from NHGR chains.
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMMode {
    Parametric,
    Predictive,
    Both,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaParams {
    pub chains: Vec<PathBuf>,
    pub kind: DeltaRequest,
    pub m_mode: DeltaMMode,
    pub return_spec: ReturnSpec,
    pub period: ChangePeriod,
    /// Trend window; when absent it is taken from the chain's sidecar, or
    /// the default window if there is none.
    pub window: Option<Window>,
    /// Seed for predictive draws.
    pub seed: u64,
    pub jobs: usize,
}

fn chain_model(path: &Path) -> Result<ModelKind> {
    let name = file_name(path);
    let mut parts = name.split('.').skip(1);
    match (parts.next(), parts.next()) {
        (Some(m), Some("chain")) => m.parse(),
        _ => Err(Error::parse("chain file name", &name, "expected {key}.{gevr|nhgr}.chain.csv")),
    }
}

fn chain_window(path: &Path, requested: Option<Window>) -> Result<Window> {
    if let Some(w) = requested {
        return Ok(w);
    }
    let sidecar = sidecar_path(path);
    if !sidecar.exists() {
        return Ok(Window::default());
    }
    let meta: serde_json::Value = read_json(&sidecar)?;
    match meta.pointer("/details/window") {
        Some(w) => serde_json::from_value(w.clone()).map_err(|e| Error::Json {
            context: sidecar.display().to_string(),
            source: e,
        }),
        None => Ok(Window::default()),
    }
}

/// Change draws from a chain's rows.
#[allow(clippy::too_many_arguments)]
pub fn delta_draws(
    key: &DatasetKey,
    model: ModelKind,
    rows: &[Vec<f64>],
    kind: DeltaKind,
    window: Window,
    period: ChangePeriod,
    rspec: ReturnSpec,
    seed: u64,
) -> Result<DeltaDraws> {
    let functional = match (kind, model) {
        (DeltaKind::Q, ModelKind::Gevr) => {
            mcmc::posterior_functional(rows, |d| gevr::delta_q(&GevrParams::from_slice(d), window, period, rspec))?
        }
        (DeltaKind::MParametric, ModelKind::Nhgr) => mcmc::posterior_functional(rows, |d| {
            Ok(nhgr::delta_m_parametric(&NhgrParams::from_slice(d), window, period))
        })?,
        (DeltaKind::MPredictive, ModelKind::Nhgr) => {
            let mut rng = stream_rng(seed, stream_id(&format!("{}.delta-{}", key.file_stem(), kind)));
            mcmc::posterior_functional(rows, |d| {
                nhgr::delta_m_predictive(&NhgrParams::from_slice(d), window, period, &mut rng)
            })?
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "change {kind} is not defined for {model:?} chains"
            )))
        }
    };
    DeltaDraws::new(key.clone(), kind, functional.values, functional.excluded)
}

pub fn cmd_delta(p: &DeltaParams, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let kinds: Vec<DeltaKind> = match (p.kind, p.m_mode) {
        (DeltaRequest::Q, _) => vec![DeltaKind::Q],
        (DeltaRequest::M, DeltaMMode::Parametric) => vec![DeltaKind::MParametric],
        (DeltaRequest::M, DeltaMMode::Predictive) => vec![DeltaKind::MPredictive],
        (DeltaRequest::M, DeltaMMode::Both) => vec![DeltaKind::MParametric, DeltaKind::MPredictive],
    };
    let results = parallel_map(&p.chains, p.jobs, |path| {
        let model = chain_model(path)?;
        let key = DatasetKey::from_path(path)?;
        let window = chain_window(path, p.window)?;
        let table = mcmc::read_chain_csv(path)?;
        if table.param_names != model.param_names() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: 1,
                message: format!("columns {:?} do not match a {model:?} chain", table.param_names),
            });
        }
        let inputs = [digest_file(path)?];
        let mut written = Vec::new();
        for &kind in &kinds {
            let d = delta_draws(&key, model, &table.rows, kind, window, p.period, p.return_spec, p.seed)?;
            let target = out.join(d.file_name());
            synoptic::write_delta_csv(&target, &d)?;
            write_sidecar(
                "delta",
                p,
                &inputs,
                &target,
                json!({"kind": kind, "window": window, "draws": d.draws.len(), "excluded": d.excluded}),
            )?;
            written.push(target);
        }
        Ok(written)
    })?;
    let mut report = RunReport::default();
    for (input, r) in results {
        match r {
            Ok(o) => report.outputs.extend(o),
            Err(e) => report.failures.push((input, e)),
        }
    }
    write_run_record(out, "delta", p, &report)?;
    Ok(report)
}

// ---- summarize / lmm ----

#[derive(Debug, Clone, Serialize)]
pub struct SummarizeParams {
    pub deltas: Vec<PathBuf>,
}

fn read_deltas(paths: &[PathBuf]) -> Result<(Vec<DeltaDraws>, Vec<InputDigest>)> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no change-draw files given".into()));
    }
    let mut deltas = Vec::with_capacity(paths.len());
    let mut digests = Vec::with_capacity(paths.len());
    for p in paths {
        deltas.push(synoptic::read_delta_csv(p)?);
        digests.push(digest_file(p)?);
    }
    Ok((deltas, digests))
}

/// Table 2 layout (`table2.csv`) and per-GCM box-whisker rows
/// (`boxwhisker.csv`).
pub fn cmd_summarize(p: &SummarizeParams, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let (deltas, inputs) = read_deltas(&p.deltas)?;
    let (table, boxes) = synoptic::summarize(&deltas)?;
    let details = json!({"kind": deltas[0].kind, "statistic": deltas[0].key.statistic});
    let mut report = RunReport::default();
    let t2 = out.join("table2.csv");
    synoptic::write_rows_csv(&t2, &table)?;
    write_sidecar("summarize", p, &inputs, &t2, details.clone())?;
    let bw = out.join("boxwhisker.csv");
    synoptic::write_rows_csv(&bw, &boxes)?;
    write_sidecar("summarize", p, &inputs, &bw, details)?;
    report.outputs = vec![t2, bw];
    write_run_record(out, "summarize", p, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct LmmParams {
    pub deltas: Vec<PathBuf>,
    pub method: FitMethod,
}

/// Mixed-effects table (`table3.csv`), one row per (variable, zone).
pub fn cmd_lmm(p: &LmmParams, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let (deltas, inputs) = read_deltas(&p.deltas)?;
    let fits = synoptic::lmm_table(&deltas, p.method)?;
    let rows: Vec<_> = fits.iter().map(|(row, _)| row.clone()).collect();
    let path = out.join("table3.csv");
    synoptic::write_rows_csv(&path, &rows)?;
    let details: Vec<_> = fits
        .iter()
        .map(|(row, fit)| {
            json!({
                "variable": row.variable,
                "zone": row.zone,
                "n_obs": fit.n_obs,
                "log_likelihood": fit.log_likelihood,
                "fe_log_likelihood": fit.fe_log_likelihood,
            })
        })
        .collect();
    write_sidecar("lmm", p, &inputs, &path, json!({"kind": deltas[0].kind, "fits": details}))?;
    let report = RunReport {
        outputs: vec![path],
        failures: Vec::new(),
    };
    write_run_record(out, "lmm", p, &report)?;
    Ok(report)
}

// ---- simulate / verify ----

/// Mixed-model simulation: observations are written as change-draw files,
/// one per (model, ensemble, scenario) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmmSimSpec {
    pub lmm_truth: LmmTruth,
    pub design: LmmDesign,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimulationSpec {
    Series(SyntheticSpec),
    Lmm(LmmSimSpec),
}

pub fn load_simulation_spec(path: &Path) -> Result<SimulationSpec> {
    read_json(path)
}

/// Writes replicate series (plus `manifest.csv`), or mixed-model change
/// draws.
pub fn cmd_simulate(spec_path: &Path, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let spec = load_simulation_spec(spec_path)?;
    let inputs = [digest_file(spec_path)?];
    let params = json!({"spec": spec_path.display().to_string(), "resolved": spec});
    let mut report = RunReport::default();
    match spec {
        SimulationSpec::Series(s) => {
            let mut manifest = Vec::new();
            for series in simulator::gen_series(&s)? {
                let path = out.join(format!("{}.csv", series.key.file_stem()));
                write_series_csv(&path, &series)?;
                write_sidecar("simulate", &params, &inputs, &path, json!({"truth": s.truth}))?;
                manifest.push(ManifestEntry {
                    key: series.key,
                    path: PathBuf::from(file_name(&path)),
                });
                report.outputs.push(path);
            }
            let path = out.join("manifest.csv");
            save_manifest(&path, &manifest)?;
            report.outputs.push(path);
        }
        SimulationSpec::Lmm(s) => {
            for d in lmm_deltas(&s)? {
                let path = out.join(d.file_name());
                synoptic::write_delta_csv(&path, &d)?;
                write_sidecar("simulate", &params, &inputs, &path, json!({"lmm_truth": s.lmm_truth}))?;
                report.outputs.push(path);
            }
        }
    }
    write_run_record(out, "simulate", &params, &report)?;
    Ok(report)
}

/// Groups simulated mixed-model observations into change-draw sets keyed
/// `m{k}_tas_{scenario}_r{ℓ}i1p1f1_max_GL`.
pub fn lmm_deltas(s: &LmmSimSpec) -> Result<Vec<DeltaDraws>> {
    let obs = simulator::gen_lmm_dataset(&s.lmm_truth, &s.design, s.seed);
    let mut cells: std::collections::BTreeMap<(String, u32, Scenario), Vec<f64>> = Default::default();
    for o in obs {
        let r: u32 = o.ensemble.trim_start_matches('e').parse().expect("simulator labels ensembles e{n}");
        cells.entry((o.model, r, o.scenario)).or_default().push(o.value);
    }
    cells
        .into_iter()
        .map(|((model, r, scenario), values)| {
            let key = DatasetKey::new(
                model,
                Variable::Tas,
                scenario,
                EnsembleId::new(r, 1, 1, 1),
                Statistic::Max,
                Region::Zone(ZoneId::Global),
            )?;
            DeltaDraws::new(key, DeltaKind::Q, values, 0)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyParams {
    pub spec: PathBuf,
    pub chain: ChainConfig,
    pub n_datasets: usize,
    pub level: f64,
}

/// Coverage report as `coverage.json` and `coverage.csv`.
pub fn cmd_verify(p: &VerifyParams, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let spec = match load_simulation_spec(&p.spec)? {
        SimulationSpec::Series(s) => s,
        SimulationSpec::Lmm(_) => {
            return Err(Error::InvalidArgument("verify needs a GEVR or NHGR series spec".into()));
        }
    };
    let report = simulator::coverage_experiment(&spec, &p.chain, p.n_datasets, p.level)?;
    let inputs = [digest_file(&p.spec)?];
    let json_path = out.join("coverage.json");
    write_json(&json_path, &report)?;
    write_sidecar("verify", p, &inputs, &json_path, json!({"failed_fits": report.failed_fits}))?;
    let csv_path = out.join("coverage.csv");
    synoptic::write_rows_csv(&csv_path, &report.quantities)?;
    write_sidecar("verify", p, &inputs, &csv_path, json!({"failed_fits": report.failed_fits}))?;
    let run = RunReport {
        outputs: vec![json_path, csv_path],
        failures: Vec::new(),
    };
    write_run_record(out, "verify", p, &run)?;
    Ok(run)
}
