//! Cross-model summaries of posterior change draws: equal-GCM pooling,
//! expected change, probability of increase, box-whisker quantiles, and the
//! mixed-effects decomposition in [`lmm`].

pub mod lmm;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data_model::{csv_error, DatasetKey, QuantileSummary, Region, Scenario, Statistic, Variable};
use crate::error::{Error, Result};

pub use lmm::{fe_only_fit, lmm_fit, r_squared, FeFit, FitMethod, LmmFit, Observation, ScenarioEffects};

/// Which change functional a set of draws represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeltaKind {
    /// Change in the return value.
    Q,
    /// Change in the mean parameter.
    MParametric,
    /// Change in a predicted annual mean.
    MPredictive,
}

impl DeltaKind {
    pub fn code(self) -> &'static str {
        match self {
            DeltaKind::Q => "Q",
            DeltaKind::MParametric => "M-parametric",
            DeltaKind::MPredictive => "M-predictive",
        }
    }
}

impl fmt::Display for DeltaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for DeltaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Q" => Ok(DeltaKind::Q),
            "M-parametric" => Ok(DeltaKind::MParametric),
            "M-predictive" => Ok(DeltaKind::MPredictive),
            _ => Err(Error::parse("delta kind", s, "expected Q, M-parametric or M-predictive")),
        }
    }
}

impl Serialize for DeltaKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for DeltaKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Posterior draws of a change functional for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaDraws {
    pub key: DatasetKey,
    pub kind: DeltaKind,
    /// Non-empty and finite.
    pub draws: Vec<f64>,
    pub excluded: usize,
}

impl DeltaDraws {
    pub fn new(key: DatasetKey, kind: DeltaKind, draws: Vec<f64>, excluded: usize) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::NoValidDraws { excluded });
        }
        if let Some(v) = draws.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite change draw {v} for {key}")));
        }
        Ok(DeltaDraws {
            key,
            kind,
            draws,
            excluded,
        })
    }

    /// File name `{key stem}.delta-{kind}.csv`.
    pub fn file_name(&self) -> String {
        delta_file_name(&self.key, self.kind)
    }
}

pub fn delta_file_name(key: &DatasetKey, kind: DeltaKind) -> String {
    format!("{}.delta-{}.csv", key.file_stem(), kind)
}

/// Writes `draw,delta` rows.
pub fn write_delta_csv(path: &Path, d: &DeltaDraws) -> Result<()> {
    let mut out = Vec::with_capacity(d.draws.len() * 24);
    out.extend_from_slice(b"draw,delta\n");
    for (i, v) in d.draws.iter().enumerate() {
        writeln!(out, "{},{v}", i + 1).expect("write to Vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a delta file; key and kind come from the file name.
pub fn read_delta_csv(path: &Path) -> Result<DeltaDraws> {
    let key = DatasetKey::from_path(path)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let kind_text = name
        .split('.')
        .find_map(|part| part.strip_prefix("delta-"))
        .ok_or_else(|| Error::parse("delta file name", name, "expected {key}.delta-{kind}.csv"))?;
    let kind: DeltaKind = kind_text.parse()?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, 1, e))?;
    if headers.iter().collect::<Vec<_>>() != ["draw", "delta"] {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header 'draw,delta'".into(),
        });
    }
    let mut draws = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(path, line, e))?;
        let v: f64 = record
            .get(1)
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                line,
                message: format!("bad number: {e}"),
            })?;
        draws.push(v);
    }
    DeltaDraws::new(key, kind, draws, 0)
}

/// Draws with non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDraws {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedDraws {
    pub fn equal(values: Vec<f64>) -> Self {
        let w = 1.0 / values.len() as f64;
        let weights = vec![w; values.len()];
        WeightedDraws { values, weights }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pools draws giving each GCM total mass `1/G` and each of its ensembles
/// mass `1/(G·E_g)`, spread evenly over that ensemble's draws.
///
/// All groups must share variable, statistic, region, scenario and kind.
/// Groups repeating a (GCM, ensemble) pair are merged into one ensemble.
pub fn pool_equal_weight(groups: &[DeltaDraws]) -> Result<WeightedDraws> {
    let first = groups
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot pool an empty set of draws".into()))?;
    for g in groups {
        let k = &g.key;
        let f = &first.key;
        if (k.variable, k.statistic, &k.region, k.scenario, g.kind) != (f.variable, f.statistic, &f.region, f.scenario, first.kind) {
            return Err(Error::InvalidArgument(format!("cannot pool {} ({}) with {} ({})", k, g.kind, f, first.kind)));
        }
    }
    let mut counts: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
    for g in groups {
        *counts.entry(&g.key.gcm).or_default().entry(g.key.ensemble.to_string()).or_default() += g.draws.len();
    }
    let n_gcm = counts.len() as f64;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for g in groups {
        let ensembles = &counts[g.key.gcm.as_str()];
        let n_draws = ensembles[&g.key.ensemble.to_string()] as f64;
        let w = 1.0 / n_gcm / ensembles.len() as f64 / n_draws;
        values.extend_from_slice(&g.draws);
        weights.extend(std::iter::repeat_n(w, g.draws.len()));
    }
    Ok(WeightedDraws { values, weights })
}

/// Weighted mean.
pub fn expected_change(pooled: &WeightedDraws) -> f64 {
    // shifted by the first draw so constant draws are reproduced exactly
    let origin = pooled.values[0];
    let total: f64 = pooled.weights.iter().sum();
    origin + pooled.values.iter().zip(&pooled.weights).map(|(v, w)| (v - origin) * w).sum::<f64>() / total
}

/// Weighted fraction of draws strictly greater than zero.
pub fn prob_positive(pooled: &WeightedDraws) -> f64 {
    let total: f64 = pooled.weights.iter().sum();
    pooled
        .values
        .iter()
        .zip(&pooled.weights)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, w)| w)
        .sum::<f64>()
        / total
}

/// Weighted quantiles by linear interpolation between sorted draws, with
/// draw `k` placed at `(C_k - w_k) / (C_n - w_n)` where `C` is cumulative
/// weight. Equal weights give the usual type-7 rule.
pub fn weighted_quantiles(pooled: &WeightedDraws, probs: &[f64]) -> Vec<f64> {
    let mut pairs: Vec<(f64, f64)> = pooled.values.iter().copied().zip(pooled.weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    if n == 1 {
        return vec![pairs[0].0; probs.len()];
    }
    let mut positions = Vec::with_capacity(n);
    let mut cumulative = 0.0;
    for &(_, w) in &pairs {
        cumulative += w;
        positions.push(cumulative - w);
    }
    let span = cumulative - pairs[n - 1].1;
    positions.iter_mut().for_each(|u| *u /= span);
    probs
        .iter()
        .map(|&p| {
            let i = positions.partition_point(|&u| u <= p);
            if i == 0 {
                return pairs[0].0;
            }
            if i >= n {
                return pairs[n - 1].0;
            }
            let (u0, u1) = (positions[i - 1], positions[i]);
            let t = if u1 > u0 { (p - u0) / (u1 - u0) } else { 0.0 };
            pairs[i - 1].0 + t * (pairs[i].0 - pairs[i - 1].0)
        })
        .collect()
}

pub fn quantile_summary(pooled: &WeightedDraws) -> QuantileSummary {
    let q = weighted_quantiles(pooled, &[0.025, 0.25, 0.5, 0.75, 0.975]);
    QuantileSummary {
        mean: expected_change(pooled),
        median: q[2],
        q025: q[0],
        q25: q[1],
        q75: q[3],
        q975: q[4],
    }
}

/// Expected change and probability of increase for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub variable: Variable,
    pub zone: Region,
    pub scenario: Scenario,
    #[serde(rename = "E_delta")]
    pub e_delta: f64,
    #[serde(rename = "P_positive")]
    pub p_positive: f64,
}

/// Per-GCM quantile summary for box-whisker plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxWhiskerRow {
    pub variable: Variable,
    pub zone: Region,
    pub gcm: String,
    pub scenario: Scenario,
    pub mean: f64,
    pub median: f64,
    pub q025: f64,
    pub q25: f64,
    pub q75: f64,
    pub q975: f64,
}

/// Mixed-model summary for one (variable, zone).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    pub variable: Variable,
    pub zone: Region,
    pub iota_plus_g1: f64,
    pub g2_minus_g1: Option<f64>,
    pub g3_minus_g1: Option<f64>,
    #[serde(rename = "tau_R")]
    pub tau_r: f64,
    #[serde(rename = "tau_FE")]
    pub tau_fe: f64,
    pub tau_eps: f64,
    pub tau_delta: f64,
    pub tau_zeta: f64,
    #[serde(rename = "R2_FE")]
    pub r2_fe: Option<f64>,
    #[serde(rename = "R2_ME")]
    pub r2_me: Option<f64>,
}

impl Table3Row {
    pub fn new(variable: Variable, zone: Region, fit: &LmmFit) -> Self {
        Table3Row {
            variable,
            zone,
            iota_plus_g1: fit.effects.intercept_plus_g1,
            g2_minus_g1: fit.effects.g2_minus_g1,
            g3_minus_g1: fit.effects.g3_minus_g1,
            tau_r: fit.tau_r,
            tau_fe: fit.tau_fe,
            tau_eps: fit.tau_eps,
            tau_delta: fit.tau_delta,
            tau_zeta: fit.tau_zeta,
            r2_fe: fit.r2_fe,
            r2_me: fit.r2_me,
        }
    }
}

/// The single (kind, statistic) shared by every set of draws.
fn common_kind(deltas: &[DeltaDraws]) -> Result<(DeltaKind, Statistic)> {
    let first = deltas
        .first()
        .ok_or_else(|| Error::InvalidArgument("no change draws to summarize".into()))?;
    let kind = (first.kind, first.key.statistic);
    if let Some(d) = deltas.iter().find(|d| (d.kind, d.key.statistic) != kind) {
        return Err(Error::InvalidArgument(format!(
            "mixed inputs: {} ({}) and {} ({}); summarize one kind and statistic at a time",
            first.key, first.kind, d.key, d.kind
        )));
    }
    Ok(kind)
}

/// Pools by (variable, zone, scenario) and by (variable, zone, GCM,
/// scenario). Rows are sorted by their key fields.
pub fn summarize(deltas: &[DeltaDraws]) -> Result<(Vec<Table2Row>, Vec<BoxWhiskerRow>)> {
    common_kind(deltas)?;
    let mut by_scenario: BTreeMap<(Variable, Region, Scenario), Vec<DeltaDraws>> = BTreeMap::new();
    let mut by_gcm: BTreeMap<(Variable, Region, String, Scenario), Vec<DeltaDraws>> = BTreeMap::new();
    for d in deltas {
        let k = &d.key;
        by_scenario.entry((k.variable, k.region.clone(), k.scenario)).or_default().push(d.clone());
        by_gcm
            .entry((k.variable, k.region.clone(), k.gcm.clone(), k.scenario))
            .or_default()
            .push(d.clone());
    }
    let mut table = Vec::new();
    for ((variable, zone, scenario), groups) in by_scenario {
        let pooled = pool_equal_weight(&groups)?;
        table.push(Table2Row {
            variable,
            zone,
            scenario,
            e_delta: expected_change(&pooled),
            p_positive: prob_positive(&pooled),
        });
    }
    let mut boxes = Vec::new();
    for ((variable, zone, gcm, scenario), groups) in by_gcm {
        let s = quantile_summary(&pool_equal_weight(&groups)?);
        boxes.push(BoxWhiskerRow {
            variable,
            zone,
            gcm,
            scenario,
            mean: s.mean,
            median: s.median,
            q025: s.q025,
            q25: s.q25,
            q75: s.q75,
            q975: s.q975,
        });
    }
    Ok((table, boxes))
}

/// Mixed-model observations: every draw labelled by scenario, GCM and
/// ensemble.
pub fn observations(deltas: &[DeltaDraws]) -> Vec<Observation> {
    deltas
        .iter()
        .flat_map(|d| {
            d.draws.iter().map(move |&value| Observation {
                value,
                scenario: d.key.scenario,
                model: d.key.gcm.clone(),
                ensemble: d.key.ensemble.to_string(),
            })
        })
        .collect()
}

/// One mixed-model fit per (variable, zone), sorted by key.
pub fn lmm_table(deltas: &[DeltaDraws], method: FitMethod) -> Result<Vec<(Table3Row, LmmFit)>> {
    common_kind(deltas)?;
    let mut groups: BTreeMap<(Variable, Region), Vec<DeltaDraws>> = BTreeMap::new();
    for d in deltas {
        groups.entry((d.key.variable, d.key.region.clone())).or_default().push(d.clone());
    }
    groups
        .into_iter()
        .map(|((variable, zone), ds)| {
            let fit = lmm_fit(&observations(&ds), method)?;
            Ok((Table3Row::new(variable, zone, &fit), fit))
        })
        .collect()
}

/// Serializes rows to CSV with a header.
pub fn write_rows_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    for (i, row) in rows.iter().enumerate() {
        writer.serialize(row).map_err(|e| csv_error(path, i + 2, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{EnsembleId, ZoneId};
    use crate::stats;

    fn key(gcm: &str, r: u32, scenario: Scenario) -> DatasetKey {
        DatasetKey::new(
            gcm,
            Variable::Tas,
            scenario,
            EnsembleId::new(r, 1, 1, 1),
            Statistic::Max,
            Region::Zone(ZoneId::Global),
        )
        .unwrap()
    }

    fn draws(gcm: &str, r: u32, values: Vec<f64>) -> DeltaDraws {
        DeltaDraws::new(key(gcm, r, Scenario::Ssp585), DeltaKind::Q, values, 0).unwrap()
    }

    #[test]
    fn single_group_has_identity_weights() {
        let pooled = pool_equal_weight(&[draws("AC", 1, vec![1.0, 2.0, 3.0, 4.0])]).unwrap();
        assert!(pooled.weights.iter().all(|&w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn equal_gcm_mass() {
        let mut groups = vec![draws("AC", 1, vec![1.0; 10])];
        for r in 1..=4 {
            groups.push(draws("UK", r, vec![2.0; 10]));
        }
        let pooled = pool_equal_weight(&groups).unwrap();
        // (1/2)(1/1)/10 against (1/2)(1/4)/10
        assert!((pooled.weights[0] / pooled.weights[10] - 4.0).abs() < 1e-12);
        assert!((pooled.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((expected_change(&pooled) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn duplicating_a_gcm_leaves_expectation_unchanged() {
        let a = draws("AC", 1, vec![1.0, 3.0]);
        let b = draws("UK", 1, vec![-2.0, 0.5, 7.0]);
        let once = expected_change(&pool_equal_weight(&[a.clone(), b.clone()]).unwrap());
        let twice = expected_change(&pool_equal_weight(&[a.clone(), b.clone(), b]).unwrap());
        assert!((once - twice).abs() < 1e-12);
    }

    #[test]
    fn mixed_groups_are_rejected() {
        let a = draws("AC", 1, vec![1.0]);
        let b = DeltaDraws::new(key("UK", 1, Scenario::Ssp126), DeltaKind::Q, vec![1.0], 0).unwrap();
        assert!(pool_equal_weight(&[a, b]).is_err());
        assert!(pool_equal_weight(&[]).is_err());
        assert!(DeltaDraws::new(key("AC", 1, Scenario::Ssp126), DeltaKind::Q, vec![], 5).is_err());
    }

    #[test]
    fn expectation_and_probability_examples() {
        let c = WeightedDraws::equal(vec![2.0; 7]);
        assert_eq!((expected_change(&c), prob_positive(&c)), (2.0, 1.0));
        let sym = WeightedDraws::equal(vec![-3.0, 3.0, -1.0, 1.0]);
        assert_eq!((expected_change(&sym), prob_positive(&sym)), (0.0, 0.5));
        let zero = WeightedDraws::equal(vec![0.0, 1.0]);
        assert_eq!(prob_positive(&zero), 0.5);
    }

    #[test]
    fn quantile_examples() {
        let c = quantile_summary(&WeightedDraws::equal(vec![4.2; 9]));
        assert_eq!([c.mean, c.median, c.q025, c.q25, c.q75, c.q975], [4.2; 6]);
        let grid: Vec<f64> = (1..=1000).map(f64::from).collect();
        let s = quantile_summary(&WeightedDraws::equal(grid.clone()));
        assert!((s.q25 - 250.75).abs() < 1e-9);
        for p in [0.0, 0.025, 0.3, 0.5, 0.975, 1.0] {
            let w = weighted_quantiles(&WeightedDraws::equal(grid.clone()), &[p])[0];
            assert!((w - stats::quantile(&grid, p)).abs() < 1e-9);
        }
        assert!(s.is_ordered());
    }

    #[test]
    fn integer_weights_match_replication() {
        // weight 2 on a value behaves like a repeated draw at the extremes
        let weighted = WeightedDraws {
            values: vec![1.0, 2.0],
            weights: vec![0.5, 0.5],
        };
        assert_eq!(weighted_quantiles(&weighted, &[0.0, 0.5, 1.0]), vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn delta_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = draws("AC", 2, vec![0.1, -2.5, 1e-300, 3.0]);
        let path = dir.path().join(d.file_name());
        write_delta_csv(&path, &d).unwrap();
        let back = read_delta_csv(&path).unwrap();
        assert_eq!((back.key, back.kind, back.draws), (d.key, d.kind, d.draws));
    }

    #[test]
    fn summarize_rows() {
        let groups = vec![draws("AC", 1, vec![1.0, 2.0]), draws("UK", 1, vec![-1.0, 3.0]), draws("UK", 2, vec![5.0])];
        let (table, boxes) = summarize(&groups).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(boxes.len(), 2);
        let oracle = pool_equal_weight(&groups).unwrap();
        assert_eq!(table[0].e_delta, expected_change(&oracle));
        assert!(summarize(&[]).is_err());
    }
}
