//! Shared vocabulary: dataset identifiers, annual series, summaries, and the
//! manifest and series file formats.
//!
//! Every enum has a canonical text token (used in manifests, filenames, and
//! output tables) and parses back from it.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// Climate variable with its fixed unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Rsds,
    SfcWind,
    SfcWindmax,
    Tas,
}

impl Variable {
    pub const ALL: [Variable; 4] = [
        Variable::Rsds,
        Variable::SfcWind,
        Variable::SfcWindmax,
        Variable::Tas,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Variable::Rsds => "rsds",
            Variable::SfcWind => "sfcWind",
            Variable::SfcWindmax => "sfcWindmax",
            Variable::Tas => "tas",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Variable::Rsds => "Wm-2",
            Variable::SfcWind | Variable::SfcWindmax => "ms-1",
            Variable::Tas => "K",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.code() == s)
            .ok_or_else(|| Error::parse("variable", s, "expected one of rsds, sfcWind, sfcWindmax, tas"))
    }
}

string_serde!(Variable);

/// Emission scenario. `Ssp126` (index 1) is the reference category of the
/// mixed-effects model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Ssp126,
    Ssp245,
    Ssp585,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Ssp126, Scenario::Ssp245, Scenario::Ssp585];

    /// One-based index j.
    pub fn index(self) -> usize {
        match self {
            Scenario::Ssp126 => 1,
            Scenario::Ssp245 => 2,
            Scenario::Ssp585 => 3,
        }
    }

    pub fn from_index(j: usize) -> Option<Self> {
        Scenario::ALL.get(j.wrapping_sub(1)).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Scenario::Ssp126 => "SSP126",
            Scenario::Ssp245 => "SSP245",
            Scenario::Ssp585 => "SSP585",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|v| v.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::parse("scenario", s, "expected SSP126, SSP245 or SSP585"))
    }
}

string_serde!(Scenario);

/// Ensemble member label `r{r}i{i}p{p}f{f}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnsembleId {
    pub realization: u32,
    pub initialization: u32,
    pub physics: u32,
    pub forcing: u32,
}

impl EnsembleId {
    pub fn new(realization: u32, initialization: u32, physics: u32, forcing: u32) -> Self {
        EnsembleId {
            realization,
            initialization,
            physics,
            forcing,
        }
    }
}

impl fmt::Display for EnsembleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "r{}i{}p{}f{}",
            self.realization, self.initialization, self.physics, self.forcing
        )
    }
}

/// Parses an ensemble label such as `r1i1p1f2`.
pub fn parse_ensemble_id(text: &str) -> Result<EnsembleId> {
    let mut fields = [0u32; 4];
    let mut rest = text;
    for (slot, tag) in fields.iter_mut().zip(['r', 'i', 'p', 'f']) {
        let Some(stripped) = rest.strip_prefix(tag) else {
            let found: String = rest.chars().take(1).collect();
            let found = if found.is_empty() { "end of input".to_string() } else { format!("{found:?}") };
            return Err(Error::parse(
                "ensemble id",
                text,
                format!("expected '{tag}' at offset {}, found {found}", text.len() - rest.len()),
            ));
        };
        let digits = stripped.len() - stripped.trim_start_matches(|c: char| c.is_ascii_digit()).len();
        let token = &stripped[..digits];
        if token.is_empty() {
            return Err(Error::parse("ensemble id", text, format!("missing number after '{tag}'")));
        }
        if token.starts_with('0') {
            return Err(Error::parse(
                "ensemble id",
                text,
                format!("'{tag}{token}' must be a positive integer without leading zeros"),
            ));
        }
        *slot = token
            .parse()
            .map_err(|_| Error::parse("ensemble id", text, format!("'{tag}{token}' out of range")))?;
        rest = &stripped[digits..];
    }
    if !rest.is_empty() {
        return Err(Error::parse("ensemble id", text, format!("trailing token {rest:?}")));
    }
    Ok(EnsembleId::new(fields[0], fields[1], fields[2], fields[3]))
}

impl FromStr for EnsembleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_ensemble_id(s)
    }
}

string_serde!(EnsembleId);

/// Annual block statistic. `NegatedMin` labels a minima series after sign
/// flipping, so it can be analysed as a maxima series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Statistic {
    Max,
    Min,
    Mean,
    NegatedMin,
}

impl Statistic {
    pub fn code(self) -> &'static str {
        match self {
            Statistic::Max => "max",
            Statistic::Min => "min",
            Statistic::Mean => "mean",
            Statistic::NegatedMin => "negmin",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Statistic::Max),
            "min" => Ok(Statistic::Min),
            "mean" => Ok(Statistic::Mean),
            "negmin" => Ok(Statistic::NegatedMin),
            _ => Err(Error::parse("statistic", s, "expected max, min, mean or negmin")),
        }
    }
}

string_serde!(Statistic);

/// Climate zone. Latitude intervals are half-open `[lower, upper)` with the
/// Arctic closed at +90.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ZoneId {
    Antarctic,
    TemperateSouth,
    Tropical,
    TemperateNorth,
    Arctic,
    Global,
}

impl ZoneId {
    /// The five latitude bands, south to north.
    pub const BANDS: [ZoneId; 5] = [
        ZoneId::Antarctic,
        ZoneId::TemperateSouth,
        ZoneId::Tropical,
        ZoneId::TemperateNorth,
        ZoneId::Arctic,
    ];

    pub const ALL: [ZoneId; 6] = [
        ZoneId::Global,
        ZoneId::Antarctic,
        ZoneId::TemperateSouth,
        ZoneId::Tropical,
        ZoneId::TemperateNorth,
        ZoneId::Arctic,
    ];

    /// Latitude bounds in degrees; `None` for `Global`.
    pub fn bounds(self) -> Option<(f64, f64)> {
        match self {
            ZoneId::Antarctic => Some((-90.0, -66.5)),
            ZoneId::TemperateSouth => Some((-66.5, -23.5)),
            ZoneId::Tropical => Some((-23.5, 23.5)),
            ZoneId::TemperateNorth => Some((23.5, 66.5)),
            ZoneId::Arctic => Some((66.5, 90.0)),
            ZoneId::Global => None,
        }
    }

    /// Whether latitude `lat` falls in this zone (half-open convention).
    pub fn contains(self, lat: f64) -> bool {
        match self.bounds() {
            None => (-90.0..=90.0).contains(&lat),
            Some((lo, hi)) if self == ZoneId::Arctic => lat >= lo && lat <= hi,
            Some((lo, hi)) => lat >= lo && lat < hi,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ZoneId::Antarctic => "AN",
            ZoneId::TemperateSouth => "TS",
            ZoneId::Tropical => "TR",
            ZoneId::TemperateNorth => "TN",
            ZoneId::Arctic => "AR",
            ZoneId::Global => "GL",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ZoneId::Antarctic => "Antarctic",
            ZoneId::TemperateSouth => "TemperateSouth",
            ZoneId::Tropical => "Tropical",
            ZoneId::TemperateNorth => "TemperateNorth",
            ZoneId::Arctic => "Arctic",
            ZoneId::Global => "Global",
        }
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ZoneId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ZoneId::ALL
            .into_iter()
            .find(|z| z.code() == s || z.name() == s)
            .ok_or_else(|| Error::parse("zone", s, "expected GL, AN, TS, TR, TN or AR"))
    }
}

string_serde!(ZoneId);

/// Spatial domain of a dataset: a climate zone, or a named single location
/// (text form `loc-<name>`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Zone(ZoneId),
    Location(String),
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Zone(z) => write!(f, "{z}"),
            Region::Location(name) => write!(f, "loc-{name}"),
        }
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(name) = s.strip_prefix("loc-") {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric()) {
                return Err(Error::parse("location", s, "location names must be non-empty ASCII alphanumerics"));
            }
            return Ok(Region::Location(name.to_string()));
        }
        s.parse().map(Region::Zone)
    }
}

string_serde!(Region);

/// Identity of one annual series.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DatasetKey {
    pub gcm: String,
    pub variable: Variable,
    pub scenario: Scenario,
    pub ensemble: EnsembleId,
    pub statistic: Statistic,
    #[serde(rename = "zone")]
    pub region: Region,
}

impl DatasetKey {
    pub fn new(
        gcm: impl Into<String>,
        variable: Variable,
        scenario: Scenario,
        ensemble: EnsembleId,
        statistic: Statistic,
        region: Region,
    ) -> Result<Self> {
        let key = DatasetKey {
            gcm: gcm.into(),
            variable,
            scenario,
            ensemble,
            statistic,
            region,
        };
        key.check()?;
        Ok(key)
    }

    /// Checks the tag alphabet and that minima are only used for `tas`.
    pub fn check(&self) -> Result<()> {
        if self.gcm.is_empty() || !self.gcm.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::parse("gcm tag", &self.gcm, "must be non-empty ASCII alphanumerics or '-'"));
        }
        if matches!(self.statistic, Statistic::Min | Statistic::NegatedMin) && self.variable != Variable::Tas {
            return Err(Error::Validation(format!(
                "statistic {} is only permitted for tas, not {}",
                self.statistic, self.variable
            )));
        }
        Ok(())
    }

    /// File stem `{gcm}_{variable}_{scenario}_{ensemble}_{statistic}_{region}`.
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}_{}_{}_{}_{}",
            self.gcm, self.variable, self.scenario, self.ensemble, self.statistic, self.region
        )
    }

    /// Inverse of [`DatasetKey::file_stem`].
    pub fn from_file_stem(stem: &str) -> Result<Self> {
        let parts: Vec<&str> = stem.split('_').collect();
        let [gcm, variable, scenario, ensemble, statistic, region] = parts[..] else {
            return Err(Error::parse(
                "dataset file stem",
                stem,
                "expected gcm_variable_scenario_ensemble_statistic_zone",
            ));
        };
        DatasetKey::new(
            gcm,
            variable.parse()?,
            scenario.parse()?,
            ensemble.parse()?,
            statistic.parse()?,
            region.parse()?,
        )
    }

    /// Dataset key from a path whose file name begins with a key stem
    /// (anything after the first `.` is ignored).
    pub fn from_path(path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::parse("dataset file name", &path.display().to_string(), "not valid UTF-8"))?;
        let stem = name.split('.').next().unwrap_or(name);
        DatasetKey::from_file_stem(stem)
    }
}

impl fmt::Display for DatasetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.file_stem())
    }
}

/// One annual statistic per calendar year, starting at `base_year`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries {
    pub key: DatasetKey,
    pub base_year: i32,
    /// Nominal number of years P.
    pub span: usize,
    pub values: Vec<f64>,
}

impl AnnualSeries {
    /// Series whose nominal span equals the number of values.
    pub fn new(key: DatasetKey, base_year: i32, values: Vec<f64>) -> Self {
        let span = values.len();
        AnnualSeries {
            key,
            base_year,
            span,
            values,
        }
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.values.len()).map(move |i| self.base_year + i as i32)
    }

    pub fn end_year(&self) -> i32 {
        self.base_year + self.values.len() as i32 - 1
    }
}

/// One problem found by [`validate_series`].
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesIssue {
    LengthMismatch { expected: usize, found: usize },
    NonFinite { year: i32, value: f64 },
    NonPositiveKelvin { year: i32, value: f64 },
    Outlier { year: i32, value: f64, median: f64, iqr: f64 },
}

impl fmt::Display for SeriesIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesIssue::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
            SeriesIssue::NonFinite { year, value } => write!(f, "{year}: non-finite value {value}"),
            SeriesIssue::NonPositiveKelvin { year, value } => {
                write!(f, "{year}: non-positive temperature {value} K")
            }
            SeriesIssue::Outlier { year, value, median, iqr } => {
                write!(f, "{year}: value {value} is far from median {median} (IQR {iqr})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<SeriesIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    /// Hard violations, i.e. everything except outlier flags.
    pub fn violations(&self) -> impl Iterator<Item = &SeriesIssue> {
        self.issues.iter().filter(|i| !matches!(i, SeriesIssue::Outlier { .. }))
    }

    pub fn outliers(&self) -> impl Iterator<Item = &SeriesIssue> {
        self.issues.iter().filter(|i| matches!(i, SeriesIssue::Outlier { .. }))
    }
}

/// Default outlier multiplier k in `|x - median| > k * IQR`.
pub const DEFAULT_OUTLIER_IQR_MULTIPLE: f64 = 10.0;

/// Report-only checks: length, finiteness, Kelvin positivity for `tas`, and
/// values more than `outlier_k` interquartile ranges from the median.
pub fn validate_series(s: &AnnualSeries, outlier_k: f64) -> ValidationReport {
    let mut issues = Vec::new();
    if s.values.len() != s.span {
        issues.push(SeriesIssue::LengthMismatch {
            expected: s.span,
            found: s.values.len(),
        });
    }
    for (year, &value) in s.years().zip(&s.values) {
        if !value.is_finite() {
            issues.push(SeriesIssue::NonFinite { year, value });
        } else if s.key.variable == Variable::Tas
            && s.key.statistic != Statistic::NegatedMin
            && value <= 0.0
        {
            issues.push(SeriesIssue::NonPositiveKelvin { year, value });
        }
    }
    let finite: Vec<f64> = s.values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() >= 4 {
        let mut sorted = finite;
        sorted.sort_by(f64::total_cmp);
        let median = stats::quantile_sorted(&sorted, 0.5);
        let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
        for (year, &value) in s.years().zip(&s.values) {
            if value.is_finite() && (value - median).abs() > outlier_k * iqr && iqr > 0.0 {
                issues.push(SeriesIssue::Outlier { year, value, median, iqr });
            }
        }
    }
    ValidationReport { issues }
}

/// Five-number-plus-mean posterior summary used for box-whisker output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub mean: f64,
    pub median: f64,
    pub q025: f64,
    pub q25: f64,
    pub q75: f64,
    pub q975: f64,
}

impl QuantileSummary {
    pub fn is_ordered(&self) -> bool {
        self.q025 <= self.q25 && self.q25 <= self.median && self.median <= self.q75 && self.q75 <= self.q975
    }
}

// ---- manifest ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestRecord {
    gcm: String,
    variable: String,
    scenario: String,
    ensemble: String,
    statistic: String,
    zone: String,
    path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub key: DatasetKey,
    pub path: PathBuf,
}

/// Reads a JSON manifest; relative paths are resolved against the manifest's
/// directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<ManifestRecord> = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let key = DatasetKey::new(
            r.gcm,
            r.variable.parse()?,
            r.scenario.parse()?,
            r.ensemble.parse()?,
            r.statistic.parse()?,
            r.zone.parse()?,
        )?;
        if !seen.insert(key.clone()) {
            return Err(Error::DuplicateKey(key.to_string()));
        }
        let path = if r.path.is_absolute() { r.path } else { base.join(r.path) };
        entries.push(ManifestEntry { key, path });
    }
    Ok(entries)
}

/// Writes entries as a JSON manifest (paths stored as given).
pub fn save_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let records: Vec<ManifestRecord> = entries
        .iter()
        .map(|e| ManifestRecord {
            gcm: e.key.gcm.clone(),
            variable: e.key.variable.to_string(),
            scenario: e.key.scenario.to_string(),
            ensemble: e.key.ensemble.to_string(),
            statistic: e.key.statistic.to_string(),
            zone: e.key.region.to_string(),
            path: e.path.clone(),
        })
        .collect();
    let text = serde_json::to_string_pretty(&records).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

// ---- series CSV ----

/// Reads a `year,value` CSV. Years must increase by exactly one per row.
pub fn read_series_csv(path: &Path, key: DatasetKey) -> Result<AnnualSeries> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, 1, e))?.clone();
    if headers.len() != 2 || &headers[0] != "year" || &headers[1] != "value" {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header 'year,value', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut base_year = None;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(path, line, e))?;
        let bad = |message: String| Error::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let year: i32 = record[0].trim().parse().map_err(|_| bad(format!("bad year {:?}", &record[0])))?;
        let value: f64 = record[1].trim().parse().map_err(|_| bad(format!("bad value {:?}", &record[1])))?;
        let expected = *base_year.get_or_insert(year) + values.len() as i32;
        if year != expected {
            return Err(bad(format!("expected year {expected}, found {year}")));
        }
        values.push(value);
    }
    let base_year = base_year.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        line: 1,
        message: "no data rows".into(),
    })?;
    Ok(AnnualSeries::new(key, base_year, values))
}

pub fn write_series_csv(path: &Path, s: &AnnualSeries) -> Result<()> {
    let mut out = String::from("year,value\n");
    for (year, value) in s.years().zip(&s.values) {
        out.push_str(&format!("{year},{value}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, line: usize, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(line);
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!("is_io_error checked above");
    }
    Error::Format {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}
