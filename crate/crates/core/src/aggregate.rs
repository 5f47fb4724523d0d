//! Spatial compilation of annual grid output into zonal and global annual
//! series, plus the exploratory smoothing and slope screens.

use std::collections::HashMap;
use std::path::Path;

use crate::data_model::{csv_error, AnnualSeries, DatasetKey, Statistic, ZoneId};
use crate::error::{Error, Result};
use crate::stats;

/// Annualized gridded output `y(year, location)`. Missing cells are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    /// `(lat, lon)` in degrees. Longitude is carried for provenance only.
    pub locations: Vec<(f64, f64)>,
    pub years: Vec<i32>,
    /// Row-major, `values[year_index * locations.len() + location_index]`.
    pub values: Vec<f64>,
}

impl GridSeries {
    pub fn new(locations: Vec<(f64, f64)>, years: Vec<i32>, values: Vec<f64>) -> Result<Self> {
        if values.len() != locations.len() * years.len() {
            return Err(Error::Validation(format!(
                "grid has {} values for {} years x {} locations",
                values.len(),
                years.len(),
                locations.len()
            )));
        }
        if let Some(&(lat, _)) = locations.iter().find(|(lat, _)| !(lat.abs() <= 90.0)) {
            return Err(Error::Validation(format!("latitude {lat} outside [-90, 90]")));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::Validation("grid values must be finite or missing".into()));
        }
        Ok(GridSeries {
            locations,
            years,
            values,
        })
    }

    pub fn value(&self, year_index: usize, location: usize) -> f64 {
        self.values[year_index * self.locations.len() + location]
    }

    /// Indices of locations falling in `zone` (all locations for `Global`).
    pub fn zone_locations(&self, zone: ZoneId) -> Vec<usize> {
        (0..self.locations.len())
            .filter(|&j| zone.contains(self.locations[j].0))
            .collect()
    }

    /// Reads long-format `year,lat,lon,value` CSV. Empty, `NA` or `NaN`
    /// values are missing; absent (year, location) pairs are missing too.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, 1, e))?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["year", "lat", "lon", "value"] {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: 1,
                message: "expected header 'year,lat,lon,value'".into(),
            });
        }
        let mut years: Vec<i32> = Vec::new();
        let mut locations: Vec<(f64, f64)> = Vec::new();
        let mut location_index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut cells: Vec<(i32, usize, f64)> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_error(path, line, e))?;
            let bad = |message: String| Error::Format {
                path: path.to_path_buf(),
                line,
                message,
            };
            let field = |k: usize| record.get(k).unwrap_or("").trim();
            let year: i32 = field(0).parse().map_err(|_| bad(format!("bad year {:?}", field(0))))?;
            let lat: f64 = field(1).parse().map_err(|_| bad(format!("bad lat {:?}", field(1))))?;
            let lon: f64 = field(2).parse().map_err(|_| bad(format!("bad lon {:?}", field(2))))?;
            if !(lat.abs() <= 90.0) {
                return Err(bad(format!("latitude {lat} outside [-90, 90]")));
            }
            let value = match field(3) {
                "" | "NA" | "NaN" | "nan" => f64::NAN,
                text => text.parse().map_err(|_| bad(format!("bad value {text:?}")))?,
            };
            let loc = *location_index.entry((lat.to_bits(), lon.to_bits())).or_insert_with(|| {
                locations.push((lat, lon));
                locations.len() - 1
            });
            cells.push((year, loc, value));
        }
        for &(year, _, _) in &cells {
            years.push(year);
        }
        years.sort_unstable();
        years.dedup();
        let n_loc = locations.len();
        let mut values = vec![f64::NAN; years.len() * n_loc];
        for (year, loc, value) in cells {
            let yi = years.binary_search(&year).expect("year collected above");
            values[yi * n_loc + loc] = value;
        }
        GridSeries::new(locations, years, values)
    }
}

/// Latitude band of `lat` under the half-open convention.
pub fn zone_of(lat: f64) -> Result<ZoneId> {
    ZoneId::BANDS
        .into_iter()
        .find(|z| z.contains(lat))
        .ok_or_else(|| Error::InvalidArgument(format!("latitude {lat} outside [-90, 90]")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanWeighting {
    /// Arithmetic mean over grid points.
    #[default]
    Unweighted,
    /// Weighted by cos(latitude).
    CosLatitude,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AggregateOptions {
    /// Compute statistics over present locations instead of failing.
    pub skip_missing: bool,
    pub mean_weighting: MeanWeighting,
}

fn reduce_zone<F>(g: &GridSeries, zone: ZoneId, opts: AggregateOptions, mut reduce: F) -> Result<Vec<f64>>
where
    F: FnMut(&[(usize, f64)]) -> f64,
{
    let members = g.zone_locations(zone);
    if members.is_empty() {
        return Err(Error::EmptyZone(zone.name().to_string()));
    }
    let mut present = Vec::with_capacity(members.len());
    g.years
        .iter()
        .enumerate()
        .map(|(yi, &year)| {
            present.clear();
            for &j in &members {
                let v = g.value(yi, j);
                if v.is_nan() {
                    if !opts.skip_missing {
                        return Err(Error::MissingValue {
                            year,
                            zone: zone.name().to_string(),
                        });
                    }
                } else {
                    present.push((j, v));
                }
            }
            if present.is_empty() {
                return Err(Error::AllMissing {
                    year,
                    zone: zone.name().to_string(),
                });
            }
            Ok(reduce(&present))
        })
        .collect()
}

/// Per-year spatial maximum or minimum over the zone's locations.
pub fn spatial_extreme(g: &GridSeries, zone: ZoneId, kind: Extreme, opts: AggregateOptions) -> Result<Vec<f64>> {
    reduce_zone(g, zone, opts, |cells| {
        let it = cells.iter().map(|&(_, v)| v);
        match kind {
            Extreme::Max => it.fold(f64::NEG_INFINITY, f64::max),
            Extreme::Min => it.fold(f64::INFINITY, f64::min),
        }
    })
}

/// Per-year mean over the zone's locations (unweighted unless configured).
pub fn zone_mean(g: &GridSeries, zone: ZoneId, opts: AggregateOptions) -> Result<Vec<f64>> {
    reduce_zone(g, zone, opts, |cells| match opts.mean_weighting {
        MeanWeighting::Unweighted => cells.iter().map(|&(_, v)| v).sum::<f64>() / cells.len() as f64,
        MeanWeighting::CosLatitude => {
            let (num, den) = cells.iter().fold((0.0, 0.0), |(num, den), &(j, v)| {
                let w = g.locations[j].0.to_radians().cos();
                (num + w * v, den + w)
            });
            num / den
        }
    })
}

/// Surface-area fraction of each latitude band on a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneWeights {
    /// In the order of [`ZoneId::BANDS`].
    pub fractions: [f64; 5],
}

impl ZoneWeights {
    pub fn get(&self, zone: ZoneId) -> Option<f64> {
        ZoneId::BANDS.iter().position(|&z| z == zone).map(|i| self.fractions[i])
    }
}

/// `(sin(upper) - sin(lower)) / 2` per band.
pub fn zone_area_fractions() -> ZoneWeights {
    let mut fractions = [0.0; 5];
    for (f, zone) in fractions.iter_mut().zip(ZoneId::BANDS) {
        let (lo, hi) = zone.bounds().expect("bands have bounds");
        *f = (hi.to_radians().sin() - lo.to_radians().sin()) / 2.0;
    }
    ZoneWeights { fractions }
}

/// Area-weighted global mean from the five band means, given in the order of
/// [`ZoneId::BANDS`]. Weights are renormalized to sum to one.
pub fn global_mean(zone_means: [&[f64]; 5], w: &ZoneWeights) -> Result<Vec<f64>> {
    let n = zone_means[0].len();
    if zone_means.iter().any(|z| z.len() != n) {
        return Err(Error::Validation("zone mean series cover different years".into()));
    }
    let total: f64 = w.fractions.iter().sum();
    Ok((0..n)
        .map(|i| {
            zone_means
                .iter()
                .zip(&w.fractions)
                .map(|(z, wk)| wk / total * z[i])
                .sum()
        })
        .collect())
}

/// Centred moving median with a window of `half_window` years on each side,
/// shrinking at the ends of the series.
pub fn moving_median_smooth(values: &[f64], half_window: usize) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_window);
            let hi = (i + half_window + 1).min(n);
            stats::median(&values[lo..hi])
        })
        .collect()
}

/// Least-squares slope of value on calendar year, in units per year.
pub fn ols_slope(s: &AnnualSeries) -> Result<f64> {
    let n = s.values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("slope needs at least 2 years, got {n}")));
    }
    // years are centred to keep the normal equations well conditioned
    let t_mean = (n - 1) as f64 / 2.0;
    let y_mean = stats::mean(&s.values);
    let (sxy, sxx) = s.values.iter().enumerate().fold((0.0, 0.0), |(sxy, sxx), (i, &y)| {
        let dt = i as f64 - t_mean;
        (sxy + dt * (y - y_mean), sxx + dt * dt)
    });
    Ok(sxy / sxx)
}

/// Sign-flips a minima series so it can be analysed as maxima. Applying it
/// to a negated series restores the original.
pub fn negate(s: &AnnualSeries) -> Result<AnnualSeries> {
    let statistic = match s.key.statistic {
        Statistic::Min => Statistic::NegatedMin,
        Statistic::NegatedMin => Statistic::Min,
        other => {
            return Err(Error::InvalidArgument(format!(
                "negation applies to minima series, not {other}"
            )))
        }
    };
    Ok(AnnualSeries {
        key: DatasetKey {
            statistic,
            ..s.key.clone()
        },
        base_year: s.base_year,
        span: s.span,
        values: s.values.iter().map(|v| -v).collect(),
    })
}
