//! Compile zonal maxima and an area-weighted global mean from a small grid.

use climext::aggregate::{self, AggregateOptions, Extreme, GridSeries};
use climext::data_model::ZoneId;

fn main() -> climext::error::Result<()> {
    let locations = vec![(-75.0, 10.0), (-40.0, 20.0), (0.0, 30.0), (45.0, 40.0), (80.0, 50.0), (10.0, 60.0)];
    let years: Vec<i32> = (2015..2020).collect();
    let values: Vec<f64> = years
        .iter()
        .flat_map(|&y| locations.iter().map(move |&(lat, _)| 290.0 - 0.4 * f64::abs(lat) + 0.05 * f64::from(y - 2015)))
        .collect();
    let grid = GridSeries::new(locations, years, values)?;
    let opts = AggregateOptions::default();

    for zone in ZoneId::BANDS {
        let maxima = aggregate::spatial_extreme(&grid, zone, Extreme::Max, opts)?;
        println!("{:<15} max {:?}", zone.name(), maxima);
    }
    let weights = aggregate::zone_area_fractions();
    let means: Vec<Vec<f64>> = ZoneId::BANDS.iter().map(|&z| aggregate::zone_mean(&grid, z, opts)).collect::<Result<_, _>>()?;
    let global = aggregate::global_mean(std::array::from_fn(|i| means[i].as_slice()), &weights)?;
    println!("area fractions  {:?}", weights.fractions);
    println!("global mean     {global:?}");
    Ok(())
}
