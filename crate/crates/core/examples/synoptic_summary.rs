//! Pool change draws across climate models with equal model weight and
//! report expected change, probability of increase and quantiles.

use climext::data_model::{DatasetKey, EnsembleId, Region, Scenario, Statistic, Variable, ZoneId};
use climext::synoptic::{self, DeltaDraws, DeltaKind};

fn draws(gcm: &str, realization: u32, centre: f64) -> DeltaDraws {
    let key = DatasetKey::new(
        gcm,
        Variable::Tas,
        Scenario::Ssp585,
        EnsembleId::new(realization, 1, 1, 1),
        Statistic::Max,
        Region::Zone(ZoneId::Global),
    )
    .expect("valid key");
    let values = (0..1000).map(|i| centre + (i as f64 - 499.5) / 250.0).collect();
    DeltaDraws::new(key, DeltaKind::Q, values, 0).expect("non-empty draws")
}

fn main() -> climext::error::Result<()> {
    // one ensemble for AC, four for UK: each model still gets half the mass
    let mut groups = vec![draws("AC", 1, 1.0)];
    groups.extend((1..=4).map(|r| draws("UK", r, 4.0 + r as f64 * 0.1)));

    let pooled = synoptic::pool_equal_weight(&groups)?;
    println!("E(delta)      = {:.3}", synoptic::expected_change(&pooled));
    println!("P(delta > 0)  = {:.3}", synoptic::prob_positive(&pooled));
    println!("summary       = {:?}", synoptic::quantile_summary(&pooled));

    let (table, boxes) = synoptic::summarize(&groups)?;
    println!("{table:?}");
    for b in boxes {
        println!("{} median {:.3} [{:.3}, {:.3}]", b.gcm, b.median, b.q025, b.q975);
    }
    Ok(())
}
