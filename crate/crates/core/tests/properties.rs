use proptest::prelude::*;

use climext::aggregate::{self, AggregateOptions, Extreme, GridSeries};
use climext::data_model::{
    DatasetKey, EnsembleId, Region, Scenario, Statistic, Variable, ZoneId,
};
use climext::gevr;
use climext::synoptic::{self, DeltaDraws, DeltaKind, WeightedDraws};

fn key(gcm: &str, ensemble: u32) -> DatasetKey {
    DatasetKey::new(
        gcm,
        Variable::Tas,
        Scenario::Ssp585,
        EnsembleId::new(ensemble, 1, 1, 1),
        Statistic::Max,
        Region::Zone(ZoneId::Global),
    )
    .unwrap()
}

fn grid(lats: &[f64], values: &[f64], years: usize) -> GridSeries {
    let locations = lats.iter().map(|&lat| (lat, 0.0)).collect();
    GridSeries::new(locations, (0..years as i32).collect(), values.to_vec()).unwrap()
}

prop_compose! {
    // latitudes drawn in every band so all zones are populated
    fn toy_grid()(extra in prop::collection::vec(-90.0f64..=90.0, 0..10), years in 1usize..6)
        (values in prop::collection::vec(-50.0f64..50.0, (extra.len() + 5) * years), extra in Just(extra), years in Just(years))
        -> (Vec<f64>, Vec<f64>, usize)
    {
        let mut lats = vec![-80.0, -40.0, 0.0, 40.0, 80.0];
        lats.extend(extra);
        (lats, values, years)
    }
}

proptest! {
    #[test]
    fn ensemble_ids_round_trip(r in 1u32..500, i in 1u32..20, p in 1u32..20, f in 1u32..20) {
        let id = EnsembleId::new(r, i, p, f);
        prop_assert_eq!(id.to_string().parse::<EnsembleId>().unwrap(), id);
    }

    #[test]
    fn dataset_keys_round_trip(gcm in "[A-Z][A-Za-z0-9-]{0,8}", r in 1u32..50) {
        let k = key(&gcm, r);
        prop_assert_eq!(DatasetKey::from_file_stem(&k.file_stem()).unwrap(), k);
    }

    #[test]
    fn zone_statistics_ignore_location_order((lats, values, years) in toy_grid(), seed in any::<u64>()) {
        let n = lats.len();
        let mut order: Vec<usize> = (0..n).collect();
        // deterministic shuffle from the seed
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let lats2: Vec<f64> = order.iter().map(|&j| lats[j]).collect();
        let values2: Vec<f64> = (0..years).flat_map(|y| order.iter().map(move |&j| (y, j))).map(|(y, j)| values[y * n + j]).collect();
        let (a, b) = (grid(&lats, &values, years), grid(&lats2, &values2, years));
        let opts = AggregateOptions::default();
        for zone in ZoneId::ALL {
            prop_assert_eq!(
                aggregate::spatial_extreme(&a, zone, Extreme::Max, opts).unwrap(),
                aggregate::spatial_extreme(&b, zone, Extreme::Max, opts).unwrap()
            );
            prop_assert_eq!(
                aggregate::spatial_extreme(&a, zone, Extreme::Min, opts).unwrap(),
                aggregate::spatial_extreme(&b, zone, Extreme::Min, opts).unwrap()
            );
            let (ma, mb) = (aggregate::zone_mean(&a, zone, opts).unwrap(), aggregate::zone_mean(&b, zone, opts).unwrap());
            for (x, y) in ma.iter().zip(&mb) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn raising_a_cell_never_lowers_zone_statistics((lats, values, years) in toy_grid(), cell in any::<prop::sample::Index>(), bump in 0.0f64..20.0) {
        let mut raised = values.clone();
        let c = cell.index(values.len());
        raised[c] += bump;
        let (a, b) = (grid(&lats, &values, years), grid(&lats, &raised, years));
        let opts = AggregateOptions::default();
        for zone in ZoneId::ALL {
            let pairs = [
                (aggregate::spatial_extreme(&a, zone, Extreme::Max, opts).unwrap(), aggregate::spatial_extreme(&b, zone, Extreme::Max, opts).unwrap()),
                (aggregate::spatial_extreme(&a, zone, Extreme::Min, opts).unwrap(), aggregate::spatial_extreme(&b, zone, Extreme::Min, opts).unwrap()),
                (aggregate::zone_mean(&a, zone, opts).unwrap(), aggregate::zone_mean(&b, zone, opts).unwrap()),
            ];
            for (before, after) in pairs {
                for (x, y) in before.iter().zip(&after) {
                    prop_assert!(y >= &(x - 1e-12));
                }
            }
        }
    }

    #[test]
    fn moving_median_stays_within_its_window(values in prop::collection::vec(-100.0f64..100.0, 1..40), h in 0usize..12) {
        let smooth = aggregate::moving_median_smooth(&values, h);
        prop_assert_eq!(smooth.len(), values.len());
        for (i, m) in smooth.iter().enumerate() {
            let w = &values[i.saturating_sub(h)..(i + h + 1).min(values.len())];
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= *m && *m <= hi);
        }
    }

    #[test]
    fn pooled_weights_sum_to_one(
        groups in prop::collection::vec((0usize..4, 1u32..4, prop::collection::vec(-5.0f64..5.0, 1..20)), 1..10)
    ) {
        let draws: Vec<DeltaDraws> = groups
            .iter()
            .map(|(g, e, d)| DeltaDraws::new(key(&format!("G{g}"), *e), DeltaKind::Q, d.clone(), 0).unwrap())
            .collect();
        let pooled = synoptic::pool_equal_weight(&draws).unwrap();
        let total: f64 = pooled.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(pooled.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn quantile_summaries_are_ordered(
        values in prop::collection::vec(-1e3f64..1e3, 1..60),
        raw in prop::collection::vec(0.01f64..1.0, 60)
    ) {
        let total: f64 = raw[..values.len()].iter().sum();
        let weights = raw[..values.len()].iter().map(|w| w / total).collect();
        let s = synoptic::quantile_summary(&WeightedDraws { values: values.clone(), weights });
        prop_assert!(s.is_ordered());
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= s.q025 && s.q975 <= hi);
        prop_assert!(lo - 1e-9 <= s.mean && s.mean <= hi + 1e-9);
    }

    #[test]
    fn gev_quantile_inverts_cdf(u in 0.001f64..0.999, mu in -10.0f64..10.0, sigma in 0.1f64..5.0, xi in -0.9f64..0.19) {
        let x = gevr::gev_quantile(u, mu, sigma, xi);
        prop_assert!((gevr::gev_cdf(x, mu, sigma, xi) - u).abs() < 1e-10);
    }
}
