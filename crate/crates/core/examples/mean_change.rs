//! Fit an NHGR model to annual means and compare the parametric and
//! predictive mean-change functionals.

use climext::mcmc::{self, ChainConfig, ModelKind};
use climext::nhgr::{self, NhgrParams};
use climext::rng::stream_rng;
use climext::simulator::{self, SyntheticSpec, Truth};
use climext::stats;
use climext::trend::{ChangePeriod, Window};

fn main() -> climext::error::Result<()> {
    let truth = NhgrParams { alpha0: 288.0, alpha1: 3.4, beta0: 0.4, beta1: 0.1 };
    let spec = SyntheticSpec { truth: Truth::Nhgr(truth), base_year: 2015, span: 86, n_replicates: 1, seed: 3 };
    let series = simulator::gen_nhgr_series(&spec)?.remove(0);
    let chain = mcmc::run_chain(&series, ModelKind::Nhgr, &ChainConfig { seed: 3, ..ChainConfig::default() })?;

    let window = Window::default();
    let period = ChangePeriod::default();
    let parametric = mcmc::posterior_functional(chain.iter(), |d| {
        Ok(nhgr::delta_m_parametric(&NhgrParams::from_slice(d), window, period))
    })?;
    let mut rng = stream_rng(3, 99);
    let predictive = mcmc::posterior_functional(chain.iter(), |d| {
        nhgr::delta_m_predictive(&NhgrParams::from_slice(d), window, period, &mut rng)
    })?;
    println!("true parametric change {:.3}", nhgr::delta_m_parametric(&truth, window, period));
    for (name, draws) in [("parametric", &parametric), ("predictive", &predictive)] {
        println!(
            "{name:>10}: mean {:.3}, 95% [{:.3}, {:.3}], excluded {}",
            stats::mean(&draws.values),
            stats::quantile(&draws.values, 0.025),
            stats::quantile(&draws.values, 0.975),
            draws.excluded
        );
    }
    Ok(())
}
