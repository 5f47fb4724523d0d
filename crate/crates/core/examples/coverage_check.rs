//! Simulate-and-refit check: how often do central 95% credible intervals
//! contain the true GEVR parameters?

use climext::gevr::GevrParams;
use climext::mcmc::ChainConfig;
use climext::simulator::{self, SyntheticSpec, Truth};

fn main() -> climext::error::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let spec = SyntheticSpec {
        truth: Truth::Gevr(GevrParams::stationary(25.0, 1.5, -0.1)),
        base_year: 2015,
        span: 86,
        n_replicates: n,
        seed: 2024,
    };
    let report = simulator::coverage_experiment(&spec, &ChainConfig::default(), n, 0.95)?;
    for q in &report.quantities {
        println!("{:>8}: {}/{} covered (95% CI {:.2}-{:.2})", q.name, q.covered, q.total, q.ci_lower, q.ci_upper);
    }
    println!("failed fits: {}", report.failed_fits);
    Ok(())
}
