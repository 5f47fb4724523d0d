//! Decompose simulated change values into scenario effects and model /
//! ensemble variance components.

use climext::simulator::{self, LmmDesign, LmmTruth};
use climext::synoptic::{self, FitMethod};

fn main() -> climext::error::Result<()> {
    let truth = LmmTruth { iota: 1.0, gamma: [0.0, 1.5, 4.0], tau_delta: 2.0, tau_zeta: 1.0, tau_eps: 0.5 };
    let design = LmmDesign { models: 7, ensembles: 3, per_cell: 50 };
    let obs = simulator::gen_lmm_dataset(&truth, &design, 11);

    for method in [FitMethod::Ml, FitMethod::Reml] {
        let fit = synoptic::lmm_fit(&obs, method)?;
        println!("{method:?}: {:?}", fit.effects);
        println!(
            "  tau_R {:.3} tau_FE {:.3} tau_eps {:.3} tau_delta {:.3} tau_zeta {:.3}  R2 FE {:.3} ME {:.3}",
            fit.tau_r,
            fit.tau_fe,
            fit.tau_eps,
            fit.tau_delta,
            fit.tau_zeta,
            fit.r2_fe.unwrap_or(f64::NAN),
            fit.r2_me.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
