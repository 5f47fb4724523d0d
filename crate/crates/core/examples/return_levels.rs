//! 100-year return values of a trending GEV and their change 2025 -> 2125.

use climext::gevr::{self, GevrParams, ReturnSpec};
use climext::trend::{ChangePeriod, Window};

fn main() {
    let window = Window::default();
    let spec = ReturnSpec::default();
    let theta = GevrParams {
        mu0: 30.0,
        mu1: 4.0,
        sigma0: 2.0,
        sigma1: 0.5,
        xi0: -0.1,
        xi1: 0.0,
    };
    for year in [2015, 2025, 2100, 2125] {
        let q = gevr::return_value_at_year(&theta, year, window, spec).expect("valid parameters");
        println!("Q100({year}) = {q:.3}");
    }
    let dq = gevr::delta_q(&theta, window, ChangePeriod::default(), spec).expect("valid parameters");
    println!("delta Q = {dq:.3}");

    // a scale trend that turns negative before 2125 makes the change undefined
    let shrinking = GevrParams { sigma1: -1.9, ..theta };
    match gevr::delta_q(&shrinking, window, ChangePeriod::default(), spec) {
        Ok(v) => println!("unexpected value {v}"),
        Err(e) => println!("excluded draw: {e}"),
    }
}
