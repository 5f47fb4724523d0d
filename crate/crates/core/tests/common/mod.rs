//! Independent oracles shared by the integration and acceptance tests. None
//! of these call into the library.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Shapes this close to zero are the Gumbel member of the family.
pub const GUMBEL_SHAPE: f64 = 1e-8;

/// GEV distribution function. `exact` skips the Gumbel convention for tiny
/// nonzero shapes.
pub fn gev_cdf_with(x: f64, mu: f64, sigma: f64, xi: f64, exact: bool) -> f64 {
    let z = (x - mu) / sigma;
    if xi == 0.0 || (!exact && xi.abs() < GUMBEL_SHAPE) {
        return (-(-z).exp()).exp();
    }
    let s = xi * z;
    if s <= -1.0 {
        return if xi > 0.0 { 0.0 } else { 1.0 };
    }
    // (1 + s)^(-1/ξ) through ln_1p, which stays accurate for tiny ξ
    (-(-s.ln_1p() / xi).exp()).exp()
}

pub fn gev_cdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    gev_cdf_with(x, mu, sigma, xi, false)
}

/// Inverse of [`gev_cdf`].
pub fn gev_quantile(p: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let y = -p.ln();
    if xi.abs() < GUMBEL_SHAPE {
        mu - sigma * y.ln()
    } else {
        mu + sigma * (-xi * y.ln()).exp_m1() / xi
    }
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a continuous cdf.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn climext(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_climext"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("launch climext")
}

/// Every file under `root`, as sorted paths relative to it.
pub fn tree(root: &Path) -> Vec<std::path::PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<std::path::PathBuf>) {
        for entry in std::fs::read_dir(dir).expect("read dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
