//! The CLI's file artifacts must equal composing the library calls in
//! process, bit for bit.

mod common;

use std::fs;
use std::path::Path;

use climext::gevr::ReturnSpec;
use climext::mcmc::{self, ChainConfig, ModelKind};
use climext::pipeline::{self, LmmSimSpec};
use climext::simulator::{self, LmmDesign, LmmTruth, SyntheticSpec, Truth};
use climext::synoptic::{self, DeltaKind, FitMethod};
use climext::trend::{ChangePeriod, Window};
use climext::gevr::GevrParams;
use climext::nhgr::NhgrParams;

const FLAGS: [&str; 8] = ["--iterations", "400", "--burnin", "300", "--adapt-start", "100", "--seed", "21"];

fn cfg() -> ChainConfig {
    ChainConfig {
        adapt_start: 100,
        burn_in: 300,
        retained: 400,
        seed: 21,
        ..ChainConfig::default()
    }
}

fn run(root: &Path, args: &[&str]) {
    let mut all = args.to_vec();
    all.extend(FLAGS);
    let out = common::climext(root, &all);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn write_spec<T: serde::Serialize>(root: &Path, name: &str, spec: &T) {
    fs::write(root.join(name), serde_json::to_string(spec).unwrap()).unwrap();
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).display().to_string()
}

#[test]
fn gevr_path_matches_library_composition() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let spec = SyntheticSpec {
        truth: Truth::Gevr(GevrParams {
            mu0: 30.0,
            mu1: 2.0,
            sigma0: 1.5,
            sigma1: 0.0,
            xi0: -0.1,
            xi1: 0.0,
        }),
        base_year: 2015,
        span: 86,
        n_replicates: 3,
        seed: 5,
    };
    write_spec(root, "spec.json", &spec);
    run(root, &["simulate", "spec.json", "--out", "sim"]);

    let series = simulator::gen_series(&spec).unwrap();
    let files: Vec<String> = series.iter().map(|s| format!("sim/{}.csv", s.key.file_stem())).collect();
    let mut fit = vec!["fit", "--model", "gevr", "--out", "chains"];
    fit.extend(files.iter().map(String::as_str));
    run(root, &fit);

    let mut deltas = Vec::new();
    let mut delta_files = Vec::new();
    for s in &series {
        let chain = mcmc::run_chain(s, ModelKind::Gevr, &pipeline::chain_config_for(&s.key, &cfg())).unwrap();
        let path = root.join("chains").join(pipeline::chain_file_name(&s.key, ModelKind::Gevr));
        let table = mcmc::read_chain_csv(&path).unwrap();
        let rows: Vec<Vec<f64>> = chain.iter().map(|d| d.to_vec()).collect();
        assert_eq!(table.rows, rows, "chain {}", path.display());
        assert_eq!(table.log_likelihood, chain.log_likelihood);

        let d = pipeline::delta_draws(
            &s.key,
            ModelKind::Gevr,
            &rows,
            DeltaKind::Q,
            Window::default(),
            ChangePeriod::default(),
            ReturnSpec::default(),
            21,
        )
        .unwrap();
        delta_files.push(format!("deltas/{}", d.file_name()));
        deltas.push(d);
    }

    let chain_files: Vec<String> = series
        .iter()
        .map(|s| format!("chains/{}", pipeline::chain_file_name(&s.key, ModelKind::Gevr)))
        .collect();
    let mut delta = vec!["delta", "--kind", "q", "--out", "deltas"];
    delta.extend(chain_files.iter().map(String::as_str));
    run(root, &delta);
    for (d, f) in deltas.iter().zip(&delta_files) {
        assert_eq!(synoptic::read_delta_csv(&root.join(f)).unwrap().draws, d.draws);
    }

    let mut summarize = vec!["summarize", "--out", "summary"];
    summarize.extend(delta_files.iter().map(String::as_str));
    run(root, &summarize);
    let (t2, bw) = synoptic::summarize(&deltas).unwrap();
    let lib = root.join("lib");
    fs::create_dir_all(&lib).unwrap();
    synoptic::write_rows_csv(&lib.join("table2.csv"), &t2).unwrap();
    synoptic::write_rows_csv(&lib.join("boxwhisker.csv"), &bw).unwrap();
    for name in ["table2.csv", "boxwhisker.csv"] {
        assert_eq!(
            fs::read(root.join("summary").join(name)).unwrap(),
            fs::read(lib.join(name)).unwrap(),
            "{name} ({})",
            rel(root, &lib)
        );
    }
}

#[test]
fn nhgr_mean_change_matches_library_composition() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let spec = SyntheticSpec {
        truth: Truth::Nhgr(NhgrParams {
            alpha0: 288.0,
            alpha1: 3.0,
            beta0: 0.5,
            beta1: 0.1,
        }),
        base_year: 2015,
        span: 86,
        n_replicates: 2,
        seed: 8,
    };
    write_spec(root, "spec.json", &spec);
    run(root, &["simulate", "spec.json", "--out", "sim"]);
    let series = simulator::gen_series(&spec).unwrap();
    let files: Vec<String> = series.iter().map(|s| format!("sim/{}.csv", s.key.file_stem())).collect();
    let mut fit = vec!["fit", "--model", "nhgr", "--out", "chains"];
    fit.extend(files.iter().map(String::as_str));
    run(root, &fit);
    let chain_files: Vec<String> = series
        .iter()
        .map(|s| format!("chains/{}", pipeline::chain_file_name(&s.key, ModelKind::Nhgr)))
        .collect();
    let mut delta = vec!["delta", "--kind", "m", "--delta-m-mode", "both", "--out", "deltas"];
    delta.extend(chain_files.iter().map(String::as_str));
    run(root, &delta);

    for s in &series {
        let chain = mcmc::run_chain(s, ModelKind::Nhgr, &pipeline::chain_config_for(&s.key, &cfg())).unwrap();
        let rows: Vec<Vec<f64>> = chain.iter().map(|d| d.to_vec()).collect();
        for kind in [DeltaKind::MParametric, DeltaKind::MPredictive] {
            let d = pipeline::delta_draws(
                &s.key,
                ModelKind::Nhgr,
                &rows,
                kind,
                Window::default(),
                ChangePeriod::default(),
                ReturnSpec::default(),
                21,
            )
            .unwrap();
            let cli = synoptic::read_delta_csv(&root.join("deltas").join(d.file_name())).unwrap();
            assert_eq!(cli.draws, d.draws, "{kind}");
        }
    }
}

#[test]
fn lmm_table_matches_library_fit() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let spec = LmmSimSpec {
        lmm_truth: LmmTruth {
            iota: 3.0,
            gamma: [0.0, 0.5, 1.5],
            tau_delta: 1.0,
            tau_zeta: 0.5,
            tau_eps: 0.3,
        },
        design: LmmDesign {
            models: 4,
            ensembles: 2,
            per_cell: 20,
        },
        seed: 13,
    };
    write_spec(root, "lmm.json", &spec);
    run(root, &["simulate", "lmm.json", "--out", "sim"]);
    let deltas = pipeline::lmm_deltas(&spec).unwrap();
    let files: Vec<String> = deltas.iter().map(|d| format!("sim/{}", d.file_name())).collect();
    let mut lmm = vec!["lmm", "--out", "lmm"];
    lmm.extend(files.iter().map(String::as_str));
    run(root, &lmm);

    let rows: Vec<_> = synoptic::lmm_table(&deltas, FitMethod::Ml).unwrap().into_iter().map(|(row, _)| row).collect();
    let lib = root.join("lib.csv");
    synoptic::write_rows_csv(&lib, &rows).unwrap();
    assert_eq!(fs::read(root.join("lmm/table3.csv")).unwrap(), fs::read(lib).unwrap());
}
