//! Error reporting and exit codes of the command-line tool.

mod common;

use std::fs;
use std::process::Output;

fn json_error(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line on stderr");
    serde_json::from_str(line).expect("stderr is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&common::climext(dir.path(), &["--help"])), 0);
    assert_eq!(code(&common::climext(dir.path(), &["--version"])), 0);
}

#[test]
fn bad_arguments_are_user_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = common::climext(dir.path(), &["fit", "x.csv", "--model", "weibull", "--error-json"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json_error(&out)["kind"], "user");
    assert_eq!(code(&common::climext(dir.path(), &["summarize"])), 1);
}

#[test]
fn missing_chain_file_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = common::climext(
        dir.path(),
        &["delta", "SIM_tas_SSP585_r1i1p1f1_max_GL.gevr.chain.csv", "--kind", "q", "--error-json"],
    );
    assert_eq!(code(&out), 1);
    let e = json_error(&out);
    assert_eq!(e["exit_code"], 1);
    assert!(e["message"].as_str().unwrap().contains("chain.csv"));
}

#[test]
fn corrupted_series_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let name = "SIM_tas_SSP585_r1i1p1f1_max_GL.csv";
    fs::write(dir.path().join(name), "year,value\n2015,290.1\n2016,oops\n").unwrap();
    let out = common::climext(dir.path(), &["fit", name, "--model", "gevr", "--error-json"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_error(&out)["kind"], "validation");
    // nothing written for the failed input
    assert!(!dir.path().join("out").join("SIM_tas_SSP585_r1i1p1f1_max_GL.gevr.chain.csv").exists());
}

#[test]
fn constant_series_cannot_start_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let name = "SIM_tas_SSP585_r1i1p1f1_max_GL.csv";
    let mut text = String::from("year,value\n");
    for year in 2015..2101 {
        text.push_str(&format!("{year},290\n"));
    }
    fs::write(dir.path().join(name), text).unwrap();
    let out = common::climext(dir.path(), &["fit", name, "--model", "gevr", "--error-json"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_error(&out)["kind"], "numerical");
}

#[test]
fn unparseable_dataset_name_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("series.csv"), "year,value\n2015,1\n").unwrap();
    let out = common::climext(dir.path(), &["fit", "series.csv", "--model", "nhgr", "--error-json"]);
    assert_ne!(code(&out), 0);
    let e = json_error(&out);
    assert_eq!(e["exit_code"].as_i64().unwrap(), i64::from(code(&out)));
}
