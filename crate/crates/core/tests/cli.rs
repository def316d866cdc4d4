//! End-to-end runs of the `homsum` binary.

use homsum::bounds::BoundReport;
use homsum::simulate::read_raw_samples;
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn homsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homsum")).args(args).env_remove("SOURCE_DATE_EPOCH").output().unwrap()
}

fn ok(args: &[&str]) -> Value {
    let out = homsum(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    homsum(args).status.code().unwrap()
}

fn generate(dir: &Path, name: &str, family: &str, order: &str, size: &str, extra: &[&str]) -> String {
    let path = dir.join(name).to_str().unwrap().to_string();
    let mut args = vec!["kernel", "generate", "--family", family, "--order", order, "--m", size, "--out", &path];
    args.extend_from_slice(extra);
    let out = homsum(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn kernel_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate(dir.path(), "d.json", "disjoint_pairs", "2", "100", &[]);
    let r = ok(&["kernel", "inspect", "--kernel", &d]);
    assert_eq!(r["result"]["entries"], 100);
    assert_eq!(r["result"]["N"], 200);
    assert_eq!(r["manifest"]["command"], "kernel inspect");

    let p2 = dir.path().join("p2.json");
    std::fs::write(&p2, "{\"d\":2,\"N\":2,\"entries\":[\n[1,2,0.5]\n]}\n").unwrap();
    let r = ok(&["kernel", "inspect", "--kernel", p2.to_str().unwrap()]);
    assert_eq!(r["result"]["variance"], 1.0);

    let c = generate(dir.path(), "c.json", "constant", "2", "30", &["--sigma2", "5"]);
    let unit = dir.path().join("unit.json");
    ok(&["kernel", "inspect", "--kernel", &c]);
    assert_eq!(code(&["kernel", "normalize", "--kernel", &c, "--out", unit.to_str().unwrap()]), 0);
    let r = ok(&["kernel", "inspect", "--kernel", unit.to_str().unwrap()]);
    assert!((r["result"]["variance"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.json");
    let out = out.to_str().unwrap();
    assert_eq!(code(&["kernel", "generate", "--family", "disjoint_pairs", "--m", "0", "--out", out]), 2);
    assert_eq!(code(&["kernel", "generate", "--family", "nope", "--m", "3", "--out", out]), 1);
    assert_eq!(code(&["kernel", "generate", "--family", "constant", "-N", "60000", "--out", out]), 3);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["bound", "normal"]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["kernel", "inspect", "--kernel", "/nonexistent/k.json"]), 2);

    let w3 = generate(dir.path(), "w3.json", "walsh", "3", "6", &[]);
    assert_eq!(code(&["bound", "chi2", "--kernel", &w3, "--nu", "1", "--normalize"]), 2);
    let unnormalized = generate(dir.path(), "c.json", "constant", "2", "10", &["--sigma2", "3"]);
    assert_eq!(code(&["bound", "normal", "--kernel", &unnormalized]), 2);
    assert_eq!(code(&["bound", "normal", "--kernel", &unnormalized, "--normalize"]), 0);

    let bad = dir.path().join("spec.json");
    std::fs::write(&bad, "{\"diagnostic\": \"fourth_moment\", \"family\": 3}").unwrap();
    assert_eq!(code(&["diagnose", "--spec", bad.to_str().unwrap()]), 2);
}

fn reparse(report: &Value) -> BoundReport {
    serde_json::from_value(report["result"]["bound"].clone()).unwrap()
}

#[test]
fn bound_reports_itemize_and_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate(dir.path(), "d.json", "disjoint_pairs", "2", "100", &[]);
    let r = ok(&["bound", "normal", "--kernel", &d, "--law", "rademacher", "--n", "20000", "--seed", "3"]);
    let b = reparse(&r);
    assert!(b.total.unwrap().is_finite());
    assert_eq!(b.recompute_total(), b.total);
    assert!(b.c_star.is_some() && b.invariance.is_some() && b.moment_term.is_some());
    assert_eq!(r["manifest"]["seed"], 3);

    let w = ok(&["bound", "wasserstein", "--kernel", &d]);
    assert_eq!(reparse(&w).recompute_total(), reparse(&w).total);

    let c = generate(dir.path(), "c.json", "constant", "2", "12", &["--sigma2", "2"]);
    let r = ok(&["bound", "chi2", "--kernel", &c, "--nu", "1", "--law", "rademacher"]);
    assert_eq!(r["result"]["moment_source"], "exact");
    let b = reparse(&r);
    assert_eq!(b.recompute_total(), b.total);
    assert_eq!(b.prefactor, Some(3.0));

    let r = ok(&["bound", "multi", "--kernel", &d, "--kernel", &d]);
    let delta = &r["result"]["bound"]["delta"];
    let want = 2f64.sqrt() / 10.0;
    for i in 0..2 {
        for j in 0..2 {
            assert!((delta[i][j].as_f64().unwrap() - want).abs() < 1e-9, "{delta}");
        }
    }
    let b = reparse(&r);
    assert_eq!(b.recompute_total(), b.total);
}

#[test]
fn simulate_is_reproducible_and_dumps_samples() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate(dir.path(), "d.json", "disjoint_pairs", "2", "1000", &[]);
    let dump = dir.path().join("raw.bin");
    let base = ["simulate", "--kernel", &d, "--law", "gaussian", "--n", "20000", "--seed", "42"];
    let run = |workers: &str, extra: &[&str]| {
        let mut a: Vec<&str> = base.to_vec();
        a.extend_from_slice(&["--workers", workers]);
        a.extend_from_slice(extra);
        let out = homsum(&a);
        assert!(out.status.success());
        out.stdout
    };
    let one = run("1", &["--dump-samples", dump.to_str().unwrap()]);
    assert_eq!(one, run("3", &[]));
    let report: Value = serde_json::from_slice(&one).unwrap();
    let ks = report["result"]["marginals"][0]["ks_normal"].as_f64().unwrap();
    assert!(ks < 0.03, "{ks}");
    let raw = read_raw_samples(&dump).unwrap();
    assert_eq!(raw.len(), 20000);

    let c = generate(dir.path(), "c.json", "constant", "2", "40", &["--sigma2", "2"]);
    let r = ok(&["simulate", "--kernel", &c, "--nu", "1", "--n", "5000"]);
    assert!(r["result"]["marginals"][0]["ks_chi2"].as_f64().unwrap() < r["result"]["marginals"][0]["ks_normal"].as_f64().unwrap());

    let r = ok(&["simulate", "--kernel", &d, "--kernel", &d, "--n", "2000"]);
    let m = &r["result"]["second_moments"];
    assert_eq!(m[0][1]["value"], m[0][0]["value"]);
}

#[test]
fn diagnose_specs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.json");
    let verdict = |text: &str| {
        std::fs::write(&spec, text).unwrap();
        ok(&["diagnose", "--spec", spec.to_str().unwrap()])["result"]["verdict"].clone()
    };
    assert_eq!(
        verdict(r#"{"diagnostic":"de_jong","kernel":{"family":"disjoint_pairs","order":2,"size":1000},"law":"uniform","sample":{"n":20000,"seed":1}}"#),
        "positive"
    );
    assert_eq!(verdict(r#"{"diagnostic":"fourth_moment","family":"disjoint_pairs","order":2,"sweep":[10,100,1000]}"#), "positive");
    assert_eq!(verdict(r#"{"diagnostic":"fourth_moment","family":"walsh","order":2,"sweep":[10,100,1000]}"#), "negative");
    assert_eq!(
        verdict(r#"{"diagnostic":"chi_square","family":"constant","order":2,"sweep":[10,50,250],"target":{"law":"chi2","nu":1},"threshold":0.1}"#),
        "positive"
    );
}
