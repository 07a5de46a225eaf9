use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gibbs-spectra"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gibbs-spectra-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn solidarity_example() {
    let out = bin(&["solidarity", "random:3,[2,2,2],42"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "1");
    assert_eq!(v["command"], "solidarity");
    assert_eq!(v["passed"], true);
    assert_eq!(v["report"]["per_ordering_gaps"].as_array().unwrap().len(), 6);
}

#[test]
fn malformed_target_names_the_field() {
    let dir = scratch("malformed");
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"name": "bad", "weights": [1, 2, 3, 4]}"#).unwrap();
    let out = bin(&["spectra", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sizes"), "{err}");
}

#[test]
fn invalid_targets_exit_2() {
    for args in [
        vec!["spectra", "random:3,[2,2],1"],
        vec!["spectra", "random:2,[2,2],1", "--family", "0;5"],
        vec!["spectra", "random:2,[2,2],1", "--mode", "mixture", "--weights", "0.2,0.2"],
        vec!["collapse-check", "random:3,[2,2,2],1", "--subset", "0,1,2"],
        vec!["verify-minorization", "--d", "3"],
    ] {
        assert_eq!(bin(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn all_checks_pass_on_shipped_fixtures() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let out = bin(&["all-checks", "--fixtures", dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["report"]["targets"].as_array().unwrap().len(), 25);
}

#[test]
fn shipped_fixtures_are_reproducible() {
    let dir = scratch("fixtures");
    assert_eq!(bin(&["fixtures", "--out", dir.to_str().unwrap()]).status.code(), Some(0));
    let shipped = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut names: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 25);
    for n in names {
        let fresh = std::fs::read_to_string(dir.join(&n)).unwrap();
        let disk = std::fs::read_to_string(shipped.join(&n)).unwrap();
        assert_eq!(fresh, disk, "{n:?}");
    }
}

#[test]
fn output_is_deterministic() {
    let args = ["solidarity", "random:4,[2,3,2,2],9", "--family", "0,1;2;3", "--seed", "5"];
    assert_eq!(bin(&args).stdout, bin(&args).stdout);
    let ex = ["example", "--steps", "2000", "--seed", "3"];
    assert_eq!(bin(&ex).stdout, bin(&ex).stdout);
}

#[test]
fn spectra_csv_and_orders() {
    let out = bin(&["spectra", "random:3,[2,2,2],1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("re,im"));
    assert_eq!(text.lines().count(), 9);

    let a = json(&bin(&["spectra", "random:3,[2,2,2],1", "--order", "2,1,0"]));
    let b = json(&bin(&["spectra", "random:3,[2,2,2],1"]));
    assert_eq!(a["report"]["order"], serde_json::json!([2, 1, 0]));
    assert!(a["report"]["spectrum"]["gap"].as_f64().unwrap() > 0.0);
    assert!(b["report"]["aperiodic"].as_bool().unwrap());
}

#[test]
fn collapse_and_two_component() {
    let v = json(&bin(&["collapse-check", "random:3,[2,3,2],4", "--subset", "1,2"]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["report"]["cycle"]["matches"], true);

    let m = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/markov_uwv.json");
    let v = json(&bin(&["collapse-check", m, "--subset", "1,2", "--partition", "0|2|1"]));
    assert_eq!(v["report"]["blocked"]["applicable"], true);
    assert_eq!(v["report"]["blocked"]["holds"], true);

    let c = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/correlated_0.5.json");
    let v = json(&bin(&["two-component", c, "--y", "0"]));
    assert_eq!(v["passed"], true);
    let r = v["report"]["spectral_radius"].as_f64().unwrap();
    assert!((r - 0.25).abs() < 1e-12);
}

#[test]
fn example_writes_traces() {
    let dir = scratch("example");
    let out = dir.join("trace.csv");
    let res = bin(&["example", "--steps", "500", "--y", "-2", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    for tag in ["blockA", "blockB"] {
        let text = std::fs::read_to_string(dir.join(format!("trace_{tag}.csv"))).unwrap();
        assert_eq!(text.lines().next(), Some("step,u,v,w"));
        assert_eq!(text.lines().count(), 502);
    }
    let v = json(&res);
    assert_eq!(v["report"]["traces"].as_array().unwrap().len(), 2);
    assert_eq!(v["seed"], 42);
}

#[test]
fn drift_verification_passes() {
    let out = bin(&["example", "verify-drift", "--y", "7", "--points", "101"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["lambda_below_bound"], true);
}

#[test]
fn minorization_reports_violations() {
    let out = bin(&["verify-minorization", "--w-points", "21", "--wp-points", "101"]);
    let v = json(&out);
    let report = &v["report"];
    assert_eq!(report["holds_with_small_set_infimum"], true);
    // the exit code follows the (1 + d²)^(-1/2) verdict
    let holds = report["holds"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if holds { 0 } else { 1 }));
}
