use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lagpack_core::params::ParamSet;
use serde_json::Value;

fn lagpack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagpack")).current_dir(dir).args(args).output().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

fn solved(dir: &Path) {
    assert!(lagpack(dir, &["solve", "--eps", "0.5"]).status.success());
}

#[test]
fn solve_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    solved(tmp.path());
    let text = fs::read_to_string(tmp.path().join("params.json")).unwrap();
    let p: ParamSet = serde_json::from_str(&text).unwrap();
    assert_eq!(p, lagpack_core::params::solve(0.5, 60_000).unwrap());
    assert_eq!(serde_json::to_string_pretty(&p).unwrap() + "\n", text);
    // derived values are written but ignored on input
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!(v["derived"]["A"].is_number());
}

#[test]
fn verify_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    solved(d);
    for out in ["a", "b"] {
        let o = lagpack(d, &["verify", "-N", "256", "--symplectic-points", "200", "--out-dir", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(d.join("a/certificate.json")).unwrap();
    assert_eq!(a, fs::read(d.join("b/certificate.json")).unwrap());
    assert_eq!(fs::read(d.join("a/summary.txt")).unwrap(), fs::read(d.join("b/summary.txt")).unwrap());
    let single = Command::new(env!("CARGO_BIN_EXE_lagpack"))
        .current_dir(d)
        .env("LAGPACK_THREADS", "1")
        .args(["verify", "-N", "256", "--symplectic-points", "200", "--out-dir", "c"])
        .output()
        .unwrap();
    assert!(single.status.success());
    assert_eq!(a, fs::read(d.join("c/certificate.json")).unwrap());
}

#[test]
fn sampled_time_mode_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    solved(tmp.path());
    let o = lagpack(tmp.path(), &["verify", "-N", "256", "-M", "64", "--symplectic-points", "100"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(c["options"]["time_mode"]["Sampled"], 64);
}

#[test]
fn report_bundles_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    solved(d);
    let o = lagpack(d, &["report", "-N", "256", "--symplectic-points", "200", "--d", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(d.join("report/report.json")).unwrap()).unwrap();
    assert_eq!(r["schema"], "lagpack.report/1");
    assert!(r["git_hash"].as_str().is_some_and(|s| !s.is_empty()));
    assert_eq!(r["tolerances"]["integrality"], 1e-6);
    assert_eq!(r["theorem_verified"], true);
    assert_eq!(r["constraints"].as_array().unwrap().len(), 18);
    for f in r["artifacts"].as_array().unwrap() {
        assert!(d.join("report").join(f.as_str().unwrap()).exists(), "{f}");
    }
    let fixture = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tables_d2.csv")).unwrap();
    assert_eq!(fs::read_to_string(d.join("report/tables_d2.csv")).unwrap(), fixture);
}

#[test]
fn trace_and_lplus_write_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    solved(d);
    assert!(lagpack(d, &["trace", "--samples", "16"]).status.success());
    let csv = fs::read_to_string(d.join("trace/psil12.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16 * 16);
    assert_eq!(csv.lines().next(), Some("theta1,theta2,r1,r2"));
    let lp = fs::read_to_string(d.join("trace/lplus.csv")).unwrap();
    assert_eq!(lp.lines().count(), 1 + 16 * 16);
    assert!(lagpack(d, &["lplus", "-n", "65536"]).status.success());
    let r: Value = serde_json::from_str(&fs::read_to_string(d.join("lplus.json")).unwrap()).unwrap();
    for f in r["factors"].as_array().unwrap() {
        assert!((f["liouville"].as_f64().unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(f["embedded"], true);
    }
}

#[test]
fn tables_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let md = lagpack(tmp.path(), &["tables", "--d", "3", "--k", "1", "--l", "2", "--format", "md"]);
    let text = String::from_utf8(md.stdout).unwrap();
    assert!(text.contains("### step4_areas"));
    let csv = lagpack(tmp.path(), &["tables", "--d", "2", "--eps-num", "1", "--eps-den", "3"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("table,row,col,value\n"));
    assert!(text.contains("step1_areas,{Hhat_i},area,5/3\n"));
}

#[test]
fn bad_inputs_give_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("junk.json"), "{not json").unwrap();
    for (args, kind) in [
        (&["verify", "--params", "junk.json"][..], "parse"),
        (&["verify", "--params", "absent.json"][..], "io"),
        (&["verify", "-N", "100"][..], "input"),
        (&["tables", "--d", "0"][..], "input"),
        (&["tables", "--d", "2", "--k", "3"][..], "input"),
        (&["tables", "--d", "2", "--eps-den", "0"][..], "input"),
        (&["solve"][..], "input"),
        (&["solve", "--eps", "-1"][..], "input"),
        (&["trace", "--samples", "20"][..], "input"),
    ] {
        let o = lagpack(d, args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(stderr_json(&o)["error"], kind, "{args:?}");
    }
    solved(d);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(d.join("params.json")).unwrap()).unwrap();
    v["eta"] = (-1.0).into();
    fs::write(d.join("neg.json"), v.to_string()).unwrap();
    let o = lagpack(d, &["verify", "--params", "neg.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_lagpack")).current_dir(d).env("LAGPACK_THREADS", "0").args(["tables", "--d", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
