//! End-to-end runs of the `matcube` binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_matcube"));
    c.env("MATCUBE_LOG", "quiet");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

const TWO_PARAM: &str = r#"{"kind":"cube","n":2,"m":2,"matrices":[[[2.0,0.3],[0.3,1.5]],[[0.4,0.5],[0.5,-0.2]],[[-0.3,0.2],[0.2,0.6]]]}"#;
const REFUTED: &str = r#"{"kind":"cube","n":2,"m":1,"matrices":[[[1,0],[0,1]],[[2,0],[0,2]]]}"#;
const K5: &str = r#"{"kind":"graph","n":5,"edges":[[1,2,1],[1,3,1],[1,4,1],[1,5,1],[2,3,1],[2,4,1],[2,5,1],[3,4,1],[3,5,1],[4,5,1]]}"#;

#[test]
fn vertex_refutation_names_the_witness() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "r.json", REFUTED);
    let (code, out) = run(&["verify", f.to_str().unwrap(), "--method", "vertex"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("δ = (-1.00000)"), "{out}");
}

#[test]
fn malformed_json_is_an_input_error() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "bad.json", "{\"kind\": \"cube\", \"n\": ");
    assert_eq!(run(&["verify", f.to_str().unwrap()]).0, 3);
    let asym = write(d.path(), "asym.json", r#"{"kind":"cube","n":2,"m":0,"matrices":[[[1,0.5],[0,1]]]}"#);
    assert_eq!(run(&["verify", asym.to_str().unwrap()]).0, 3);
    assert_eq!(run(&["verify", "/nonexistent/file.json"]).0, 3);
    assert_eq!(run(&["no-such-command"]).0, 3);
}

#[test]
fn certificate_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "two.json", TWO_PARAM);
    for method in ["quad", "bental", "full"] {
        let cert = d.path().join(format!("{method}.cert.json"));
        let (code, out) = run(&["verify", f.to_str().unwrap(), "--method", method, "--cert-out", cert.to_str().unwrap()]);
        assert_eq!(code, 0, "{method}: {out}");
        let (code, out) = run(&["check-cert", f.to_str().unwrap(), cert.to_str().unwrap()]);
        assert_eq!(code, 0, "{method}: {out}");
        assert!(out.contains("valid"));
    }
    let full = d.path().join("f.json");
    let (code, out) = run(&["certify-full", f.to_str().unwrap(), "--out", full.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&full).unwrap()).unwrap();
    assert_eq!(json["variant"], "full");
    assert_eq!(json["path"], "closed-form");
    assert_eq!(json["format_version"], 1);
}

#[test]
fn tampered_certificate_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "two.json", TWO_PARAM);
    let cert = d.path().join("c.json");
    assert_eq!(run(&["verify", f.to_str().unwrap(), "--cert-out", cert.to_str().unwrap()]).0, 0);
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    json["matrices"]["X1"]["data"][0] = serde_json::json!(5.0);
    std::fs::write(&cert, json.to_string()).unwrap();
    assert_eq!(run(&["check-cert", f.to_str().unwrap(), cert.to_str().unwrap()]).0, 2);
    std::fs::write(&cert, "[1, 2").unwrap();
    assert_eq!(run(&["check-cert", f.to_str().unwrap(), cert.to_str().unwrap()]).0, 3);
}

#[test]
fn k5_claims() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "k5.json", K5);
    let f = f.to_str().unwrap();
    assert_eq!(run(&["verify", f, "--method", "quad", "--t", "6.3"]).0, 0);
    // Between the true capacity and the relaxation bound.
    assert_eq!(run(&["verify", f, "--method", "quad", "--t", "6.1"]).0, 2);
    assert_eq!(run(&["verify", f, "--method", "vertex", "--t", "6.1"]).0, 0);
    assert_eq!(run(&["verify", f, "--method", "vertex", "--t", "5.9"]).0, 1);
    assert_eq!(run(&["verify", f, "--method", "quad"]).0, 3);
}

#[test]
fn maxcut_table_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "k5.json", K5);
    let (code, a) = run(&["--seed", "3", "maxcut", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(a.contains("exact") && a.contains("psatz") && a.contains("Ben-Tal") && a.contains("relaxed SDP"), "{a}");
    assert!(a.contains("6.00000") && a.contains("6.25000"), "{a}");
    let (_, b) = run(&["--seed", "3", "maxcut", f.to_str().unwrap()]);
    assert_eq!(a, b);
}

#[test]
fn stability_reports() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "s.json", r#"{"kind":"system","n":1,"m":1,"matrices":[[[-1]],[[1]]]}"#);
    let (code, out) = run(&["stability", f.to_str().unwrap(), "--method", "vertex", "--csv"]);
    assert_eq!(code, 0);
    let r: f64 = out.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((r - 1.0).abs() <= 1e-3, "{out}");
    assert_eq!(run(&["stability", f.to_str().unwrap(), "--tol-r", "0"]).0, 3);
}

#[test]
fn batch_mode_takes_the_worst_code() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.json", TWO_PARAM);
    let (code, out) = run(&["verify", "--batch", d.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    write(d.path(), "b.json", REFUTED);
    let certs = d.path().join("certs");
    let (code, out) = run(&["verify", "--batch", d.path().to_str().unwrap(), "--cert-out", certs.to_str().unwrap()]);
    assert_eq!(code, 1, "{out}");
    assert!(certs.join("a.cert.json").exists());
    assert!(out.contains("2 instances"));
}
