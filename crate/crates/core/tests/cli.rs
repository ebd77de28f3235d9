use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lane-emden"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn classify_examples() {
    let out = run(&["classify", "--dim", "3", "--alpha", "0.5", "--p", "1.2", "--domain", "half"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["regime"], "LiouvilleNonexistence");
    assert!((v["p_half"].as_f64().unwrap() - 1.4).abs() < 1e-15);

    let out = run(&["classify", "--dim", "3", "--alpha", "0.5", "--p", "1.6", "--domain", "exterior", "--r0", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_stdout(&out)["regime"], "AboveSerrin");
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"params": {"dim_n": 3, "alpha": 0.5, "p": 1.2, "domain": {"kind": "HalfSpace"}}, "bogus": 1}"#);
    let out = run(&["classify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let cfg = write_config(dir.path(), "{ not json");
    assert_eq!(run(&["classify", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--dim", "3"]).status.code(), Some(2));
}

#[test]
fn config_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"params": {"dim_n": 3, "alpha": 0.5, "p": 1.2, "domain": {"kind": "HalfSpace"}}}"#);
    let v = json_stdout(&run(&["classify", "--config", &cfg, "--p", "1.45"]));
    assert_eq!(v["regime"], "ExistenceWindow");
}

fn parse_csv(text: &str) -> Vec<Vec<Option<f64>>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| if c.is_empty() { None } else { Some(c.parse().unwrap()) }).collect())
        .collect()
}

#[test]
fn cascade_matches_golden_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let out = run(&["cascade", "--dim", "3", "--alpha", "0.5", "--p", "1.2", "--domain", "exterior", "--r0", "0.25", "--out-dir", &out_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let golden = include_str!("golden/exterior_a0.5_p1.2_trace.csv");
    assert_eq!(got.lines().next(), Some("j,tau_j,c_j,I_j,ln_c_j"));
    let (g, e) = (parse_csv(&got), parse_csv(golden));
    assert_eq!(g.len(), e.len());
    for (gr, er) in g.iter().zip(&e) {
        for (a, b) in gr.iter().zip(er) {
            match (a, b) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}"),
                (None, None) => {}
                _ => panic!("column mismatch"),
            }
        }
    }
    let cert = read_json(&dir.path().join("certificate.json"));
    assert_eq!(cert["verdict"]["kind"], "DivergenceCertified");
    let slope = cert["certificate"]["fitted_slope"].as_f64().unwrap();
    assert!((slope - 0.184).abs() < 0.05 * 0.184);
}

#[test]
fn probe_radii_override_reaches_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"params": {"dim_n": 3, "alpha": 0.5, "p": 1.2, "domain": {"kind": "Exterior", "r0": 0.25}},
            "cascade": {"probe_radii": [3.0, 9.0, 27.0, 81.0]}}"#,
    );
    let out_dir = dir.path().to_string_lossy().into_owned();
    let out = run(&["cascade", "--config", &cfg, "--out-dir", &out_dir]);
    assert_eq!(out.status.code(), Some(0));
    let cert = read_json(&dir.path().join("certificate.json"));
    let radii: Vec<f64> = cert["certificate"]["probe_radii"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(radii, vec![3.0, 9.0, 27.0, 81.0]);
}

#[test]
fn stalled_cascade_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let out = run(&["cascade", "--dim", "3", "--alpha", "0.5", "--p", "1.45", "--domain", "half", "--out-dir", &out_dir]);
    assert_eq!(out.status.code(), Some(1));
    let cert = read_json(&dir.path().join("certificate.json"));
    assert_eq!(cert["verdict"]["kind"], "Stalled");
}

#[test]
fn picard_outside_window_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let out = run(&["picard", "--dim", "3", "--alpha", "0.5", "--p", "1.3", "--domain", "half", "--out-dir", &out_dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn picard_zero_source_gives_zero_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"params": {"dim_n": 3, "alpha": 0.5, "p": 1.45, "domain": {"kind": "HalfSpace"}},
            "picard": {"k": 0.0, "c14": 2.5, "weak_form": false, "minimality_steps": 2}}"#,
    );
    let out_dir = dir.path().to_string_lossy().into_owned();
    let out = run(&["picard", "--config", &cfg, "--out-dir", &out_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let state = std::fs::read_to_string(dir.path().join("state.csv")).unwrap();
    assert_eq!(state.lines().next(), Some("i,r,t,x_1,x_2,x_3,v,barrier"));
    for line in state.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[6].parse::<f64>().unwrap(), 0.0);
    }
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["barrier_held"], true);
}

#[test]
fn verify_detects_perturbed_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let base = r#""params": {"dim_n": 3, "alpha": 0.5, "p": 1.2, "domain": {"kind": "HalfSpace"}}, "verify": {"pairs": 2000}"#;
    let cfg = write_config(dir.path(), &format!("{{{base}}}"));
    let out = run(&["verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    // Riesz constant for N = 3, alpha = 1/2.
    let c3 = 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::PI);
    let cfg = write_config(dir.path(), &format!("{{{base}, \"constants\": {{\"c3\": {}}}}}", 1.01 * c3));
    let out = run(&["verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let checks = json_stdout(&out)["checks"].as_array().unwrap().clone();
    let repro = checks.iter().find(|c| c["name"] == "reproducing_identity").unwrap();
    assert_eq!(repro["pass"], false);
}
