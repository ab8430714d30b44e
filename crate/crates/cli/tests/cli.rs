//! End-to-end checks of the binary: artifacts and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

struct Scratch(PathBuf);

impl Scratch {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("fradelay-cli-{name}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn fradelay(args: &[&str], input: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fradelay"))
        .args(&args[..1])
        .arg("--input")
        .arg(input)
        .args(&args[1..])
        .output()
        .expect("binary runs")
}

#[test]
fn ml_eval_writes_csv() {
    let s = Scratch::new("ml-eval");
    let input = s.file("in.json", r#"{"alpha": 0.5, "tau": 1.0, "lambda": -1, "t": [0, 0.5, 2]}"#);
    let out = fradelay(&["ml-eval"], &input);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,re,im,abs");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,1,0,1"));
}

#[test]
fn region_check_exit_code_reflects_membership() {
    let s = Scratch::new("region");
    let inside = s.file("in.json", r#"{"alpha": 0.5, "tau": 1.0, "lambdas": [-1, [-0.5, 0.2]]}"#);
    let outside = s.file("out.json", r#"{"alpha": 0.5, "tau": 1.0, "lambda": 1}"#);
    let boundary = s.0.join("boundary.csv");
    let out = fradelay(&["region-check", "--boundary", boundary.to_str().unwrap()], &inside);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["all_member"], true);
    assert_eq!(json["verdicts"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(&boundary).unwrap();
    assert!(csv.starts_with("theta,radius,re,im"));
    assert_eq!(fradelay(&["region-check"], &outside).status.code(), Some(3));
}

#[test]
fn invalid_input_names_the_field() {
    let s = Scratch::new("invalid");
    let input = s.file("in.json", r#"{"alpha": 1.5, "tau": 1.0, "lambda": -1, "t": [1]}"#);
    let out = fradelay(&["ml-eval"], &input);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn verify_requires_a_seed() {
    let s = Scratch::new("seed");
    let input = s.file(
        "in.json",
        r#"{"alpha": 0.5, "tau": 1.0, "A": [[-1]], "phi": {"kind": "constant", "payload": [0]}, "h_step": 0.05}"#,
    );
    let out = fradelay(&["verify"], &input);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn simulate_overflow_keeps_the_finite_prefix() {
    let s = Scratch::new("overflow");
    let input = s.file(
        "in.json",
        r#"{"alpha": 0.9, "tau": 0.1, "A": [[50]], "phi": {"kind": "constant", "payload": [1]}, "T": 100, "h_step": 0.01}"#,
    );
    let out = fradelay(&["simulate", "--solver", "direct"], &input);
    assert_eq!(out.status.code(), Some(5));
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let t: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!(t > 0.0 && t < 100.0);
    assert!(last.split(',').all(|f| f.parse::<f64>().unwrap().is_finite()));
}

#[test]
fn simulate_both_reports_the_deviation() {
    let s = Scratch::new("both");
    let input = s.file(
        "in.json",
        r#"{"alpha": 0.5, "tau": 1.0, "A": [[-1]], "g": {"kind": "quadratic", "params": [0.05]},
            "phi": {"kind": "constant", "payload": [0.1]}, "T": 3, "h_step": 0.01}"#,
    );
    let csv = s.0.join("traj.csv");
    let out = fradelay(&["simulate", "--solver", "both", "--output", csv.to_str().unwrap()], &input);
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    let dev = summary["max_deviation"].as_f64().unwrap();
    assert!(dev > 0.0 && dev < 1e-2);
    let traj = fradelay_core::Trajectory::from_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(traj.origin, 100);
    assert_eq!(traj.len(), 401);
}

#[test]
fn constants_outside_region_exit_code() {
    let s = Scratch::new("constants");
    let input = s.file(
        "in.json",
        r#"{"alpha": 0.5, "tau": 1.0, "A": [[3]], "phi": {"kind": "constant", "payload": [0]}, "T": 1, "h_step": 0.01}"#,
    );
    assert_eq!(fradelay(&["constants"], &input).status.code(), Some(3));
}
