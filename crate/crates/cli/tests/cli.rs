use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_refocus"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text:?}"))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn complete(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect()
}

fn diag(a: [f64; 3]) -> Vec<Vec<f64>> {
    (0..3)
        .map(|i| (0..3).map(|j| if i == j { a[i] } else { 0.0 }).collect())
        .collect()
}

/// Fixed reproducible weights in [−1, 1].
fn mixed(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let (a, b) = (i.min(j) as f64, i.max(j) as f64);
                        ((a * 1.7 + b * 0.9).sin() * 0.9).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect()
}

struct Files {
    dir: TempDir,
}

impl Files {
    fn new() -> Self {
        Files {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn write(&self, name: &str, v: &Value) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, v.to_string()).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn factored(&self, name: &str, w: Vec<Vec<f64>>, a: [f64; 3]) -> PathBuf {
        self.write(name, &json!({"n": w.len(), "W": w, "A": diag(a)}))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const DIPOLE: [f64; 3] = [1.0, 1.0, -2.0];
const HEISENBERG: [f64; 3] = [1.0, 1.0, 1.0];
const MIXED: [f64; 3] = [2.0, 1.0, -1.0];

#[test]
fn classify_cases() {
    let f = Files::new();
    for (a, case) in [(DIPOLE, "1"), (HEISENBERG, "3"), (MIXED, "2")] {
        let c = f.factored("c.json", complete(3), a);
        let out = run(&["classify", "--coupling", s(&c)]);
        assert!(out.status.success(), "{}", stderr(&out));
        let v = stdout_json(&out);
        assert_eq!(v["case"], case);
        assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 3);
        assert!(v["trace_margin"].is_number());
    }
}

#[test]
fn classify_rejects_raw_and_garbage() {
    let f = Files::new();
    let raw = f.write("raw.json", &json!({"n": 2, "J": vec![vec![0.0; 6]; 6]}));
    assert_eq!(run(&["classify", "--coupling", s(&raw)]).status.code(), Some(2));
    let bad = f.path("bad.json");
    std::fs::write(&bad, "{").unwrap();
    assert_eq!(run(&["classify", "--coupling", s(&bad)]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--coupling", "/nonexistent/x.json"]).status.code(), Some(2));
    let diag_w = f.write("w.json", &json!({"n": 2, "W": [[1, 1], [1, 0]], "A": diag(DIPOLE)}));
    let out = run(&["classify", "--coupling", s(&diag_w)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("diagonal"));
    assert_eq!(run(&["classify"]).status.code(), Some(2));
}

#[test]
fn synthesize_then_verify() {
    let f = Files::new();
    let c = f.factored("dipole.json", complete(4), DIPOLE);
    let scheme = f.path("scheme.json");
    let out = run(&["synthesize", "--coupling", s(&c), "--out", s(&scheme)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stats = stdout_json(&out);
    assert_eq!(stats["N"], 2);
    assert!((stats["tau"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let out = run(&["verify", "--coupling", s(&c), "--scheme", s(&scheme)]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["ok"], true);
    assert!(v["residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["N"], 2);
}

#[test]
fn synthesize_case2_to_stdout() {
    let f = Files::new();
    let c = f.factored("mixed.json", complete(4), MIXED);
    let out = run(&["synthesize", "--coupling", s(&c)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let scheme = stdout_json(&out);
    assert_eq!(scheme["kind"], "inversion");
    let t: f64 = scheme["steps"].as_array().unwrap().iter().map(|st| st["t"].as_f64().unwrap()).sum();
    assert!((t - 3.5).abs() < 1e-12);
    assert!(stderr(&out).contains("\"tau\""));

    let path = f.write("s.json", &scheme);
    let out = run(&["verify", "--coupling", s(&c), "--scheme", s(&path), "--tol", "1e-9"]);
    assert!(out.status.success());
}

#[test]
fn synthesize_case3_routes_to_search() {
    let f = Files::new();
    let c = f.factored("h.json", complete(3), HEISENBERG);
    let out = run(&["synthesize", "--coupling", s(&c)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("no constructive scheme for case 3"), "{err}");
    assert!(err.contains("search"));
}

#[test]
fn verify_failures() {
    let f = Files::new();
    let c = f.factored("d.json", complete(2), DIPOLE);
    let id = json!([[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
    let trivial = f.write(
        "t.json",
        &json!({"kind": "inversion", "n": 2, "steps": [{"t": 1.0, "rotations": [id, id]}]}),
    );
    let out = run(&["verify", "--coupling", s(&c), "--scheme", s(&trivial)]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["ok"], false);
    assert!((v["residual"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let c3 = f.factored("d3.json", complete(3), DIPOLE);
    assert_eq!(
        run(&["verify", "--coupling", s(&c3), "--scheme", s(&trivial)]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["verify", "--coupling", s(&c), "--scheme", s(&trivial), "--tol", "-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn bounds_reports() {
    let f = Files::new();
    let h = f.factored("h.json", complete(6), HEISENBERG);
    let v = stdout_json(&run(&["bounds", "--coupling", s(&h)]));
    assert!((v["tau_lower"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    assert_eq!(v["steps_lower"], 5);
    assert_eq!(v["case"], "3");

    let d = f.factored("d.json", complete(6), DIPOLE);
    let v = stdout_json(&run(&["bounds", "--coupling", s(&d)]));
    assert_eq!(v["case"], "1");
    assert_eq!(v["steps_lower"], 1);
    assert!(v["tau_lower"].as_f64().unwrap() > 0.0);

    let m = f.factored("m.json", complete(9), MIXED);
    let v = stdout_json(&run(&["bounds", "--coupling", s(&m), "--p", "3"]));
    assert_eq!(v["steps_lower"], 2);
    assert!(v["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("log")));
}

#[test]
fn search_heisenberg_pair() {
    let f = Files::new();
    let c = f.factored("h.json", complete(2), HEISENBERG);
    let a = run(&["search", "--coupling", s(&c), "--seed", "3", "--tol", "1e-10"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let v = stdout_json(&a);
    assert!((v["metadata"]["tau"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!(v["metadata"]["residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["metadata"]["seed"], 3);

    let path = f.write("found.json", &v);
    assert!(run(&["verify", "--coupling", s(&c), "--scheme", s(&path)]).status.success());

    let b = run(&["search", "--coupling", s(&c), "--seed", "3", "--tol", "1e-10"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn search_growth_is_deterministic() {
    let f = Files::new();
    let c = f.factored("h.json", complete(2), HEISENBERG);
    let args = ["search", "--coupling", s(&c), "--pool", "cyclic", "--seed", "11", "--max-pool", "300"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout_json(&a)["metadata"]["iterations"].as_u64().unwrap() > 0);
}

#[test]
fn search_failure_exits_one() {
    let f = Files::new();
    let c = f.factored("h.json", complete(3), HEISENBERG);
    let out = run(&["search", "--coupling", s(&c), "--pool", "cyclic", "--max-pool", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["found"], false);
    assert_eq!(run(&["search", "--coupling", s(&c), "--pool", "bogus"]).status.code(), Some(2));
}

#[test]
fn simulate_dipole_slope() {
    let f = Files::new();
    let c = f.factored("d.json", mixed(3), DIPOLE);
    let scheme = f.path("s.json");
    assert!(run(&["synthesize", "--coupling", s(&c), "--out", s(&scheme)]).status.success());
    let out = run(&["simulate", "--coupling", s(&c), "--scheme", s(&scheme), "--eps", "0.2,0.1,0.05,0.025"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["exact"], false);
    let slope = v["slope"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&slope), "{slope}");
    let e = v["errors"].as_array().unwrap();
    let ratio = e[2].as_f64().unwrap() / e[1].as_f64().unwrap();
    assert!((0.2..=0.3).contains(&ratio), "{ratio}");
}

#[test]
fn simulate_exact_and_errors() {
    let f = Files::new();
    let mut j = vec![vec![0.0; 6]; 6];
    j[2][5] = 1.0;
    j[5][2] = 1.0;
    let c = f.write("zz.json", &json!({"n": 2, "J": j}));
    let id = json!([[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
    let px = json!([[1, 0, 0], [0, -1, 0], [0, 0, -1]]);
    let scheme = f.write(
        "s.json",
        &json!({"kind": "inversion", "n": 2, "steps": [{"t": 1.0, "rotations": [id, px]}]}),
    );
    let out = run(&["simulate", "--coupling", s(&c), "--scheme", s(&scheme), "--eps", "0.4,0.2,0.1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["exact"], true);

    let out = run(&["simulate", "--coupling", s(&c), "--scheme", s(&scheme), "--eps", "0.4,0.4,0.1"]);
    assert_eq!(out.status.code(), Some(2));

    let big = f.factored("big.json", complete(11), DIPOLE);
    let bs = f.path("bs.json");
    assert!(run(&["synthesize", "--coupling", s(&big), "--out", s(&bs)]).status.success());
    let out = run(&["simulate", "--coupling", s(&big), "--scheme", s(&bs)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("11"));

    let trivial = f.write(
        "t.json",
        &json!({"kind": "inversion", "n": 2, "steps": [{"t": 1.0, "rotations": [id, id]}]}),
    );
    let out = run(&["simulate", "--coupling", s(&c), "--scheme", s(&trivial)]);
    assert_eq!(out.status.code(), Some(1));
}
