use std::path::Path;
use std::process::{Command, Output};

use mixfrac_core::io::load_field;

const BIN: &str = env!("CARGO_BIN_EXE_mixfrac-ns");

const BENCH: &str =
    r#"{"d":1,"s1":0.4,"s2":0.8,"a":1,"nonlinearity":[{"mu":1,"p":6}],"N":16384,"L":32,"radial":true}"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run mixfrac-ns")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_verify_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bench.json", BENCH);
    let out = dir.path().join("run");
    let solved = run(&["solve", "--config", p(&config), "--out", p(&out)]);
    assert_eq!(code(&solved), 0, "{}", String::from_utf8_lossy(&solved.stderr));
    assert!(String::from_utf8_lossy(&solved.stdout).contains("converged = true"));

    let (u, manifest) = load_field(&out.join("solution.field.json")).unwrap();
    assert_eq!(manifest.dims, vec![16384]);
    assert_eq!(u.values().len(), 16384);

    let result = out.join("solution.json");
    let verified = run(&["verify", "--result", p(&result)]);
    assert_eq!(code(&verified), 0);
    assert!(String::from_utf8_lossy(&verified.stdout).contains("overall: PASS"));

    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    let lambda = doc["result"]["lambda"].as_f64().unwrap();
    assert!(lambda > 0.0);
    doc["result"]["lambda"] = (-lambda).into();
    std::fs::write(&result, doc.to_string()).unwrap();
    let tampered = run(&["verify", "--result", p(&result)]);
    assert_eq!(code(&tampered), 3);
    let text = String::from_utf8_lossy(&tampered.stdout);
    assert!(text.contains("[FAIL] lambda_positive"), "{text}");
    assert!(text.contains("[FAIL] lambda_consistent"), "{text}");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["solve"])), 1);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&run(&["solve", "--config", p(&missing)])), 1);

    let partial = write(dir.path(), "partial.json", r#"{"d":1,"s1":0.4}"#);
    let o = run(&["solve", "--config", p(&partial)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("s2"));

    let subcritical = write(dir.path(), "p4.json", &BENCH.replace("\"p\":6", "\"p\":4"));
    let o = run(&["solve", "--config", p(&subcritical), "--strict-assumptions"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unconverged_solve_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = BENCH.replace("16384", "1024").replace("\"radial\":true", "\"max_iter\":3");
    let config = write(dir.path(), "short.json", &text);
    let out = dir.path().join("short");
    let o = run(&["solve", "--config", p(&config), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("maximum iterations"));
}

#[test]
fn fiber_csv_has_one_critical_dilation() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bench.json", &BENCH.replace("16384", "2048"));
    let o = run(&["fiber", "--config", p(&config), "--points", "101"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,psi,psi_prime"));
    let dpsi: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(dpsi.len(), 101);
    let changes = dpsi.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    assert_eq!(changes, 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_star"));
}

#[test]
fn gn_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "gn.json", r#"{"d":1,"s":0.5,"p":2,"N":1024,"L":60}"#);
    let o = run(&["gn", "--config", p(&config), "--out", p(dir.path())]);
    assert_eq!(code(&o), 0);
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gn.json")).unwrap()).unwrap();
    let ratio = rec["saturation_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 1e-2, "{ratio}");
    assert!(rec["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn mass_scan_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = BENCH.replace("16384", "8192").replace("\"L\":32", "\"L\":16");
    let config = write(dir.path(), "scan.json", &text);
    let out = dir.path().join("scan");
    let o = run(&["scan-mass", "--config", p(&config), "--masses", "1,2", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("mass_scan.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let level = |r: &Vec<&str>| r[1].parse::<f64>().unwrap();
    assert!(level(&rows[1]) < level(&rows[0]));
    assert!(rows.iter().all(|r| r[3] == "true"));

    let o = run(&["scan-mass", "--config", p(&config), "--masses", "2,1"]);
    assert_eq!(code(&o), 1);
}
