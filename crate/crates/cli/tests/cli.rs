use std::path::Path;
use std::process::{Command, Output};

fn reachshape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachshape")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn brunovsky_report_for_damped_oscillator() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&reachshape(&["brunovsky", "--system", "damped_oscillator"]))).unwrap();
    assert_eq!(v["indices"], serde_json::json!([2]));
    assert_eq!(v["K"], serde_json::json!([[1.0, 0.3]]));
    assert!(v["max_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn reach_csv_matches_double_integrator_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reach.csv");
    stdout(&reachshape(&["reach", "--system", "double_integrator", "--T", "1", "--grid", "16", "--out", out.to_str().unwrap()]));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("xi0,xi1,H"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in rows {
        let expect = reachshape::reachable::double_integrator_oracle(1.0, &r[..2]);
        assert!((r[2] - expect).abs() <= 1e-8 * expect);
    }
}

#[test]
fn bm_between_box_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{"kind":"box","dimension":2,"params":{"half_widths":[1,1]}}"#);
    let b = write(dir.path(), "b.json", r#"{"kind":"box","dimension":2,"params":{"half_widths":[2,1]}}"#);
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&reachshape(&["bm", "--bodyA", &a, "--bodyB", &b, "--grid", "360", "--shape"]))).unwrap();
    assert!((v["rho"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);
    assert!(v["shape_distance"].as_f64().unwrap() < 1e-6);
}

#[test]
fn converge_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let svg = dir.path().join("r.svg");
    let text = stdout(&reachshape(&[
        "converge", "--system", "ball_system", "--tmax", "0.5", "--steps", "3", "--grid", "90", "--route", "both",
        "--out", json.to_str().unwrap(), "--csv", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap(),
    ]));
    assert!(text.contains("constant shape"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    assert_eq!(v["provenance"]["config"]["t_grid"]["steps"], 3);
    for route in ["brunovsky", "filtration"] {
        let csv = std::fs::read_to_string(dir.path().join(format!("r.{route}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some("T,rho_shape,t12,t21,wall_ms,flag"));
        assert_eq!(csv.lines().count(), 4);
        assert!(dir.path().join(format!("r.{route}.svg")).exists());
    }
}

#[test]
fn converge_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "sc.json", r#"{"system":"double_integrator","t_grid":{"t_max":0.5,"steps":3},"grid":120}"#);
    let mut outputs = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("{i}.csv"));
        stdout(&reachshape(&["converge", "--scenario", &sc, "--csv", csv.to_str().unwrap()]));
        outputs.push(std::fs::read(csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn errors_are_reported() {
    let o = reachshape(&["brunovsky", "--system", "no_such_system"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("double_integrator") && err.contains("rotating_b"), "{err}");

    let o = reachshape(&["brunovsky", "--system", "rotating_b"]);
    assert!(!o.status.success());

    let o = reachshape(&["reach", "--system", "double_integrator", "--T=-1"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid time"));

    let o = reachshape(&["converge", "--system", "double_integrator", "--steps", "2"]);
    assert!(!o.status.success());
}
