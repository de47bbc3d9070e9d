use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forge::samples;

fn forge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(args)
        .current_dir(dir)
        .env_remove("FORGE_LOG")
        .output()
        .expect("forge runs")
}

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_reports_the_metric() {
    let dir = tempfile::tempdir().unwrap();
    let o = forge(&["validate", &data("tetrahedron.json")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("4 vertices, 6 edges, 4 faces"), "{out}");
    assert_eq!(out.matches("cone angle").count(), 4);
    assert!(out.contains("valid convex metric"));
}

#[test]
fn flat_vertices_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("fan.json");
    std::fs::write(&input, samples::doubly_covered_fan(6, 1.0).to_json()).unwrap();
    let o = forge(&["validate", input.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("vertex") && err.contains("deficit"), "{err}");
}

#[test]
fn malformed_json_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    std::fs::write(&input, "{\"triangles\": [").unwrap();
    for cmd in ["validate", "solve"] {
        let o = forge(&[cmd, input.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(1), "{cmd}");
    }
}

#[test]
fn invalid_metric_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("fan.json");
    std::fs::write(&input, samples::doubly_covered_fan(5, 1.0).to_json()).unwrap();
    let o = forge(&["solve", input.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("fan.json")]);
}

#[test]
fn solve_writes_mesh_and_deterministic_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = forge(&["solve", &data("cube.json"), "--merge-coplanar"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let obj = std::fs::read_to_string(dir.path().join("mesh.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
    let faces: Vec<&str> = obj.lines().filter(|l| l.starts_with("f ")).collect();
    assert_eq!(faces.len(), 6);
    for f in faces {
        for i in f.split_whitespace().skip(1) {
            let i: usize = i.parse().unwrap();
            assert!((1..=8).contains(&i));
        }
    }
    let first = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["r0"].as_array().unwrap().len(), 8);
    assert!(report["kappa_final_inf"].as_f64().unwrap() < 1e-8);
    let keys: Vec<&String> = report.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let o = forge(&["solve", &data("cube.json"), "--merge-coplanar", "--report", "again.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, std::fs::read_to_string(dir.path().join("again.json")).unwrap());
}

#[test]
fn json_mesh_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = forge(&["solve", &data("tetrahedron.json"), "--out", "t.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mesh: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(mesh["vertices"].as_array().unwrap().len(), 4);
    assert_eq!(mesh["faces"].as_array().unwrap().len(), 4);
}

#[test]
fn flat_limit_warns() {
    let dir = tempfile::tempdir().unwrap();
    let o = forge(&["solve", &data("doubly-covered-square.json")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("flat"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["degenerate"], true);
    assert_eq!(report["termination"], "radii_stationary");
}

#[test]
fn kappa_stop_is_range_checked() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["0", "0.1", "-1e-9", "x"] {
        let o = forge(&["solve", &data("tetrahedron.json"), "--kappa-stop", bad], dir.path());
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn progress_stream_follows_forge_log() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(["solve", &data("tetrahedron.json")])
        .current_dir(dir.path())
        .env("FORGE_LOG", "progress=info")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    let lines: Vec<&str> = err.lines().filter(|l| l.contains("kappa_inf")).collect();
    assert!(!lines.is_empty(), "{err}");
    let quiet = forge(&["solve", &data("tetrahedron.json")], dir.path());
    assert!(!stderr(&quiet).contains("kappa_inf"));
}

#[test]
fn roundtrip_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = forge(&["roundtrip", "--seed", "3", "--points", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let ratio: f64 = out.rsplit(' ').next().unwrap().trim().parse().unwrap();
    assert!(ratio <= 1e-4, "{out}");
    assert_eq!(forge(&["roundtrip", "--points", "3"], dir.path()).status.code(), Some(2));
}
