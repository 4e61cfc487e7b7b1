use std::path::Path;
use std::process::{Command, Output};

fn gshell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gshell"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = gshell(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn gen_extract_check_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--shape", "sphere", "--res", "12", "--out", &p(d, "g.json")]);
    ok(&["extract", "--grid", &p(d, "g.json"), "--mode", "watertight", "--out", &p(d, "m.obj")]);
    ok(&["check", "--mesh", &p(d, "m.obj"), "--out", &p(d, "r.json")]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["euler_characteristic"], 2);
    assert_eq!(report["is_closed"], true);
}

#[test]
fn hemisphere_boundary_and_winding_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--shape", "hemisphere", "--res", "10", "--out", &p(d, "g.json")]);
    ok(&[
        "extract", "--grid", &p(d, "g.json"), "--out", &p(d, "m.obj"), "--boundary", &p(d, "b.json"),
    ]);
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("b.json")).unwrap()).unwrap();
    assert_eq!(b["loops"].as_array().unwrap().len(), 1);
    ok(&[
        "--seed", "3", "winding", "--mesh", &p(d, "m.obj"), "--samples", "20", "--near-surface-band", "0.01",
        "--out", &p(d, "w.csv"),
    ]);
    let csv = std::fs::read_to_string(d.join("w.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,z,winding,dist_to_surface"));
    assert_eq!(lines.count(), 20);
}

#[test]
fn metrics_of_mesh_against_its_own_samples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "gen", "--shape", "sphere", "--res", "16", "--out", &p(d, "g.json"), "--points", &p(d, "t.ply"),
        "--num-points", "2000",
    ]);
    ok(&["extract", "--grid", &p(d, "g.json"), "--out", &p(d, "m.obj")]);
    ok(&[
        "metrics", "--mesh", &p(d, "m.obj"), "--points", &p(d, "t.ply"), "--samples", "2000", "--out",
        &p(d, "c.json"),
    ]);
    let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("c.json")).unwrap()).unwrap();
    let total = c["total"].as_f64().unwrap();
    assert!(total > 0.0 && total < 0.05, "{total}");
}

#[test]
fn fit_with_config_writes_grid_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "gen", "--shape", "hemisphere", "--res", "6", "--out", &p(d, "g.json"), "--points", &p(d, "t.xyz"),
        "--num-points", "300",
    ]);
    std::fs::write(d.join("fit.toml"), "iterations = 3\nsamples_per_iter = 200\neval_samples = 300\n").unwrap();
    ok(&[
        "fit", "--res", "6", "--points", &p(d, "t.xyz"), "--config", &p(d, "fit.toml"), "--out",
        &p(d, "f.json"), "--report", &p(d, "rep.json"),
    ]);
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["iterations"].as_array().unwrap().len(), 3);
    ok(&["extract", "--grid", &p(d, "f.json"), "--out", &p(d, "m.obj")]);
}

#[test]
fn tensorize_detensorize_f64_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--shape", "hemisphere", "--res", "5", "--out", &p(d, "g.json")]);
    ok(&["tensorize", "--grid", &p(d, "g.json"), "--out", &p(d, "a.gsp"), "--dtype", "f64"]);
    ok(&["detensorize", "--in", &p(d, "a.gsp"), "--out", &p(d, "back.json"), "--mesh", &p(d, "m.obj")]);
    let orig: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("g.json")).unwrap()).unwrap();
    let back: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("back.json")).unwrap()).unwrap();
    assert_eq!(orig["sdf"], back["sdf"]);
    assert_eq!(orig["offsets"], back["offsets"]);
    // default dtype is f32
    ok(&["tensorize", "--grid", &p(d, "g.json"), "--out", &p(d, "b.gsp")]);
    let size = |n: &str| std::fs::metadata(d.join(n)).unwrap().len();
    assert!(size("b.gsp") < size("a.gsp"));
}

#[test]
fn pipeline_reruns_give_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("spec.toml"),
        "resolution = 6\ntarget_points = 300\nwinding_samples = 30\n[fit]\niterations = 2\nsamples_per_iter = 100\neval_samples = 200\n",
    )
    .unwrap();
    for run in ["a", "b"] {
        ok(&[
            "--threads", "1", "--seed", "5", "pipeline", "--spec", &p(d, "spec.toml"), "--out-dir", &p(d, run),
        ]);
    }
    let a = std::fs::read_to_string(d.join("a/manifest.json")).unwrap();
    let b = std::fs::read_to_string(d.join("b/manifest.json")).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("pack.gsp"));
}

#[test]
fn gradcheck_is_hidden_but_runs() {
    let help = gshell(&["--help"]);
    assert!(!String::from_utf8_lossy(&help.stdout).contains("gradcheck"));
    let dir = tempfile::tempdir().unwrap();
    ok(&["gradcheck", "--checks", "2", "--out", &p(dir.path(), "g.json")]);
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g.json")).unwrap()).unwrap();
    assert!(r["max_relative_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // missing input file
    assert_eq!(gshell(&["check", "--mesh", &p(d, "nope.obj"), "--out", &p(d, "r.json")]).status.code(), Some(2));
    // bad resolution
    assert_eq!(gshell(&["gen", "--shape", "sphere", "--res", "0", "--out", &p(d, "g.json")]).status.code(), Some(2));
    // usage error
    assert_eq!(gshell(&["gen", "--shape", "cube"]).status.code(), Some(2));
    // malformed OBJ names the line
    std::fs::write(d.join("bad.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n").unwrap();
    let out = gshell(&["check", "--mesh", &p(d, "bad.obj"), "--out", &p(d, "r.json")]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
    // grid version mismatch
    std::fs::write(d.join("v.json"), "{\"version\": 7}").unwrap();
    let out = gshell(&["extract", "--grid", &p(d, "v.json"), "--out", &p(d, "m.obj")]);
    assert_eq!(out.status.code(), Some(4));
    // non-finite target point
    ok(&["gen", "--shape", "sphere", "--res", "4", "--out", &p(d, "g.json")]);
    std::fs::write(d.join("nan.xyz"), "0 0 0\n1e999 0 0\n").unwrap();
    let out = gshell(&["fit", "--grid", &p(d, "g.json"), "--points", &p(d, "nan.xyz"), "--out", &p(d, "f.json")]);
    assert_eq!(out.status.code(), Some(4));
}
