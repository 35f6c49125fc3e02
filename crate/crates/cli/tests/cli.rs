use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cvmfe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvmfe"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cvmfe(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = cvmfe(dir, args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn bundled_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/pipeline-h1.2.toml")
}

/// Every regular file below `dir`, relative path and contents.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .flat_map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                snapshot(&p)
                    .into_iter()
                    .map(|(rel, b)| (Path::new(p.file_name().unwrap()).join(rel), b))
                    .collect()
            } else {
                vec![(PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap())]
            }
        })
        .collect();
    files.sort();
    files
}

#[test]
fn generate_writes_grid_and_manifest() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["generate", "--rows", "16", "--cols", "16", "--seed", "7", "--out", "g.txt"]);
    let text = fs::read_to_string(tmp.path().join("g.txt")).unwrap();
    assert_eq!(text.lines().count(), 16);
    assert!(text.lines().all(|l| l.len() == 16));
    let manifest = json(&tmp.path().join("g.txt.manifest.json"));
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["outputs"], serde_json::json!(["g.txt"]));

    let (c, err) = code(tmp.path(), &["generate", "--rows", "3", "--cols", "4"]);
    assert_eq!(c, 2);
    assert!(err.contains("row count"), "{err}");
}

#[test]
fn manifest_replays_to_identical_output() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["generate", "--rows", "8", "--cols", "12", "--seed", "99", "--out", "a.txt"]);
    let cfg = &json(&tmp.path().join("a.txt.manifest.json"))["config"];
    let (rows, cols, seed) = (cfg["rows"].to_string(), cfg["cols"].to_string(), cfg["seed"].to_string());
    ok(tmp.path(), &["generate", "--rows", &rows, "--cols", &cols, "--seed", &seed, "--out", "b.txt"]);
    assert_eq!(
        fs::read(tmp.path().join("a.txt")).unwrap(),
        fs::read(tmp.path().join("b.txt")).unwrap()
    );
}

#[test]
fn analyze_reports() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "--rows", "16", "--cols", "16", "--seed", "7", "--out", "g.txt"]);
    let report: Value = serde_json::from_str(&ok(d, &["analyze", "--grid", "g.txt", "--eps1", "0"])).unwrap();
    let t = &report["thermo"];
    assert!((f(&t["free_energy"]) + f(&t["entropy"])).abs() < 1e-12);
    assert_eq!(f(&t["enthalpy"]), 0.0);

    ok(d, &["analyze", "--grid", "g.txt", "--json-out", "a.json"]);
    let report = json(&d.join("a.json"));
    let h = f(&report["estimate"]["h_mean"]);
    assert!((h - 1.0).abs() <= 0.1, "h = {h}");
    assert!((f(&report["thermo"]["h"]) - h).abs() < 1e-12);
    assert!(d.join("a.json.manifest.json").exists());

    let (c, _) = code(d, &["analyze", "--grid", "g.txt", "--eps1", "0", "--h", "1.2"]);
    assert_eq!(c, 2);
    let (c, _) = code(d, &["analyze", "--grid", "g.txt", "--h", "-1"]);
    assert_eq!(c, 2);
}

#[test]
fn estimation_failure_is_numerical() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("s.txt"), "1111\n0000\n1111\n0000\n").unwrap();
    let (c, err) = code(tmp.path(), &["analyze", "--grid", "s.txt"]);
    assert_eq!(c, 3, "{err}");
    ok(tmp.path(), &["analyze", "--grid", "s.txt", "--h", "1.2"]);
    fs::write(tmp.path().join("bad.txt"), "11x1\n0000\n").unwrap();
    let (c, err) = code(tmp.path(), &["analyze", "--grid", "bad.txt"]);
    assert_eq!(c, 2);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn minimize_trace_and_oracle_agree() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "--rows", "16", "--cols", "16", "--seed", "3", "--out", "g.txt"]);
    ok(d, &[
        "minimize", "--grid", "g.txt", "--h", "1.2", "--trials", "5000", "--seed", "1",
        "--out", "m.txt", "--trace-csv", "t.csv", "--json-out", "m.json",
    ]);
    let mut reader = csv::Reader::from_path(d.join("t.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["trial", "delta_f", "accepted", "free_energy_after"]
    );
    let mut prev = f64::INFINITY;
    for row in reader.records() {
        let row = row.unwrap();
        if &row[2] == "true" {
            let fe: f64 = row[3].parse().unwrap();
            assert!(fe <= prev);
            prev = fe;
        }
    }
    let manifest = json(&d.join("m.txt.manifest.json"));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);

    ok(d, &["generate", "--rows", "4", "--cols", "4", "--seed", "5", "--out", "s.txt"]);
    ok(d, &[
        "minimize", "--grid", "s.txt", "--h", "1.2", "--restarts", "20", "--trials", "2000",
        "--out", "sm.txt", "--json-out", "sm.json",
    ]);
    ok(d, &["oracle", "--rows", "4", "--cols", "4", "--h", "1.2", "--json-out", "o.json"]);
    let best = f(&json(&d.join("sm.json"))["result"]["free_energy"]);
    let oracle = json(&d.join("o.json"));
    let fmin = f(&oracle["min_free_energy"]);
    assert!(best >= fmin - 1e-12);
    assert!((best - fmin) / fmin.abs() <= 0.02);
    assert_eq!(oracle["states_enumerated"], 12_870);
    assert!(oracle["argmin_count"].as_u64().unwrap() >= 1);

    let (c, err) = code(d, &["minimize", "--grid", "nope.txt", "--h", "1.2"]);
    assert_eq!(c, 1);
    assert!(err.contains("file not found"), "{err}");
    let (c, _) = code(d, &["minimize", "--grid", "g.txt"]);
    assert_eq!(c, 2);
}

#[test]
fn pipeline_bundled_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = bundled_config();
    ok(tmp.path(), &["pipeline", "--config", cfg.to_str().unwrap(), "--out-dir", "run"]);
    let run = tmp.path().join("run");
    let report = json(&run.join("report.json"));
    let h = f(&report["h_estimated"]);
    assert!((1.05..=1.35).contains(&h), "h = {h}");
    assert!(f(&report["divergence"]) < 0.05);
    let manifest = json(&run.join("manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in ["external.txt", "repr.txt", "model.txt", "world_trace.csv", "fit_trace.csv", "report.json"] {
        assert!(outputs.iter().any(|o| o.ends_with(name)), "{name} missing from manifest");
        assert!(run.join(name).exists());
    }
    assert_eq!(fs::read_to_string(run.join("repr.txt")).unwrap().lines().count(), 16);
}

#[test]
fn pipeline_symmetry_point_and_errors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("zero.json"),
        r#"{"external_dims":[32,32],"repr_dims":[16,16],"sense_block":[2,2],"eps1_true":0.0,
            "fit_restarts":4,"fit_trials":5000,"seed":2}"#,
    )
    .unwrap();
    ok(d, &["pipeline", "--config", "zero.json", "--out-dir", "z"]);
    let report = json(&d.join("z/report.json"));
    assert!(f(&report["divergence"]) < 0.01);
    assert!((f(&report["h_estimated"]) - 1.0).abs() < 0.15);

    fs::write(d.join("typo.toml"), "external_dims = [32, 32]\nrepr_dims = [16, 16]\nsense_block = [2, 2]\nfit_restarts = 1\nfit_trial = 10\nseed = 0\n").unwrap();
    let (c, err) = code(d, &["pipeline", "--config", "typo.toml", "--out-dir", "t"]);
    assert_eq!(c, 2);
    assert!(err.contains("fit_trial"), "{err}");

    fs::write(d.join("tile.json"), r#"{"external_dims":[32,32],"repr_dims":[16,16],"sense_block":[2,3],"fit_restarts":1,"fit_trials":10,"seed":0}"#).unwrap();
    let (c, err) = code(d, &["pipeline", "--config", "tile.json", "--out-dir", "t"]);
    assert_eq!(c, 2);
    assert!(err.contains("sense_block"), "{err}");
}

#[test]
fn varbayes_reports_identities() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("joint.json"), "[[0.1, 0.2], [0.3, 0.25], [0.05, 0.1]]").unwrap();
    fs::write(d.join("q.json"), "[0.2, 0.5, 0.3]").unwrap();
    let post: Value = serde_json::from_str(&ok(d, &["varbayes", "--joint-json", "joint.json", "--blanket-state", "1"])).unwrap();
    assert!(f(&post["kl_posterior"]).abs() < 1e-15);

    ok(d, &["varbayes", "--joint-json", "joint.json", "--q-json", "q.json", "--blanket-state", "1", "--json-out", "v.json"]);
    let r = json(&d.join("v.json"));
    let fe = f(&r["free_energy"]);
    assert!((fe - (f(&r["expected_energy"]) - f(&r["entropy_q"]))).abs() < 1e-10);
    assert!((fe - (f(&r["surprisal"]) + f(&r["kl_posterior"]))).abs() < 1e-10);
    assert!(f(&r["kl_posterior"]) > 0.0);
    assert_eq!(r["bound_holds"], true);

    fs::write(d.join("zero.json"), "[[0.5, 0.0], [0.5, 0.0]]").unwrap();
    let (c, _) = code(d, &["varbayes", "--joint-json", "zero.json", "--blanket-state", "1"]);
    assert_eq!(c, 2);
    fs::write(d.join("bad.json"), "[[0.5, 0.6]]").unwrap();
    let (c, _) = code(d, &["varbayes", "--joint-json", "bad.json"]);
    assert_eq!(c, 2);
}

#[test]
fn every_command_is_byte_deterministic() {
    let script: Vec<Vec<&str>> = vec![
        vec!["generate", "--rows", "16", "--cols", "16", "--seed", "11", "--out", "g.txt"],
        vec!["analyze", "--grid", "g.txt", "--json-out", "a.json"],
        vec![
            "minimize", "--grid", "g.txt", "--h", "1.2", "--restarts", "4", "--trials", "3000",
            "--seed", "5", "--out", "m.txt", "--trace-csv", "t.csv", "--json-out", "m.json",
        ],
        vec!["oracle", "--rows", "4", "--cols", "4", "--h", "1.3", "--json-out", "o.json"],
        vec!["varbayes", "--joint-json", "j.json", "--blanket-state", "0", "--json-out", "v.json"],
        vec!["pipeline", "--config", "p.json", "--out-dir", "run"],
    ];
    let mut snaps = Vec::new();
    for threads in ["1", "4"] {
        let tmp = TempDir::new().unwrap();
        let d = tmp.path();
        fs::write(d.join("j.json"), "[[0.2, 0.1], [0.3, 0.4]]").unwrap();
        fs::write(
            d.join("p.json"),
            r#"{"external_dims":[16,16],"repr_dims":[8,8],"sense_block":[2,2],"eps1_true":0.09,
                "fit_restarts":3,"fit_trials":3000,"seed":4}"#,
        )
        .unwrap();
        let mut stdout = Vec::new();
        for args in &script {
            let mut full = vec!["--threads", threads];
            full.extend(args);
            stdout.push(ok(d, &full));
        }
        stdout.push(ok(d, &["generate", "--rows", "8", "--cols", "8", "--seed", "2"]));
        snaps.push((snapshot(d), stdout));
    }
    assert_eq!(snaps[0].0.len(), snaps[1].0.len());
    for (a, b) in snaps[0].0.iter().zip(&snaps[1].0) {
        assert_eq!(a.0, b.0);
        assert!(a.1 == b.1, "{} differs between runs", a.0.display());
    }
    assert_eq!(snaps[0].1, snaps[1].1);
}
