use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn lifshitz(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifshitz"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn run_with(sub: &str, cfg: &Value, dir: &Path, extra: &[&str]) -> Output {
    fs::write(dir.join("cfg.json"), cfg.to_string()).unwrap();
    let mut args = vec![sub, "--config", "cfg.json", "--out", "out"];
    args.extend_from_slice(extra);
    lifshitz(&args, dir)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_record(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|_| panic!("stderr: {text}"))
}

fn points(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn poisson_sample_reruns_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 42, "dim": 2,
        "model": {"kind": "poisson", "intensity": 1.0},
        "grid": {"h": 0.25, "n": 10.0},
        "samples": 3
    });
    let o = run_with("sample", &cfg, tmp.path(), &["--dump-fields"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    let first: Vec<(String, Vec<u8>)> = ["manifest.json", "configurations/omega_0002.csv", "fields/omega_0001.bin"]
        .iter()
        .map(|n| (n.to_string(), fs::read(out.join(n)).unwrap()))
        .collect();
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["status"], "complete");
    assert_eq!(m["seed"], 42);
    assert_eq!(m["files"].as_array().unwrap().len(), 1 + 3 + 6);
    fs::remove_dir_all(&out).unwrap();
    let o = run_with("sample", &cfg, tmp.path(), &["--dump-fields"]);
    assert!(o.status.success());
    for (name, bytes) in first {
        assert_eq!(fs::read(out.join(&name)).unwrap(), bytes, "{name}");
    }
}

#[test]
fn hard_core_sample_respects_exclusion() {
    let tmp = tempfile::tempdir().unwrap();
    let r = 0.6;
    let cfg = json!({
        "seed": 3, "dim": 2,
        "model": {"kind": "strauss", "a0": "inf", "r": r, "z": 2.0},
        "grid": {"h": 0.5, "L": 8.0},
        "chain": {"sweeps": 100}
    });
    let o = run_with("sample", &cfg, tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pts = points(&fs::read_to_string(tmp.path().join("out/configurations/omega_0000.csv")).unwrap());
    assert!(pts.len() > 10, "{}", pts.len());
    for i in 0..pts.len() {
        for j in 0..i {
            let d = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
            assert!(d > r, "{d}");
        }
    }
}

#[test]
fn negative_activity_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 1,
        "model": {"kind": "strauss", "a0": 1.0, "r": 1.0, "z": -1.0},
        "grid": {"h": 0.1, "L": 10.0}
    });
    let o = run_with("sample", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let rec = stderr_record(&o);
    assert_eq!(rec["error"], "config");
    assert!(rec["field"].as_str().unwrap().starts_with("model"), "{rec}");
}

#[test]
fn missing_seed_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({"model": {"kind": "poisson", "intensity": 1.0}, "grid": {"h": 0.1, "L": 10.0}});
    let o = run_with("sample", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_record(&o)["field"], "seed");
    let o = run_with("sample", &cfg, tmp.path(), &["--seed", "5"]);
    assert!(o.status.success());
    assert_eq!(read_json(&tmp.path().join("out/manifest.json"))["seed"], 5);
}

#[test]
fn strauss_small_well_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 1,
        "model": {"kind": "strauss", "a0": 2.0, "r": 1.0, "z": 1.0},
        "potential": {"wells": [{"center": [0.0], "b": 1.0, "profile": {"kind": "square", "depth": 1.0, "radius": 0.25}}]},
        "grid": {"h": 0.05}
    });
    let o = run_with("constants", &cfg, tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = read_json(&tmp.path().join("out/constants.json"));
    assert!((c["predicted_slope"].as_f64().unwrap() + 1.0).abs() < 1e-9, "{c}");
}

#[test]
fn constants_on_positive_potential_is_hypothesis_unmet() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 1,
        "model": {"kind": "poisson", "intensity": 1.0},
        "potential": {"wells": [{"center": [0.0], "b": 1.0, "profile": {"kind": "table", "radii": [0.0, 0.5], "values": [1.0, 0.0]}}]},
        "grid": {"h": 0.05}
    });
    let o = run_with("constants", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&tmp.path().join("out/manifest.json"));
    assert_eq!(m["status"], "partial");
    assert_eq!(m["error"]["error"], "hypothesis");
}

#[test]
fn delta_gfunc_matches_two_sqrt_e() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 1,
        "model": {"kind": "poisson", "intensity": 1.0},
        "potential": {"wells": [{"center": [0.0], "b": 1.0, "profile": {"kind": "delta", "c": 1.0}}]},
        "grid": {"h": 0.001},
        "energies": [4.0, 16.0]
    });
    let o = run_with("gfunc", &cfg, tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/gcurve.csv")).unwrap();
    assert!(csv.starts_with("g,E_minus,h,L"));
    let rows = points(&csv);
    assert_eq!(rows.len(), 2);
    for (row, e) in rows.iter().zip([4.0, 16.0]) {
        let exact = 2.0 * f64::sqrt(e);
        assert!((row[0] - exact).abs() / exact < 0.02, "{row:?}");
        assert!((row[1] - e).abs() / e < 0.02, "{row:?}");
    }
}

#[test]
fn free_potential_sandwich_has_no_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 9,
        "model": {"kind": "poisson", "intensity": 1.0},
        "grid": {"h": 0.1, "L": 20.0, "n": 20.0},
        "energies": [-1.0, -4.0],
        "theta_samples": 2
    });
    let o = run_with("compare", &cfg, tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&tmp.path().join("out/sandwich.json"));
    assert_eq!(rep["all_hold"], true, "{rep}");
    let csv = fs::read_to_string(tmp.path().join("out/sandwich.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(!csv.contains("false"));
}

#[test]
fn manifest_reingests_with_matching_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 17,
        "model": {"kind": "strauss", "a0": 1.0, "r": 0.5, "z": 2.0},
        "potential": {"wells": [{"center": [0.0], "b": 1.0, "profile": {"kind": "square", "depth": 1.0, "radius": 0.25}}]},
        "grid": {"h": 0.1, "L": 50.0},
        "energies": {"geometric": {"start": 0.1, "stop": 1.0, "count": 3}},
        "chain": {"sweeps": 20}
    });
    let o = run_with("ids", &cfg, tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m1 = read_json(&tmp.path().join("out/manifest.json"));
    let ids1 = fs::read(tmp.path().join("out/ids.csv")).unwrap();
    fs::copy(tmp.path().join("out/manifest.json"), tmp.path().join("m.json")).unwrap();
    let o = lifshitz(&["ids", "--config", "m.json", "--out", "again"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m2 = read_json(&tmp.path().join("again/manifest.json"));
    assert_eq!(m1["config_sha256"], m2["config_sha256"]);
    assert_eq!(m1["config"], m2["config"]);
    assert_eq!(fs::read(tmp.path().join("again/ids.csv")).unwrap(), ids1);
    let csv = String::from_utf8(ids1).unwrap();
    assert!(csv.starts_with("E,N_hat,stderr,realizations"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 4,
        "model": {"kind": "poisson", "intensity": 2.0},
        "potential": {"wells": [{"center": [0.0], "b": 1.0, "profile": {"kind": "square", "depth": 1.0, "radius": 0.25}}]},
        "grid": {"h": 0.1, "n": 30.0},
        "energies": [0.0, 0.5]
    });
    let o = run_with("ids", &cfg, tmp.path(), &["--workers", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read(tmp.path().join("out/ids.csv")).unwrap();
    let o = run_with("ids", &cfg, tmp.path(), &["--workers", "3"]);
    assert!(o.status.success());
    assert_eq!(fs::read(tmp.path().join("out/ids.csv")).unwrap(), a);
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({"seed": 1, "model": {"kind": "poisson", "intensity": 1.0}, "grid": {"h": 0.1, "L": 5.0}, "typo": 1});
    let o = run_with("sample", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_record(&o)["message"].as_str().unwrap().contains("typo"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lifshitz(&["ids", "--config", "nope.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_record(&o)["error"], "io");
}

#[test]
fn fields_foreign_to_the_model_kind_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({"seed": 1, "model": {"kind": "strauss", "intensity": 1.0, "a0": 1.0, "r": 1.0}, "grid": {"h": 0.1, "L": 5.0}});
    let o = run_with("sample", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let rec = stderr_record(&o);
    assert_eq!(rec["field"], "model");
    assert!(rec["message"].as_str().unwrap().contains("intensity"), "{rec}");
}
