//! End-to-end runs of the built binary: exit-code contract, determinism
//! across repeated runs, and worker-count independence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dofkit")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(bin())
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary should spawn")
}

fn command_of(config: &Path) -> String {
    let text = fs::read_to_string(config).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    parsed["command"].as_str().unwrap().to_string()
}

/// Artifacts compared for byte-identity; the run record holds the wall
/// time and is excluded.
fn comparable_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "run_record.json")
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    assert!(!files.is_empty(), "no artifacts in {}", dir.display());
    files
}

#[test]
fn criterion_10_determinism() {
    let configs = fs::read_dir(configs_dir()).unwrap();
    let mut checked = 0usize;
    for entry in configs {
        let config = entry.unwrap().path();
        if config.extension().map(|e| e != "json").unwrap_or(true) {
            continue;
        }
        let command = command_of(&config);
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        for out in [&a, &b] {
            let result = run(&command, &config, out, &[]);
            assert!(
                result.status.success(),
                "{} failed: {}",
                config.display(),
                String::from_utf8_lossy(&result.stderr)
            );
        }
        assert_eq!(
            comparable_artifacts(&a),
            comparable_artifacts(&b),
            "artifacts differ between runs of {}",
            config.display()
        );
        checked += 1;
    }
    assert_eq!(checked, 8, "expected all shipped configs to be exercised");
    println!("criterion 10 determinism: pass (byte-identical artifacts, {checked} configs)");
}

#[test]
fn single_worker_matches_default() {
    let config = configs_dir().join("circular_anisotropic.json");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("sweep", &config, &a, &[]).status.success());
    assert!(run("sweep", &config, &b, &["--workers", "1"]).status.success());
    assert_eq!(comparable_artifacts(&a), comparable_artifacts(&b));
}

#[test]
fn malformed_json_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.json");
    fs::write(&config, "{ not json").unwrap();
    let result = run("spectrum", &config, tmp.path(), &[]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("line"), "diagnostics missing: {stderr}");
}

#[test]
fn unknown_field_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("unknown.json");
    fs::write(
        &config,
        r#"{"command": "verify", "seeed": 1}"#,
    )
    .unwrap();
    let result = run("verify", &config, tmp.path(), &[]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn command_mismatch_exits_2() {
    let config = configs_dir().join("verify_default.json");
    let tmp = tempfile::tempdir().unwrap();
    let result = run("spectrum", &config, tmp.path(), &[]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn nyquist_violation_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("coarse.json");
    fs::write(
        &config,
        r#"{
            "command": "spectrum",
            "geometry": {"kind": "box_pair", "p_lo": [-0.5], "p_hi": [0.5],
                         "q_half_widths": [31.41592653589793]},
            "resolution": {"points_per_axis": [8]}
        }"#,
    )
    .unwrap();
    let result = run("spectrum", &config, tmp.path(), &[]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("Nyquist"));
}

#[test]
fn partial_sweep_exits_4_and_keeps_good_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("partial.json");
    // beta=40 stretches the fixed 32-point grid past the Nyquist bound
    fs::write(
        &config,
        r#"{
            "command": "sweep",
            "geometry": {"kind": "box_pair", "p_lo": [0.0, 0.0], "p_hi": [1.0, 1.0],
                         "q_half_widths": [3.141592653589793, 3.141592653589793]},
            "scaling": {"mode": "landau", "betas": [2.0, 40.0]},
            "resolution": {"points_per_axis": [32, 32]},
            "eps": [0.5]
        }"#,
    )
    .unwrap();
    let result = run("sweep", &config, tmp.path(), &[]);
    assert_eq!(result.status.code(), Some(4));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "header plus one row per point");
    assert!(lines[1].ends_with(','), "first point should succeed");
    assert!(lines[2].contains("Nyquist"), "failed point records its error");
}

#[test]
fn dense_cap_env_reroutes_assembly() {
    let config = configs_dir().join("timebandwidth_10.json");
    let tmp = tempfile::tempdir().unwrap();
    let result = Command::new(bin())
        .arg("spectrum")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(tmp.path())
        .env("DOFKIT_DENSE_CAP", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn under_resolved_verify_fails_range_check() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("under.json");
    fs::write(
        &config,
        r#"{
            "command": "verify",
            "geometry": {"kind": "box_pair", "p_lo": [-0.5], "p_hi": [0.5],
                         "q_half_widths": [31.41592653589793]},
            "resolution": {"points_per_axis": [8]}
        }"#,
    )
    .unwrap();
    let result = run("verify", &config, tmp.path(), &[]);
    assert_eq!(result.status.code(), Some(3));
    let csv = fs::read_to_string(tmp.path().join("verify.csv")).unwrap();
    assert!(csv.lines().any(|l| l.contains("spectral range") && l.contains("false")));
}
