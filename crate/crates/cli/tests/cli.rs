use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gradhom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradhom")).args(args).output().expect("binary runs")
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn homogeneous_run_writes_result_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("result.json");
    let report = dir.path().join("report.json");
    let config = repo_config("homogeneous.json");
    let o = gradhom(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("GPa"));
    assert!(stdout.contains("kN/mm"));

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["voigt_order_pairs", "voigt_order_triples", "C", "G", "D", "units", "epsilon", "I_bar", "metadata"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["C"].as_array().unwrap().len(), 6);
    assert_eq!(doc["G"].as_array().unwrap().len(), 6);
    assert_eq!(doc["G"][0].as_array().unwrap().len(), 18);
    assert_eq!(doc["D"].as_array().unwrap().len(), 18);
    let c11 = doc["C"][0][0].as_f64().unwrap();
    // λ + 2μ for E = 110 GPa, ν = 0.35.
    let want = 110e9 * 0.65 / (1.35 * 0.3);
    assert!((c11 - want).abs() < 1e-8 * want);

    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["factorizations"], 1);
    assert_eq!(rep["phi_solves"], 6);
    assert_eq!(rep["psi_solves"], 18);
}

#[test]
fn si_units_switch_labels() {
    let config = repo_config("homogeneous.json");
    let o = gradhom(&["run", "--config", config.to_str().unwrap(), "--si-units"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("Pa"));
    assert!(!stdout.contains("GPa"));
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{ "phases": [], "frobnicate": 1 }"#).unwrap();
    let o = gradhom(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let config = repo_config("homogeneous.json");
    let o = gradhom(&["run", "--config", config.to_str().unwrap(), "--epsilon", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_periodic_mesh_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/two_tets.msh");
    std::fs::copy(&fixture, dir.path().join("two.msh")).unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{ "import": "two.msh", "phases": [{ "young_modulus": 1e9, "poisson_ratio": 0.3, "phase_id": 1 }] }"#,
    )
    .unwrap();
    let o = gradhom(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unwritable_output_exits_with_one() {
    let config = repo_config("homogeneous.json");
    let o = gradhom(&["run", "--config", config.to_str().unwrap(), "--output", "/nonexistent-dir/x/result.json"]);
    assert_eq!(o.status.code(), Some(1));
}
