use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rrcli"))
}

fn write_config(dir: &Path, out: &Path) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "problem": {
            "kind": "quadratic",
            "per_client": 3,
            "dim": 2,
            "spectrum": {"mu": 0.5, "l": 2.0},
            "heterogeneity": {"client_spread": 1.0, "component_spread": 0.3},
            "seed": 1
        },
        "clients": 4,
        "cohort": 2,
        "algorithms": ["rrcli", "fedavg"],
        "epochs": 4,
        "seeds": [7],
        "out_dir": out
    });
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn run_then_rerun_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = write_config(dir.path(), &a);
    let status = bin().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert!(status.success());
    let status = bin()
        .args(["run", "--config"])
        .arg(a.join("manifest.json"))
        .arg("--out")
        .arg(&b)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["rrcli_runs.csv", "rrcli_mean.csv", "fedavg_runs.csv", "fedavg_mean.csv", "best.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), &out);
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--algo", "nastya", "--seeds", "1,2", "--multipliers", "1,2"])
        .status()
        .unwrap();
    assert!(status.success());
    let runs = std::fs::read_to_string(out.join("nastya_runs.csv")).unwrap();
    // 2 multipliers x 2 seeds x (4 epochs + initial point)
    assert_eq!(runs.lines().count(), 1 + 2 * 2 * 5);
    assert!(!out.join("rrcli_runs.csv").exists());
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"problem": {"kind": "phishing_surrogate"}, "clients": 12, "cohort": 5,
        "algorithms": ["rrcli"], "epochs": 1, "seeds": [0]}"#)
        .unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = bin().args(["run", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(6));
}

#[test]
fn verify_variance_small() {
    let out = bin().args(["verify-variance", "--max-size", "4"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("PASS M=2 N=2 C=2")));
    assert!(!text.contains("FAIL"));
}

#[test]
fn solve_optimum_on_small_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.svm");
    std::fs::write(&data, "+1 1:1 2:0.5\n-1 1:0.2 3:1\n+1 2:1\n-1 1:-0.5 3:0.3\n").unwrap();
    let sidecar = dir.path().join("x.opt");
    let out = bin()
        .args(["solve-optimum", "--dataset"])
        .arg(&data)
        .args(["--alpha", "0.01", "--clients", "2", "--sidecar"])
        .arg(&sidecar)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["grad_norm"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["dim"], 3);
    assert!(sidecar.exists());
}
