//! Runs the `microlocal` binary as a subprocess.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use microlocal::cli::report::without_timestamp;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microlocal"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--jobs")
        .arg("2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn passing_campaign_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["flow", "trace"], &configs().join("minkowski.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("flow_trace.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["command"], "flow trace");
    assert!(dir.path().join("flow_trace.csv").exists());
    assert!(dir.path().join("trajectory_0.csv").exists());
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["nontrap", "scan"], &configs().join("ring_trap.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("nontrap_scan.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["first_failure"], "nontrap");
}

#[test]
fn missing_mu_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[metric]\ndimension = 2\nflat = [[1.0, 0.0], [0.0, -1.0]]\n");
    let o = run(&["flow", "trace"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("metric") && err.contains("mu"), "{err}");
}

#[test]
fn unknown_key_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "typo.toml",
        "[metric]\ndimension = 2\nflat = [[1.0, 0.0], [0.0, -1.0]]\nmu = 0.5\n[flow]\ncuont = 3\n",
    );
    let o = run(&["nontrap", "scan"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("flow"));

    let o = Command::new(env!("CARGO_BIN_EXE_microlocal")).arg("bogus").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn computation_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // no null covectors exist for a Riemannian metric
    let cfg = write(dir.path(), "euc.toml", "[metric]\ndimension = 2\nflat = [[1.0, 0.0], [0.0, 1.0]]\nmu = 0.5\n");
    let o = run(&["nontrap", "scan"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn same_seed_gives_identical_reports() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = configs().join("minkowski.toml");
    for args in [["escape", "verify"], ["nontrap", "scan"]] {
        for d in [&a, &b] {
            let o = run(&args, &cfg, d.path());
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        }
        let name = format!("{}_{}.json", args[0], args[1]);
        let ra = without_timestamp(&std::fs::read(a.path().join(&name)).unwrap()).unwrap();
        let rb = without_timestamp(&std::fs::read(b.path().join(&name)).unwrap()).unwrap();
        assert_eq!(ra, rb, "{name}");
    }
    assert_eq!(std::fs::read(a.path().join("constants.json")).unwrap(), std::fs::read(b.path().join("constants.json")).unwrap());
}

#[test]
fn report_merge_combines_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("minkowski.toml");
    assert_eq!(run(&["flow", "trace"], &cfg, dir.path()).status.code(), Some(0));
    assert_eq!(run(&["escape", "verify"], &cfg, dir.path()).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_microlocal"))
        .args(["report", "merge"])
        .arg(dir.path().join("flow_trace.json"))
        .arg(dir.path().join("escape_verify.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let merged: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report_merge.json")).unwrap()).unwrap();
    assert_eq!(merged["pass"], true);
}
