//! End-to-end runs of the `hypcoords` binary.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hypcoords");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).env_remove("HYPCOORDS_OUT").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn henon_certificate_passes_and_writes_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["certify", "--map", "henon", "--a", "1.4", "--b", "0.3", "--x0", "0", "--y0", "0", "--k", "20", "--flavor", "II", "--out", "out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ledger = std::fs::read_to_string(dir.path().join("out/ledger.kv")).unwrap();
    assert!(ledger.contains("flavor = SingularII"), "{ledger}");
    assert!(dir.path().join("out/certificate.csv").exists());
    assert!(dir.path().join("out/certificate.json").exists());
}

#[test]
fn rotation_fails_at_the_first_index() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["certify", "--map", "linear", "--matrix", "0,1,−1,0", "--k", "5", "--out", "out"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("C_{ξ₀,i} < 1 fails at i=1"), "{}", stderr(&o));
}

#[test]
fn oracle_check_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["oracle-check", "--seed", "7", "--trials", "1000", "--out", "out", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/oracle.csv")).unwrap();
    assert!(!csv.lines().skip(1).any(|l| l.ends_with(",false")), "a row failed");
    assert!(!dir.path().join("out/oracle.json").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["certify", "--k", "0"][..],
        &["foliate", "--bogus"],
        &["orbit", "--map", "nope"],
        &["orbit", "--param", "q=1"],
        &["certify", "--eta", "0.9"],
        &["no-such-command"],
    ] {
        let o = run_in(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(BIN)
        .args(["orbit", "--k", "3"])
        .current_dir(dir.path())
        .env("HYPCOORDS_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(target.join("orbit.csv").exists());
    assert!(!dir.path().join("hypcoords-out").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# three iterates\nk = 3\nformat = csv\nout = cfg-out\n").unwrap();
    let o = run_in(dir.path(), &["orbit", "--config", "run.cfg", "--k", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("cfg-out/orbit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6, "header plus ξ₀..ξ₅");
    assert!(!dir.path().join("cfg-out/orbit.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    let o = run_in(dir.path(), &["orbit", "--config", "bad.cfg", "--out", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        "orbit",
        "frames",
        "certify",
        "aux-constants",
        "verify-convergence",
        "verify-variation",
        "foliate",
        "oracle-check",
        "scan-constants",
    ] {
        let o = run_in(dir.path(), &[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}");
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(text.contains("Usage:") && text.lines().next().is_some_and(|l| l.len() > 20), "{cmd}: {text}");
    }
}
