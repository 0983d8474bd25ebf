use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nltraffic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nltraffic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// A quick Example 1 configuration.
const SMALL_EXAMPLE1: &str = r#"
experiment = "example1-case1"
resolutions = ["1/40", "1/80"]
reference_dx = "1/160"
snapshot_times = [0.5]
t_final = 0.5
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path_str(&path).to_owned()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn run_example1_writes_table_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_EXAMPLE1);
    let out = tmp.path().join("out");
    let o = nltraffic(&["run", "--config", &config, "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("table1_caseI.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "dx,l1_error,eoa");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2.5000000e-2,") && lines[1].ends_with(','));
    let snap = fs::read_to_string(out.join("snapshots_example1_caseI_t0.5.csv")).unwrap();
    assert!(snap.starts_with("x,rho\n"));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["violations"].as_array().unwrap().len(), 0);
    assert_eq!(summary["example1"][0]["case"], "I");
    assert_eq!(summary["example1"][0]["reference"], "1/160");
    assert_eq!(summary["example1"][0]["desk_scale"], false);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_EXAMPLE1);
    let dirs = ["a", "b", "c"].map(|d| tmp.path().join(d));
    let extra: [&[&str]; 3] = [&[], &[], &["--sequential", "--threads", "1"]];
    for (dir, flags) in dirs.iter().zip(extra) {
        let mut args = vec!["run", "--config", &config, "--out", path_str(dir)];
        args.extend_from_slice(flags);
        assert!(nltraffic(&args).status.success());
    }
    let a = csv_files(&dirs[0]);
    assert!(!a.is_empty());
    assert_eq!(a, csv_files(&dirs[1]));
    assert_eq!(a, csv_files(&dirs[2]));
    // Identical apart from the recorded output directory.
    let summary = |d: &Path| {
        let mut v: serde_json::Value = serde_json::from_slice(&fs::read(d.join("summary.json")).unwrap()).unwrap();
        v["config"]["out"] = serde_json::Value::Null;
        v
    };
    assert_eq!(summary(&dirs[0]), summary(&dirs[1]));
}

#[test]
fn misspelled_key_fails_before_compute() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "experiment = \"example1-case1\"\nt_fnial = 2.0\n");
    let out = tmp.path().join("out");
    let o = nltraffic(&["run", "--config", &config, "--out", path_str(&out)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("t_fnial"), "{err}");
    assert!(!out.exists());
}

#[test]
fn indivisible_eta_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = nltraffic(&["run", "--experiment", "custom", "--dx", "0.15", "--out", path_str(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nearest admissible dx"));
    assert!(!out.exists());
}

#[test]
fn unwritable_output_directory_fails_without_partial_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_EXAMPLE1);
    let blocker = tmp.path().join("not-a-dir");
    fs::write(&blocker, b"").unwrap();
    let out = blocker.join("out");
    let o = nltraffic(&["run", "--config", &config, "--out", path_str(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not-a-dir"));
    assert!(!out.exists());
}

#[test]
fn explicit_flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_EXAMPLE1);
    let out = tmp.path().join("out");
    let o = nltraffic(&[
        "run", "--config", &config, "--out", path_str(&out), "--T", "0.25", "--g-profile", "1-rho^2",
        "--cfl-mode", "bv-strict", "--cfl-safety", "0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let c = &summary["config"];
    assert_eq!(c["t_final"], 0.25);
    assert_eq!(c["model"]["g"], "1-rho^2");
    assert_eq!(c["cfl"]["mode"], "bv-strict");
    assert_eq!(c["cfl"]["safety"], 0.5);
    assert_eq!(c["reference_dx"], "1/160");
}

#[test]
fn validate_entropy_passes_for_case_one() {
    let o = nltraffic(&["validate", "--entropy", "--dx", "1/40", "--case", "I"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    let entropy = &v["run"]["entropy"];
    assert_eq!(entropy["violations"], 0);
    assert!(entropy["max_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn sweep_covers_both_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = nltraffic(&["sweep", "--experiment", "example2", "--desk-scale", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("table2.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "case,eta,l1_distance");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("I,") && lines[6].starts_with("II,"));
}

#[test]
fn bad_flag_values_are_usage_errors() {
    assert_eq!(nltraffic(&["run", "--cfl-mode", "fast"]).status.code(), Some(2));
    assert_eq!(nltraffic(&["run", "--case", "III"]).status.code(), Some(2));
    assert_eq!(nltraffic(&["run", "--dx", "-1"]).status.code(), Some(2));
}
