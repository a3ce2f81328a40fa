//! Black-box tests of the `delayed-bsde` binary: exit codes, artifact
//! layout, and the solve/compare reproducibility loop.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delayed-bsde"))
}

fn write_config(dir: &Path, out: &Path, seed: u64) -> std::path::PathBuf {
    let text = format!(
        r#"
[scenario]
name = "zero-generator"
[grid]
horizon = 1.0
n_steps = 10
[ensemble]
n_paths = 300
dim = 1
seed = {seed}
chunk_size = 64
[picard]
max_iters = 5
tol = 1e-6
[output]
dir = "{}"
"#,
        out.display()
    );
    let out_name = out.file_name().unwrap().to_str().unwrap();
    let path = dir.join(format!("cfg_{seed}_{out_name}.toml"));
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_writes_artifacts_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &out, 11);
    let status = bin().arg("solve").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["solution.csv", "iterations.csv", "estimates.csv", "run.meta"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn invalid_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[scenario]\nname = \"zero-generator\"\n").unwrap();
    let output = bin().arg("solve").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
}

#[test]
fn bad_delta_exits_two_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &out, 12);
    let mut text = fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[generator]\nkind = \"delayed-power\"\ngamma = 0.1\ndelta = 1.5\n");
    fs::write(&cfg, text).unwrap();
    let output = bin().arg("solve").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("(0,1)"));
}

#[test]
fn missing_config_exits_two() {
    let status = bin().arg("solve").arg("/nonexistent/x.toml").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn solve_twice_then_compare_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let cfg_a = write_config(tmp.path(), &out_a, 21);
    let cfg_b = write_config(tmp.path(), &out_b, 21);
    assert!(bin().arg("solve").arg(&cfg_a).status().unwrap().success());
    assert!(bin().arg("solve").arg(&cfg_b).status().unwrap().success());
    let output = bin().arg("compare").arg(&out_a).arg(&out_b).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    // run.meta echoes the differing output dirs; every numeric artifact
    // must match bit for bit
    for line in stdout.lines().filter(|l| l.contains(".csv")) {
        assert!(line.contains("identical"), "unexpected diff: {line}");
    }
}

#[test]
fn compare_reports_differences_from_seed_change() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let cfg_a = write_config(tmp.path(), &out_a, 31);
    let cfg_b = write_config(tmp.path(), &out_b, 32);
    assert!(bin().arg("solve").arg(&cfg_a).status().unwrap().success());
    assert!(bin().arg("solve").arg(&cfg_b).status().unwrap().success());
    let output = bin().arg("compare").arg(&out_a).arg(&out_b).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("DIFFERS"));
    assert!(stdout.contains("not identical"));
}

#[test]
fn compare_missing_dir_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &out, 41);
    assert!(bin().arg("solve").arg(&cfg).status().unwrap().success());
    let status = bin()
        .arg("compare")
        .arg(&out)
        .arg(tmp.path().join("empty"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn constants_prints_values_and_rejects_gap_exponent() {
    let output = bin()
        .args(["constants", "--p", "3", "-k", "0.1", "-t", "1.0"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("lambda_p"));
    assert!(stdout.contains("d_p"));

    let output = bin()
        .args(["constants", "--p", "2", "-k", "0.1", "-t", "1.0"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn shipped_scenarios_parse_and_solve() {
    let scenarios = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let tmp = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(&scenarios).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        // redirect the output into the sandbox, keep everything else
        let name = path.file_stem().unwrap().to_str().unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let out = tmp.path().join(name);
        let patched = text.replace(
            &format!("dir = \"runs/{name}\""),
            &format!("dir = \"{}\"", out.display()),
        );
        assert_ne!(text, patched, "output dir not found in {name}");
        let cfg = tmp.path().join(format!("{name}.toml"));
        fs::write(&cfg, patched).unwrap();
        let status = bin().arg("solve").arg(&cfg).status().unwrap();
        assert_eq!(status.code(), Some(0), "{name} failed");
        assert!(out.join("solution.csv").exists());
    }
}
