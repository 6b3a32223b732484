use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diffeoraptor::io::{read_displacement, read_labels, read_volume};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diffeoraptor"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn phantom(dir: &Path, name: &str, extra: &[&str]) -> (PathBuf, PathBuf) {
    let vol = dir.join(format!("{name}.nii"));
    let labels = dir.join(format!("{name}_labels.nii.gz"));
    let mut args = vec!["phantom", "--kind", "sphere", "--dims", "16", "--out", s(&vol), "--out-labels", s(&labels)];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (vol, labels)
}

#[test]
fn phantom_writes_volume_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, labels) = phantom(dir.path(), "p", &["--seed", "3", "--noise", "0.01"]);
    let v = read_volume(&vol).unwrap();
    let l = read_labels(&labels).unwrap();
    assert_eq!(v.dims(), [16; 3]);
    assert!(l.count(1) > 0);

    let bad = run(&["phantom", "--kind", "cube", "--dims", "16", "--out", "x.nii", "--out-labels", "y.nii"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn register_identical_volumes_gives_identity() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, _) = phantom(dir.path(), "p", &[]);
    let warped = dir.path().join("w.nii");
    let field = dir.path().join("d.nii");
    let trace = dir.path().join("trace.csv");
    let summary = dir.path().join("summary.json");
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "pyramid_levels = [1]\nmax_iterations = 5\n").unwrap();
    let out = run(&[
        "register",
        "--fixed",
        s(&vol),
        "--moving",
        s(&vol),
        "--metric",
        "ssd",
        "--out-warped",
        s(&warped),
        "--out-field",
        s(&field),
        "--out-trace",
        s(&trace),
        "--out-summary",
        s(&summary),
        "--config",
        s(&config),
        "--threads",
        "1",
        "step_size=0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let d = read_displacement(&field).unwrap();
    assert!(d.max_norm() < 1e-6);
    assert_eq!(read_volume(&warped).unwrap().dims(), [16; 3]);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("level,iteration,data,reg,total\n"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert!((json["min_det_jacobian"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(json["non_positive_det_voxels"], 0);
    assert_eq!(json["metric"], "ssd");
    assert_eq!(json["config"]["step_size"], 0.1);
}

#[test]
fn missing_input_exits_with_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.nii");
    let warped = dir.path().join("w.nii");
    let out = run(&[
        "register",
        "--fixed",
        s(&missing),
        "--moving",
        s(&missing),
        "--out-warped",
        s(&warped),
        "--out-field",
        s(&dir.path().join("d.nii")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.nii"));
    assert!(!warped.exists());
}

#[test]
fn invalid_settings_fail_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, _) = phantom(dir.path(), "p", &[]);
    let warped = dir.path().join("w.nii");
    let field = dir.path().join("d.nii");
    let out = run(&[
        "register",
        "--fixed",
        s(&vol),
        "--moving",
        s(&vol),
        "--out-warped",
        s(&warped),
        "--out-field",
        s(&field),
        "learning_rate=3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("learning_rate") && err.contains("step_size"), "{err}");
    assert!(!warped.exists() && !field.exists());

    // mismatched dims fail inside the pipeline
    let other = dir.path().join("q.nii");
    let labels = dir.path().join("q_labels.nii");
    assert!(run(&["phantom", "--kind", "ramp", "--dims", "12", "--out", s(&other), "--out-labels", s(&labels)])
        .status
        .success());
    let out = run(&[
        "register",
        "--fixed",
        s(&vol),
        "--moving",
        s(&other),
        "--out-warped",
        s(&warped),
        "--out-field",
        s(&field),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!warped.exists() && !field.exists());
}

#[test]
fn dice_and_jacobian_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, labels) = phantom(dir.path(), "p", &[]);
    let out =
        run(&["evaluate", "dice", "--labels-a", s(&labels), "--labels-b", s(&labels), "--label", "1", "--header"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "label,dice,voxels_a,voxels_b");
    assert!(rows[1].starts_with("1,1.000000,"), "{}", rows[1]);

    let field = dir.path().join("d.nii");
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "metric = \"ssd\"\npyramid_levels = [1]\nmax_iterations = 1\n").unwrap();
    let reg = run(&[
        "register",
        "--fixed",
        s(&vol),
        "--moving",
        s(&vol),
        "--config",
        s(&config),
        "--out-warped",
        s(&dir.path().join("w.nii")),
        "--out-field",
        s(&field),
    ]);
    assert!(reg.status.success(), "{}", String::from_utf8_lossy(&reg.stderr));
    let hist = dir.path().join("hist.csv");
    let out = run(&["jacobian", "--field", s(&field), "--bin-width", "0.05", "--out", s(&hist)]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&hist).unwrap();
    assert!(csv.starts_with("log10_det_low,log10_det_high,count\n"));
    assert!(csv.contains("-0.025000,0.025000,4096"));
    assert!(csv.ends_with("non_positive,,0\n"));

    let missing = run(&["jacobian", "--field", "absent.nii", "--out", s(&hist)]);
    assert_eq!(missing.status.code(), Some(2));
}
