use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stard"))
        .args(args)
        .output()
        .unwrap()
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_writes_one_line_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/synth.csv");
    let spec = repo_file("configs/teacher.spec");
    let o = stard(&[
        "data",
        "synth",
        "--spec",
        s(&spec),
        "--n",
        "37",
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| l.chars().next().is_some_and(|c| c != 'x'))
        .collect();
    assert_eq!(rows.len(), 37);
    // Four features and one target per row.
    assert!(rows.iter().all(|r| r.split(',').count() == 5));
}

#[test]
fn theory_suite_writes_json_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("theory.json");
    let o = stard(&[
        "theory",
        "--suite",
        "geometric",
        "--trials",
        "20",
        "--seed",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["suite"], "geometric");
    assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));
}

#[test]
fn run_writes_all_three_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.conf");
    let data = repo_file("crates/core/data/housing.csv");
    std::fs::write(
        &cfg,
        format!(
            "name = tiny\npath = {}\ntarget = MEDV\nwidths = 4\nepochs = 2\nd = 2\n\
             seeds = 0, 1\nvariants = ensemble, big_nn\ntiming = false\n",
            data.display()
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = stard(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for ext in ["csv", "json", "md"] {
        assert!(out.join(format!("report.{ext}")).is_file(), "{ext}");
    }
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), md);
}

#[test]
fn bad_config_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "name = bad\nno_such_key = 1\n").unwrap();
    let o = stard(&["run", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let missing = dir.path().join("missing.conf");
    assert_eq!(
        stard(&["run", "--config", s(&missing), "--out", s(dir.path())])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = stard(&["theory", "--suite", "nonsense", "--out", "x.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonsense"));
}
