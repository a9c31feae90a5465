use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use roomchan::harness::parse_config;

const CSV_FILES: &[&str] = &[
    "power_kurtosis.csv",
    "profile_windows.csv",
    "arrival_count.csv",
    "order_statistics.csv",
    "residual_power.csv",
    "delay_moments.csv",
    "spatial_scatter.csv",
];

fn roomchan(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_roomchan"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn run_into(dir: &Path, threads: Option<&str>) -> Output {
    let out = dir.to_str().unwrap();
    roomchan(&["run", "--model", "poisson", "--runs", "60", "--seed", "7", "--out", out], threads)
}

fn manifest_without_paths(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    v["config"].as_object_mut().unwrap().remove("output_dir");
    v.as_object_mut().unwrap().remove("config_text");
    v
}

#[test]
fn run_writes_every_file_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in CSV_FILES.iter().chain(&["config.txt", "manifest.json"]) {
        let path = tmp.path().join(f);
        assert!(path.is_file(), "missing {f}");
        assert!(fs::metadata(&path).unwrap().len() > 0, "empty {f}");
    }
    let header = fs::read_to_string(tmp.path().join("power_kurtosis.csv")).unwrap();
    assert!(header.lines().count() > 100);
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert_eq!(run_into(a.path(), Some("1")).status.code(), Some(0));
    assert_eq!(run_into(b.path(), Some("4")).status.code(), Some(0));
    assert_eq!(run_into(c.path(), Some("4")).status.code(), Some(0));
    for f in CSV_FILES {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs between 1 and 4 threads");
        assert_eq!(x, fs::read(c.path().join(f)).unwrap(), "{f} differs between repeated runs");
    }
    assert_eq!(manifest_without_paths(a.path()), manifest_without_paths(b.path()));
}

#[test]
fn manifest_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_into(tmp.path(), None).status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    let text = v["config_text"].as_str().unwrap();
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.runs, 60);
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.to_text(), text);
    assert_eq!(fs::read_to_string(tmp.path().join("config.txt")).unwrap(), text);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["model"], "poisson");
}

#[test]
fn invalid_config_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "wall_gain = 1.2\n").unwrap();
    let out = roomchan(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wall_gain"));

    fs::write(&cfg, "no_such_key = 3\n").unwrap();
    let out = roomchan(&["theory", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    let out = roomchan(&["run", "--config", tmp.path().join("missing.cfg").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(roomchan(&["run", "--model", "nonsense"], None).status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let out = roomchan(&["run", "--runs", "5", "--out", file.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn theory_and_sample_write_their_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(roomchan(&["theory", "--out", out], None).status.code(), Some(0));
    for f in ["theory_delay.csv", "theory_order_cdf.csv", "theory_residual.csv"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    assert_eq!(roomchan(&["sample", "--model", "ms", "--runs", "3", "--out", out], None).status.code(), Some(0));
    let dir = tmp.path().join("realizations");
    assert_eq!(fs::read_dir(&dir).unwrap().count(), 3);
    let first = fs::read_to_string(dir.join("realization_00000.csv")).unwrap();
    assert!(first.starts_with("kx,ky,kz,delay_s,gain_re,gain_im,reflection_order"));
}
