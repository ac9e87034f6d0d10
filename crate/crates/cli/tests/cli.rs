use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tlsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn sidecar(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn saturation_preset_row_at_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tlsim(&["saturation", "--preset", "fig2"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("saturation.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows[0], vec![0.0, 0.0, 0.0]);
    let one = rows.iter().find(|r| r[0] == 1.0).unwrap();
    assert!((one[1] - 0.25).abs() < 1e-12);
    assert!((one[2] - 0.20183).abs() < 1e-5);
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1] && w[1][2] >= w[0][2]);
    }
}

#[test]
fn flags_override_config_and_seed_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"seed": 3, "linewidth": {"points": 5, "include_zero": false}}"#);
    let out = tmp.path().join("run");
    let o = tlsim(&["linewidth", "--config", &cfg, "--seed", "9"], &out);
    assert!(o.status.success());
    let side = sidecar(&out);
    assert_eq!(side["seed"], 9);
    assert_eq!(side["config"]["linewidth"]["points"], 5);
    let csv = std::fs::read_to_string(out.join("linewidth.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "{\n  \"saturation\": {\"s_mn\": 1}\n}");
    let o = tlsim(&["saturation", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("s_mn") && err.contains("line 2"), "{err}");

    let o = tlsim(&["rabi", "--preset", "fig2"], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(tmp.path(), r#"{"parameters": "no-such-set"}"#);
    let o = tlsim(&["saturation", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(tmp.path(), r#"{"rabi": {"samples": 10}}"#);
    let o = tlsim(&["rabi", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_guard_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"mollow": {"step": 0.5, "chaotic": false}}"#);
    let o = tlsim(&["mollow", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tag_run_is_worker_independent_and_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let o = tlsim(&["tags", "--samples", "50000", "--seed", "11", "--workers", workers], dir);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["tags.csv", "tags_histogram.csv", "tags.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let meta: tlsim_core::export::TagSidecar =
        serde_json::from_str(&std::fs::read_to_string(a.join("tags.json")).unwrap()).unwrap();
    assert_eq!(meta.seed, 11);
    let file = std::io::BufReader::new(std::fs::File::open(a.join("tags.csv")).unwrap());
    let stream = tlsim_core::export::read_tags(file, meta.duration_ns).unwrap();
    assert_eq!(stream.count(1), meta.n_channel1);
    assert_eq!(stream.count(2), meta.n_channel2);
    let n = stream.len() as f64;
    assert!((n - 50_000.0).abs() < 5.0 * n.sqrt(), "{n}");
}

#[test]
fn validate_command_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tlsim(&["validate"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{stdout}");
}
