//! Black-box checks of the command line interface.

use std::path::PathBuf;
use std::process::{Command, Output};

fn sfde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfde")).args(args).output().unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sfde-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let a = tmp("sync-a.csv");
    let b = tmp("sync-b.csv");
    for out in [&a, &b] {
        let r = sfde(&[
            "synchronize",
            "--preset",
            "example62",
            "--T",
            "5",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let c = tmp("sync-c.csv");
    let r = sfde(&[
        "synchronize", "--preset", "example62", "--T", "5", "--seed", "12",
        "--out", c.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn misaligned_atom_is_a_validation_error() {
    let cfg = tmp("misaligned.json");
    std::fs::write(
        &cfg,
        r#"{
          "system": {
            "n": 1, "m": 1, "tau": 1.0,
            "atoms": [{"s": -0.3, "A": [[1.0]]}],
            "sigma": [[1.0]]
          },
          "numerics": {"h": 0.00390625},
          "rng": {"master_seed": 1}
        }"#,
    )
    .unwrap();
    let r = sfde(&["resolvent", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "alignment");
    assert!(err["error"]["message"].as_str().unwrap().contains("-0.3"));
}

#[test]
fn unstable_system_is_a_numerical_failure() {
    let cfg = tmp("unstable.json");
    std::fs::write(
        &cfg,
        r#"{
          "system": {
            "n": 1, "m": 1, "tau": 0.0,
            "atoms": [{"s": 0.0, "A": [[1.0]]}],
            "sigma": [[1.0]]
          },
          "numerics": {"h": 0.00390625},
          "rng": {"master_seed": 1}
        }"#,
    )
    .unwrap();
    let r = sfde(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "certification");
}

#[test]
fn missing_source_is_a_config_error() {
    let r = sfde(&["analyze"]);
    assert_eq!(r.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn synchronize_distance_shrinks() {
    let r = sfde(&["synchronize", "--preset", "example62", "--T", "30"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x_1,y_1,dist");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let initial = rows
        .iter()
        .filter(|row| row[0] <= 0.0)
        .fold(0.0f64, |m, row| m.max(row[3]));
    let terminal = rows.last().unwrap()[3];
    assert!(terminal < initial, "terminal {terminal}, initial {initial}");
}

#[test]
fn moments_json_is_consistent() {
    let r = sfde(&[
        "moments", "--preset", "example61", "--replicas", "200", "--T", "10",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["replicas"], 200);
    let var = v["var"].as_f64().unwrap();
    assert!(var > 0.0 && var <= v["bounds"]["variance"].as_f64().unwrap());
    assert!(v["sup_sq_mean"].as_f64().unwrap() <= v["bounds"]["sup_sq_mean"].as_f64().unwrap());
}

#[test]
fn gnuplot_requires_out() {
    let r = sfde(&[
        "synchronize", "--preset", "example61", "--T", "2", "--gnuplot", "x.gp",
    ]);
    assert_eq!(r.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let csv = tmp("fig.csv");
    let gp = tmp("fig.gp");
    let r = sfde(&[
        "synchronize", "--preset", "example61", "--T", "2",
        "--out", csv.to_str().unwrap(), "--gnuplot", gp.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    let script = std::fs::read_to_string(&gp).unwrap();
    assert!(script.contains("plot"));
    assert!(script.contains(csv.to_str().unwrap()));
}

#[test]
fn pullback_distances_decrease() {
    let r = sfde(&[
        "pullback", "--preset", "example61", "--times", "5,10,15", "--seed", "4",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout).unwrap();
    let d: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(d.len(), 3);
    assert!(d[0] > d[1] && d[1] > d[2], "distances {d:?}");
}
