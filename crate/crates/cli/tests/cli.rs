use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oofdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oofdm"))
        .args(args)
        .env_remove("OOFDM_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = oofdm(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn value(row: &[String], i: usize) -> f64 {
    row[i].parse().unwrap()
}

#[test]
fn power_relations_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["power-relations", "--scheme", "aco,dco", "--peff", "1", "--out", out]);
    let rows = csv_rows(&dir.path().join("power_relations.csv"));
    assert_eq!(rows[0][0], "aco");
    assert!((value(&rows[0], 3) - 2.0).abs() < 1e-12);
    assert!((value(&rows[0], 4) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);

    ok(&["power-relations", "--scheme", "dco", "--peff", "4", "--out", out]);
    let rows = csv_rows(&dir.path().join("power_relations.csv"));
    assert!((value(&rows[0], 3) - 40.0).abs() < 1e-12);
    assert!((value(&rows[0], 4) - 6.0).abs() < 1e-12);
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["power-relations", "--scheme", "qam"],
        vec!["ser", "--snr", "5:0:1", "--out", out],
        vec!["ser", "--rims", "4", "--out", out],
        vec!["ser", "--n", "1000", "--runs", "1", "--snr", "0", "--out", out],
        vec!["replay", "/nonexistent/manifest.json"],
    ] {
        let res = oofdm(&args);
        assert!(!res.status.success(), "{args:?} should fail");
        assert!(!res.stderr.is_empty());
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "schemes = [\"laco\"]\nn = 64\nruns = 7\nseed = 3\nsnr_db = [10.0]\n").unwrap();
    let out = dir.path().join("o");
    ok(&["ser", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", out.to_str().unwrap()]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "ser");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["settings"]["runs"], 7);
    assert_eq!(manifest["settings"]["n"], 64);
    // Per-command default survives both layers.
    assert_eq!(manifest["settings"]["snr_kind"], "electrical");
    assert_eq!(manifest["columns"]["ser.csv"][0], "scheme");
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"n": 64, "runs": 5, "snr_db": [0.0, 10.0], "channel": {"low_pass": 6.0}}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["rcn-power", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let rows = csv_rows(&out.join("rcn_power.csv"));
    // Five LACO layers at N = 64, two SNR points.
    assert_eq!(rows.len(), 10);
}

#[test]
fn config_errors_name_the_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\nrunz = 10\n").unwrap();
    let res = oofdm(&["ser", "--config", cfg.to_str().unwrap()]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("runz") && err.contains("line 2"), "{err}");
}

#[test]
fn replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    ok(&[
        "allocate", "--n", "64", "--snr", "10,20", "--runs", "20", "--channel", "low-pass:6", "--out",
        first.to_str().unwrap(),
    ]);
    ok(&["replay", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    let names: Vec<String> = fs::read_dir(&first).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.len() >= 4);
    for name in names {
        assert_eq!(fs::read(first.join(&name)).unwrap(), fs::read(second.join(&name)).unwrap(), "{name} differs");
    }
}

#[test]
fn small_frames_run_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let common = ["--n", "64", "--runs", "20"];
    for (cmd, extra, file) in [
        ("ser", vec!["--snr", "0:20:10"], "ser.csv"),
        ("rcn-power", vec!["--snr", "10"], "rcn_power.csv"),
        ("rcn-stats", vec!["--bin", "16"], "rcn_stats.csv"),
        ("allocate", vec!["--snr", "15", "--no-simulate"], "allocation_summary.csv"),
        ("power-relations", vec!["--validate", "20"], "power_relations.csv"),
    ] {
        let out = d(cmd);
        let mut args = vec![cmd];
        args.extend(common);
        args.extend(extra.iter().copied());
        args.extend(["--out", &out]);
        ok(&args);
        assert!(!csv_rows(&Path::new(&out).join(file)).is_empty(), "{cmd}");
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_oofdm"))
        .args(["power-relations", "--scheme", "pam"])
        .env("OOFDM_OUT", dir.path())
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(dir.path().join("manifest.json").exists());
}
