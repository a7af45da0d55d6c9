//! End-to-end runs of the `snspdkit` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn snspdkit(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snspdkit"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn snspdkit")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = snspdkit(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn result(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["result"].clone()
}

#[test]
fn lossless_fringe_scan_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "fringe", "--alpha", "0", "--noise", "0"]);
    let csv = d.join("sim_fringe.csv");
    ok(d, &["fploss", "--input", csv.to_str().unwrap()]);
    let r = result(&d.join("fploss.json"));
    let alpha = r["estimate"]["alpha_db_per_cm"].as_f64().unwrap();
    assert!(alpha.abs() < 1e-6, "alpha {alpha}");
}

#[test]
fn fringe_json_and_csv_inputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "5", "simulate", "fringe", "--alpha", "0.4"]);
    ok(d, &["fploss", "--input", d.join("sim_fringe.csv").to_str().unwrap()]);
    let a = result(&d.join("fploss.json"))["estimate"]["alpha_db_per_cm"].as_f64().unwrap();
    ok(d, &["fploss", "--input", d.join("sim_fringe.json").to_str().unwrap()]);
    let b = result(&d.join("fploss.json"))["estimate"]["alpha_db_per_cm"].as_f64().unwrap();
    assert!((a - 0.4).abs() < 0.02, "{a}");
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn assumed_reflectance_too_low_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "fringe", "--alpha", "0.05", "--noise", "0"]);
    let o = snspdkit(d, &["fploss", "--input", d.join("sim_fringe.csv").to_str().unwrap(), "--reflectance", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gain-like"));
}

#[test]
fn tm_fundamental_index() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--polarization", "tm", "modes"]);
    let r = result(&d.join("modes_tm.json"));
    let n = r[0]["n_eff_re"].as_f64().unwrap();
    assert!(n > 2.133 && n < 2.138, "TM n_eff {n}");
    assert!(d.join("mode_tm_0.json").is_file() && d.join("mode_tm_0.bin").is_file());
}

#[test]
fn usage_and_input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(snspdkit(d, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(snspdkit(d, &["fploss"]).status.code(), Some(1));
    assert_eq!(snspdkit(d, &["fploss", "--input", "/nonexistent.csv"]).status.code(), Some(1));
    assert_eq!(snspdkit(d, &["--help"]).status.code(), Some(0));

    let bad = d.join("bad.toml");
    std::fs::write(&bad, "[diffusion]\nlateral_diffusion_len_um = 40.0\n").unwrap();
    let o = snspdkit(d, &["--config", bad.to_str().unwrap(), "profile"]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(&bad, "unknown_key = 3\n").unwrap();
    assert_eq!(snspdkit(d, &["--config", bad.to_str().unwrap(), "profile"]).status.code(), Some(1));

    let csv = d.join("short.csv");
    std::fs::write(&csv, "phase_rad,power\n0,1\n").unwrap();
    assert_eq!(snspdkit(d, &["fploss", "--input", csv.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for kind in ["fringe", "efficiency", "bias", "timetags"] {
        ok(a.path(), &["--seed", "11", "simulate", kind]);
        ok(b.path(), &["--seed", "11", "simulate", kind]);
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert!(x == y, "{n:?} differs between runs");
    }
}

#[test]
fn outputs_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "3", "simulate", "bias"]);
    let text = std::fs::read_to_string(d.join("sim_bias.csv")).unwrap();
    let first = text.lines().next().unwrap();
    let prov: Value = serde_json::from_str(first.strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(prov["seed"], 3);
    assert_eq!(prov["command"], "simulate bias");
    assert_eq!(prov["config_sha256"].as_str().unwrap().len(), 64);

    ok(d, &["biasfit", "--input", d.join("sim_bias.csv").to_str().unwrap()]);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(d.join("biasfit.json")).unwrap()).unwrap();
    let inputs = json["provenance"]["inputs"].as_object().unwrap();
    assert_eq!(inputs.len(), 1);
    let fit = &json["result"];
    assert!((fit["inflection_ua"].as_f64().unwrap() - 3.0).abs() < 0.05);
}

#[test]
fn efficiency_calibration_from_simulated_set() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "efficiency", "--noise", "0"]);
    for input in ["sim_efficiency.csv", "sim_efficiency.json"] {
        ok(d, &["calibrate", "--input", d.join(input).to_str().unwrap()]);
        let r = result(&d.join("calibrate.json"));
        for p in r["polarizations"].as_array().unwrap() {
            assert!((p["kappa_left"].as_f64().unwrap() - 0.26).abs() < 1e-9);
            assert!((p["kappa_right"].as_f64().unwrap() - 0.48).abs() < 1e-9);
        }
    }
}
