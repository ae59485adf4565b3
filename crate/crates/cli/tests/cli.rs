use std::path::{Path, PathBuf};
use std::process::Command;

use rfmix::calibrate::CalibrationSettings;
use rfmix::config::BenchConfig;
use rfmix::csvio::{read_scan_csv, write_rb_csv, write_scan_csv};
use rfmix::rbfit::{decay_from_infidelity, doubling_lengths, gen_exact_rb, gen_synthetic_rb};
use rfmix::{measure_lo_leakage, measure_sideband_rejection};
use rfmix_cli::{cmd_budget, cmd_calibrate, cmd_rbfit, cmd_scan, CalibrationMode};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn example() -> PathBuf {
    configs().join("bench_example.json")
}

fn rfmix(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rfmix")).args(args).output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn budget_reproduces_module_gains() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("budget.json");
    cmd_budget(&example(), Some(&out)).unwrap();
    let reports = json(&out);
    let gain = |role: &str| {
        reports
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["role"] == role)
            .unwrap()["total_gain_db"]
            .as_f64()
            .unwrap()
    };
    assert!((gain("DN") - 31.0).abs() < 0.1);
    assert!((gain("UPH") - 7.0).abs() < 0.1);
    assert!((gain("UPL") + 13.0).abs() < 0.1);
    let upl = reports.as_array().unwrap().iter().find(|r| r["role"] == "UPL").unwrap();
    assert!(upl["total_iip3_dbm"].is_null());
}

#[test]
fn empty_chain_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"chains\": {\"dn\": {\"stages\": []}}\n}\n").unwrap();
    let out = rfmix(&["budget", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn missing_config_is_io_error() {
    let out = rfmix(&["budget", "/nonexistent/bench.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_arguments_are_validation_errors() {
    let out = rfmix(&["calibrate", example().to_str().unwrap(), "--mode", "wiggle"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ideal_scan_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ideal.csv");
    cmd_scan(&configs().join("ideal.json"), None, None, Some(&csv)).unwrap();
    let m = json(&csv.with_extension("metrics.json"));
    assert!(m["amp_linearity"].as_f64().unwrap() < 1e-9);
    assert!(m["phase_linearity_rad"].as_f64().unwrap() < 1e-9);
}

#[test]
fn typical_scan_lands_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("typ.csv");
    cmd_scan(&example(), None, None, Some(&csv)).unwrap();
    let m = json(&csv.with_extension("metrics.json"));
    for key in ["amp_linearity", "phase_linearity_rad"] {
        let v = m[key].as_f64().unwrap();
        assert!((1e-4..=1e-3).contains(&v), "{key} = {v}");
    }
}

#[test]
fn scan_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        let out = rfmix(&["scan", example().to_str().unwrap(), "--points", "16", "--seed", seed, "--out", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(p).unwrap()
    };
    let a = run("a.csv", "7");
    let b = run("b.csv", "7");
    let c = run("c.csv", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let scan = read_scan_csv(a.as_slice()).unwrap();
    let mut again = Vec::new();
    write_scan_csv(&mut again, &scan).unwrap();
    assert_eq!(again, a);
}

#[test]
fn scan_rejects_too_few_points() {
    let out = rfmix(&["scan", example().to_str().unwrap(), "--points", "4", "--out", "/tmp/never.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

fn with_settings(settings: &Path) -> rfmix::Converter<f64> {
    let cfg = BenchConfig::load(&example()).unwrap();
    let s: CalibrationSettings = serde_json::from_str(&std::fs::read_to_string(settings).unwrap()).unwrap();
    let mut up = cfg.up_converter().unwrap();
    up.bias = s.bias().unwrap();
    up.predistorter = s.predistorter().unwrap();
    up
}

#[test]
fn lo_null_reaches_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lo.json");
    let outcome = cmd_calibrate(&example(), CalibrationMode::LoNull, None, Some(&out)).unwrap();
    assert!(outcome.summary.contains("->"));
    let up = with_settings(&out);
    let probe = BenchConfig::load(&example()).unwrap().probe;
    assert!(measure_lo_leakage(&up, &up.bias, &probe).unwrap() <= -80.0);
}

#[test]
fn sideband_reaches_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sb.json");
    cmd_calibrate(&example(), CalibrationMode::Sideband, None, Some(&out)).unwrap();
    let up = with_settings(&out);
    let probe = BenchConfig::load(&example()).unwrap().probe;
    assert!(measure_sideband_rejection(&up, &probe).unwrap() >= 100.0);
}

#[test]
fn settings_feed_back_into_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lo.json");
    cmd_calibrate(&example(), CalibrationMode::LoNull, None, Some(&out)).unwrap();
    let mut cfg: serde_json::Value = json(&example());
    cfg["calibration"] = json(&out);
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    let loaded = BenchConfig::from_json(&text).unwrap();
    let up = loaded.up_converter().unwrap();
    assert!(measure_lo_leakage(&up, &up.bias, &loaded.probe).unwrap() <= -80.0);
}

#[test]
fn nonconvergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = json(&example());
    cfg["optimizer"] = serde_json::json!({"max_evals": 10, "init_step_v": 0.01, "tol_dbc": -300.0});
    let path = dir.path().join("tight.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out_path = dir.path().join("s.json");
    let out = rfmix(&["calibrate", path.to_str().unwrap(), "--mode", "lo-null", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out_path.exists());
}

#[test]
fn from_scan_ingests_external_csv() {
    // hand-written homodyne locus: mu e^{it} + nu e^{-it} + c, no simulation involved
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ext.csv");
    let mut text = String::from("drive_phase_rad,acc_re,acc_im\n");
    for k in 0..16 {
        let t = std::f64::consts::TAU * k as f64 / 16.0;
        let z = num_complex::Complex::from_polar(100.0, t)
            + num_complex::Complex::from_polar(2.0, -t + 0.3)
            + num_complex::Complex::new(0.5, -0.25);
        text.push_str(&format!("{t},{},{}\n", z.re, z.im));
    }
    std::fs::write(&csv, text).unwrap();
    let out = dir.path().join("fs.json");
    let o = cmd_calibrate(&configs().join("homodyne.json"), CalibrationMode::FromScan, Some(&csv), Some(&out)).unwrap();
    assert!(o.summary.contains("up converter"));
    let s: CalibrationSettings = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let p = s.predistorter().unwrap();
    assert!((p.b - num_complex::Complex::from_polar(-0.02, 0.3)).norm() < 1e-12);
}

#[test]
fn from_scan_needs_homodyne_config() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    std::fs::write(&csv, "drive_phase_rad,acc_re,acc_im\n0,1,0\n").unwrap();
    let r = cmd_calibrate(&example(), CalibrationMode::FromScan, Some(&csv), Some(&dir.path().join("o.json")));
    assert_eq!(r.unwrap_err().exit_code(), 1);
}

#[test]
fn rbfit_single_qubit_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = decay_from_infidelity(9.3e-4, 2).unwrap();
    let data = gen_synthetic_rb(0.98, p, &doubling_lengths(512), 1000, 42, 2).unwrap();
    let csv = dir.path().join("rb.csv");
    write_rb_csv(std::fs::File::create(&csv).unwrap(), &data).unwrap();
    let out = dir.path().join("rb.fit.json");
    cmd_rbfit(&csv, 2, Some(&out)).unwrap();
    let e = json(&out)["process_infidelity"].as_f64().unwrap();
    assert!((e / 9.3e-4 - 1.0).abs() < 0.15, "{e}");
    assert_eq!(json(&out)["curve"].as_array().unwrap().len(), 9);
}

#[test]
fn rbfit_perfect_gates() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_exact_rb(0.99, 1.0, &doubling_lengths(128), 1000, 2).unwrap();
    let csv = dir.path().join("rb.csv");
    write_rb_csv(std::fs::File::create(&csv).unwrap(), &data).unwrap();
    let o = cmd_rbfit(&csv, 2, None).unwrap();
    assert_eq!(o.written[0], dir.path().join("rb.fit.json"));
    assert!(json(&o.written[0])["process_infidelity"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn rbfit_validation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("short.csv");
    std::fs::write(&csv, "m,survival,shots\n2,0.9,100\n4,0.8,100\n").unwrap();
    let out = rfmix(&["rbfit", csv.to_str().unwrap(), "--dimension", "2"]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&csv, "m,survival,shots\n2,0.9,100\n4,0.8\n8,0.7,100\n").unwrap();
    let out = rfmix(&["rbfit", csv.to_str().unwrap(), "--dimension", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));

    let out = rfmix(&["rbfit", csv.to_str().unwrap(), "--dimension", "3"]);
    assert_eq!(out.status.code(), Some(1));
}
