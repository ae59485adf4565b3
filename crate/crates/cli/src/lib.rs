//! The four bench workflows behind the `rfmix` binary.
//!
//! Each command reads its inputs, writes its report files and returns a
//! short human summary. Relative paths inside a config (`output_dir`) are
//! resolved against the config file's directory.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rfmix::calibrate::{calibrate_from_scan, null_lo_blackbox, CalibrationSettings};
use rfmix::config::{BenchConfig, ConfigError};
use rfmix::csvio::{read_rb_csv, read_scan_csv, write_scan_csv, CsvError};
use rfmix::metrics::linearity_report;
use rfmix::signal::amplitude_ratio_to_db;
use rfmix::{budget_report, design_predistorter, fit_decay, measure_sideband_rejection, phase_scan};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 1 validation, 2 convergence failure, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Convergence(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            ConfigError::Parse { .. } => CliError::Validation(e.to_string()),
        }
    }
}

impl From<rfmix::Error> for CliError {
    fn from(e: rfmix::Error) -> Self {
        match e {
            rfmix::Error::NoConvergence(_) => CliError::Convergence(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn csv_error(path: &Path, e: CsvError) -> CliError {
    match e {
        CsvError::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Result of a command: the files written and a printable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub summary: String,
}

fn load(config: &Path) -> Result<BenchConfig, CliError> {
    Ok(BenchConfig::load(config)?)
}

fn output_path(config_path: &Path, cfg: &BenchConfig, explicit: Option<&Path>, default_name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    base.join(&cfg.output_dir).join(default_name)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn prepare(path: &Path) -> Result<(), CliError> {
    drop(create(path)?);
    Ok(())
}

/// Cascade report for every declared chain.
pub fn cmd_budget(config: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let cfg = load(config)?;
    let reports: Vec<_> = cfg
        .chains
        .values()
        .map(|entry| budget_report(&entry.spec, entry.input_dbm))
        .collect();
    let path = output_path(config, &cfg, out, "budget.json");
    prepare(&path)?;
    write_json(&path, &reports)?;
    let mut summary = String::new();
    for r in &reports {
        let _ = writeln!(
            summary,
            "{:<4} gain {:>7.2} dB  NF {:>6.2} dB  IIP3 {:>8} dBm  out {:>7.2} dBm at {:.1} dBm in",
            r.role,
            r.total_gain_db,
            r.total_nf_db,
            if r.total_iip3_dbm.is_finite() { format!("{:.2}", r.total_iip3_dbm) } else { "inf".into() },
            r.output_dbm,
            r.input_dbm
        );
        for w in &r.warnings {
            let _ = writeln!(summary, "     warning: {w}");
        }
    }
    Ok(Outcome { written: vec![path], summary })
}

#[derive(Debug, Serialize)]
struct ScanMetrics {
    points: usize,
    seed: u64,
    amp_linearity: f64,
    phase_linearity_rad: f64,
    drive_freq_hz: Option<f64>,
    dac_clipped: usize,
    adc_clipped: usize,
    overdriven: usize,
}

/// Loopback phase scan: CSV of accumulator values plus a metrics JSON beside it.
pub fn cmd_scan(config: &Path, points: Option<usize>, seed: Option<u64>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let mut cfg = load(config)?;
    if let Some(n) = points {
        cfg.loopback.n_phase_points = n;
    }
    if let Some(s) = seed {
        cfg.loopback.seed = s;
    }
    cfg.loopback.validate_scan()?;
    let up = cfg.up_converter().map_err(CliError::Validation)?;
    let dn = cfg.dn_converter().map_err(CliError::Validation)?;
    let scan = phase_scan(&up, &dn, &cfg.loopback)?;
    let report = linearity_report(&scan)?;

    let csv_path = output_path(config, &cfg, out, "scan.csv");
    let metrics_path = csv_path.with_extension("metrics.json");
    let mut w = create(&csv_path)?;
    write_scan_csv(&mut w, &scan).map_err(|e| io_error(&csv_path, e))?;
    drop(w);
    let metrics = ScanMetrics {
        points: report.n_points,
        seed: cfg.loopback.seed,
        amp_linearity: report.amp_linearity,
        phase_linearity_rad: report.phase_linearity,
        drive_freq_hz: report.freq,
        dac_clipped: scan.diagnostics.dac_clipped,
        adc_clipped: scan.diagnostics.adc_clipped,
        overdriven: scan.diagnostics.overdriven,
    };
    write_json(&metrics_path, &metrics)?;
    let mut summary = format!(
        "amp linearity {:.3e}  phase linearity {:.3e} rad  ({} points, seed {})\n",
        metrics.amp_linearity, metrics.phase_linearity_rad, metrics.points, metrics.seed
    );
    if !scan.diagnostics.is_clean() {
        let _ = writeln!(
            summary,
            "warning: {} DAC and {} ADC samples clipped, {} amplifier samples overdriven",
            metrics.dac_clipped, metrics.adc_clipped, metrics.overdriven
        );
    }
    Ok(Outcome { written: vec![csv_path, metrics_path], summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    LoNull,
    Sideband,
    FromScan,
}

impl std::str::FromStr for CalibrationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lo-null" => Ok(Self::LoNull),
            "sideband" => Ok(Self::Sideband),
            "from-scan" => Ok(Self::FromScan),
            other => Err(format!("unknown mode {other:?} (expected lo-null, sideband or from-scan)")),
        }
    }
}

fn fmt_db(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.2}")
    } else if x > 0.0 {
        "+inf".into()
    } else {
        "-inf".into()
    }
}

/// Runs one calibration and writes the resulting settings file.
///
/// `scan_csv` is required for `FromScan`; the config must then describe the
/// homodyne loopback that produced it.
pub fn cmd_calibrate(
    config: &Path,
    mode: CalibrationMode,
    scan_csv: Option<&Path>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let cfg = load(config)?;
    let up = cfg.up_converter().map_err(CliError::Validation)?;
    let probe = cfg.probe;
    let path = output_path(config, &cfg, out, "calibration.json");
    let (calibrated, summary, failure) = match mode {
        CalibrationMode::LoNull => {
            let res = null_lo_blackbox(&up, &probe, &cfg.optimizer)?;
            let fixed = up.clone().with_bias(res.bias);
            let summary = format!(
                "LO leakage {} dBc -> {} dBc after {} evaluations; bias I {:+.9} V, Q {:+.9} V\n",
                fmt_db(res.initial_dbc),
                fmt_db(res.leakage_dbc),
                res.evaluations(),
                res.bias.b_i,
                res.bias.b_q
            );
            let failure = (!res.converged()).then(|| {
                format!(
                    "LO nulling stopped ({:?}) at {} dBc, target {} dBc",
                    res.termination,
                    fmt_db(res.leakage_dbc),
                    cfg.optimizer.tol
                )
            });
            (fixed, summary, failure)
        }
        CalibrationMode::Sideband => {
            let before = measure_sideband_rejection(&up, &probe)?;
            let design = design_predistorter(up.mixer())?;
            let fixed = up.clone().with_predistorter(design.predistorter);
            let after = measure_sideband_rejection(&fixed, &probe)?;
            let summary = format!("sideband rejection {} dBc -> {} dBc\n", fmt_db(before), fmt_db(after));
            (fixed, summary, None)
        }
        CalibrationMode::FromScan => {
            let csv = scan_csv.ok_or_else(|| CliError::Validation("--scan <CSV> is required for from-scan".into()))?;
            if cfg.loopback.if_freq != 0.0 {
                return Err(CliError::Validation(
                    "from-scan needs the homodyne loopback (if_freq_hz = 0) that produced the scan".into(),
                ));
            }
            let file = File::open(csv).map_err(|e| io_error(csv, e))?;
            let scan = read_scan_csv(file).map_err(|e| csv_error(csv, e))?;
            let drive = cfg.loopback.if_amplitude * up.chain.pre_mixer_gain();
            let cal = calibrate_from_scan(&scan, drive, &up.predistorter)?;
            let fixed = cal.apply_to(&up)?;
            let est = cal.estimate;
            let leak_dbc = amplitude_ratio_to_db(est.c_hat.norm() / est.mu_hat.norm());
            let summary = format!(
                "scan estimate: image {} dBc, carrier offset {} dBc; corrections assume all imbalance is in the up converter\n",
                fmt_db(-est.irr_dbc),
                fmt_db(leak_dbc)
            );
            (fixed, summary, None)
        }
    };
    prepare(&path)?;
    write_json(&path, &CalibrationSettings::from_converter(&calibrated))?;
    if let Some(msg) = failure {
        return Err(CliError::Convergence(format!("{msg}; best settings written to {}", path.display())));
    }
    Ok(Outcome { written: vec![path], summary })
}

/// Fits an RB CSV (`m,survival,shots`) and writes the fit report.
pub fn cmd_rbfit(data: &Path, dimension: u32, out: Option<&Path>) -> Result<Outcome, CliError> {
    let file = File::open(data).map_err(|e| io_error(data, e))?;
    let dataset = read_rb_csv(file, dimension).map_err(|e| csv_error(data, e))?;
    let fit = fit_decay(&dataset)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| data.with_extension("fit.json"));
    prepare(&path)?;
    write_json(&path, &fit)?;
    let summary = format!(
        "A = {:.6} +/- {:.2e}  p = {:.8} +/- {:.2e}  process infidelity = {:.4e} +/- {:.2e} (d = {}, {:?})\n",
        fit.a, fit.a_stderr, fit.p, fit.p_stderr, fit.process_infidelity, fit.infidelity_stderr, fit.dimension, fit.status
    );
    Ok(Outcome { written: vec![path], summary })
}
