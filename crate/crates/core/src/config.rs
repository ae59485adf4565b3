//! Bench configuration file: JSON with the chains, loopback, probe and optimizer settings.
//!
//! Every section is checked while it is parsed, so an invalid value is
//! reported with the line and column just past its enclosing object.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::Deserialize;

use crate::blocks::{AmpParams, AttenParams, FilterParams, MixerParams};
use crate::calibrate::{CalibrationSettings, OptimizerConfig};
use crate::chain::{Block, ChainSpec, Role, Stage};
use crate::converter::Converter;
use crate::error::Error;
use crate::loopback::LoopbackConfig;
use crate::metrics::ProbeConfig;
use crate::signal::{dbm_to_vpeak, QuantizerSpec, Z0_OHMS};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn to_string(e: Error) -> String {
    e.to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantizer {
    bits: u32,
    full_scale_v: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawBlock {
    Amp {
        label: Option<String>,
        gain_db: f64,
        nf_db: f64,
        p1db_in_dbm: f64,
        /// `null` for a linear stage.
        iip3_dbm: Option<f64>,
    },
    Atten {
        label: Option<String>,
        atten_db: f64,
    },
    Mixer {
        label: Option<String>,
        conv_loss_db: f64,
        #[serde(default = "one")]
        gain_imbalance: f64,
        #[serde(default)]
        phase_imbalance_deg: f64,
        /// LO drive minus leaked carrier; absent means no leakage.
        lo_isolation_db: Option<f64>,
        #[serde(default)]
        leak_phase_deg: f64,
    },
    Filter {
        label: Option<String>,
        cutoff_hz: f64,
        taps: usize,
    },
}

fn one() -> f64 {
    1.0
}

/// A stage whose parameters passed their checks where they were parsed.
#[derive(Debug, Clone, Deserialize)]
#[serde(try_from = "RawBlock")]
struct CheckedBlock(RawBlock);

impl TryFrom<RawBlock> for CheckedBlock {
    type Error = String;

    fn try_from(raw: RawBlock) -> Result<Self, String> {
        build_stage(raw.clone(), 0.0, 0)?;
        Ok(Self(raw))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    #[serde(default)]
    lo_drive_dbm: f64,
    input_dbm: Option<f64>,
    stages: Vec<CheckedBlock>,
}

/// A chain as declared, with its budget drive level.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEntry {
    pub spec: ChainSpec<f64>,
    pub input_dbm: f64,
}

fn build_stage(raw: RawBlock, lo_drive_dbm: f64, index: usize) -> Result<Stage<f64>, String> {
    let name = |label: Option<String>, kind: &str| label.unwrap_or_else(|| format!("{kind}{index}"));
    Ok(match raw {
        RawBlock::Amp { label, gain_db, nf_db, p1db_in_dbm, iip3_dbm } => {
            let a = AmpParams::new(gain_db, nf_db, p1db_in_dbm, iip3_dbm.unwrap_or(f64::INFINITY)).map_err(to_string)?;
            Stage::new(name(label, "amp"), Block::Amp(a))
        }
        RawBlock::Atten { label, atten_db } => {
            Stage::new(name(label, "atten"), Block::Atten(AttenParams::new(atten_db).map_err(to_string)?))
        }
        RawBlock::Mixer { label, conv_loss_db, gain_imbalance, phase_imbalance_deg, lo_isolation_db, leak_phase_deg } => {
            let leak = match lo_isolation_db {
                Some(iso) => {
                    let v = dbm_to_vpeak(lo_drive_dbm - iso, Z0_OHMS).map_err(to_string)?;
                    Complex::from_polar(v, leak_phase_deg.to_radians())
                }
                None => Complex::new(0.0, 0.0),
            };
            let m = MixerParams::from_imbalance(gain_imbalance, phase_imbalance_deg.to_radians(), conv_loss_db, leak)
                .map_err(to_string)?;
            Stage::new(name(label, "mixer"), Block::Mixer(m))
        }
        RawBlock::Filter { label, cutoff_hz, taps } => {
            Stage::new(name(label, "filter"), Block::Filter(FilterParams::new(cutoff_hz, taps).map_err(to_string)?))
        }
    })
}

fn build_chain(role: Role, raw: RawChain) -> Result<ChainEntry, String> {
    let lo = raw.lo_drive_dbm;
    let stages = raw
        .stages
        .into_iter()
        .enumerate()
        .map(|(i, s)| build_stage(s.0, lo, i).map_err(|e| format!("stage {i}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = ChainSpec::new(role, stages, lo).map_err(to_string)?;
    let input_dbm = raw.input_dbm.unwrap_or(if role.is_up() { -10.0 } else { -60.0 });
    if !input_dbm.is_finite() {
        return Err("input_dbm must be finite".into());
    }
    Ok(ChainEntry { spec, input_dbm })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChains {
    uph: Option<RawChain>,
    upl: Option<RawChain>,
    dn: Option<RawChain>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawChains")]
pub struct Chains(pub BTreeMap<Role, ChainEntry>);

impl TryFrom<RawChains> for Chains {
    type Error = String;

    fn try_from(raw: RawChains) -> Result<Self, String> {
        let mut out = BTreeMap::new();
        for (role, chain) in [(Role::Uph, raw.uph), (Role::Upl, raw.upl), (Role::Dn, raw.dn)] {
            if let Some(c) = chain {
                let entry = build_chain(role, c).map_err(|e| format!("chains.{}: {e}", role.name()))?;
                out.insert(role, entry);
            }
        }
        if out.is_empty() {
            return Err("chains: at least one chain must be declared".into());
        }
        Ok(Self(out))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoopback {
    if_freq_hz: f64,
    lo_freq_hz: f64,
    sample_rate_hz: f64,
    if_amplitude_v: f64,
    dac: Option<RawQuantizer>,
    adc: Option<RawQuantizer>,
    accum_len: usize,
    rf_path_atten_db: f64,
    n_phase_points: usize,
    noise_on: bool,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawLoopback")]
pub struct LoopbackSection(pub LoopbackConfig<f64>);

impl TryFrom<RawLoopback> for LoopbackSection {
    type Error = String;

    fn try_from(r: RawLoopback) -> Result<Self, String> {
        let q = |x: Option<RawQuantizer>| x.map(|q| QuantizerSpec::new(q.bits, q.full_scale_v)).transpose();
        let cfg = LoopbackConfig {
            if_freq: r.if_freq_hz,
            lo_freq: r.lo_freq_hz,
            sample_rate: r.sample_rate_hz,
            if_amplitude: r.if_amplitude_v,
            dac: q(r.dac).map_err(|e| format!("loopback.dac: {e}"))?,
            adc: q(r.adc).map_err(|e| format!("loopback.adc: {e}"))?,
            accum_len: r.accum_len,
            rf_path_atten_db: r.rf_path_atten_db,
            n_phase_points: r.n_phase_points,
            noise_on: r.noise_on,
            seed: r.seed,
        };
        cfg.validate_scan().map_err(|e| format!("loopback: {e}"))?;
        Ok(Self(cfg))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    sample_rate_hz: f64,
    n: usize,
    freq_hz: f64,
    amplitude_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(try_from = "RawProbe")]
pub struct ProbeSection(pub ProbeConfig<f64>);

impl TryFrom<RawProbe> for ProbeSection {
    type Error = String;

    fn try_from(r: RawProbe) -> Result<Self, String> {
        if r.freq_hz == 0.0 {
            return Err("probe: freq_hz must be nonzero".into());
        }
        if !(r.amplitude_v.is_finite() && r.amplitude_v > 0.0) {
            return Err("probe: amplitude_v must be > 0".into());
        }
        crate::signal::integer_bin(r.sample_rate_hz, r.n, r.freq_hz).map_err(|e| format!("probe: {e}"))?;
        Ok(Self(ProbeConfig::new(r.sample_rate_hz, r.n, r.freq_hz, r.amplitude_v)))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    max_evals: usize,
    init_step_v: f64,
    tol_dbc: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(try_from = "RawOptimizer")]
pub struct OptimizerSection(pub OptimizerConfig<f64>);

impl TryFrom<RawOptimizer> for OptimizerSection {
    type Error = String;

    fn try_from(r: RawOptimizer) -> Result<Self, String> {
        let o = OptimizerConfig {
            max_evals: r.max_evals,
            init_step: r.init_step_v,
            tol: r.tol_dbc,
            seed: r.seed,
        };
        o.validate().map_err(|e| format!("optimizer: {e}"))?;
        Ok(Self(o))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSelection {
    pub up: Role,
    pub dn: Role,
}

impl Default for LoopSelection {
    fn default() -> Self {
        Self { up: Role::Uph, dn: Role::Dn }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBench {
    chains: Chains,
    loopback: Option<LoopbackSection>,
    #[serde(default)]
    probe: ProbeSection,
    #[serde(default)]
    optimizer: OptimizerSection,
    #[serde(default, rename = "loop")]
    loop_sel: LoopSelection,
    calibration: Option<CalibrationSettings>,
    output_dir: Option<PathBuf>,
}

/// A validated bench configuration.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawBench")]
pub struct BenchConfig {
    pub chains: BTreeMap<Role, ChainEntry>,
    pub loopback: LoopbackConfig<f64>,
    pub probe: ProbeConfig<f64>,
    pub optimizer: OptimizerConfig<f64>,
    pub loop_sel: LoopSelection,
    pub calibration: Option<CalibrationSettings>,
    pub output_dir: PathBuf,
}

impl TryFrom<RawBench> for BenchConfig {
    type Error = String;

    fn try_from(r: RawBench) -> Result<Self, String> {
        let chains = r.chains.0;
        let sel = r.loop_sel;
        if !sel.up.is_up() {
            return Err(format!("loop.up: {} is not an up converter role", sel.up.name()));
        }
        if sel.dn != Role::Dn {
            return Err(format!("loop.dn: {} is not a down converter role", sel.dn.name()));
        }
        let loopback = r.loopback.map(|l| l.0).unwrap_or_default();
        for (role, entry) in &chains {
            if entry.spec.mixer_index().is_none() {
                return Err(format!("chains.{}: a converter needs exactly one mixer", role.name()));
            }
        }
        if let Some(c) = &r.calibration {
            c.bias().map_err(|e| format!("calibration: {e}"))?;
            c.predistorter().map_err(|e| format!("calibration: {e}"))?;
        }
        Ok(Self {
            chains,
            loopback,
            probe: r.probe.0,
            optimizer: r.optimizer.0,
            loop_sel: sel,
            calibration: r.calibration,
            output_dir: r.output_dir.unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    pub fn chain(&self, role: Role) -> Result<&ChainEntry, String> {
        self.chains
            .get(&role)
            .ok_or_else(|| format!("chain {} is referenced but not declared", role.name()))
    }

    fn converter(&self, role: Role) -> Result<Converter<f64>, String> {
        Converter::new(self.chain(role)?.spec.clone(), self.loopback.lo_freq).map_err(to_string)
    }

    /// The selected up converter with any stored calibration installed.
    pub fn up_converter(&self) -> Result<Converter<f64>, String> {
        let mut up = self.converter(self.loop_sel.up)?;
        if let Some(c) = &self.calibration {
            up.bias = c.bias().map_err(to_string)?;
            up.predistorter = c.predistorter().map_err(to_string)?;
        }
        Ok(up)
    }

    pub fn dn_converter(&self) -> Result<Converter<f64>, String> {
        self.converter(self.loop_sel.dn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "chains": {
    "upl": {
      "stages": [
        {"type": "filter", "cutoff_hz": 200e6, "taps": 31},
        {"type": "mixer", "conv_loss_db": 9.0},
        {"type": "atten", "atten_db": 4.0}
      ]
    }
  },
  "loop": {"up": "upl", "dn": "dn"}
}"#;

    #[test]
    fn minimal_config_loads() {
        let c = BenchConfig::from_json(MINIMAL).unwrap();
        let upl = c.chain(Role::Upl).unwrap();
        assert_eq!(upl.spec.stages().len(), 3);
        assert_eq!(upl.input_dbm, -10.0);
        assert_eq!(c.loopback, LoopbackConfig::default());
        assert!(c.dn_converter().is_err());
        assert!(c.up_converter().is_ok());
    }

    #[test]
    fn invalid_value_reports_its_line() {
        let bad = MINIMAL.replace("\"atten_db\": 4.0", "\"atten_db\": -4.0");
        let err = BenchConfig::from_json(&bad).unwrap_err();
        // reported at the token that closes the stage list, one line below the stage
        assert_eq!(err.line(), 8, "{err}");
        assert!(err.to_string().contains("attenuation"), "{err}");
    }

    #[test]
    fn empty_chain_rejected() {
        let bad = r#"{"chains": {"dn": {"stages": []}}}"#;
        assert!(BenchConfig::from_json(bad).is_err());
        assert!(BenchConfig::from_json(r#"{"chains": {}}"#).is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = MINIMAL.replace("\"taps\": 31", "\"taps\": 31, \"tapz\": 3");
        let err = BenchConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("tapz"), "{err}");
    }

    #[test]
    fn leak_from_isolation() {
        let text = MINIMAL.replace(
            "\"conv_loss_db\": 9.0",
            "\"conv_loss_db\": 9.0, \"lo_isolation_db\": 51.5, \"leak_phase_deg\": 90",
        );
        let c = BenchConfig::from_json(&text).unwrap();
        let up = c.up_converter().unwrap();
        assert!((up.mixer().lo_to_rf_isolation_db(0.0) - 51.5).abs() < 1e-9);
        assert!(up.mixer().leak().re.abs() < 1e-15);
    }

    #[test]
    fn bad_loopback_rejected() {
        let text = MINIMAL.replace(
            "\"loop\"",
            r#""loopback": {"if_freq_hz": 63.5e6, "lo_freq_hz": 9e9, "sample_rate_hz": 1e9, "if_amplitude_v": 0.25,
              "dac": null, "adc": null, "accum_len": 2000, "rf_path_atten_db": 20, "n_phase_points": 64, "noise_on": false},
  "loop""#,
        );
        let err = BenchConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("lo_freq"), "{err}");
    }
}
