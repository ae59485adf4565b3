//! Complex-baseband models of heterodyne RF mixing modules and the bench
//! procedures run on them: cascade budgets, loopback phase scans, linearity
//! metrics, LO nulling, IQ predistortion and randomized-benchmarking fits.
//!
//! Signals are complex envelopes around a center frequency; power is
//! referenced to 50 ohm with `P = |z|^2 / (2 R)`. Everything numeric is
//! generic over [`Real`] (`f32` or `f64`); the `*64` and `*32` aliases below
//! name the concrete forms. File formats use `f64`.

pub mod blocks;
pub mod budget;
pub mod calibrate;
pub mod chain;
pub mod config;
pub mod converter;
pub mod csvio;
pub mod error;
pub mod loopback;
pub mod metrics;
pub mod rbfit;
pub mod scalar;
pub mod signal;

pub use blocks::{AmpParams, AttenParams, BiasSetting, FilterParams, MixerParams};
pub use budget::{budget_report, cascade_gain, cascade_iip3, cascade_nf, BudgetReport};
pub use calibrate::{
    calibrate_from_scan, design_predistorter, null_lo_blackbox, solve_null_closed_form, OptimizerConfig, Predistorter,
};
pub use chain::{Block, ChainSpec, Role, Stage};
pub use converter::Converter;
pub use error::{Error, Result};
pub use loopback::{composite_transfer, phase_scan, run_loopback, LoopbackConfig, ScanResult};
pub use metrics::{
    amp_linearity, estimate_imbalance, measure_lo_leakage, measure_sideband_rejection, phase_linearity,
    IqImbalanceEstimate, LinearityReport, ProbeConfig,
};
pub use rbfit::{fit_decay, gen_synthetic_rb, process_infidelity, RbDataset, RbFit};
pub use scalar::Real;
pub use signal::{single_bin_dft, Envelope, QuantizerSpec, ToneSpec};

pub type Envelope64 = Envelope<f64>;
pub type Envelope32 = Envelope<f32>;
pub type MixerParams64 = MixerParams<f64>;
pub type MixerParams32 = MixerParams<f32>;
pub type AmpParams64 = AmpParams<f64>;
pub type AmpParams32 = AmpParams<f32>;
pub type ChainSpec64 = ChainSpec<f64>;
pub type ChainSpec32 = ChainSpec<f32>;
pub type Converter64 = Converter<f64>;
pub type Converter32 = Converter<f32>;
pub type LoopbackConfig64 = LoopbackConfig<f64>;
pub type LoopbackConfig32 = LoopbackConfig<f32>;
pub type ScanResult64 = ScanResult<f64>;
pub type ScanResult32 = ScanResult<f32>;
pub type Predistorter64 = Predistorter<f64>;
pub type Predistorter32 = Predistorter<f32>;
pub type RbDataset64 = RbDataset<f64>;
pub type RbFit64 = RbFit<f64>;
