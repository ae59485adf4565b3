//! LO-leakage nulling through the I/Q bias and sideband suppression through IQ predistortion.

mod predistort;
pub mod simplex;

pub use predistort::{design_predistorter, PredistortionDesign, Predistorter, PredistorterRecord};
pub use simplex::{Evaluation, Termination};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::blocks::{BiasSetting, MixerParams, BIAS_SUPPLY_LIMIT_V};
use crate::converter::Converter;
use crate::error::{invalid, Error, Result};
use crate::loopback::ScanResult;
use crate::metrics::{estimate_imbalance, measure_lo_leakage, IqImbalanceEstimate, ProbeConfig};
use crate::scalar::Real;
use crate::signal::derive_seed;

/// Bias `b` with `mu b + nu conj(b) + leak = 0`.
///
/// `b = (nu conj(leak) - conj(mu) leak) / (|mu|^2 - |nu|^2)`, the Cramer solution
/// of the real 2x2 system. Fails when the solution leaves the bias supply range.
pub fn solve_null_closed_form<T: Real>(m: &MixerParams<T>) -> Result<BiasSetting<T>> {
    let b = null_offset(m.mu(), m.nu(), m.leak())?;
    BiasSetting::from_complex(b, T::lit(BIAS_SUPPLY_LIMIT_V))
}

fn null_offset<T: Real>(mu: Complex<T>, nu: Complex<T>, leak: Complex<T>) -> Result<Complex<T>> {
    let det = mu.norm_sqr() - nu.norm_sqr();
    if det.abs() <= T::epsilon() * mu.norm_sqr() {
        return Err(Error::Singular("|mu| = |nu|"));
    }
    Ok((nu * leak.conj() - mu.conj() * leak) / det)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig<T: Real> {
    pub max_evals: usize,
    /// Initial simplex edge, V.
    pub init_step: T,
    /// Target leakage, dBc.
    pub tol: T,
    /// Sets the orientation of the initial simplex.
    pub seed: u64,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            max_evals: 200,
            init_step: T::lit(0.01),
            tol: T::lit(-120.0),
            seed: 0,
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 10 {
            return invalid("max_evals", format!("{} must be >= 10", self.max_evals));
        }
        if !(self.init_step.is_finite() && self.init_step > T::zero()) {
            return invalid("init_step", "must be > 0");
        }
        if self.tol.is_nan() || self.tol >= T::lit(-40.0) {
            return invalid("tol", format!("{} dBc must be below -40 dBc", self.tol));
        }
        Ok(())
    }

    fn angle(&self) -> T {
        let u = derive_seed(self.seed, 0) >> 11;
        T::lit(u as f64 / (1u64 << 53) as f64) * T::TAU()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullingOutcome<T: Real> {
    /// Best evaluated setting.
    pub bias: BiasSetting<T>,
    pub leakage_dbc: T,
    pub initial_dbc: T,
    pub trace: Vec<Evaluation<T>>,
    pub termination: Termination,
}

impl<T: Real> NullingOutcome<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }
}

/// Derivative-free minimization of measured LO leakage over `(b_i, b_q)`,
/// starting from the converter's present bias. Settings outside the supply
/// range evaluate as `+inf`. Non-convergence is reported in `termination`.
pub fn null_lo_blackbox<T: Real>(
    up: &Converter<T>,
    probe: &ProbeConfig<T>,
    opt: &OptimizerConfig<T>,
) -> Result<NullingOutcome<T>> {
    opt.validate()?;
    let limit = T::lit(BIAS_SUPPLY_LIMIT_V);
    let objective = |x: [T; 2]| {
        let b = BiasSetting { b_i: x[0], b_q: x[1] };
        if !b.within(limit) {
            return Ok(T::infinity());
        }
        measure_lo_leakage(up, &b, probe)
    };
    let x0 = [up.bias.b_i, up.bias.b_q];
    let m = simplex::minimize(objective, x0, opt.init_step, opt.angle(), opt.max_evals, opt.tol)?;
    Ok(NullingOutcome {
        bias: BiasSetting { b_i: m.x[0], b_q: m.x[1] },
        leakage_dbc: m.value,
        initial_dbc: m.trace[0].value,
        trace: m.trace,
        termination: m.termination,
    })
}

/// Whether composite loopback imbalance has been assigned to the up converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    /// Loopback data cannot separate up and down converter imbalance; all of
    /// it was assigned to the up converter.
    CompositeAssignedToUp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCalibration<T: Real> {
    pub estimate: IqImbalanceEstimate<T>,
    /// Added to the present bias.
    pub bias_correction: Complex<T>,
    /// Applied ahead of the present predistorter.
    pub predistorter: Predistorter<T>,
    pub attribution: Attribution,
}

impl<T: Real> ScanCalibration<T> {
    /// Installs the corrections on the converter that produced the scan.
    pub fn apply_to(&self, up: &Converter<T>) -> Result<Converter<T>> {
        let bias = BiasSetting::from_complex(up.bias.as_complex() + self.bias_correction, T::lit(BIAS_SUPPLY_LIMIT_V))?;
        Ok(up
            .clone()
            .with_bias(bias)
            .with_predistorter(self.predistorter.then(&up.predistorter)))
    }

    /// Corrections below `floor` relative to the identity.
    pub fn is_identity_within(&self, floor: T) -> bool {
        let id = Predistorter::<T>::identity();
        (self.predistorter.a - id.a).norm() <= floor
            && self.predistorter.b.norm() <= floor
            && self.bias_correction.norm() <= floor
    }
}

/// Bias and predistortion corrections from a homodyne loopback scan.
///
/// `drive_amplitude` is the tone amplitude at the mixer input, V, and
/// `applied` the predistorter active while the scan was taken. The scan must
/// come from `if_freq = 0`: at nonzero IF the image and carrier never reach
/// the accumulated bin. The locus `mu e^{i theta} + nu e^{-i theta} + c` is
/// read as the up mixer seen through the rest of the loop.
pub fn calibrate_from_scan<T: Real>(
    scan: &ScanResult<T>,
    drive_amplitude: T,
    applied: &Predistorter<T>,
) -> Result<ScanCalibration<T>> {
    if let Some(cfg) = &scan.config {
        if cfg.if_freq != T::zero() {
            return invalid("scan", "calibration needs a homodyne (if_freq = 0) scan");
        }
    }
    if !(drive_amplitude.is_finite() && drive_amplitude > T::zero()) {
        return invalid("drive_amplitude", "must be > 0");
    }
    let est = estimate_imbalance(scan)?;
    let zero = Complex::new(T::zero(), T::zero());
    let seen = MixerParams::new(est.mu_hat / drive_amplitude, est.nu_hat / drive_amplitude, zero)?;
    let design = design_predistorter(&seen)?;
    // the bias enters after the applied predistorter, so refer the loop map back past it
    let (mu, nu) = inverse(applied)?.effective_transfer(&seen);
    let bias_correction = null_offset(mu, nu, est.c_hat)?;
    Ok(ScanCalibration {
        estimate: est,
        bias_correction,
        predistorter: design.predistorter,
        attribution: Attribution::CompositeAssignedToUp,
    })
}

fn inverse<T: Real>(p: &Predistorter<T>) -> Result<Predistorter<T>> {
    let det = p.determinant();
    Predistorter::new(p.a.conj() / det, -p.b / det)
}

/// Settings file: bias volts and predistortion matrix at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub bias_i_v: f64,
    pub bias_q_v: f64,
    pub predistorter: PredistorterRecord,
}

impl CalibrationSettings {
    pub fn from_converter(up: &Converter<f64>) -> Self {
        Self {
            bias_i_v: up.bias.b_i,
            bias_q_v: up.bias.b_q,
            predistorter: PredistorterRecord::from(&up.predistorter),
        }
    }

    pub fn bias(&self) -> Result<BiasSetting<f64>> {
        BiasSetting::new(self.bias_i_v, self.bias_q_v, BIAS_SUPPLY_LIMIT_V)
    }

    pub fn predistorter(&self) -> Result<Predistorter<f64>> {
        Predistorter::from_matrix(self.predistorter.matrix)
    }
}
