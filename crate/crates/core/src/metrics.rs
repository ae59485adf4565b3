//! Figures of merit: scan linearity, locus decomposition, sideband rejection and LO leakage.

use num_complex::Complex;
use serde::Serialize;

use crate::blocks::BiasSetting;
use crate::converter::Converter;
use crate::error::{invalid, Error, Result};
use crate::loopback::ScanResult;
use crate::scalar::Real;
use crate::signal::{amplitude_ratio_to_db, single_bin_dft, synth_tone, Envelope, ToneSpec};

/// Relative magnitude below which a spectral line counts as absent.
pub const NUMERIC_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearityReport<T> {
    /// `(max|acc| - min|acc|) / mean|acc|`.
    pub amp_linearity: T,
    /// Peak-to-peak of the detrended phase, rad.
    pub phase_linearity: T,
    /// Drive frequency (LO + IF) when known, Hz.
    pub freq: Option<T>,
    pub n_points: usize,
}

pub fn amp_linearity<T: Real>(scan: &ScanResult<T>) -> Result<T> {
    if scan.len() < 2 {
        return invalid("scan", "amplitude linearity needs at least 2 points");
    }
    let mags: Vec<T> = scan.accumulated().iter().map(|z| z.norm()).collect();
    let mean = mags.iter().copied().sum::<T>() / T::from_usize_lossy(mags.len());
    if mean == T::zero() {
        return invalid("scan", "mean amplitude is zero");
    }
    let max = mags.iter().copied().fold(T::neg_infinity(), T::max);
    let min = mags.iter().copied().fold(T::infinity(), T::min);
    Ok((max - min) / mean)
}

fn wrap<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let mut y = (x + T::PI()) % tau;
    if y < T::zero() {
        y = y + tau;
    }
    y - T::PI()
}

/// Largest unwrapped phase step accepted between neighbouring scan points.
const MAX_UNWRAP_STEP: f64 = 0.75 * std::f64::consts::PI;

/// Peak-to-peak of the received phase after removing its trend against drive phase.
///
/// For a full uniform scan over `[0, 2 pi)` the trend slope is the winding
/// number of the locus around the origin (1 for a healthy loopback) and the
/// intercept is the least-squares mean. Partial or irregular scans fall back
/// to a free least-squares line.
pub fn phase_linearity<T: Real>(scan: &ScanResult<T>) -> Result<T> {
    let n = scan.len();
    if n < 3 {
        return invalid("scan", "phase linearity needs at least 3 points");
    }
    let acc = scan.accumulated();
    let theta = scan.drive_phases();
    let mut unwrapped = Vec::with_capacity(n);
    unwrapped.push(acc[0].arg());
    for k in 1..n {
        let step = wrap(acc[k].arg() - acc[k - 1].arg());
        if step.abs() > T::lit(MAX_UNWRAP_STEP) {
            return Err(Error::UnwrapAmbiguity {
                index: k,
                step: step.as_f64(),
            });
        }
        unwrapped.push(unwrapped[k - 1] + step);
    }

    let residual: Vec<T> = if is_uniform_full_cycle(theta) {
        let closing = wrap(acc[0].arg() - acc[n - 1].arg());
        let turns = ((unwrapped[n - 1] + closing - unwrapped[0]) / T::TAU()).round();
        let r: Vec<T> = unwrapped.iter().zip(theta).map(|(&p, &t)| p - turns * t).collect();
        let mean = r.iter().copied().sum::<T>() / T::from_usize_lossy(n);
        r.into_iter().map(|x| x - mean).collect()
    } else {
        let nt = T::from_usize_lossy(n);
        let mt = theta.iter().copied().sum::<T>() / nt;
        let mp = unwrapped.iter().copied().sum::<T>() / nt;
        let sxy = theta.iter().zip(&unwrapped).map(|(&t, &p)| (t - mt) * (p - mp)).sum::<T>();
        let sxx = theta.iter().map(|&t| (t - mt) * (t - mt)).sum::<T>();
        let slope = sxy / sxx;
        unwrapped.iter().zip(theta).map(|(&p, &t)| p - mp - slope * (t - mt)).collect()
    };
    let max = residual.iter().copied().fold(T::neg_infinity(), T::max);
    let min = residual.iter().copied().fold(T::infinity(), T::min);
    Ok(max - min)
}

fn is_uniform_full_cycle<T: Real>(theta: &[T]) -> bool {
    let n = theta.len();
    let step = T::TAU() / T::from_usize_lossy(n);
    let tol = T::epsilon().sqrt() * T::TAU();
    theta
        .iter()
        .enumerate()
        .all(|(k, &t)| (t - theta[0] - step * T::from_usize_lossy(k)).abs() <= tol)
}

pub fn linearity_report<T: Real>(scan: &ScanResult<T>) -> Result<LinearityReport<T>> {
    Ok(LinearityReport {
        amp_linearity: amp_linearity(scan)?,
        phase_linearity: phase_linearity(scan)?,
        freq: scan.config.as_ref().map(|c| c.lo_freq + c.if_freq),
        n_points: scan.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IqImbalanceEstimate<T: Real> {
    pub mu_hat: Complex<T>,
    pub nu_hat: Complex<T>,
    pub c_hat: Complex<T>,
    /// `20 log10(|mu| / |nu|)`; `+inf` when `nu` is below the numeric floor.
    pub irr_dbc: T,
}

/// Harmonic decomposition of a uniform scan into `mu e^{i theta} + nu e^{-i theta} + c`.
pub fn estimate_imbalance<T: Real>(scan: &ScanResult<T>) -> Result<IqImbalanceEstimate<T>> {
    let n = scan.len();
    if n < 3 {
        return invalid("scan", "imbalance estimate needs at least 3 points");
    }
    if !is_uniform_full_cycle(scan.drive_phases()) {
        return Err(Error::NonUniformGrid);
    }
    let nt = T::from_usize_lossy(n);
    let zero = Complex::new(T::zero(), T::zero());
    let (mut mu, mut nu, mut c) = (zero, zero, zero);
    for (&z, &t) in scan.accumulated().iter().zip(scan.drive_phases()) {
        let u = Complex::from_polar(T::one(), t);
        mu = mu + z * u.conj();
        nu = nu + z * u;
        c = c + z;
    }
    let (mu, nu, c) = (mu / nt, nu / nt, c / nt);
    Ok(IqImbalanceEstimate {
        mu_hat: mu,
        nu_hat: nu,
        c_hat: c,
        irr_dbc: ratio_db(mu.norm(), nu.norm(), T::infinity()),
    })
}

/// `20 log10(num / den)` with `sentinel` when `den` is below the floor relative to `num`.
fn ratio_db<T: Real>(num: T, den: T, sentinel: T) -> T {
    if den <= T::lit(NUMERIC_FLOOR) * num {
        sentinel
    } else {
        amplitude_ratio_to_db(num / den)
    }
}

/// Stimulus for spectral measurements on an up converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig<T: Real> {
    pub sample_rate: T,
    pub n: usize,
    /// IF tone; `freq` must be nonzero and fit an integer number of periods.
    pub tone: ToneSpec<T>,
}

impl<T: Real> ProbeConfig<T> {
    pub fn new(sample_rate: T, n: usize, freq: T, amplitude: T) -> Self {
        Self {
            sample_rate,
            n,
            tone: ToneSpec::new(freq, amplitude, T::zero()),
        }
    }

    fn run(&self, up: &Converter<T>) -> Result<Envelope<T>> {
        if !up.is_up() {
            return invalid("probe", "spectral probes apply to up converters");
        }
        if self.tone.freq == T::zero() {
            return invalid("probe", "tone frequency must be nonzero");
        }
        let env = synth_tone(&self.tone, self.sample_rate, self.n)?;
        Ok(up.transmit(&env, None)?.envelope)
    }
}

impl<T: Real> Default for ProbeConfig<T> {
    fn default() -> Self {
        Self::new(T::lit(1e9), 1000, T::lit(50e6), T::lit(0.25))
    }
}

/// Wanted-to-image ratio of the up-converted probe tone, dBc (`+inf` if no image).
pub fn measure_sideband_rejection<T: Real>(up: &Converter<T>, probe: &ProbeConfig<T>) -> Result<T> {
    let rf = probe.run(up)?;
    let wanted = single_bin_dft(&rf, probe.tone.freq)?.norm();
    let image = single_bin_dft(&rf, -probe.tone.freq)?.norm();
    Ok(ratio_db(wanted, image, T::infinity()))
}

/// Carrier relative to the wanted sideband at the RF output, dBc (`-inf` if nulled).
pub fn measure_lo_leakage<T: Real>(up: &Converter<T>, bias: &BiasSetting<T>, probe: &ProbeConfig<T>) -> Result<T> {
    let biased = up.clone().with_bias(*bias);
    let rf = probe.run(&biased)?;
    let wanted = single_bin_dft(&rf, probe.tone.freq)?.norm();
    let carrier = single_bin_dft(&rf, T::zero())?.norm();
    Ok(-ratio_db(wanted, carrier, T::infinity()))
}
