//! Memoryless amplifier with input-referred thermal noise and cubic AM-AM compression.
//!
//! The envelope model is `y = g (x - |x|^2 x / A3^2)`, where `A3` is the peak
//! voltage at the input third-order intercept. With this coefficient a
//! two-tone test of per-tone amplitude `a` produces IM3 products of
//! `g a^3 / A3^2`, so the fundamental and IM3 lines meet exactly at `a = A3`,
//! and the single-tone 1 dB compression point sits 9.64 dB below IIP3.
//! The cubic stops being monotonic at `|x| = A3 / sqrt(3)`; beyond that the
//! output magnitude is held at its peak and the sample is counted as
//! overdriven.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::signal::{add_awgn, db_to_amplitude_ratio, dbm_to_vpeak, Envelope, THERMAL_FLOOR_DBM_PER_HZ, Z0_OHMS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpParams<T: Real> {
    pub gain_db: T,
    pub nf_db: T,
    pub p1db_in_dbm: T,
    pub iip3_dbm: T,
}

impl<T: Real> AmpParams<T> {
    pub fn new(gain_db: T, nf_db: T, p1db_in_dbm: T, iip3_dbm: T) -> Result<Self> {
        if !gain_db.is_finite() {
            return invalid("gain_db", "must be finite");
        }
        if !(nf_db.is_finite() && nf_db >= T::zero()) {
            return invalid("nf_db", format!("{nf_db} must be finite and >= 0"));
        }
        if p1db_in_dbm.is_nan() || iip3_dbm.is_nan() {
            return invalid("amplifier", "compression points must not be NaN");
        }
        if iip3_dbm <= p1db_in_dbm {
            return invalid(
                "iip3_dbm",
                format!("{iip3_dbm} dBm must exceed p1db_in_dbm {p1db_in_dbm} dBm"),
            );
        }
        Ok(Self {
            gain_db,
            nf_db,
            p1db_in_dbm,
            iip3_dbm,
        })
    }

    pub fn gain_linear(&self) -> T {
        db_to_amplitude_ratio(self.gain_db)
    }

    /// Peak input voltage at the third-order intercept (`inf` for a linear stage).
    pub fn a3_vpeak(&self) -> T {
        if self.iip3_dbm == T::infinity() {
            T::infinity()
        } else {
            dbm_to_vpeak(self.iip3_dbm, T::lit(Z0_OHMS)).expect("finite iip3")
        }
    }
}

/// Input-referred added-noise density `kT0 (F - 1)` for a stage of noise figure `nf_db`.
pub fn input_noise_density_dbm_per_hz<T: Real>(nf_db: T) -> T {
    let excess = T::lit(10.0).powf(nf_db / T::lit(10.0)) - T::one();
    if excess <= T::zero() {
        T::neg_infinity()
    } else {
        T::lit(THERMAL_FLOOR_DBM_PER_HZ) + T::lit(10.0) * excess.log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Amplified<T: Real> {
    pub envelope: Envelope<T>,
    /// Samples driven past the monotonic range of the cubic.
    pub overdriven: usize,
}

/// Applies the amplifier. `noise_seed = None` runs it noiseless.
pub fn amplify<T: Real>(env: &Envelope<T>, a: &AmpParams<T>, noise_seed: Option<u64>) -> Amplified<T> {
    let noisy;
    let input = match noise_seed {
        Some(seed) => {
            noisy = add_awgn(env, input_noise_density_dbm_per_hz(a.nf_db), seed);
            &noisy
        }
        None => env,
    };
    let g = a.gain_linear();
    let a3 = a.a3_vpeak();
    if a3.is_infinite() {
        return Amplified {
            envelope: input.map(|z| z * g),
            overdriven: 0,
        };
    }
    let inv_a3_sq = (a3 * a3).recip();
    let knee = a3 / T::lit(3.0).sqrt();
    let peak = g * knee * T::lit(2.0 / 3.0);
    let mut overdriven = 0;
    let samples = input
        .samples()
        .iter()
        .map(|&x| {
            let r = x.norm();
            if r > knee {
                overdriven += 1;
                Complex::from_polar(peak, x.arg())
            } else {
                x * (g * (T::one() - r * r * inv_a3_sq))
            }
        })
        .collect();
    Amplified {
        envelope: input.with_samples(samples),
        overdriven,
    }
}
