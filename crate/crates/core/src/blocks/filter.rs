//! Linear-phase low-pass FIR (Blackman-windowed sinc).
//!
//! Records in this crate are integer-period steady-state captures, so the
//! filter is applied circularly with its group delay removed: the output is
//! the steady-state response, with no start-up transient.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::signal::Envelope;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams<T: Real> {
    /// -6 dB edge, Hz.
    pub cutoff: T,
    pub taps: usize,
}

impl<T: Real> FilterParams<T> {
    pub fn new(cutoff: T, taps: usize) -> Result<Self> {
        if !(cutoff.is_finite() && cutoff > T::zero()) {
            return invalid("cutoff", format!("{cutoff} must be > 0"));
        }
        if taps < 3 || taps.is_multiple_of(2) {
            return invalid("taps", format!("{taps} must be odd and >= 3"));
        }
        Ok(Self { cutoff, taps })
    }

    /// Filter coefficients at `sample_rate`, normalized to unity DC gain.
    pub fn design(&self, sample_rate: T) -> Result<Vec<T>> {
        if self.cutoff >= sample_rate / T::lit(2.0) {
            return invalid(
                "cutoff",
                format!("{} Hz must be below Nyquist ({} Hz)", self.cutoff, sample_rate / T::lit(2.0)),
            );
        }
        let len = self.taps;
        let mid = T::from_usize_lossy(len / 2);
        let span = T::from_usize_lossy(len - 1);
        let fc = self.cutoff / sample_rate;
        let two = T::lit(2.0);
        let mut taps: Vec<T> = (0..len)
            .map(|j| {
                let x = T::from_usize_lossy(j) - mid;
                let sinc = if x == T::zero() {
                    two * fc
                } else {
                    (T::TAU() * fc * x).sin() / (T::PI() * x)
                };
                let phase = T::TAU() * T::from_usize_lossy(j) / span;
                let window = T::lit(0.42) - T::lit(0.5) * phase.cos() + T::lit(0.08) * (two * phase).cos();
                sinc * window
            })
            .collect();
        let dc: T = taps.iter().copied().sum();
        for t in &mut taps {
            *t = *t / dc;
        }
        Ok(taps)
    }
}

/// Response of delay-compensated `taps` at `freq` (offset from the carrier).
pub fn frequency_response<T: Real>(taps: &[T], freq: T, sample_rate: T) -> Complex<T> {
    let mid = T::from_usize_lossy(taps.len() / 2);
    taps.iter()
        .enumerate()
        .map(|(j, &h)| {
            let x = T::from_usize_lossy(j) - mid;
            Complex::from_polar(h, -T::TAU() * freq * x / sample_rate)
        })
        .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
}

pub fn lowpass<T: Real>(env: &Envelope<T>, f: &FilterParams<T>) -> Result<Envelope<T>> {
    let taps = f.design(env.sample_rate())?;
    Ok(convolve_circular(env, &taps))
}

pub(crate) fn convolve_circular<T: Real>(env: &Envelope<T>, taps: &[T]) -> Envelope<T> {
    let x = env.samples();
    let n = x.len();
    if n == 0 {
        return env.clone();
    }
    let delay = taps.len() / 2;
    let samples = (0..n)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, &h) in taps.iter().enumerate() {
                // x[(k + delay - j) mod n]
                let idx = (k + delay + n * (1 + taps.len() / n) - j) % n;
                acc = acc + x[idx] * h;
            }
            acc
        })
        .collect();
    env.with_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{single_bin_dft, synth_tone, ToneSpec};

    const FS: f64 = 1e9;

    fn gain_db(f: &FilterParams<f64>, freq: f64) -> f64 {
        let env = synth_tone(&ToneSpec::new(freq, 1.0, 0.3), FS, 1000).unwrap();
        let out = lowpass(&env, f).unwrap();
        20.0 * single_bin_dft(&out, freq).unwrap().norm().log10()
    }

    #[test]
    fn passband_and_stopband() {
        let f = FilterParams::new(200e6, 101).unwrap();
        assert!(gain_db(&f, 0.0).abs() < 0.1);
        for freq in [50e6, 100e6, 150e6, 160e6, -160e6] {
            assert!(gain_db(&f, freq).abs() < 0.1, "passband {freq}");
        }
        for freq in [300e6, 350e6, 400e6, -310e6] {
            assert!(gain_db(&f, freq) <= -60.0, "stopband {freq}: {}", gain_db(&f, freq));
        }
    }

    #[test]
    fn two_times_cutoff_suppressed() {
        let f = FilterParams::new(100e6, 101).unwrap();
        assert!(gain_db(&f, 200e6) <= -60.0);
    }

    #[test]
    fn impulse_returns_taps() {
        let f = FilterParams::new(150e6, 31).unwrap();
        let mut x = vec![Complex::new(0.0, 0.0); 64];
        x[15] = Complex::new(1.0, 0.0);
        let env = Envelope::new(FS, 0.0, x).unwrap();
        let out = lowpass(&env, &f).unwrap();
        let taps = f.design(FS).unwrap();
        for (k, h) in taps.iter().enumerate() {
            assert!((out.samples()[k].re - h).abs() < 1e-15);
            assert_eq!(out.samples()[k].im, 0.0);
        }
        assert!(out.samples()[31..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn response_matches_simulation() {
        let f = FilterParams::new(120e6, 41).unwrap();
        let taps = f.design(FS).unwrap();
        let env = synth_tone(&ToneSpec::new(90e6, 1.0, 0.0), FS, 100).unwrap();
        let out = lowpass(&env, &f).unwrap();
        let h = frequency_response(&taps, 90e6, FS);
        assert!((single_bin_dft(&out, 90e6).unwrap() - h).norm() < 1e-12);
        assert!(h.im.abs() < 1e-15);
    }

    #[test]
    fn invalid_designs() {
        assert!(FilterParams::new(100e6, 4).is_err());
        assert!(FilterParams::new(100e6, 1).is_err());
        assert!(FilterParams::new(-1.0, 11).is_err());
        assert!(FilterParams::new(500e6, 11).unwrap().design(FS).is_err());
    }
}
