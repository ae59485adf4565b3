//! Sampled complex-baseband signals and the measurement primitives built on them.
//!
//! An [`Envelope`] is the complex envelope `z[k]` of a narrowband signal
//! relative to a declared carrier `center_freq`, so the physical waveform is
//! `Re{z(t) e^{i 2 pi f_c t}}`. A tone of peak amplitude `A` therefore carries
//! `A^2 / (2 Z0)` watts; all dBm figures in this crate use that convention
//! with `Z0 = 50 ohm`.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// System reference impedance in ohms.
pub const Z0_OHMS: f64 = 50.0;

/// Available thermal noise density at 290 K.
pub const THERMAL_FLOOR_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<T: Real> {
    sample_rate: T,
    center_freq: T,
    samples: Vec<Complex<T>>,
}

impl<T: Real> Envelope<T> {
    pub fn new(sample_rate: T, center_freq: T, samples: Vec<Complex<T>>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > T::zero()) {
            return invalid("sample_rate", format!("{sample_rate} must be finite and > 0"));
        }
        if !center_freq.is_finite() {
            return Err(Error::NonFinite("center_freq"));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("envelope samples"));
        }
        Ok(Self {
            sample_rate,
            center_freq,
            samples,
        })
    }

    /// Same rate and carrier, new samples. Callers guarantee finiteness.
    pub(crate) fn with_samples(&self, samples: Vec<Complex<T>>) -> Self {
        Self {
            sample_rate: self.sample_rate,
            center_freq: self.center_freq,
            samples,
        }
    }

    pub(crate) fn recentered(mut self, center_freq: T) -> Self {
        self.center_freq = center_freq;
        self
    }

    pub(crate) fn map(&self, mut f: impl FnMut(Complex<T>) -> Complex<T>) -> Self {
        self.with_samples(self.samples.iter().map(|&z| f(z)).collect())
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn center_freq(&self) -> T {
        self.center_freq
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean envelope power in dBm into [`Z0_OHMS`].
    pub fn mean_power_dbm(&self) -> Result<T> {
        if self.is_empty() {
            return Err(Error::EmptyEnvelope);
        }
        let n = T::from_usize_lossy(self.len());
        let mean_sq = self.samples.iter().map(|z| z.norm_sqr()).sum::<T>() / n;
        let watts = mean_sq / (T::lit(2.0 * Z0_OHMS));
        Ok(T::lit(10.0) * watts.log10() + T::lit(30.0))
    }

    /// Sample-wise sum of two envelopes sharing rate, carrier and length.
    pub fn superpose(&self, other: &Self) -> Result<Self> {
        if self.sample_rate != other.sample_rate || self.len() != other.len() {
            return invalid("superpose", "rate or length differs");
        }
        if self.center_freq != other.center_freq {
            return Err(Error::CenterMismatch {
                expected: self.center_freq.as_f64(),
                actual: other.center_freq.as_f64(),
            });
        }
        Ok(self.with_samples(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }
}

/// Peak voltage of a tone carrying `p_dbm` into `z0`.
pub fn dbm_to_vpeak<T: Real>(p_dbm: T, z0: T) -> Result<T> {
    if !p_dbm.is_finite() {
        return Err(Error::NonFinite("power (dBm)"));
    }
    if !(z0.is_finite() && z0 > T::zero()) {
        return invalid("z0", format!("{z0} must be finite and > 0"));
    }
    let watts = T::lit(10.0).powf((p_dbm - T::lit(30.0)) / T::lit(10.0));
    Ok((T::lit(2.0) * z0 * watts).sqrt())
}

/// Inverse of [`dbm_to_vpeak`]. Zero volts maps to `-inf` dBm.
pub fn vpeak_to_dbm<T: Real>(v_peak: T, z0: T) -> Result<T> {
    if !v_peak.is_finite() {
        return Err(Error::NonFinite("peak voltage"));
    }
    if !(z0.is_finite() && z0 > T::zero()) {
        return invalid("z0", format!("{z0} must be finite and > 0"));
    }
    let watts = v_peak * v_peak / (T::lit(2.0) * z0);
    Ok(T::lit(10.0) * watts.log10() + T::lit(30.0))
}

pub fn db_to_power_ratio<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

pub fn db_to_amplitude_ratio<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(20.0))
}

pub fn power_ratio_to_db<T: Real>(ratio: T) -> T {
    T::lit(10.0) * ratio.log10()
}

pub fn amplitude_ratio_to_db<T: Real>(ratio: T) -> T {
    T::lit(20.0) * ratio.log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSpec<T: Real> {
    /// Offset from the envelope carrier, Hz.
    pub freq: T,
    /// Peak amplitude, V.
    pub amplitude: T,
    /// Phase at sample 0, rad.
    pub phase: T,
}

impl<T: Real> ToneSpec<T> {
    pub fn new(freq: T, amplitude: T, phase: T) -> Self {
        Self {
            freq,
            amplitude,
            phase,
        }
    }
}

/// `samples[k] = amplitude * exp(i (2 pi freq k / fs + phase))`.
pub fn synth_tone<T: Real>(tone: &ToneSpec<T>, sample_rate: T, n: usize) -> Result<Envelope<T>> {
    if n == 0 {
        return Err(Error::EmptyEnvelope);
    }
    if !(sample_rate.is_finite() && sample_rate > T::zero()) {
        return invalid("sample_rate", format!("{sample_rate} must be finite and > 0"));
    }
    if !(tone.freq.is_finite() && tone.amplitude.is_finite() && tone.phase.is_finite()) {
        return Err(Error::NonFinite("tone"));
    }
    let nyquist = sample_rate / T::lit(2.0);
    if tone.freq.abs() >= nyquist {
        return Err(Error::FrequencyOutOfRange {
            freq: tone.freq.as_f64(),
            nyquist: nyquist.as_f64(),
        });
    }
    if tone.amplitude < T::zero() {
        return invalid("amplitude", "must be >= 0");
    }
    let step = T::TAU() * tone.freq / sample_rate;
    let samples = (0..n)
        .map(|k| Complex::from_polar(tone.amplitude, step * T::from_usize_lossy(k) + tone.phase))
        .collect();
    Envelope::new(sample_rate, T::zero(), samples)
}

/// Uniform mid-tread quantizer spanning `[-full_scale, +full_scale]`.
///
/// The level set is `k * lsb` for `|k| <= 2^(bits-1) - 1`, i.e. the symmetric
/// two's-complement code range with the most negative code unused. Zero and
/// both rails are exact levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec<T: Real> {
    bits: u32,
    full_scale: T,
}

impl<T: Real> QuantizerSpec<T> {
    pub fn new(bits: u32, full_scale: T) -> Result<Self> {
        if !(2..=24).contains(&bits) {
            return invalid("bits", format!("{bits} not in 2..=24"));
        }
        if !(full_scale.is_finite() && full_scale > T::zero()) {
            return invalid("full_scale", format!("{full_scale} must be finite and > 0"));
        }
        Ok(Self { bits, full_scale })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn full_scale(&self) -> T {
        self.full_scale
    }

    fn max_code(&self) -> T {
        T::from_u64((1u64 << (self.bits - 1)) - 1).expect("code fits")
    }

    pub fn lsb(&self) -> T {
        self.full_scale / self.max_code()
    }

    /// Quantizes one real component; the flag reports clipping.
    fn level(&self, x: T) -> (T, bool) {
        let max = self.max_code();
        let code = (x / self.lsb()).round();
        if code > max {
            (self.full_scale, true)
        } else if code < -max {
            (-self.full_scale, true)
        } else {
            (code * self.lsb(), false)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized<T: Real> {
    pub envelope: Envelope<T>,
    /// Samples with at least one clipped component.
    pub clipped: usize,
}

pub fn quantize<T: Real>(env: &Envelope<T>, q: &QuantizerSpec<T>) -> Quantized<T> {
    let mut clipped = 0;
    let samples = env
        .samples()
        .iter()
        .map(|z| {
            let (re, cr) = q.level(z.re);
            let (im, ci) = q.level(z.im);
            if cr || ci {
                clipped += 1;
            }
            Complex::new(re, im)
        })
        .collect();
    Quantized {
        envelope: env.with_samples(samples),
        clipped,
    }
}

/// Adds complex white Gaussian noise of the given density (dBm/Hz into 50 ohm).
///
/// The total noise power is `density + 10 log10(sample_rate)` dBm, split
/// equally between the real and imaginary parts. A density of `-inf` adds
/// nothing.
pub fn add_awgn<T: Real>(env: &Envelope<T>, density_dbm_per_hz: T, seed: u64) -> Envelope<T> {
    if density_dbm_per_hz == T::neg_infinity() {
        return env.clone();
    }
    let total_dbm = density_dbm_per_hz.as_f64() + 10.0 * env.sample_rate().as_f64().log10();
    let watts = 10f64.powf((total_dbm - 30.0) / 10.0);
    let sigma = (Z0_OHMS * watts).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    env.map(|z| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        z + Complex::new(T::lit(sigma * re), T::lit(sigma * im))
    })
}

/// Complex peak amplitude of the tone at `freq` (offset from the carrier).
///
/// Returns `(1/N) sum z[k] exp(-i 2 pi freq k / fs)`. The record must hold an
/// integer number of periods of `freq`, which makes the probe exact for
/// every tone on the same grid.
pub fn single_bin_dft<T: Real>(env: &Envelope<T>, freq: T) -> Result<Complex<T>> {
    if env.is_empty() {
        return Err(Error::EmptyEnvelope);
    }
    let n = env.len();
    let bin = integer_bin(env.sample_rate(), n, freq)?;
    let n_i = n as i128;
    let mut acc = Complex::new(T::zero(), T::zero());
    for (k, z) in env.samples().iter().enumerate() {
        // Reduce the twiddle index exactly before turning it into an angle.
        let idx = (bin as i128 * k as i128).rem_euclid(n_i) as usize;
        let angle = -T::TAU() * T::from_usize_lossy(idx) / T::from_usize_lossy(n);
        acc = acc + z * Complex::from_polar(T::one(), angle);
    }
    Ok(acc / T::from_usize_lossy(n))
}

/// Number of whole periods of `freq` over `n` samples, or an error if not integral.
pub fn integer_bin<T: Real>(sample_rate: T, n: usize, freq: T) -> Result<i64> {
    if !freq.is_finite() {
        return Err(Error::NonFinite("probe frequency"));
    }
    let periods = freq * T::from_usize_lossy(n) / sample_rate;
    let nearest = periods.round();
    let tol = T::epsilon().sqrt() * T::one().max(periods.abs());
    if (periods - nearest).abs() > tol {
        return Err(Error::NonIntegerPeriods {
            freq: freq.as_f64(),
            periods: periods.as_f64(),
        });
    }
    Ok(nearest.to_i64().expect("period count fits in i64"))
}

/// Splits one user seed into independent per-stream seeds (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
