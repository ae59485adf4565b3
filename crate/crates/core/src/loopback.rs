//! Virtual loopback bench: DAC -> up converter -> RF path -> down converter -> ADC ->
//! digital LO -> accumulator, and the drive-phase scan built on it.
//!
//! Two routes to the scan locus are provided. [`phase_scan`] simulates every
//! sample. [`composite_transfer`] propagates the tone, its image and DC
//! through the same blocks analytically and returns `(mu', nu', c')` with
//! `acc(theta) = mu' e^{i theta} + nu' e^{-i theta} + c'` for the noiseless,
//! unquantized, small-signal case.
//!
//! With a nonzero IF the image and the LO feedthrough land on `-f_IF` and DC,
//! which the integer-period accumulator rejects, so the locus is a circle up
//! to quantization and noise. Running at `if_freq = 0` (homodyne) folds them
//! onto the accumulated bin and exposes the ellipse and its offset.

use num_complex::Complex;
use rayon::prelude::*;

use crate::blocks::{frequency_response, AttenParams};
use crate::chain::Block;
use crate::converter::Converter;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::signal::{
    add_awgn, db_to_amplitude_ratio, derive_seed, integer_bin, quantize, single_bin_dft, synth_tone,
    Envelope, QuantizerSpec, ToneSpec, THERMAL_FLOOR_DBM_PER_HZ,
};

pub const LO_MIN_HZ: f64 = 2.5e9;
pub const LO_MAX_HZ: f64 = 8.5e9;
pub const IF_MAX_HZ: f64 = 500e6;
pub const MIN_SCAN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct LoopbackConfig<T: Real> {
    pub if_freq: T,
    pub lo_freq: T,
    pub sample_rate: T,
    /// Peak amplitude of the transmitted IF tone at the DAC, V.
    pub if_amplitude: T,
    /// `None` disables DAC quantization.
    pub dac: Option<QuantizerSpec<T>>,
    /// `None` disables ADC quantization.
    pub adc: Option<QuantizerSpec<T>>,
    /// Samples integrated per readout; must span whole IF periods.
    pub accum_len: usize,
    pub rf_path_atten_db: T,
    pub n_phase_points: usize,
    pub noise_on: bool,
    pub seed: u64,
}

impl<T: Real> Default for LoopbackConfig<T> {
    fn default() -> Self {
        let q = QuantizerSpec::new(16, T::one()).expect("valid default quantizer");
        Self {
            if_freq: T::lit(63.5e6),
            lo_freq: T::lit(6.5e9),
            sample_rate: T::lit(1e9),
            if_amplitude: T::lit(0.25),
            dac: Some(q),
            adc: Some(q),
            accum_len: 2000,
            rf_path_atten_db: T::lit(20.0),
            n_phase_points: 64,
            noise_on: false,
            seed: 0,
        }
    }
}

impl<T: Real> LoopbackConfig<T> {
    /// Noiseless and unquantized, otherwise default.
    pub fn ideal() -> Self {
        Self {
            dac: None,
            adc: None,
            noise_on: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > T::zero()) {
            return invalid("sample_rate", format!("{} must be > 0", self.sample_rate));
        }
        let lo = self.lo_freq.as_f64();
        if !(LO_MIN_HZ..=LO_MAX_HZ).contains(&lo) {
            return invalid("lo_freq", format!("{lo} Hz outside {LO_MIN_HZ}..={LO_MAX_HZ} Hz"));
        }
        let f = self.if_freq.as_f64();
        if !(f.is_finite() && f.abs() <= IF_MAX_HZ) {
            return invalid("if_freq", format!("{f} Hz exceeds the {IF_MAX_HZ} Hz IF range"));
        }
        if self.if_freq.abs() >= self.sample_rate / T::lit(2.0) {
            return Err(Error::FrequencyOutOfRange {
                freq: f,
                nyquist: self.sample_rate.as_f64() / 2.0,
            });
        }
        if !(self.if_amplitude.is_finite() && self.if_amplitude >= T::zero()) {
            return invalid("if_amplitude", "must be finite and >= 0");
        }
        if self.accum_len == 0 {
            return invalid("accum_len", "must be >= 1");
        }
        integer_bin(self.sample_rate, self.accum_len, self.if_freq).map_err(|_| Error::Invalid {
            name: "accum_len",
            reason: format!(
                "{} samples do not span an integer number of {} Hz periods at {} S/s",
                self.accum_len, self.if_freq, self.sample_rate
            ),
        })?;
        AttenParams::new(self.rf_path_atten_db)?;
        Ok(())
    }

    /// [`Self::validate`] plus the scan point count.
    pub fn validate_scan(&self) -> Result<()> {
        self.validate()?;
        if self.n_phase_points < MIN_SCAN_POINTS {
            return invalid(
                "n_phase_points",
                format!("{} < {MIN_SCAN_POINTS}", self.n_phase_points),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Diagnostics {
    pub dac_clipped: usize,
    pub adc_clipped: usize,
    pub overdriven: usize,
}

impl Diagnostics {
    fn merge(self, o: Self) -> Self {
        Self {
            dac_clipped: self.dac_clipped + o.dac_clipped,
            adc_clipped: self.adc_clipped + o.adc_clipped,
            overdriven: self.overdriven + o.overdriven,
        }
    }

    pub fn is_clean(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopbackReadout<T: Real> {
    /// Accumulator value, V x samples.
    pub acc: Complex<T>,
    pub diagnostics: Diagnostics,
}

fn check_pair<T: Real>(up: &Converter<T>, dn: &Converter<T>, cfg: &LoopbackConfig<T>) -> Result<()> {
    if !up.is_up() {
        return invalid("up", "transmit side must be an up converter");
    }
    if dn.is_up() {
        return invalid("dn", "receive side must be a down converter");
    }
    if up.lo_freq != cfg.lo_freq || dn.lo_freq != cfg.lo_freq {
        return invalid("lo_freq", "up and down converters must share the configured LO");
    }
    Ok(())
}

/// One readout at `drive_phase` using `cfg.seed` for every noise source.
pub fn run_loopback<T: Real>(
    up: &Converter<T>,
    dn: &Converter<T>,
    cfg: &LoopbackConfig<T>,
    drive_phase: T,
) -> Result<LoopbackReadout<T>> {
    cfg.validate()?;
    check_pair(up, dn, cfg)?;
    run_point(up, dn, cfg, drive_phase, cfg.seed)
}

fn run_point<T: Real>(
    up: &Converter<T>,
    dn: &Converter<T>,
    cfg: &LoopbackConfig<T>,
    drive_phase: T,
    seed: u64,
) -> Result<LoopbackReadout<T>> {
    let noise = |stream: u64| cfg.noise_on.then(|| derive_seed(seed, stream));
    let mut diag = Diagnostics::default();

    let tone = ToneSpec::new(cfg.if_freq, cfg.if_amplitude, drive_phase);
    let mut x = up.predistort(&synth_tone(&tone, cfg.sample_rate, cfg.accum_len)?);
    if let Some(q) = &cfg.dac {
        let out = quantize(&x, q);
        diag.dac_clipped += out.clipped;
        x = out.envelope;
    }
    if let Some(s) = noise(0) {
        x = add_awgn(&x, T::lit(THERMAL_FLOOR_DBM_PER_HZ), s);
    }

    let tx = up.analog(&x, noise(1))?;
    diag.overdriven += tx.overdriven;
    let mut x = rf_path(&tx.envelope, cfg.rf_path_atten_db, noise(2))?;

    let rx = dn.analog(&x, noise(3))?;
    diag.overdriven += rx.overdriven;
    x = rx.envelope;
    if let Some(q) = &cfg.adc {
        let out = quantize(&x, q);
        diag.adc_clipped += out.clipped;
        x = out.envelope;
    }

    // digital LO at +f_IF and integrate-and-dump over accum_len samples
    let acc = single_bin_dft(&x, cfg.if_freq)? * T::from_usize_lossy(cfg.accum_len);
    Ok(LoopbackReadout {
        acc,
        diagnostics: diag,
    })
}

fn rf_path<T: Real>(env: &Envelope<T>, atten_db: T, seed: Option<u64>) -> Result<Envelope<T>> {
    let pad = AttenParams::new(atten_db)?;
    let noisy = match seed {
        Some(s) if atten_db > T::zero() => {
            add_awgn(env, crate::blocks::input_noise_density_dbm_per_hz(atten_db), s)
        }
        _ => env.clone(),
    };
    Ok(crate::blocks::attenuate(&noisy, &pad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult<T: Real> {
    drive_phases: Vec<T>,
    accumulated: Vec<Complex<T>>,
    /// Present when the scan was simulated rather than ingested.
    pub config: Option<LoopbackConfig<T>>,
    pub diagnostics: Diagnostics,
}

impl<T: Real> ScanResult<T> {
    pub fn new(drive_phases: Vec<T>, accumulated: Vec<Complex<T>>) -> Result<Self> {
        if drive_phases.len() != accumulated.len() {
            return invalid(
                "scan",
                format!("{} phases vs {} values", drive_phases.len(), accumulated.len()),
            );
        }
        if drive_phases.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
            return invalid("scan", "drive phases must be strictly increasing");
        }
        if drive_phases.iter().any(|p| !p.is_finite())
            || accumulated.iter().any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite("scan"));
        }
        Ok(Self {
            drive_phases,
            accumulated,
            config: None,
            diagnostics: Diagnostics::default(),
        })
    }

    /// Uniform phases `2 pi k / n` paired with `values`.
    pub fn uniform(values: Vec<Complex<T>>) -> Result<Self> {
        let phases = uniform_phases(values.len());
        Self::new(phases, values)
    }

    pub fn drive_phases(&self) -> &[T] {
        &self.drive_phases
    }

    pub fn accumulated(&self) -> &[Complex<T>] {
        &self.accumulated
    }

    pub fn len(&self) -> usize {
        self.drive_phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drive_phases.is_empty()
    }

    /// Same phases, every value multiplied by `k`.
    pub fn scaled(&self, k: Complex<T>) -> Self {
        Self {
            accumulated: self.accumulated.iter().map(|z| z * k).collect(),
            ..self.clone()
        }
    }
}

pub fn uniform_phases<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|k| T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(n))
        .collect()
}

/// Runs [`run_loopback`] at `cfg.n_phase_points` uniform phases over `[0, 2 pi)`.
///
/// Point `k` draws its noise from `derive_seed(cfg.seed, k)`. Points are
/// evaluated in parallel; the result does not depend on scheduling.
pub fn phase_scan<T: Real>(up: &Converter<T>, dn: &Converter<T>, cfg: &LoopbackConfig<T>) -> Result<ScanResult<T>> {
    cfg.validate_scan()?;
    check_pair(up, dn, cfg)?;
    let phases = uniform_phases::<T>(cfg.n_phase_points);
    let readouts = phases
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| run_point(up, dn, cfg, theta, derive_seed(cfg.seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = readouts
        .iter()
        .fold(Diagnostics::default(), |d, r| d.merge(r.diagnostics));
    let mut scan = ScanResult::new(phases, readouts.into_iter().map(|r| r.acc).collect())?;
    scan.config = Some(cfg.clone());
    scan.diagnostics = diagnostics;
    Ok(scan)
}

/// Sequential reference for [`phase_scan`]; same seeds, same values.
pub fn phase_scan_sequential<T: Real>(
    up: &Converter<T>,
    dn: &Converter<T>,
    cfg: &LoopbackConfig<T>,
) -> Result<ScanResult<T>> {
    cfg.validate_scan()?;
    check_pair(up, dn, cfg)?;
    let phases = uniform_phases::<T>(cfg.n_phase_points);
    let mut values = Vec::with_capacity(phases.len());
    let mut diagnostics = Diagnostics::default();
    for (k, &theta) in phases.iter().enumerate() {
        let r = run_point(up, dn, cfg, theta, derive_seed(cfg.seed, k as u64))?;
        diagnostics = diagnostics.merge(r.diagnostics);
        values.push(r.acc);
    }
    let mut scan = ScanResult::new(phases, values)?;
    scan.config = Some(cfg.clone());
    scan.diagnostics = diagnostics;
    Ok(scan)
}

/// Locus coefficients: `acc(theta) = mu e^{i theta} + nu e^{-i theta} + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeTransfer<T: Real> {
    pub mu: Complex<T>,
    pub nu: Complex<T>,
    pub c: Complex<T>,
}

impl<T: Real> CompositeTransfer<T> {
    pub fn at(&self, theta: T) -> Complex<T> {
        let u = Complex::from_polar(T::one(), theta);
        self.mu * u + self.nu * u.conj() + self.c
    }
}

/// `a e^{i theta} + b e^{-i theta} + c` held by one spectral line.
#[derive(Debug, Clone, Copy)]
struct Line<T: Real> {
    a: Complex<T>,
    b: Complex<T>,
    c: Complex<T>,
}

impl<T: Real> Line<T> {
    fn zero() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self { a: z, b: z, c: z }
    }

    fn scale(self, k: Complex<T>) -> Self {
        Self {
            a: self.a * k,
            b: self.b * k,
            c: self.c * k,
        }
    }

    fn conj(self) -> Self {
        Self {
            a: self.b.conj(),
            b: self.a.conj(),
            c: self.c.conj(),
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }
}

/// Spectral lines at `+f`, `-f` and DC (a single line when `f = 0`).
struct Lines<T: Real> {
    freqs: Vec<T>,
    lines: Vec<Line<T>>,
}

impl<T: Real> Lines<T> {
    fn mirror(&self, i: usize) -> usize {
        let f = -self.freqs[i];
        self.freqs.iter().position(|&g| g == f).expect("line set is symmetric")
    }

    fn dc(&self) -> usize {
        self.freqs.iter().position(|&g| g == T::zero()).expect("DC line present")
    }

    fn map(&mut self, f: impl Fn(T, Line<T>) -> Line<T>) {
        for (fr, l) in self.freqs.iter().zip(self.lines.iter_mut()) {
            *l = f(*fr, *l);
        }
    }

    fn widely_linear(&mut self, mu: Complex<T>, nu: Complex<T>, offset: Complex<T>) {
        let old = self.lines.clone();
        let dc = self.dc();
        for i in 0..old.len() {
            let mut l = old[i].scale(mu).add(old[self.mirror(i)].conj().scale(nu));
            if i == dc {
                l.c = l.c + offset;
            }
            self.lines[i] = l;
        }
    }
}

/// Analytic small-signal locus of the noiseless, unquantized loopback.
pub fn composite_transfer<T: Real>(
    up: &Converter<T>,
    dn: &Converter<T>,
    cfg: &LoopbackConfig<T>,
) -> Result<CompositeTransfer<T>> {
    cfg.validate()?;
    check_pair(up, dn, cfg)?;
    let f = cfg.if_freq;
    let freqs = if f == T::zero() { vec![T::zero()] } else { vec![f, -f, T::zero()] };
    let mut lines = Lines {
        lines: vec![Line::zero(); freqs.len()],
        freqs,
    };
    let amp = Complex::new(cfg.if_amplitude, T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    // transmitted tone a e^{i theta} at +f, after the digital correction
    let p = up.predistorter;
    lines.lines[0] = Line {
        a: p.a * amp,
        b: zero,
        c: zero,
    };
    let tone_conj = Line {
        a: zero,
        b: p.b * amp,
        c: zero,
    };
    let m = lines.mirror(0);
    lines.lines[m] = lines.lines[m].add(tone_conj);

    propagate(&mut lines, up, cfg.sample_rate)?;
    let path = db_to_amplitude_ratio(-cfg.rf_path_atten_db);
    lines.map(|_, l| l.scale(Complex::new(path, T::zero())));
    propagate(&mut lines, dn, cfg.sample_rate)?;

    let n = Complex::new(T::from_usize_lossy(cfg.accum_len), T::zero());
    let out = lines.lines[0].scale(n);
    Ok(CompositeTransfer {
        mu: out.a,
        nu: out.b,
        c: out.c,
    })
}

fn propagate<T: Real>(lines: &mut Lines<T>, conv: &Converter<T>, fs: T) -> Result<()> {
    for stage in conv.chain.stages() {
        match &stage.block {
            Block::Amp(a) => {
                let g = Complex::new(a.gain_linear(), T::zero());
                lines.map(|_, l| l.scale(g));
            }
            Block::Atten(a) => {
                let g = Complex::new(a.amplitude_factor(), T::zero());
                lines.map(|_, l| l.scale(g));
            }
            Block::Filter(f) => {
                let taps = f.design(fs)?;
                lines.map(|fr, l| l.scale(frequency_response(&taps, fr, fs)));
            }
            Block::Mixer(mx) => {
                let offset = if conv.is_up() {
                    mx.residual_carrier(&conv.bias)
                } else {
                    mx.leak()
                };
                lines.widely_linear(mx.mu(), mx.nu(), offset);
            }
        }
    }
    Ok(())
}
