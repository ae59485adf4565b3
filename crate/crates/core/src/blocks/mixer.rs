//! Widely-linear IQ mixer: `z = mu * s + nu * conj(s) + leak`.
//!
//! `mu` is the direct conversion transfer (conversion loss folded into its
//! magnitude), `nu` the image/conjugate transfer, and `leak` the LO
//! feedthrough seen at the output. For an I/Q port pair with gains
//! `G_I = 1` and `G_Q = g e^{i phi}` the mapping is `mu = (G_I + G_Q)/2`,
//! `nu = (G_I - G_Q)/2`.

use num_complex::Complex;

use super::BiasSetting;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::signal::{amplitude_ratio_to_db, db_to_amplitude_ratio, vpeak_to_dbm, Envelope, Z0_OHMS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixerParams<T: Real> {
    mu: Complex<T>,
    nu: Complex<T>,
    leak: Complex<T>,
}

impl<T: Real> MixerParams<T> {
    pub fn new(mu: Complex<T>, nu: Complex<T>, leak: Complex<T>) -> Result<Self> {
        for z in [mu, nu, leak] {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite("mixer parameters"));
            }
        }
        if nu.norm() >= mu.norm() {
            return invalid(
                "mixer",
                format!("|nu| = {} must be below |mu| = {}", nu.norm(), mu.norm()),
            );
        }
        Ok(Self { mu, nu, leak })
    }

    pub fn ideal() -> Self {
        Self {
            mu: Complex::new(T::one(), T::zero()),
            nu: Complex::new(T::zero(), T::zero()),
            leak: Complex::new(T::zero(), T::zero()),
        }
    }

    /// Builds `(mu, nu)` from the Q-port gain ratio `g` and quadrature error `phi` (rad),
    /// scaled so that `|mu|` is the conversion gain.
    pub fn from_imbalance(gain: T, phase: T, conv_loss_db: T, leak: Complex<T>) -> Result<Self> {
        if !(gain.is_finite() && gain > T::zero()) {
            return invalid("gain imbalance", format!("{gain} must be > 0"));
        }
        if !(conv_loss_db.is_finite() && conv_loss_db >= T::zero()) {
            return invalid("conv_loss_db", format!("{conv_loss_db} must be >= 0"));
        }
        let scale = db_to_amplitude_ratio(-conv_loss_db);
        let g_i = Complex::new(T::one(), T::zero());
        let g_q = Complex::from_polar(gain, phase);
        let sum = g_i + g_q;
        if sum.norm() == T::zero() {
            return invalid("phase imbalance", "quadrature error of pi leaves no wanted sideband");
        }
        // normalized so that |mu| carries exactly the stated conversion loss
        let k = scale / sum.norm();
        Self::new(sum * k, (g_i - g_q) * k, leak)
    }

    pub fn mu(&self) -> Complex<T> {
        self.mu
    }

    pub fn nu(&self) -> Complex<T> {
        self.nu
    }

    pub fn leak(&self) -> Complex<T> {
        self.leak
    }

    pub fn with_leak(self, leak: Complex<T>) -> Self {
        Self { leak, ..self }
    }

    /// `(g, phi)` such that `G_Q / G_I = g e^{i phi}`.
    pub fn imbalance(&self) -> (T, T) {
        let ratio = (self.mu - self.nu) / (self.mu + self.nu);
        (ratio.norm(), ratio.arg())
    }

    pub fn conversion_gain_db(&self) -> T {
        amplitude_ratio_to_db(self.mu.norm())
    }

    pub fn conv_loss_db(&self) -> T {
        -self.conversion_gain_db()
    }

    /// `20 log10(|mu| / |nu|)`; `+inf` for an ideal mixer.
    pub fn image_rejection_db(&self) -> T {
        if self.nu.norm() == T::zero() {
            T::infinity()
        } else {
            amplitude_ratio_to_db(self.mu.norm() / self.nu.norm())
        }
    }

    /// LO drive minus the leaked carrier power, dB.
    pub fn lo_to_rf_isolation_db(&self, lo_drive_dbm: T) -> T {
        let leak_dbm = vpeak_to_dbm(self.leak.norm(), T::lit(Z0_OHMS)).unwrap_or(T::neg_infinity());
        lo_drive_dbm - leak_dbm
    }

    /// The per-sample map, with `s` already including any bias.
    #[inline]
    pub fn apply(&self, s: Complex<T>) -> Complex<T> {
        self.mu * s + self.nu * s.conj() + self.leak
    }

    /// Carrier seen at the output for bias `b` and no signal.
    pub fn residual_carrier(&self, bias: &BiasSetting<T>) -> Complex<T> {
        self.apply(bias.as_complex())
    }
}

/// Up-converts an IF envelope (centered at 0) onto the LO.
pub fn mixer_up<T: Real>(
    s: &Envelope<T>,
    m: &MixerParams<T>,
    bias: &BiasSetting<T>,
    lo_freq: T,
) -> Result<Envelope<T>> {
    if s.center_freq() != T::zero() {
        return Err(Error::CenterMismatch {
            expected: 0.0,
            actual: s.center_freq().as_f64(),
        });
    }
    let b = bias.as_complex();
    Ok(s.map(|z| m.apply(z + b)).recentered(lo_freq))
}

/// Down-converts an RF envelope (centered at the LO) back to IF.
pub fn mixer_down<T: Real>(w: &Envelope<T>, m: &MixerParams<T>, lo_freq: T) -> Result<Envelope<T>> {
    if w.center_freq() != lo_freq {
        return Err(Error::CenterMismatch {
            expected: lo_freq.as_f64(),
            actual: w.center_freq().as_f64(),
        });
    }
    Ok(w.map(|z| m.apply(z)).recentered(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{single_bin_dft, synth_tone, ToneSpec};

    const FS: f64 = 1e9;
    const LO: f64 = 6.5e9;
    const F_IF: f64 = 50e6;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn tone() -> Envelope<f64> {
        synth_tone(&ToneSpec::new(F_IF, 0.3, 0.2), FS, 1000).unwrap()
    }

    #[test]
    fn ideal_up_is_single_sideband() {
        let m = MixerParams::ideal();
        let rf = mixer_up(&tone(), &m, &BiasSetting::zero(), LO).unwrap();
        assert_eq!(rf.center_freq(), LO);
        assert!((single_bin_dft(&rf, F_IF).unwrap().norm() - 0.3).abs() < 1e-12);
        assert!(single_bin_dft(&rf, -F_IF).unwrap().norm() < 1e-12);
    }

    #[test]
    fn sideband_rejection_from_nu() {
        let m = MixerParams::new(c(1.0, 0.0), c(0.0447, 0.0), c(0.0, 0.0)).unwrap();
        let rf = mixer_up(&tone(), &m, &BiasSetting::zero(), LO).unwrap();
        let up = single_bin_dft(&rf, F_IF).unwrap().norm();
        let img = single_bin_dft(&rf, -F_IF).unwrap().norm();
        let sbr = 20.0 * (up / img).log10();
        assert!((sbr - 26.994).abs() < 0.01, "{sbr}");
        assert!((m.image_rejection_db() - sbr).abs() < 1e-9);
    }

    #[test]
    fn closed_form_bias_nulls_dc() {
        let leak = c(0.003, -0.001);
        let m = MixerParams::new(c(1.0, 0.0), c(0.0, 0.0), leak).unwrap();
        let b = BiasSetting::from_complex(-leak, 1.8).unwrap();
        let rf = mixer_up(&tone(), &m, &b, LO).unwrap();
        assert!(single_bin_dft(&rf, 0.0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn down_conversion_image_and_leak() {
        let rf = tone().recentered(LO);
        let ideal = MixerParams::new(c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let out = mixer_down(&rf, &ideal, LO).unwrap();
        assert_eq!(out.center_freq(), 0.0);
        assert!((single_bin_dft(&out, F_IF).unwrap().norm() - 0.15).abs() < 1e-12);

        let m = MixerParams::new(c(0.8, 0.1), c(0.02, -0.01), c(0.004, 0.002)).unwrap();
        let out = mixer_down(&rf, &m, LO).unwrap();
        let direct = single_bin_dft(&out, F_IF).unwrap();
        let image = single_bin_dft(&out, -F_IF).unwrap();
        assert!((image.norm() / direct.norm() - m.nu().norm() / m.mu().norm()).abs() < 1e-12);
        assert!((single_bin_dft(&out, 0.0).unwrap() - m.leak()).norm() < 1e-15);
    }

    #[test]
    fn up_then_down_identity() {
        let m = MixerParams::ideal();
        let s = tone();
        let rf = mixer_up(&s, &m, &BiasSetting::zero(), LO).unwrap();
        assert_eq!(mixer_down(&rf, &m, LO).unwrap(), s);
    }

    #[test]
    fn center_frequency_checked() {
        let m = MixerParams::ideal();
        let rf = tone().recentered(LO);
        assert!(mixer_up(&rf, &m, &BiasSetting::zero(), LO).is_err());
        assert!(mixer_down(&tone(), &m, LO).is_err());
    }

    #[test]
    fn imbalance_round_trip_and_irr_anchor() {
        let phi = 5.12f64.to_radians();
        let m = MixerParams::from_imbalance(1.0, phi, 9.0, c(0.0, 0.0)).unwrap();
        let (g, p) = m.imbalance();
        assert!((g - 1.0).abs() < 1e-12 && (p - phi).abs() < 1e-12);
        assert!((m.conv_loss_db() - 9.0).abs() < 1e-12);
        // |nu/mu| = tan(phi/2) for unit gain ratio
        assert!((m.nu().norm() / m.mu().norm() - (phi / 2.0).tan()).abs() < 1e-12);
        assert!((m.image_rejection_db() - 27.0).abs() < 0.02);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(MixerParams::new(c(0.1, 0.0), c(0.2, 0.0), c(0.0, 0.0)).is_err());
        assert!(MixerParams::new(c(f64::NAN, 0.0), c(0.0, 0.0), c(0.0, 0.0)).is_err());
        assert!(MixerParams::from_imbalance(1.0, 0.0, -1.0, c(0.0, 0.0)).is_err());
        assert!(MixerParams::<f64>::ideal().image_rejection_db().is_infinite());
    }

    #[test]
    fn isolation_view() {
        let leak_v = crate::signal::dbm_to_vpeak(-51.5, 50.0).unwrap();
        let m = MixerParams::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, leak_v)).unwrap();
        assert!((m.lo_to_rf_isolation_db(0.0) - 51.5).abs() < 1e-9);
    }
}
