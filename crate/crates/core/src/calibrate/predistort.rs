use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::blocks::MixerParams;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::Envelope;

/// Widely-linear IQ correction `s' = a s + b conj(s)` applied before the up-mixer.
///
/// Equivalent to the real 2x2 matrix acting on `(I, Q)`:
/// `[[ar + br, bi - ai], [ai + bi, ar - br]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predistorter<T: Real> {
    pub a: Complex<T>,
    pub b: Complex<T>,
}

impl<T: Real> Default for Predistorter<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Predistorter<T> {
    pub fn identity() -> Self {
        Self {
            a: Complex::new(T::one(), T::zero()),
            b: Complex::new(T::zero(), T::zero()),
        }
    }

    pub fn new(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        let p = Self { a, b };
        if p.determinant().abs() <= T::epsilon() {
            return Err(Error::Singular("predistortion matrix"));
        }
        Ok(p)
    }

    #[inline]
    pub fn apply(&self, s: Complex<T>) -> Complex<T> {
        self.a * s + self.b * s.conj()
    }

    pub fn apply_envelope(&self, env: &Envelope<T>) -> Envelope<T> {
        if *self == Self::identity() {
            return env.clone();
        }
        env.map(|s| self.apply(s))
    }

    /// Row-major `[[t11, t12], [t21, t22]]` acting on `(I, Q)`.
    pub fn matrix(&self) -> [[T; 2]; 2] {
        let (a, b) = (self.a, self.b);
        [[a.re + b.re, b.im - a.im], [a.im + b.im, a.re - b.re]]
    }

    pub fn from_matrix(t: [[T; 2]; 2]) -> Result<Self> {
        let half = T::lit(0.5);
        let a = Complex::new((t[0][0] + t[1][1]) * half, (t[1][0] - t[0][1]) * half);
        let b = Complex::new((t[0][0] - t[1][1]) * half, (t[1][0] + t[0][1]) * half);
        Self::new(a, b)
    }

    /// `|a|^2 - |b|^2`, the determinant of [`Self::matrix`].
    pub fn determinant(&self) -> T {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    /// The correction equivalent to applying `self` first, then `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self {
            a: next.a * self.a + next.b * self.b.conj(),
            b: next.a * self.b + next.b * self.a.conj(),
        }
    }

    /// `(mu_eff, nu_eff)` of this correction followed by mixer `m`.
    pub fn effective_transfer(&self, m: &MixerParams<T>) -> (Complex<T>, Complex<T>) {
        let (mu, nu) = (m.mu(), m.nu());
        (mu * self.a + nu * self.b.conj(), mu * self.b + nu * self.a.conj())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredistortionDesign<T: Real> {
    pub predistorter: Predistorter<T>,
    /// Direct transfer of the corrected mixer, `mu - |nu|^2 / conj(mu)`.
    pub mu_eff: Complex<T>,
}

/// Cancels the conjugate transfer of `m`: with `a = 1`, `b = -nu / mu`.
pub fn design_predistorter<T: Real>(m: &MixerParams<T>) -> Result<PredistortionDesign<T>> {
    if m.mu().norm() <= m.nu().norm() {
        return Err(Error::Singular("|mu| = |nu|"));
    }
    let a = Complex::new(T::one(), T::zero());
    let b = -m.nu() * a.conj() / m.mu();
    let predistorter = Predistorter::new(a, b)?;
    let (mu_eff, _) = predistorter.effective_transfer(m);
    Ok(PredistortionDesign { predistorter, mu_eff })
}

/// Settings file form of a predistorter: full-precision matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredistorterRecord {
    pub matrix: [[f64; 2]; 2],
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl From<&Predistorter<f64>> for PredistorterRecord {
    fn from(p: &Predistorter<f64>) -> Self {
        Self {
            matrix: p.matrix(),
            a: [p.a.re, p.a.im],
            b: [p.b.re, p.b.im],
        }
    }
}
