//! Behavioral models of the analog blocks in a mixing module.

mod amp;
mod filter;
mod mixer;

pub use amp::{amplify, input_noise_density_dbm_per_hz, AmpParams, Amplified};
pub use filter::{frequency_response, lowpass, FilterParams};
pub use mixer::{mixer_down, mixer_up, MixerParams};

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::signal::{db_to_amplitude_ratio, Envelope};

/// Supply rail available to the bias-tee DACs/potentiometers, volts.
pub const BIAS_SUPPLY_LIMIT_V: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttenParams<T: Real> {
    attenuation_db: T,
}

impl<T: Real> AttenParams<T> {
    pub fn new(attenuation_db: T) -> Result<Self> {
        if !(attenuation_db.is_finite() && attenuation_db >= T::zero()) {
            return invalid("attenuation_db", format!("{attenuation_db} must be finite and >= 0"));
        }
        Ok(Self { attenuation_db })
    }

    pub fn attenuation_db(&self) -> T {
        self.attenuation_db
    }

    pub fn amplitude_factor(&self) -> T {
        db_to_amplitude_ratio(-self.attenuation_db)
    }
}

pub fn attenuate<T: Real>(env: &Envelope<T>, at: &AttenParams<T>) -> Envelope<T> {
    let k = at.amplitude_factor();
    env.map(|z| z * k)
}

/// DC offsets applied to the mixer I and Q ports through the bias-tees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiasSetting<T: Real> {
    pub b_i: T,
    pub b_q: T,
}

impl<T: Real> BiasSetting<T> {
    pub fn zero() -> Self {
        Self {
            b_i: T::zero(),
            b_q: T::zero(),
        }
    }

    /// Checked against a symmetric supply range of `limit` volts.
    pub fn new(b_i: T, b_q: T, limit: T) -> Result<Self> {
        for v in [b_i, b_q] {
            if !v.is_finite() {
                return Err(Error::NonFinite("bias"));
            }
            if v.abs() > limit {
                return Err(Error::BiasOutOfRange {
                    volts: v.as_f64(),
                    limit: limit.as_f64(),
                });
            }
        }
        Ok(Self { b_i, b_q })
    }

    pub fn from_complex(b: Complex<T>, limit: T) -> Result<Self> {
        Self::new(b.re, b.im, limit)
    }

    pub fn as_complex(&self) -> Complex<T> {
        Complex::new(self.b_i, self.b_q)
    }

    pub fn within(&self, limit: T) -> bool {
        self.b_i.abs() <= limit && self.b_q.abs() <= limit
    }
}
