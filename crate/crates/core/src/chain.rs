//! Ordered block lists describing an up or down converter.

use serde::{Deserialize, Serialize};

use crate::blocks::{AmpParams, AttenParams, FilterParams, MixerParams};
use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Up converter with the extra RF amplifier.
    Uph,
    /// Up converter without the RF amplifier.
    Upl,
    /// Down converter.
    Dn,
}

impl Role {
    pub fn is_up(self) -> bool {
        matches!(self, Role::Uph | Role::Upl)
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Uph => "UPH",
            Role::Upl => "UPL",
            Role::Dn => "DN",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "UPH" => Ok(Role::Uph),
            "UPL" => Ok(Role::Upl),
            "DN" => Ok(Role::Dn),
            other => Err(format!("unknown chain role {other:?} (expected UPH, UPL or DN)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block<T: Real> {
    Amp(AmpParams<T>),
    Atten(AttenParams<T>),
    Mixer(MixerParams<T>),
    Filter(FilterParams<T>),
}

impl<T: Real> Block<T> {
    pub fn gain_db(&self) -> T {
        match self {
            Block::Amp(a) => a.gain_db,
            Block::Atten(a) => -a.attenuation_db(),
            Block::Mixer(m) => m.conversion_gain_db(),
            Block::Filter(_) => T::zero(),
        }
    }

    /// Passive stages count their loss as noise figure; a filter is ideal in band.
    pub fn nf_db(&self) -> T {
        match self {
            Block::Amp(a) => a.nf_db,
            Block::Atten(a) => a.attenuation_db(),
            Block::Mixer(m) => m.conv_loss_db().max(T::zero()),
            Block::Filter(_) => T::zero(),
        }
    }

    /// `+inf` for stages modeled as perfectly linear.
    pub fn iip3_dbm(&self) -> T {
        match self {
            Block::Amp(a) => a.iip3_dbm,
            _ => T::infinity(),
        }
    }

    pub fn p1db_in_dbm(&self) -> Option<T> {
        match self {
            Block::Amp(a) => Some(a.p1db_in_dbm),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Block::Amp(_) => "amp",
            Block::Atten(_) => "atten",
            Block::Mixer(_) => "mixer",
            Block::Filter(_) => "lowpass",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage<T: Real> {
    pub label: String,
    pub block: Block<T>,
}

impl<T: Real> Stage<T> {
    pub fn new(label: impl Into<String>, block: Block<T>) -> Self {
        Self {
            label: label.into(),
            block,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec<T: Real> {
    role: Role,
    stages: Vec<Stage<T>>,
    lo_drive_dbm: T,
}

impl<T: Real> ChainSpec<T> {
    pub fn new(role: Role, stages: Vec<Stage<T>>, lo_drive_dbm: T) -> Result<Self> {
        if stages.is_empty() {
            return invalid("chain", format!("{} chain has no blocks", role.name()));
        }
        if !lo_drive_dbm.is_finite() {
            return invalid("lo_drive_dbm", "must be finite");
        }
        let mixers: Vec<usize> = stages
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s.block, Block::Mixer(_)))
            .map(|(i, _)| i)
            .collect();
        let Some(&first_mixer) = mixers.first() else {
            return invalid("chain", format!("{} chain has no mixer", role.name()));
        };
        let rf_amp = stages[first_mixer + 1..]
            .iter()
            .any(|s| matches!(s.block, Block::Amp(_)));
        match role {
            Role::Uph if !rf_amp => {
                return invalid("chain", "UPH requires an amplifier in the RF channel after the mixer");
            }
            Role::Upl if rf_amp => {
                return invalid("chain", "UPL must not have an amplifier in the RF channel");
            }
            _ => {}
        }
        Ok(Self {
            role,
            stages,
            lo_drive_dbm,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn stages(&self) -> &[Stage<T>] {
        &self.stages
    }

    pub fn lo_drive_dbm(&self) -> T {
        self.lo_drive_dbm
    }

    pub fn mixers(&self) -> impl Iterator<Item = &MixerParams<T>> {
        self.stages.iter().filter_map(|s| match &s.block {
            Block::Mixer(m) => Some(m),
            _ => None,
        })
    }

    /// Index of the single frequency-translating stage, if there is exactly one.
    pub fn mixer_index(&self) -> Option<usize> {
        let mut it = self
            .stages
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s.block, Block::Mixer(_)));
        let first = it.next()?.0;
        it.next().is_none().then_some(first)
    }

    /// Replaces the mixer parameters of stage `index`.
    pub fn with_mixer(&self, index: usize, m: MixerParams<T>) -> Result<Self> {
        match self.stages.get(index).map(|s| &s.block) {
            Some(Block::Mixer(_)) => {
                let mut out = self.clone();
                out.stages[index].block = Block::Mixer(m);
                Ok(out)
            }
            _ => invalid("stage", format!("stage {index} is not a mixer")),
        }
    }

    /// Linear amplitude gain of the stages before the mixer.
    pub fn pre_mixer_gain(&self) -> T {
        let end = self.mixer_index().unwrap_or(0);
        let db = self.stages[..end].iter().map(|s| s.block.gain_db()).sum::<T>();
        T::lit(10.0).powf(db / T::lit(20.0))
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .stages
            .iter()
            .map(|s| format!("{}[{}, {:.2} dB]", s.label, s.block.kind(), s.block.gain_db().as_f64()))
            .collect();
        format!("{}: {}", self.role.name(), parts.join(" -> "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amp() -> Block<f64> {
        Block::Amp(AmpParams::new(20.0, 1.8, -3.0, 10.0).unwrap())
    }

    fn mixer() -> Block<f64> {
        Block::Mixer(MixerParams::ideal())
    }

    #[test]
    fn role_rules() {
        let up_amp = vec![Stage::new("mix", mixer()), Stage::new("rf", amp())];
        let up_plain = vec![Stage::new("if", amp()), Stage::new("mix", mixer())];
        assert!(ChainSpec::new(Role::Uph, up_amp.clone(), 0.0).is_ok());
        assert!(ChainSpec::new(Role::Upl, up_amp, 0.0).is_err());
        assert!(ChainSpec::new(Role::Upl, up_plain.clone(), 0.0).is_ok());
        assert!(ChainSpec::new(Role::Uph, up_plain, 0.0).is_err());
        assert!(ChainSpec::new(Role::Dn, vec![Stage::new("a", amp())], 0.0).is_err());
        assert!(ChainSpec::<f64>::new(Role::Dn, vec![], 0.0).is_err());
    }

    #[test]
    fn mixer_lookup() {
        let c = ChainSpec::new(Role::Dn, vec![Stage::new("m", mixer()), Stage::new("a", amp())], 0.0).unwrap();
        assert_eq!(c.mixer_index(), Some(0));
        assert!(c.with_mixer(1, MixerParams::ideal()).is_err());
        assert_eq!("dn".parse::<Role>().unwrap(), Role::Dn);
        assert!("XX".parse::<Role>().is_err());
    }
}
