//! Static cascade analysis: gain, Friis noise figure, input-referred IIP3 and stage levels.

use serde::Serialize;

use crate::chain::ChainSpec;
use crate::scalar::Real;
use crate::signal::{db_to_power_ratio, power_ratio_to_db};

/// Default margin below an amplifier's input P1dB at which a stage is flagged.
pub const COMPRESSION_MARGIN_DB: f64 = 3.0;

pub fn cascade_gain<T: Real>(chain: &ChainSpec<T>) -> T {
    chain.stages().iter().map(|s| s.block.gain_db()).sum()
}

/// Friis: `F = F1 + sum_{k>=2} (F_k - 1) / prod_{j<k} G_j`, in dB.
pub fn cascade_nf<T: Real>(chain: &ChainSpec<T>) -> T {
    power_ratio_to_db(running(chain).last().map(|r| r.noise_factor).unwrap_or(T::one()))
}

/// `1 / P = sum_k (prod_{j<k} G_j) / P_k`, in dBm.
pub fn cascade_iip3<T: Real>(chain: &ChainSpec<T>) -> T {
    let inv = running(chain).last().map(|r| r.inv_iip3_mw).unwrap_or(T::zero());
    iip3_from_inverse(inv)
}

fn iip3_from_inverse<T: Real>(inv_mw: T) -> T {
    if inv_mw == T::zero() {
        T::infinity()
    } else {
        power_ratio_to_db(inv_mw.recip())
    }
}

struct Running<T> {
    gain_before: T,
    gain_after: T,
    noise_factor: T,
    inv_iip3_mw: T,
}

fn running<T: Real>(chain: &ChainSpec<T>) -> Vec<Running<T>> {
    let mut gain = T::one();
    let mut factor = T::one();
    let mut inv = T::zero();
    let mut first = true;
    chain
        .stages()
        .iter()
        .map(|s| {
            let f_k = db_to_power_ratio(s.block.nf_db());
            if first {
                factor = f_k;
                first = false;
            } else {
                factor = factor + (f_k - T::one()) / gain;
            }
            let iip3 = s.block.iip3_dbm();
            if iip3.is_finite() {
                inv = inv + gain / db_to_power_ratio(iip3);
            }
            let before = gain;
            gain = gain * db_to_power_ratio(s.block.gain_db());
            Running {
                gain_before: before,
                gain_after: gain,
                noise_factor: factor,
                inv_iip3_mw: inv,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageBudget<T> {
    pub label: String,
    pub kind: &'static str,
    pub gain_db: T,
    pub cum_gain_db: T,
    pub cum_nf_db: T,
    /// Input-referred intercept of the chain up to and including this stage; `null` if linear.
    pub cum_iip3_dbm: T,
    pub input_dbm: T,
    pub output_dbm: T,
    pub compression_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport<T> {
    pub role: &'static str,
    pub input_dbm: T,
    pub compression_margin_db: T,
    pub stages: Vec<StageBudget<T>>,
    pub total_gain_db: T,
    pub total_nf_db: T,
    pub total_iip3_dbm: T,
    pub output_dbm: T,
    pub warnings: Vec<String>,
}

pub fn budget_report<T: Real>(chain: &ChainSpec<T>, input_dbm: T) -> BudgetReport<T> {
    budget_report_with_margin(chain, input_dbm, T::lit(COMPRESSION_MARGIN_DB))
}

pub fn budget_report_with_margin<T: Real>(chain: &ChainSpec<T>, input_dbm: T, margin_db: T) -> BudgetReport<T> {
    let mut warnings = Vec::new();
    let stages: Vec<StageBudget<T>> = chain
        .stages()
        .iter()
        .zip(running(chain))
        .map(|(s, r)| {
            let stage_in = input_dbm + power_ratio_to_db(r.gain_before);
            let flagged = s.block.p1db_in_dbm().is_some_and(|p1| stage_in > p1 - margin_db);
            if flagged {
                warnings.push(format!(
                    "{}: input {:.2} dBm is within {} dB of its input P1dB",
                    s.label,
                    stage_in.as_f64(),
                    margin_db.as_f64()
                ));
            }
            StageBudget {
                label: s.label.clone(),
                kind: s.block.kind(),
                gain_db: s.block.gain_db(),
                cum_gain_db: power_ratio_to_db(r.gain_after),
                cum_nf_db: power_ratio_to_db(r.noise_factor),
                cum_iip3_dbm: iip3_from_inverse(r.inv_iip3_mw),
                input_dbm: stage_in,
                output_dbm: input_dbm + power_ratio_to_db(r.gain_after),
                compression_warning: flagged,
            }
        })
        .collect();
    let last = stages.last().expect("chains are non-empty");
    BudgetReport {
        role: chain.role().name(),
        input_dbm,
        compression_margin_db: margin_db,
        total_gain_db: last.cum_gain_db,
        total_nf_db: last.cum_nf_db,
        total_iip3_dbm: last.cum_iip3_dbm,
        output_dbm: last.output_dbm,
        stages,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{AmpParams, AttenParams, FilterParams, MixerParams};
    use crate::chain::{Block, Role, Stage};

    fn amp(g: f64, nf: f64, iip3: f64) -> Stage<f64> {
        Stage::new("amp", Block::Amp(AmpParams::new(g, nf, iip3 - 9.6, iip3).unwrap()))
    }

    fn pad(db: f64) -> Stage<f64> {
        Stage::new("pad", Block::Atten(AttenParams::new(db).unwrap()))
    }

    fn mixer(loss: f64) -> Stage<f64> {
        let m = MixerParams::from_imbalance(1.0, 0.0, loss, num_complex::Complex::new(0.0, 0.0)).unwrap();
        Stage::new("mix", Block::Mixer(m))
    }

    fn dn(stages: Vec<Stage<f64>>) -> ChainSpec<f64> {
        let mut all = vec![mixer(0.0)];
        all.extend(stages);
        ChainSpec::new(Role::Dn, all, 0.0).unwrap()
    }

    #[test]
    fn gain_is_additive() {
        assert!((cascade_gain(&dn(vec![amp(22.0, 1.1, 30.0), pad(3.0)])) - 19.0).abs() < 1e-12);
    }

    #[test]
    fn friis_examples() {
        assert!((cascade_nf(&dn(vec![amp(20.0, 1.8, 30.0)])) - 1.8).abs() < 1e-12);
        // 1.5136 + (1.2882 - 1) / 100 -> 1.8084 dB (hand evaluation)
        let two = dn(vec![amp(20.0, 1.8, 30.0), amp(22.0, 1.1, 30.0)]);
        assert!((cascade_nf(&two) - 1.808_263).abs() < 1e-5);
        let padded = dn(vec![pad(3.0), amp(20.0, 1.8, 30.0)]);
        assert!((cascade_nf(&padded) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn iip3_examples() {
        assert!((cascade_iip3(&dn(vec![amp(20.0, 1.8, 21.0)])) - 21.0).abs() < 1e-12);
        // 1/P = 1/398.1 + 100/398.1 mW^-1 -> 5.957 dBm
        let two = dn(vec![amp(20.0, 1.8, 26.0), amp(20.0, 1.8, 26.0)]);
        assert!((cascade_iip3(&two) - 5.956_786).abs() < 1e-5);
        let padded = dn(vec![pad(10.0), amp(20.0, 1.8, 21.0)]);
        assert!((cascade_iip3(&padded) - 31.0).abs() < 1e-12);
        assert!(cascade_iip3(&dn(vec![pad(1.0)])).is_infinite());
    }

    #[test]
    fn flat_chain_levels() {
        let c = dn(vec![pad(0.0), Stage::new("lpf", Block::Filter(FilterParams::new(1e8, 11).unwrap()))]);
        let r = budget_report(&c, -20.0);
        assert!(r.stages.iter().all(|s| s.input_dbm == -20.0 && s.output_dbm == -20.0));
        assert_eq!(r.output_dbm, -20.0);
    }

    #[test]
    fn compression_threshold() {
        let c = dn(vec![Stage::new("pa", Block::Amp(AmpParams::new(10.0, 2.0, 16.0, 26.0).unwrap()))]);
        assert!(!budget_report(&c, 12.9).stages[1].compression_warning);
        let hot = budget_report(&c, 13.1);
        assert!(hot.stages[1].compression_warning);
        assert_eq!(hot.warnings.len(), 1);
        assert!(!budget_report_with_margin(&c, 13.1, 1.0).stages[1].compression_warning);
    }

    #[test]
    fn totals_match_last_stage() {
        let c = dn(vec![pad(2.0), amp(22.0, 1.1, 5.5), pad(2.0), amp(22.0, 1.1, 5.5)]);
        let r = budget_report(&c, -60.0);
        let last = r.stages.last().unwrap();
        assert_eq!(r.total_gain_db, last.cum_gain_db);
        assert_eq!(r.total_nf_db, last.cum_nf_db);
        assert_eq!(r.total_iip3_dbm, last.cum_iip3_dbm);
        assert!((r.total_gain_db - cascade_gain(&c)).abs() < 1e-12);
        assert!((r.total_nf_db - cascade_nf(&c)).abs() < 1e-12);
        assert!((r.total_iip3_dbm - cascade_iip3(&c)).abs() < 1e-12);
    }
}
