//! MABK bookkeeping: the sign function, parity classes, the violation
//! estimator and the per-trial random variable.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::trials::{SettingsDistribution, TrialRecord};

/// The four setting triples summed over by the MABK expression.
pub const MABK_SETTINGS: [[u8; 3]; 4] = [[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]];

/// Position of `(x, y, z)` in [`MABK_SETTINGS`], if it belongs there.
pub fn setting_index(x: u8, y: u8, z: u8) -> Option<usize> {
    MABK_SETTINGS.iter().position(|s| *s == [x, y, z])
}

/// `τ(x,y,z) = (-1)^{(x+y+z)/2}` on the MABK settings.
pub fn tau(x: u8, y: u8, z: u8) -> Result<i8> {
    if setting_index(x, y, z).is_none() {
        return invalid(format!("setting ({x},{y},{z}) is not an MABK setting"));
    }
    Ok(if ((x + y + z) / 2).is_multiple_of(2) { 1 } else { -1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// `Λ(a,b,c)`: `+1` for even, `-1` for odd.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

pub fn parity_class(a: u8, b: u8, c: u8) -> Parity {
    if (a ^ b ^ c) & 1 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Even/odd counts observed for one setting triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub setting: [u8; 3],
    pub even: u64,
    pub odd: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub l_hat: f64,
    pub k: u64,
    pub counts: Vec<SettingCounts>,
}

/// `L̂ = (1/k) Σ_S τ/P(xyz) · [N(even|xyz) - N(odd|xyz)]`.
///
/// Settings that never occurred contribute zero; the weight is the design
/// probability, not the observed frequency.
pub fn estimate(records: &[TrialRecord], dist: &SettingsDistribution) -> Result<ViolationEstimate> {
    let mut counts: Vec<SettingCounts> = MABK_SETTINGS
        .iter()
        .map(|&setting| SettingCounts { setting, even: 0, odd: 0 })
        .collect();
    for r in records {
        let idx = checked_setting(r, dist)?;
        match parity_class(r.a, r.b, r.c) {
            Parity::Even => counts[idx].even += 1,
            Parity::Odd => counts[idx].odd += 1,
        }
    }
    let k = records.len() as u64;
    let l_hat = if k == 0 {
        0.0
    } else {
        let sum: f64 = counts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let [x, y, z] = c.setting;
                let t = f64::from(tau(x, y, z).expect("MABK setting"));
                t / dist.probabilities()[i] * (c.even as f64 - c.odd as f64)
            })
            .sum();
        sum / k as f64
    };
    Ok(ViolationEstimate { l_hat, k, counts })
}

/// `L̂ᵢ = τ(x,y,z) Λ(a,b,c) / P(xyz)` for the realized setting of one round.
pub fn trial_variable(record: &TrialRecord, dist: &SettingsDistribution) -> Result<f64> {
    let idx = checked_setting(record, dist)?;
    let t = f64::from(tau(record.x, record.y, record.z)?);
    Ok(t * parity_class(record.a, record.b, record.c).sign() / dist.probabilities()[idx])
}

fn checked_setting(r: &TrialRecord, dist: &SettingsDistribution) -> Result<usize> {
    match setting_index(r.x, r.y, r.z) {
        Some(i) if dist.probabilities()[i] > 0.0 => Ok(i),
        _ => invalid(format!(
            "record setting ({},{},{}) has zero design probability",
            r.x, r.y, r.z
        )),
    }
}

/// A full conditional distribution `P(abc|xyz)`, indexed
/// `[4x + 2y + z][4a + 2b + c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behaviour {
    pub p: [[f64; 8]; 8],
}

impl Behaviour {
    pub fn prob(&self, abc: [u8; 3], xyz: [u8; 3]) -> f64 {
        self.p[triple_index(xyz)][triple_index(abc)]
    }

    /// `Σ_S τ(x,y,z) [P(even|xyz) - P(odd|xyz)]`.
    pub fn mabk_value(&self) -> f64 {
        MABK_SETTINGS
            .iter()
            .map(|&[x, y, z]| {
                let row = &self.p[triple_index([x, y, z])];
                let corr: f64 = (0..8)
                    .map(|o| if (o as u32).count_ones().is_multiple_of(2) { row[o] } else { -row[o] })
                    .sum();
                f64::from(tau(x, y, z).expect("MABK setting")) * corr
            })
            .sum()
    }

    /// `max_{abc} P(abc|xyz)` over the given settings.
    pub fn max_probability<'a>(&self, settings: impl IntoIterator<Item = &'a [u8; 3]>) -> f64 {
        settings
            .into_iter()
            .flat_map(|&s| self.p[triple_index(s)].iter().copied())
            .fold(0.0, f64::max)
    }

    /// Local deterministic strategy: `outputs[party][setting]`.
    pub fn deterministic(outputs: [[u8; 2]; 3]) -> Self {
        let mut p = [[0.0; 8]; 8];
        for (xyz, row) in p.iter_mut().enumerate() {
            let s = split_triple(xyz);
            let abc = [outputs[0][s[0] as usize], outputs[1][s[1] as usize], outputs[2][s[2] as usize]];
            row[triple_index(abc)] = 1.0;
        }
        Self { p }
    }
}

pub fn triple_index(t: [u8; 3]) -> usize {
    usize::from(t[0]) * 4 + usize::from(t[1]) * 2 + usize::from(t[2])
}

pub fn split_triple(i: usize) -> [u8; 3] {
    [(i >> 2 & 1) as u8, (i >> 1 & 1) as u8, (i & 1) as u8]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(s: [u8; 3], o: [u8; 3]) -> TrialRecord {
        TrialRecord { x: s[0], y: s[1], z: s[2], a: o[0], b: o[1], c: o[2] }
    }

    #[test]
    fn tau_values() {
        assert_eq!(tau(0, 0, 0).unwrap(), 1);
        assert_eq!(tau(0, 1, 1).unwrap(), -1);
        assert_eq!(tau(1, 0, 1).unwrap(), -1);
        assert_eq!(tau(1, 1, 0).unwrap(), -1);
        assert!(tau(1, 1, 1).is_err());
        assert!(tau(0, 0, 1).is_err());
    }

    #[test]
    fn parity_classes() {
        assert_eq!(parity_class(0, 0, 0), Parity::Even);
        assert_eq!(parity_class(1, 1, 0), Parity::Even);
        assert_eq!(parity_class(1, 1, 1), Parity::Odd);
    }

    #[test]
    fn hand_built_estimates() {
        let u = SettingsDistribution::uniform();
        let ghz_like = vec![
            rec([0, 0, 0], [0, 0, 0]),
            rec([0, 1, 1], [1, 0, 0]),
            rec([1, 0, 1], [0, 1, 0]),
            rec([1, 1, 0], [1, 1, 1]),
        ];
        assert_eq!(estimate(&ghz_like, &u).unwrap().l_hat, 4.0);
        let all_even = vec![
            rec([0, 0, 0], [0, 0, 0]),
            rec([0, 1, 1], [1, 1, 0]),
            rec([1, 0, 1], [0, 0, 0]),
            rec([1, 1, 0], [0, 1, 1]),
        ];
        assert_eq!(estimate(&all_even, &u).unwrap().l_hat, -2.0);
    }

    #[test]
    fn missing_settings_contribute_zero() {
        let u = SettingsDistribution::uniform();
        let only_000 = vec![rec([0, 0, 0], [0, 0, 0]), rec([0, 0, 0], [1, 1, 0])];
        let est = estimate(&only_000, &u).unwrap();
        assert_eq!(est.l_hat, 4.0);
        assert_eq!(est.counts[1], SettingCounts { setting: [0, 1, 1], even: 0, odd: 0 });
        let total: u64 = est.counts.iter().map(|c| c.even + c.odd).sum();
        assert_eq!(total, est.k);
    }

    #[test]
    fn trial_variable_values() {
        let u = SettingsDistribution::uniform();
        assert_eq!(trial_variable(&rec([0, 0, 0], [0, 0, 0]), &u).unwrap(), 4.0);
        let biased = SettingsDistribution::new([0.97, 0.01, 0.01, 0.01]).unwrap();
        let v = trial_variable(&rec([0, 1, 1], [1, 0, 0]), &biased).unwrap();
        assert!((v - 100.0).abs() < 1e-12);
        assert!(trial_variable(&rec([1, 1, 1], [0, 0, 0]), &u).is_err());
        let point = SettingsDistribution::new([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(estimate(&[rec([0, 1, 1], [0, 0, 0])], &point).is_err());
    }

    #[test]
    fn local_deterministic_strategies_reach_two() {
        let mut best = f64::MIN;
        for bits in 0u32..64 {
            let o = |i: u32| ((bits >> i) & 1) as u8;
            let b = Behaviour::deterministic([[o(0), o(1)], [o(2), o(3)], [o(4), o(5)]]);
            let l = b.mabk_value();
            assert!(l.abs() <= 4.0);
            best = best.max(l);
        }
        assert_eq!(best, 2.0);
    }
}
