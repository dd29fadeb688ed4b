//! Physics self-checks: braid matrices, the Hadamard word, CNOT branches and
//! GHZ correlators.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::logical::{
    logical_matrix, matrix_distance_up_to_phase, phase_insensitive_distance, prepare_ghz, CnotBranch, LogicalState,
};
use crate::mabk::{tau, MABK_SETTINGS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Deviation from the target.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value.is_finite() && value <= tolerance }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat2(a: [[Complex64; 2]; 2]) -> Vec<Vec<Complex64>> {
    a.iter().map(|r| r.to_vec()).collect()
}

/// Logical actions of `B₁₂`, `B₃₄`, `B₂₃` and the Hadamard word.
pub fn gate_checks() -> Result<Vec<Check>> {
    let s = FRAC_1_SQRT_2;
    let phase = mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]]);
    let b23 = mat2([[c(s, 0.0), c(0.0, -s)], [c(0.0, -s), c(s, 0.0)]]);
    let h = mat2([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]);
    Ok(vec![
        Check::new("braid B12", matrix_distance_up_to_phase(&logical_matrix(1, |st| st.b12(0))?, &phase), 1e-10),
        Check::new("braid B34", matrix_distance_up_to_phase(&logical_matrix(1, |st| st.b34(0))?, &phase), 1e-10),
        Check::new("braid B23", matrix_distance_up_to_phase(&logical_matrix(1, |st| st.b23(0))?, &b23), 1e-10),
        Check::new("hadamard word", matrix_distance_up_to_phase(&logical_matrix(1, |st| st.hadamard(0))?, &h), 1e-10),
    ])
}

/// Each post-selected `(η, ζ)` branch acts as CNOT on a generic input.
pub fn cnot_branch_checks() -> Result<Vec<Check>> {
    let amp = [c(0.5, 0.1), c(-0.3, 0.4), c(0.2, -0.6), c(0.1, 0.25)];
    let norm = amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let want: Vec<Complex64> = [amp[0], amp[1], amp[3], amp[2]].iter().map(|a| a / norm).collect();
    CnotBranch::ALL
        .iter()
        .map(|&branch| {
            let mut st = LogicalState::from_logical_amplitudes(2, &amp, 7)?;
            let rep = st.cnot_branch(0, 1, branch)?;
            let dev = phase_insensitive_distance(&st.logical_amplitudes(), &want).max((rep.probability - 0.25).abs());
            Ok(Check::new(format!("cnot branch eta={:+} zeta={:+}", branch.eta, branch.zeta), dev, 1e-10))
        })
        .collect()
}

/// Sampled branch counts over `runs` CNOTs, in [`CnotBranch::ALL`] order.
pub fn cnot_branch_counts(runs: u64, seed: u64) -> Result<[u64; 4]> {
    let mut counts = [0u64; 4];
    for i in 0..runs {
        let mut st = LogicalState::encode(2, seed.wrapping_add(i))?;
        st.hadamard(0)?;
        counts[st.cnot(0, 1)?.branch.index()] += 1;
    }
    Ok(counts)
}

/// Largest branch-count deviation from `runs/4`, in binomial standard deviations.
pub fn cnot_frequency_check(runs: u64, seed: u64) -> Result<Check> {
    let counts = cnot_branch_counts(runs, seed)?;
    let mean = runs as f64 / 4.0;
    let sd = (runs as f64 * 0.25 * 0.75).sqrt();
    let z = counts.iter().map(|&n| (n as f64 - mean).abs() / sd).fold(0.0, f64::max);
    Ok(Check::new(format!("cnot branch frequencies over {runs} runs (sigmas)"), z, 5.0))
}

/// `⟨A_x B_y C_z⟩` of the prepared GHZ state for one setting triple, from
/// exact amplitudes after the readout rotations.
pub fn ghz_correlator(setting: [u8; 3], seed: u64) -> Result<f64> {
    let mut st = prepare_ghz(seed)?;
    for (q, &s) in setting.iter().enumerate() {
        if s == 0 {
            st.hadamard(q)?;
        } else {
            st.b23(q)?;
        }
    }
    Ok(st
        .logical_amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| if i.count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum())
}

pub fn ghz_checks(seed: u64) -> Result<Vec<Check>> {
    let l = prepare_ghz(seed)?.logical_amplitudes();
    let mut checks = vec![
        Check::new("ghz |<000|psi>|^2 = 1/2", (l[0].norm_sqr() - 0.5).abs(), 1e-10),
        Check::new("ghz |<111|psi>|^2 = 1/2", (l[7].norm_sqr() - 0.5).abs(), 1e-10),
    ];
    let mut mabk = 0.0;
    for &[x, y, z] in &MABK_SETTINGS {
        let t = f64::from(tau(x, y, z)?);
        let e = ghz_correlator([x, y, z], seed)?;
        checks.push(Check::new(format!("ghz correlator {x}{y}{z} = {t:+}"), (e - t).abs(), 1e-10));
        mabk += t * e;
    }
    checks.push(Check::new("ghz MABK value = 4", (mabk - 4.0).abs(), 1e-10));
    Ok(checks)
}

/// All physics checks, with `runs` sampled CNOTs for the frequency test.
pub fn physics_checks(runs: u64, seed: u64) -> Result<Vec<Check>> {
    let mut all = gate_checks()?;
    all.extend(cnot_branch_checks()?);
    all.push(cnot_frequency_check(runs, seed)?);
    all.extend(ghz_checks(seed)?);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for check in physics_checks(2000, 11).unwrap() {
            assert!(check.passed, "{check:?}");
        }
    }
}
