//! Linear program over no-signalling boxes: the largest single outcome
//! probability compatible with a given MABK value.

use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, LpStatus};
use crate::error::{invalid, Error, Result};
use crate::mabk::{split_triple, tau, MABK_SETTINGS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NsScenario {
    /// Boxes defined only on the four MABK setting triples.
    #[default]
    MabkSettings,
    /// Boxes defined on all eight setting triples.
    AllInputs,
}

impl NsScenario {
    pub fn settings(self) -> Vec<[u8; 3]> {
        match self {
            Self::MabkSettings => MABK_SETTINGS.to_vec(),
            Self::AllInputs => (0..8).map(split_triple).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsResult {
    pub l_hat: f64,
    pub scenario: NsScenario,
    pub value: f64,
    pub argmax_outcomes: [u8; 3],
    pub argmax_settings: [u8; 3],
    /// Optimal box at the argmax: `(xyz, [P(abc|xyz); 8])` per modeled setting.
    pub behaviour: Vec<([u8; 3], [f64; 8])>,
}

/// Variables are `P(abc|xyz)` at index `8·s + abc` for the `s`-th modeled
/// setting. Constraints: normalization per setting, equal marginals on every
/// set of parties whose settings agree between two modeled triples, and the
/// MABK value.
fn feasible_set(settings: &[[u8; 3]], l_hat: f64) -> Result<LinearProgram> {
    let n = 8 * settings.len();
    let mut lp = LinearProgram::new(n);
    for s in 0..settings.len() {
        let mut row = vec![0.0; n];
        row[8 * s..8 * s + 8].iter_mut().for_each(|v| *v = 1.0);
        lp.add_equality(row, 1.0)?;
    }
    for s in 0..settings.len() {
        for t in s + 1..settings.len() {
            let shared: Vec<usize> = (0..3).filter(|&p| settings[s][p] == settings[t][p]).collect();
            if shared.is_empty() {
                continue;
            }
            // One equation per joint outcome of the shared parties.
            for pattern in 0..(1usize << shared.len()) {
                let mut row = vec![0.0; n];
                for o in 0..8 {
                    let out = split_triple(o);
                    let matches = shared.iter().enumerate().all(|(k, &p)| usize::from(out[p]) == (pattern >> k & 1));
                    if matches {
                        row[8 * s + o] += 1.0;
                        row[8 * t + o] -= 1.0;
                    }
                }
                lp.add_equality(row, 0.0)?;
            }
        }
    }
    let mut row = vec![0.0; n];
    for (s, &[x, y, z]) in settings.iter().enumerate() {
        if let Ok(t) = tau(x, y, z) {
            for o in 0..8 {
                let parity = if (o as u32).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                row[8 * s + o] = f64::from(t) * parity;
            }
        }
    }
    lp.add_equality(row, l_hat)?;
    Ok(lp)
}

/// Largest `P(abc|xyz)` over no-signalling boxes with MABK value `l_hat`,
/// maximized over every modeled objective triple.
pub fn nosignalling_max(l_hat: f64, scenario: NsScenario) -> Result<NsResult> {
    if !l_hat.is_finite() {
        return invalid("MABK value must be finite");
    }
    let settings = scenario.settings();
    let mut lp = feasible_set(&settings, l_hat)?;
    let mut best: Option<NsResult> = None;
    for (s, &xyz) in settings.iter().enumerate() {
        for o in 0..8 {
            let mut c = vec![0.0; lp.n_vars()];
            c[8 * s + o] = 1.0;
            lp.set_objective(c)?;
            let sol = lp.solve();
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    return Err(Error::Solver(format!("no no-signalling box reaches MABK value {l_hat}")));
                }
                LpStatus::Unbounded => return Err(Error::Internal("no-signalling LP unbounded".into())),
            }
            if best.as_ref().is_none_or(|b| sol.value > b.value) {
                let behaviour = settings
                    .iter()
                    .enumerate()
                    .map(|(k, st)| {
                        let mut row = [0.0; 8];
                        row.copy_from_slice(&sol.x[8 * k..8 * k + 8]);
                        (*st, row)
                    })
                    .collect();
                best = Some(NsResult {
                    l_hat,
                    scenario,
                    value: sol.value,
                    argmax_outcomes: split_triple(o),
                    argmax_settings: xyz,
                    behaviour,
                });
            }
        }
    }
    best.ok_or_else(|| Error::Internal("empty no-signalling sweep".into()))
}
