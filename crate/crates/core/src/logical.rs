//! Logical qubits in the four-Majorana encoding.
//!
//! Qubit `q` (0-based) owns modes `4q+1 … 4q+4`; the last two modes of the
//! register form the ancilla pair used by the measurement-assisted CNOT.
//! The logical basis is
//!
//! ```text
//! |0⟩ = |((•,•)_I, (•,•)_I)_I⟩      |1⟩ = |((•,•)_ψ, (•,•)_ψ)_I⟩
//! ```
//!
//! i.e. both local pairs unoccupied or both occupied. Within one qubit, with
//! local modes `c₁…c₄`: `σᶻ = -i c₁c₂`, `σˣ = -i c₂c₃`.
//!
//! Logical amplitude vectors are indexed with qubit 0 as the most significant
//! bit, so `|abc⟩` sits at index `4a + 2b + c`.
//!
//! CNOT mode labels. The controlled-phase identity is written for a control
//! block `c₁…c₄`, a target block `c₅…c₈` and an ancilla pair `c₉, c₁₀`:
//!
//! | label       | register mode           |
//! |-------------|-------------------------|
//! | `c₁ … c₄`   | `4·control + 1 … + 4`   |
//! | `c₅ … c₈`   | `4·target + 1 … + 4`    |
//! | `c₉, c₁₀`   | `4n + 1, 4n + 2`        |

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{invalid, Error, Result};
use crate::majorana::{BraidDirection, FusionOutcome, MajoranaRegister};

const CCW: BraidDirection = BraidDirection::Counterclockwise;
const CW: BraidDirection = BraidDirection::Clockwise;

/// Mode assignment for `n` logical qubits plus one ancilla pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLayout {
    pub qubit_modes: Vec<[usize; 4]>,
    pub ancilla_modes: [usize; 2],
}

impl QubitLayout {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return invalid("need at least one logical qubit");
        }
        let qubit_modes = (0..n_qubits)
            .map(|q| [4 * q + 1, 4 * q + 2, 4 * q + 3, 4 * q + 4])
            .collect();
        Ok(Self {
            qubit_modes,
            ancilla_modes: [4 * n_qubits + 1, 4 * n_qubits + 2],
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.qubit_modes.len()
    }

    pub fn mode_count(&self) -> usize {
        4 * self.n_qubits() + 2
    }

    /// Register basis index of the logical basis state whose bits are
    /// `logical` (qubit 0 most significant), ancilla in `I`.
    pub fn register_index(&self, logical: usize) -> usize {
        let n = self.n_qubits();
        (0..n)
            .filter(|q| logical >> (n - 1 - q) & 1 == 1)
            .map(|q| 0b11 << (2 * q))
            .sum()
    }

    fn modes(&self, qubit: usize) -> Result<[usize; 4]> {
        self.qubit_modes
            .get(qubit)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("qubit {qubit} out of range")))
    }
}

/// Logical Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Measurement branch of one CNOT: `zeta` from the four-mode fusion, `eta`
/// from the pair fusion with the ancilla.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnotBranch {
    pub eta: i8,
    pub zeta: i8,
}

impl CnotBranch {
    pub const ALL: [CnotBranch; 4] = [
        CnotBranch { eta: 1, zeta: 1 },
        CnotBranch { eta: 1, zeta: -1 },
        CnotBranch { eta: -1, zeta: 1 },
        CnotBranch { eta: -1, zeta: -1 },
    ];

    pub fn index(self) -> usize {
        usize::from(self.eta < 0) * 2 + usize::from(self.zeta < 0)
    }
}

/// What happened inside one measurement-assisted CNOT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnotReport {
    pub branch: CnotBranch,
    /// Born probability of the realized branch.
    pub probability: f64,
    /// Whether the ancilla had to be re-initialized afterwards.
    pub ancilla_reset: bool,
}

/// Encoded register plus its layout.
#[derive(Debug, Clone)]
pub struct LogicalState {
    register: MajoranaRegister,
    layout: QubitLayout,
}

impl LogicalState {
    /// Logical `|0…0⟩` on `n_qubits` qubits with the ancilla pair in `I`.
    pub fn encode(n_qubits: usize, seed: u64) -> Result<Self> {
        let layout = QubitLayout::new(n_qubits)?;
        let register = MajoranaRegister::new_vacuum(layout.mode_count(), seed)?;
        Ok(Self { register, layout })
    }

    pub fn from_register(register: MajoranaRegister, layout: QubitLayout) -> Result<Self> {
        if register.mode_count() != layout.mode_count() {
            return invalid("register and layout disagree on mode count");
        }
        Ok(Self { register, layout })
    }

    /// Encodes an arbitrary logical state given by `2^n` amplitudes.
    pub fn from_logical_amplitudes(n_qubits: usize, logical: &[Complex64], seed: u64) -> Result<Self> {
        let layout = QubitLayout::new(n_qubits)?;
        if logical.len() != 1 << n_qubits {
            return invalid(format!("expected {} logical amplitudes", 1 << n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << (layout.mode_count() / 2)];
        for (l, a) in logical.iter().enumerate() {
            amps[layout.register_index(l)] = *a;
        }
        let register = MajoranaRegister::from_amplitudes(layout.mode_count(), amps, seed)?;
        Ok(Self { register, layout })
    }

    pub fn register(&self) -> &MajoranaRegister {
        &self.register
    }

    pub fn register_mut(&mut self) -> &mut MajoranaRegister {
        &mut self.register
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits()
    }

    /// Amplitudes on the logical basis (ancilla in `I`).
    pub fn logical_amplitudes(&self) -> Vec<Complex64> {
        let amps = self.register.amplitudes();
        (0..1usize << self.n_qubits())
            .map(|l| amps[self.layout.register_index(l)])
            .collect()
    }

    /// Probability mass outside the logical codespace.
    pub fn codespace_leakage(&self) -> f64 {
        let inside: f64 = self.logical_amplitudes().iter().map(|a| a.norm_sqr()).sum();
        (1.0 - inside).max(0.0)
    }

    /// Weight on basis states where qubit `q` carries nonzero total charge
    /// (its two local pairs in different channels).
    pub fn charge_violation(&self, qubit: usize) -> Result<f64> {
        self.layout.modes(qubit)?;
        let lo = 1 << (2 * qubit);
        let hi = 1 << (2 * qubit + 1);
        Ok(self
            .register
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(s, _)| (s & lo == 0) != (s & hi == 0))
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    pub fn braid_local(&mut self, qubit: usize, a: usize, b: usize, dir: BraidDirection) -> Result<()> {
        let m = self.layout.modes(qubit)?;
        if !(1..=4).contains(&a) || !(1..=4).contains(&b) {
            return invalid("local mode labels are 1..=4");
        }
        self.register.apply_braid(m[a - 1], m[b - 1], dir)
    }

    /// Counterclockwise exchange of local modes 1 and 2: `diag(1, i)` up to phase.
    pub fn b12(&mut self, qubit: usize) -> Result<()> {
        self.braid_local(qubit, 1, 2, CCW)
    }

    pub fn b34(&mut self, qubit: usize) -> Result<()> {
        self.braid_local(qubit, 3, 4, CCW)
    }

    /// Counterclockwise exchange of local modes 2 and 3:
    /// `(1/√2)[[1, -i], [-i, 1]]` up to phase.
    pub fn b23(&mut self, qubit: usize) -> Result<()> {
        self.braid_local(qubit, 2, 3, CCW)
    }

    /// Hadamard from the braid word `B₂₃² B₁₂⁻¹ B₂₃ B₁₂⁻¹ B₂₃²`.
    pub fn hadamard(&mut self, qubit: usize) -> Result<()> {
        // The word is a palindrome, so operator order and time order agree.
        const WORD: [(usize, usize, BraidDirection); 7] = [
            (2, 3, CCW),
            (2, 3, CCW),
            (1, 2, CW),
            (2, 3, CCW),
            (1, 2, CW),
            (2, 3, CCW),
            (2, 3, CCW),
        ];
        for &(a, b, dir) in &WORD {
            self.braid_local(qubit, a, b, dir)?;
        }
        Ok(())
    }

    /// Logical Pauli via braids: `X ≃ B₂₃²`, `Z ≃ B₁₂²`, `Y ≃ B₂₃² B₁₂²`.
    pub fn apply_pauli(&mut self, qubit: usize, pauli: Pauli) -> Result<()> {
        match pauli {
            Pauli::I => self.layout.modes(qubit).map(|_| ()),
            Pauli::X => {
                self.b23(qubit)?;
                self.b23(qubit)
            }
            Pauli::Z => {
                self.b12(qubit)?;
                self.b12(qubit)
            }
            Pauli::Y => {
                self.b12(qubit)?;
                self.b12(qubit)?;
                self.b23(qubit)?;
                self.b23(qubit)
            }
        }
    }

    /// Measurement-assisted CNOT with sampled measurement outcomes.
    pub fn cnot(&mut self, control: usize, target: usize) -> Result<CnotReport> {
        self.cnot_with(control, target, None)
    }

    /// CNOT with the `(η, ζ)` branch post-selected; errors if the branch has
    /// zero probability.
    pub fn cnot_branch(&mut self, control: usize, target: usize, branch: CnotBranch) -> Result<CnotReport> {
        self.cnot_with(control, target, Some(branch))
    }

    fn cnot_with(&mut self, control: usize, target: usize, forced: Option<CnotBranch>) -> Result<CnotReport> {
        if control == target {
            return invalid("control and target must differ");
        }
        let cm = self.layout.modes(control)?;
        let tm = self.layout.modes(target)?;
        let [a1, a2] = self.layout.ancilla_modes;
        let (_, anc_psi) = self.register.fusion_pair_probabilities(a1, a2)?;
        if anc_psi > 1e-12 {
            return Err(Error::Protocol(format!(
                "ancilla pair not in the vacuum channel (ψ weight {anc_psi:e})"
            )));
        }
        // c1..c10 labels of the controlled-phase identity.
        let c = |k: usize| -> usize {
            match k {
                1..=4 => cm[k - 1],
                5..=8 => tm[k - 5],
                9 => a1,
                10 => a2,
                _ => unreachable!(),
            }
        };

        self.hadamard(target)?;

        self.register.apply_exponential(c(3), c(4), -FRAC_PI_4)?;
        self.register.apply_exponential(c(5), c(6), -FRAC_PI_4)?;

        let quad = [c(4), c(3), c(6), c(9)];
        let (zeta, p_zeta) = match forced {
            Some(b) => (b.zeta, self.register.project_fusion_quad(quad, b.zeta)?),
            None => {
                let (p, m) = self.register.fusion_quad_probabilities(quad)?;
                let s = self.register.measure_fusion_quad(quad)?;
                (s, if s > 0 { p } else { m })
            }
        };
        let (eta, p_eta) = match forced {
            Some(b) => (
                b.eta,
                self.register.project_fusion_pair(c(5), c(9), FusionOutcome::from_sign(b.eta))?,
            ),
            None => {
                let (p, m) = self.register.fusion_pair_probabilities(c(5), c(9))?;
                let o = self.register.measure_fusion_pair(c(5), c(9))?;
                (o.sign(), if o.sign() > 0 { p } else { m })
            }
        };

        // U_ηζ; the explicit factor i on U₊₋ and U₋₊ is a global phase.
        let sign = if eta > 0 { 1.0 } else { -1.0 };
        self.register.apply_exponential(c(5), c(10), sign * FRAC_PI_4)?;
        if eta != zeta {
            self.register.apply_exponential(c(5), c(6), FRAC_PI_2)?;
            self.register.apply_exponential(c(4), c(3), FRAC_PI_2)?;
        }

        self.hadamard(target)?;

        let ancilla_reset = match self.register.measure_fusion_pair(a1, a2)? {
            FusionOutcome::I => false,
            FusionOutcome::Psi => {
                self.register.apply_majorana_product(&[a1])?;
                true
            }
        };

        Ok(CnotReport {
            branch: CnotBranch { eta, zeta },
            probability: p_zeta * p_eta,
            ancilla_reset,
        })
    }

    /// Rotates qubit `q` for `setting` (0 → Hadamard word, 1 → `B₂₃`) and
    /// reads the fusion channel of its first pair: `0` for `I`, `1` for `ψ`.
    pub fn readout(&mut self, qubit: usize, setting: u8) -> Result<u8> {
        match setting {
            0 => self.hadamard(qubit)?,
            1 => self.b23(qubit)?,
            _ => return invalid(format!("setting must be 0 or 1, got {setting}")),
        }
        let m = self.layout.modes(qubit)?;
        Ok(self.register.measure_fusion_pair(m[0], m[1])?.bit())
    }

    /// Computational-basis readout (no rotation).
    pub fn readout_z(&mut self, qubit: usize) -> Result<u8> {
        let m = self.layout.modes(qubit)?;
        Ok(self.register.measure_fusion_pair(m[0], m[1])?.bit())
    }
}

/// Three-qubit GHZ state: Hadamard on qubit 0, then CNOT(0,1) and CNOT(1,2).
pub fn prepare_ghz(seed: u64) -> Result<LogicalState> {
    let mut state = LogicalState::encode(3, seed)?;
    prepare_ghz_in_place(&mut state)?;
    Ok(state)
}

pub(crate) fn prepare_ghz_in_place(state: &mut LogicalState) -> Result<[CnotReport; 2]> {
    state.hadamard(0)?;
    let first = state.cnot(0, 1)?;
    let second = state.cnot(1, 2)?;
    Ok([first, second])
}

/// Compares two vectors up to a global phase: the phase of the entry with the
/// largest modulus in `a` is removed from both before taking the max deviation.
pub fn phase_insensitive_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let pivot = a
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let pa = phase_of(a[pivot]);
    let pb = phase_of(b[pivot]);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x * pa.conj() - y * pb.conj()).norm())
        .fold(0.0, f64::max)
}

fn phase_of(z: Complex64) -> Complex64 {
    if z.norm() < 1e-300 {
        Complex64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

/// Extracts the logical matrix of `gate` acting on a `n_qubits`-qubit
/// encoded register, column by column.
pub fn logical_matrix<F>(n_qubits: usize, mut gate: F) -> Result<Vec<Vec<Complex64>>>
where
    F: FnMut(&mut LogicalState) -> Result<()>,
{
    let dim = 1 << n_qubits;
    let mut columns = Vec::with_capacity(dim);
    for col in 0..dim {
        let mut basis = vec![Complex64::new(0.0, 0.0); dim];
        basis[col] = Complex64::new(1.0, 0.0);
        let mut st = LogicalState::from_logical_amplitudes(n_qubits, &basis, col as u64)?;
        gate(&mut st)?;
        columns.push(st.logical_amplitudes());
    }
    // return row-major
    Ok((0..dim)
        .map(|r| (0..dim).map(|c| columns[c][r]).collect())
        .collect())
}

/// Max entrywise deviation between two square matrices after removing a
/// common global phase.
pub fn matrix_distance_up_to_phase(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    let fa: Vec<Complex64> = a.iter().flatten().copied().collect();
    let fb: Vec<Complex64> = b.iter().flatten().copied().collect();
    phase_insensitive_distance(&fa, &fb)
}
