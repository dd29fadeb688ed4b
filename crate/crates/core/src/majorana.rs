//! Dense state-vector simulation of Majorana modes.
//!
//! A register of `M` Majorana modes `c_1 … c_M` is represented over the
//! occupation basis of `M/2` fermionic modes; fermionic mode `k` occupies bit
//! `k-1` of the basis index. The Majorana operators follow the Jordan–Wigner
//! convention
//!
//! ```text
//! c_{2k-1} = Z_1 … Z_{k-1} X_k
//! c_{2k}   = Z_1 … Z_{k-1} Y_k
//! ```
//!
//! so that `-i c_{2k-1} c_{2k} = Z_k` measures the fusion channel of the pair
//! (`+1` ↔ vacuum `I`, `-1` ↔ fermion `ψ`).
//!
//! Every operator is applied as a bit-indexed update; nothing here builds a
//! `2^n × 2^n` matrix.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest register supported by the dense representation.
pub const MAX_MODES: usize = 40;

/// Outcome probabilities below this are treated as impossible branches.
pub const ZERO_BRANCH: f64 = 1e-14;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Fusion channel of a pair of Majorana modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FusionOutcome {
    /// Vacuum channel, eigenvalue `+1`.
    I,
    /// Fermion channel, eigenvalue `-1`.
    Psi,
}

impl FusionOutcome {
    pub fn sign(self) -> i8 {
        match self {
            FusionOutcome::I => 1,
            FusionOutcome::Psi => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Self {
        if sign >= 0 {
            FusionOutcome::I
        } else {
            FusionOutcome::Psi
        }
    }

    /// Readout bit: `0` for `I`, `1` for `ψ`.
    pub fn bit(self) -> u8 {
        match self {
            FusionOutcome::I => 0,
            FusionOutcome::Psi => 1,
        }
    }
}

/// Direction of an exchange of two modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BraidDirection {
    Counterclockwise,
    Clockwise,
}

/// Action of a single Majorana operator `c_j` on the occupation basis.
///
/// `c_j |s⟩ = phase(s) |s ⊕ flip⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MajoranaOperator {
    mode: usize,
    qubit: usize,
    flip: usize,
    string_mask: usize,
    is_y: bool,
}

impl MajoranaOperator {
    /// Operator for mode `j` (1-based) in a register of `mode_count` modes.
    pub fn new(mode_count: usize, j: usize) -> Result<Self> {
        if j == 0 || j > mode_count {
            return invalid(format!("mode index {j} outside 1..={mode_count}"));
        }
        let qubit = (j - 1) / 2;
        Ok(Self {
            mode: j,
            qubit,
            flip: 1 << qubit,
            string_mask: (1 << qubit) - 1,
            is_y: j.is_multiple_of(2),
        })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    /// Phase picked up by basis state `s`.
    #[inline]
    pub fn phase(&self, s: usize) -> Complex64 {
        let string = if (s & self.string_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        if self.is_y {
            if s & self.flip == 0 {
                I * string
            } else {
                -I * string
            }
        } else {
            Complex64::new(string, 0.0)
        }
    }

    /// Writes `c_j · src` into `dst`.
    pub fn apply_into(&self, src: &[Complex64], dst: &mut [Complex64]) {
        for (s, amp) in src.iter().enumerate() {
            dst[s ^ self.flip] = self.phase(s) * amp;
        }
    }

    pub fn apply(&self, src: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
        self.apply_into(src, &mut out);
        out
    }
}

/// Applies the ordered product `c_{modes[0]} c_{modes[1]} …` to `v`
/// (rightmost factor acts first).
pub fn apply_product(mode_count: usize, modes: &[usize], v: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut cur = v.to_vec();
    let mut scratch = vec![Complex64::new(0.0, 0.0); v.len()];
    for &j in modes.iter().rev() {
        MajoranaOperator::new(mode_count, j)?.apply_into(&cur, &mut scratch);
        std::mem::swap(&mut cur, &mut scratch);
    }
    Ok(cur)
}

/// State of `M` Majorana modes with its own measurement PRNG.
#[derive(Debug, Clone)]
pub struct MajoranaRegister {
    mode_count: usize,
    amplitudes: Vec<Complex64>,
    rng: ChaCha8Rng,
}

impl MajoranaRegister {
    /// Fock vacuum: every pair `(2k-1, 2k)` fuses to `I`.
    pub fn new_vacuum(mode_count: usize, seed: u64) -> Result<Self> {
        Self::with_rng(mode_count, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(mode_count: usize, rng: ChaCha8Rng) -> Result<Self> {
        if mode_count == 0 || !mode_count.is_multiple_of(2) {
            return invalid(format!("mode count must be even and positive, got {mode_count}"));
        }
        if mode_count > MAX_MODES {
            return invalid(format!("mode count {mode_count} exceeds {MAX_MODES}"));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << (mode_count / 2)];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            mode_count,
            amplitudes,
            rng,
        })
    }

    /// Register holding the given amplitudes (normalized on the way in).
    pub fn from_amplitudes(mode_count: usize, amplitudes: Vec<Complex64>, seed: u64) -> Result<Self> {
        let mut reg = Self::new_vacuum(mode_count, seed)?;
        if amplitudes.len() != reg.amplitudes.len() {
            return invalid(format!(
                "expected {} amplitudes, got {}",
                reg.amplitudes.len(),
                amplitudes.len()
            ));
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if norm < 1e-12 {
            return invalid("zero state vector");
        }
        reg.amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(reg)
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    /// Probability mass on odd total fermion parity.
    pub fn odd_parity_weight(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(s, _)| s.count_ones() % 2 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    pub fn majorana_operator(&self, j: usize) -> Result<MajoranaOperator> {
        MajoranaOperator::new(self.mode_count, j)
    }

    fn check_distinct(&self, modes: &[usize]) -> Result<()> {
        for (i, &a) in modes.iter().enumerate() {
            if a == 0 || a > self.mode_count {
                return invalid(format!("mode index {a} outside 1..={}", self.mode_count));
            }
            if modes[..i].contains(&a) {
                return invalid(format!("repeated mode index {a}"));
            }
        }
        Ok(())
    }

    /// `c_j c_j' v`.
    fn bilinear(&self, j: usize, jp: usize) -> Result<Vec<Complex64>> {
        apply_product(self.mode_count, &[j, jp], &self.amplitudes)
    }

    /// Exchanges modes `j` and `j'`.
    ///
    /// Counterclockwise: `B = exp(-(π/4) c_j c_j') = (1 - c_j c_j')/√2`;
    /// clockwise applies `B⁻¹ = (1 + c_j c_j')/√2`.
    pub fn apply_braid(&mut self, j: usize, jp: usize, direction: BraidDirection) -> Result<()> {
        let angle = match direction {
            BraidDirection::Counterclockwise => -std::f64::consts::FRAC_PI_4,
            BraidDirection::Clockwise => std::f64::consts::FRAC_PI_4,
        };
        self.apply_exponential(j, jp, angle)
    }

    /// Applies `exp(θ c_j c_j') = cos θ + sin θ · c_j c_j'`.
    pub fn apply_exponential(&mut self, j: usize, jp: usize, angle: f64) -> Result<()> {
        self.check_distinct(&[j, jp])?;
        let w = self.bilinear(j, jp)?;
        let (s, c) = angle.sin_cos();
        for (a, b) in self.amplitudes.iter_mut().zip(w) {
            *a = *a * c + b * s;
        }
        Ok(())
    }

    /// Applies an arbitrary product of Majorana operators (no normalization
    /// check; the product of distinct Majoranas is unitary).
    pub fn apply_majorana_product(&mut self, modes: &[usize]) -> Result<()> {
        self.check_distinct(modes)?;
        self.amplitudes = apply_product(self.mode_count, modes, &self.amplitudes)?;
        Ok(())
    }

    /// Branch probabilities `(p₊, p₋)` of the pair parity `-i c_j c_j'`.
    pub fn fusion_pair_probabilities(&self, j: usize, jp: usize) -> Result<(f64, f64)> {
        self.check_distinct(&[j, jp])?;
        let w = self.bilinear(j, jp)?.into_iter().map(|a| -I * a).collect::<Vec<_>>();
        Ok(self.branch_probabilities(&w))
    }

    /// Branch probabilities of `c_{j1} c_{j2} c_{j3} c_{j4}`.
    pub fn fusion_quad_probabilities(&self, modes: [usize; 4]) -> Result<(f64, f64)> {
        self.check_distinct(&modes)?;
        let w = apply_product(self.mode_count, &modes, &self.amplitudes)?;
        Ok(self.branch_probabilities(&w))
    }

    /// Nondestructive fusion measurement of the pair `(j, j')`, i.e. of the
    /// Hermitian operator `-i c_j c_j'`.
    pub fn measure_fusion_pair(&mut self, j: usize, jp: usize) -> Result<FusionOutcome> {
        self.check_distinct(&[j, jp])?;
        let w = self.bilinear(j, jp)?.into_iter().map(|a| -I * a).collect::<Vec<_>>();
        let sign = self.measure_involution(&w, None)?;
        Ok(FusionOutcome::from_sign(sign))
    }

    /// Projects onto a chosen fusion channel of the pair; returns the Born
    /// probability of that branch. Errors if the branch has zero weight.
    pub fn project_fusion_pair(&mut self, j: usize, jp: usize, outcome: FusionOutcome) -> Result<f64> {
        self.check_distinct(&[j, jp])?;
        let w = self.bilinear(j, jp)?.into_iter().map(|a| -I * a).collect::<Vec<_>>();
        self.project_involution(&w, outcome.sign())
    }

    /// Projective measurement of the four-mode operator
    /// `c_{j1} c_{j2} c_{j3} c_{j4}` (ordering as given). Returns `±1`.
    pub fn measure_fusion_quad(&mut self, modes: [usize; 4]) -> Result<i8> {
        self.check_distinct(&modes)?;
        let w = apply_product(self.mode_count, &modes, &self.amplitudes)?;
        self.measure_involution(&w, None)
    }

    pub fn project_fusion_quad(&mut self, modes: [usize; 4], sign: i8) -> Result<f64> {
        self.check_distinct(&modes)?;
        let w = apply_product(self.mode_count, &modes, &self.amplitudes)?;
        self.project_involution(&w, sign)
    }

    /// `(‖(v + Ov)/2‖², ‖(v - Ov)/2‖²)` for a Hermitian involution `O`.
    fn branch_probabilities(&self, ov: &[Complex64]) -> (f64, f64) {
        let mut plus = 0.0;
        let mut minus = 0.0;
        for (a, b) in self.amplitudes.iter().zip(ov) {
            plus += ((a + b) * 0.5).norm_sqr();
            minus += ((a - b) * 0.5).norm_sqr();
        }
        (plus, minus)
    }

    fn measure_involution(&mut self, ov: &[Complex64], forced: Option<i8>) -> Result<i8> {
        let (plus, minus) = self.branch_probabilities(ov);
        let sign = match forced {
            Some(s) => s,
            None => {
                let total = plus + minus;
                if !(total > ZERO_BRANCH) || !total.is_finite() {
                    return Err(Error::Internal(format!("degenerate state norm {total}")));
                }
                if plus < ZERO_BRANCH {
                    -1
                } else if minus < ZERO_BRANCH {
                    1
                } else if self.rng.random::<f64>() * total < plus {
                    1
                } else {
                    -1
                }
            }
        };
        self.collapse(ov, sign, if sign > 0 { plus } else { minus })?;
        Ok(sign)
    }

    fn project_involution(&mut self, ov: &[Complex64], sign: i8) -> Result<f64> {
        let (plus, minus) = self.branch_probabilities(ov);
        let p = if sign > 0 { plus } else { minus };
        if p < ZERO_BRANCH {
            return Err(Error::Protocol(format!(
                "post-selected branch {sign:+} has probability {p:e}"
            )));
        }
        self.collapse(ov, sign, p)?;
        Ok(p)
    }

    fn collapse(&mut self, ov: &[Complex64], sign: i8, p: f64) -> Result<()> {
        if !(p > 0.0) {
            return Err(Error::Internal(format!("collapse onto zero-weight branch {sign:+}")));
        }
        let scale = 0.5 / p.sqrt();
        let s = f64::from(sign);
        for (a, b) in self.amplitudes.iter_mut().zip(ov) {
            *a = (*a + b * s) * scale;
        }
        Ok(())
    }
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}
