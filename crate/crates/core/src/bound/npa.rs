//! NPA moment-matrix relaxation of `max P(abc|xyz)` subject to a fixed MABK
//! value.
//!
//! The moment matrix `Γ_ij = ⟨uᵢ† uⱼ⟩` is written as an LMI `Γ(y) ⪰ 0` in the
//! free moments `y`. The MABK equality is removed by solving it for
//! `⟨A₀B₀C₀⟩`, so no equality constraints remain.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sdp::{self, SdpOptions, SdpProblem, SdpStatus, SparseSym};
use super::{
    all_triples, letter, mabk_terms, moment_key, probability_expansion, symmetry_representative, word_name, Word,
    ALL_PARTY_PERMUTATIONS,
};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum HierarchyLevel {
    /// `{1, A_x, B_y, C_z}`.
    #[serde(rename = "1")]
    One,
    /// Level 1 plus the products `A_x B_y`.
    #[default]
    #[serde(rename = "1+ab")]
    OnePlusAb,
    /// Level 1 plus every two-party product `A_x B_y`, `A_x C_z`, `B_y C_z`.
    #[serde(rename = "1+pairs")]
    OnePlusPairs,
    /// All words of length at most two.
    #[serde(rename = "2")]
    Two,
}

impl HierarchyLevel {
    pub const ALL: [HierarchyLevel; 4] = [Self::One, Self::OnePlusAb, Self::OnePlusPairs, Self::Two];

    pub fn label(self) -> &'static str {
        match self {
            Self::One => "1",
            Self::OnePlusAb => "1+ab",
            Self::OnePlusPairs => "1+pairs",
            Self::Two => "2",
        }
    }

    /// Party permutations that map the basis onto itself.
    pub fn party_symmetries(self) -> &'static [[usize; 3]] {
        match self {
            Self::OnePlusAb => &[[0, 1, 2], [1, 0, 2]],
            _ => &ALL_PARTY_PERMUTATIONS,
        }
    }

    /// Operator basis, identity first.
    pub fn basis(self) -> Vec<Word> {
        let singles: Vec<Word> = (0..3).flat_map(|p| (0..2).map(move |s| vec![letter(p, s)])).collect();
        let cross = |p: u8, q: u8| -> Vec<Word> {
            (0..2).flat_map(|s| (0..2).map(move |t| vec![letter(p, s), letter(q, t)])).collect()
        };
        let mut basis = vec![Word::new()];
        basis.extend(singles);
        match self {
            Self::One => {}
            Self::OnePlusAb => basis.extend(cross(0, 1)),
            Self::OnePlusPairs => {
                basis.extend(cross(0, 1));
                basis.extend(cross(0, 2));
                basis.extend(cross(1, 2));
            }
            Self::Two => {
                for p in 0..3 {
                    basis.push(vec![letter(p, 0), letter(p, 1)]);
                    basis.push(vec![letter(p, 1), letter(p, 0)]);
                }
                basis.extend(cross(0, 1));
                basis.extend(cross(0, 2));
                basis.extend(cross(1, 2));
            }
        }
        basis
    }
}

impl fmt::Display for HierarchyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for HierarchyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(Self::One),
            "1+ab" => Ok(Self::OnePlusAb),
            "1+pairs" => Ok(Self::OnePlusPairs),
            "2" => Ok(Self::Two),
            other => invalid(format!("unknown hierarchy level '{other}' (expected 1, 1+ab, 1+pairs or 2)")),
        }
    }
}

/// `constant + Σ coef·y[idx]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Affine {
    fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(i, c)| c * y[*i]).sum::<f64>()
    }

    fn add_scaled(&mut self, other: &Affine, s: f64) {
        self.constant += s * other.constant;
        for &(i, c) in &other.terms {
            match self.terms.iter_mut().find(|(j, _)| *j == i) {
                Some((_, v)) => *v += s * c,
                None => self.terms.push((i, s * c)),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub level: HierarchyLevel,
    pub l_target: f64,
    pub outcomes: [u8; 3],
    pub settings: [u8; 3],
    pub basis: Vec<Word>,
    /// Free moments, in order of first appearance in the upper triangle.
    pub variables: Vec<Word>,
    /// The moment solved for from the MABK equality.
    pub eliminated: Word,
    entries: Vec<Vec<Affine>>,
    objective: Affine,
}

/// Builds the relaxation for `max P(abc|xyz)` with MABK value `l_target`.
pub fn build_moment_problem(level: HierarchyLevel, l_target: f64, abc: [u8; 3], xyz: [u8; 3]) -> Result<MomentProblem> {
    if !l_target.is_finite() {
        return invalid("MABK target must be finite");
    }
    if abc.iter().chain(&xyz).any(|b| *b > 1) {
        return invalid("objective triples must be bits");
    }
    let basis = level.basis();
    let d = basis.len();
    let key = |i: usize, j: usize| {
        let mut w: Word = basis[i].iter().rev().copied().collect();
        w.extend_from_slice(&basis[j]);
        moment_key(&w)
    };
    let keys: Vec<Vec<Word>> = (0..d).map(|i| (0..d).map(|j| key(i, j)).collect()).collect();

    let mut present: HashMap<Word, ()> = HashMap::new();
    let mut order: Vec<Word> = Vec::new();
    for i in 0..d {
        for j in i..d {
            if present.insert(keys[i][j].clone(), ()).is_none() {
                order.push(keys[i][j].clone());
            }
        }
    }
    let terms = mabk_terms();
    let expansion = probability_expansion(abc, xyz);
    for (w, _) in terms.iter().chain(&expansion) {
        if !present.contains_key(&moment_key(w)) {
            return Err(Error::MissingMoment(word_name(w)));
        }
    }

    let eliminated = moment_key(&terms[0].0);
    let tau0 = terms[0].1;
    let variables: Vec<Word> = order.into_iter().filter(|w| !w.is_empty() && *w != eliminated).collect();
    let index: HashMap<&Word, usize> = variables.iter().enumerate().map(|(i, w)| (w, i)).collect();

    // ⟨w₀⟩ = (L - Σ_{w≠w₀} τ_w ⟨w⟩) / τ₀
    let mut elim = Affine { constant: l_target / tau0, terms: Vec::new() };
    for (w, t) in &terms[1..] {
        elim.terms.push((index[&moment_key(w)], -t / tau0));
    }
    let affine = |w: &Word| -> Affine {
        if w.is_empty() {
            Affine { constant: 1.0, terms: Vec::new() }
        } else if *w == eliminated {
            elim.clone()
        } else {
            Affine { constant: 0.0, terms: vec![(index[w], 1.0)] }
        }
    };
    let entries = keys.iter().map(|row| row.iter().map(&affine).collect()).collect();
    let mut objective = Affine::default();
    for (w, c) in &expansion {
        objective.add_scaled(&affine(&moment_key(w)), *c);
    }

    Ok(MomentProblem {
        level,
        l_target,
        outcomes: abc,
        settings: xyz,
        basis,
        variables,
        eliminated,
        entries,
        objective,
    })
}

#[derive(Debug, Clone)]
pub struct NpaSolution {
    pub status: SdpStatus,
    /// Certified upper bound on `P(abc|xyz)`.
    pub p_star: f64,
    /// Objective at the returned moments.
    pub p_attained: f64,
    pub iterations: usize,
    pub moments: Vec<f64>,
    pub moment_matrix: DMatrix<f64>,
    /// `⟨C, X⟩` of the returned primal iterate, before the residual terms.
    pub primal_value: f64,
}

impl NpaSolution {
    pub fn gap(&self) -> f64 {
        self.p_star - self.p_attained
    }
}

impl MomentProblem {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn moment_matrix(&self, y: &[f64]) -> DMatrix<f64> {
        let d = self.dimension();
        DMatrix::from_fn(d, d, |i, j| self.entries[i][j].eval(y))
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.eval(y)
    }

    /// `max bᵀy s.t. C − Σ yᵢAᵢ ⪰ 0` with `C = Γ(0)` and `Aᵢ = −∂Γ/∂yᵢ`.
    pub fn to_sdp(&self) -> SdpProblem {
        let d = self.dimension();
        let mut p = SdpProblem::new(vec![sdp::BlockSpec::psd(d)]);
        let mut a = vec![SparseSym::new(); self.variables.len()];
        for i in 0..d {
            for j in i..d {
                let e = &self.entries[i][j];
                p.c_mut().push(0, i, j, e.constant);
                for &(k, c) in &e.terms {
                    a[k].push(0, i, j, -c);
                }
            }
        }
        let mut b = vec![0.0; self.variables.len()];
        for &(k, c) in &self.objective.terms {
            b[k] += c;
        }
        for (ak, bk) in a.into_iter().zip(b) {
            p.add_constraint(ak, bk);
        }
        p
    }

    pub fn solve(&self, options: &SdpOptions) -> Result<NpaSolution> {
        let sol = sdp::solve(&self.to_sdp(), options)?;
        let c0 = self.objective.constant;
        // Every moment lies in [-1, 1] and Γ has a unit diagonal.
        let y_bound = (self.variables.len() as f64).sqrt();
        let z_trace = self.dimension() as f64;
        Ok(NpaSolution {
            status: sol.status,
            p_star: sol.certified_upper_bound(y_bound, z_trace) + c0,
            p_attained: sol.dual_objective + c0,
            iterations: sol.iterations,
            moment_matrix: self.moment_matrix(&sol.y),
            primal_value: sol.primal_objective + c0,
            moments: sol.y,
        })
    }

    /// Upper bound on the largest `t` with `Γ(y) ⪰ tI`; negative means no
    /// quantum behaviour attains the target at this level.
    pub fn feasibility_margin(&self, options: &SdpOptions) -> Result<f64> {
        sdp::feasibility_margin(&self.to_sdp(), options)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NpaOptions {
    pub level: HierarchyLevel,
    pub sdp: SdpOptions,
    /// Solve one representative per symmetry orbit of objective triples.
    pub deduplicate: bool,
    /// Largest `p_star − p_attained` accepted from a solve that stalled
    /// before reaching tolerance. Stalls happen where the moment problem has
    /// no strictly feasible point, e.g. at `L = 4`; `p_star` remains a valid
    /// upper bound there.
    pub max_stalled_gap: f64,
}

impl Default for NpaOptions {
    fn default() -> Self {
        Self {
            level: HierarchyLevel::default(),
            sdp: SdpOptions::default(),
            deduplicate: false,
            max_stalled_gap: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleValue {
    pub outcomes: [u8; 3],
    pub settings: [u8; 3],
    pub p_star: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessingResult {
    pub l_hat: f64,
    pub level: HierarchyLevel,
    pub p_star: f64,
    pub argmax_outcomes: [u8; 3],
    pub argmax_settings: [u8; 3],
    pub max_gap: f64,
    pub values: Vec<TripleValue>,
}

/// `max_{abc,xyz} P*(abc|xyz)` at MABK value `l_hat`.
pub fn guessing_probability(l_hat: f64, options: &NpaOptions) -> Result<GuessingResult> {
    let probe = build_moment_problem(options.level, l_hat, [0, 0, 0], [0, 0, 0])?;
    let margin = probe.feasibility_margin(&options.sdp)?;
    if margin < -10.0 * options.sdp.tolerance {
        return Err(Error::Solver(format!(
            "MABK value {l_hat} is not attainable at level {} (feasibility margin {margin:.3e})",
            options.level
        )));
    }

    let triples = all_triples();
    let perms = options.level.party_symmetries();
    let targets: Vec<([u8; 3], [u8; 3])> = if options.deduplicate {
        let mut reps: Vec<_> = triples.iter().map(|&(o, s)| symmetry_representative(o, s, perms)).collect();
        reps.sort();
        reps.dedup();
        reps
    } else {
        triples.clone()
    };
    type Solved = (([u8; 3], [u8; 3]), f64, f64);
    let solved: Vec<Solved> = targets
        .par_iter()
        .map(|&(abc, xyz)| {
            let sol = build_moment_problem(options.level, l_hat, abc, xyz)?.solve(&options.sdp)?;
            let accepted = match sol.status {
                SdpStatus::Optimal => true,
                SdpStatus::Stalled | SdpStatus::MaxIterations => sol.gap().abs() <= options.max_stalled_gap,
                SdpStatus::Infeasible => false,
            };
            if !accepted {
                return Err(Error::Solver(format!(
                    "objective P({}|{}) at L = {l_hat}: status {:?}, gap {:.3e}",
                    bits(abc),
                    bits(xyz),
                    sol.status,
                    sol.gap()
                )));
            }
            Ok(((abc, xyz), sol.p_star, sol.gap()))
        })
        .collect::<Result<_>>()?;
    let lookup: HashMap<([u8; 3], [u8; 3]), (f64, f64)> = solved.iter().map(|(k, p, g)| (*k, (*p, *g))).collect();

    let values: Vec<TripleValue> = triples
        .iter()
        .map(|&(abc, xyz)| {
            let key = if options.deduplicate { symmetry_representative(abc, xyz, perms) } else { (abc, xyz) };
            let (p_star, gap) = lookup[&key];
            TripleValue { outcomes: abc, settings: xyz, p_star, gap }
        })
        .collect();
    let best = values
        .iter()
        .fold(&values[0], |best, v| if v.p_star > best.p_star { v } else { best });
    Ok(GuessingResult {
        l_hat,
        level: options.level,
        p_star: best.p_star.min(1.0),
        argmax_outcomes: best.outcomes,
        argmax_settings: best.settings,
        max_gap: values.iter().map(|v| v.gap.abs()).fold(0.0, f64::max),
        values,
    })
}

/// `f(L) = -log₂ P*(L)`, zero at or below the classical bound.
pub fn f_of_l(l_hat: f64, options: &NpaOptions) -> Result<f64> {
    if l_hat <= 2.0 {
        return Ok(0.0);
    }
    let g = guessing_probability(l_hat, options)?;
    Ok((-g.p_star.log2()).max(0.0))
}

fn bits(t: [u8; 3]) -> String {
    t.iter().map(|b| char::from(b'0' + b)).collect()
}
