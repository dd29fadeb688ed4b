//! Upper bounds on the guessing probability from MABK violation.
//!
//! Each party has two dichotomic observables `A₀, A₁` (resp. `B`, `C`), with
//! outcome projectors `M^a = (1 + (-1)^a A)/2`. Operator words are strings of
//! letters `2·party + setting`.

pub mod fcurve;
pub mod lp;
pub mod nosignal;
pub mod npa;
pub mod sdp;

use crate::mabk::{tau, MABK_SETTINGS};

pub use fcurve::{build_fcurve, FCurvePoint, FCurveTable};
pub use nosignal::{nosignalling_max, NsResult, NsScenario};
pub use npa::{build_moment_problem, f_of_l, guessing_probability, GuessingResult, HierarchyLevel, MomentProblem, NpaOptions};
pub use sdp::{SdpOptions, SdpSolution, SdpStatus};

pub type Word = Vec<u8>;

pub fn letter(party: u8, setting: u8) -> u8 {
    2 * party + setting
}

fn party_of(letter: u8) -> u8 {
    letter / 2
}

/// Normal form of a word: letters of different parties commute, so they are
/// grouped by party; within a party, `X² = 1` cancels adjacent repeats.
pub fn canonical(word: &[u8]) -> Word {
    let mut out = Word::new();
    for party in 0..3 {
        let start = out.len();
        for &l in word.iter().filter(|l| party_of(**l) == party) {
            if out.len() > start && out.last() == Some(&l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
    }
    out
}

/// Key of the expectation value `⟨w⟩`. Moments are taken real, so `⟨w⟩` and
/// `⟨w†⟩` share one variable.
pub fn moment_key(word: &[u8]) -> Word {
    let fwd = canonical(word);
    let rev: Word = word.iter().rev().copied().collect();
    let rev = canonical(&rev);
    fwd.min(rev)
}

pub fn word_name(word: &[u8]) -> String {
    if word.is_empty() {
        return "1".into();
    }
    word.iter()
        .map(|l| format!("{}{}", ['A', 'B', 'C'][usize::from(party_of(*l))], l % 2))
        .collect()
}

/// `P(abc|xyz)` as a combination of correlators:
/// `(1/8) Σ_{T ⊆ {A,B,C}} (-1)^{Σ_{t∈T} outcome_t} ⟨Π_{t∈T} X_t⟩`.
pub fn probability_expansion(abc: [u8; 3], xyz: [u8; 3]) -> Vec<(Word, f64)> {
    (0u8..8)
        .map(|mask| {
            let mut word = Word::new();
            let mut sign = 1.0;
            for party in 0..3u8 {
                if mask >> (2 - party) & 1 == 1 {
                    word.push(letter(party, xyz[usize::from(party)]));
                    if abc[usize::from(party)] == 1 {
                        sign = -sign;
                    }
                }
            }
            (word, sign / 8.0)
        })
        .collect()
}

/// The MABK functional `Σ_S τ ⟨A_x B_y C_z⟩` as `(word, coefficient)` pairs.
pub fn mabk_terms() -> Vec<(Word, f64)> {
    MABK_SETTINGS
        .iter()
        .map(|&[x, y, z]| {
            let t = f64::from(tau(x, y, z).expect("MABK setting"));
            (vec![letter(0, x), letter(1, y), letter(2, z)], t)
        })
        .collect()
}

/// All 64 `(abc, xyz)` objective triples, settings-major.
pub fn all_triples() -> Vec<([u8; 3], [u8; 3])> {
    let split = crate::mabk::split_triple;
    (0..8).flat_map(|s| (0..8).map(move |o| (split(o), split(s)))).collect()
}

/// Every permutation of the three parties.
pub const ALL_PARTY_PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Smallest image of `(abc, xyz)` under the given party permutations and
/// joint outcome flips of two parties. Both leave the MABK functional
/// invariant; permutations must also map the moment basis onto itself.
pub fn symmetry_representative(abc: [u8; 3], xyz: [u8; 3], perms: &[[usize; 3]]) -> ([u8; 3], [u8; 3]) {
    const FLIPS: [[u8; 3]; 4] = [[0, 0, 0], [1, 1, 0], [1, 0, 1], [0, 1, 1]];
    let mut best = (abc, xyz);
    for &perm in perms {
        for flip in FLIPS {
            let o = [0, 1, 2].map(|i| abc[perm[i]] ^ flip[i]);
            let s = [0, 1, 2].map(|i| xyz[perm[i]]);
            best = best.min((o, s));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        // B0 A1 A1 C0 → B0 C0
        assert_eq!(canonical(&[2, 1, 1, 4]), vec![2, 4]);
        // A0 B1 A1 → A0 A1 B1
        assert_eq!(canonical(&[0, 3, 1]), vec![0, 1, 3]);
        assert_eq!(canonical(&[0, 1, 1, 0]), Vec::<u8>::new());
        assert_eq!(moment_key(&[1, 0]), vec![0, 1]);
        assert_eq!(moment_key(&[0, 1, 2]), vec![0, 1, 2]);
        assert_eq!(word_name(&[0, 3, 4]), "A0B1C0");
    }

    #[test]
    fn expansion_of_first_triple() {
        let e = probability_expansion([0, 0, 0], [0, 0, 0]);
        assert_eq!(e.len(), 8);
        assert!(e.iter().all(|(_, c)| *c == 0.125));
        let mut words: Vec<String> = e.iter().map(|(w, _)| word_name(w)).collect();
        words.sort();
        assert_eq!(words, ["1", "A0", "A0B0", "A0B0C0", "A0C0", "B0", "B0C0", "C0"]);
    }

    #[test]
    fn expansion_matches_projectors() {
        // Deterministic local assignments: correlators are products of ±1.
        for bits in 0u32..64 {
            let val = |l: u8| if (bits >> l) & 1 == 1 { -1.0 } else { 1.0 };
            for (abc, xyz) in all_triples() {
                let p: f64 = probability_expansion(abc, xyz)
                    .iter()
                    .map(|(w, c)| c * w.iter().map(|l| val(*l)).product::<f64>())
                    .sum();
                let hit = (0..3).all(|i| (bits >> letter(i as u8, xyz[i])) & 1 == u32::from(abc[i]));
                assert!((p - if hit { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetry_orbits() {
        let all = &ALL_PARTY_PERMUTATIONS;
        let r = symmetry_representative([1, 0, 0], [0, 1, 1], all);
        assert_eq!(r, symmetry_representative([0, 0, 1], [1, 1, 0], all));
        let reps: std::collections::BTreeSet<_> =
            all_triples().into_iter().map(|(o, s)| symmetry_representative(o, s, all)).collect();
        assert!(reps.len() < 64);
        // Swapping only A and B cannot move A's setting onto C.
        let ab = HierarchyLevel::OnePlusAb.party_symmetries();
        assert_ne!(
            symmetry_representative([0, 0, 0], [0, 1, 1], ab),
            symmetry_representative([0, 0, 0], [1, 1, 0], ab)
        );
        assert_eq!(
            symmetry_representative([0, 0, 0], [0, 1, 1], all),
            symmetry_representative([0, 0, 0], [1, 1, 0], all)
        );
    }
}
