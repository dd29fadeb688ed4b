//! Noisy GHZ behaviour from an independent 8×8 density-matrix model.

use num_complex::Complex64;

use anyonrng_core::mabk::{estimate, tau, MABK_SETTINGS};
use anyonrng_core::trials::{run_trials, NoiseSpec, SettingsDistribution};

type Rho = [[Complex64; 8]; 8];
type M2 = [[Complex64; 2]; 2];

const O: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn paulis() -> [M2; 4] {
    [[[ONE, O], [O, ONE]], [[O, ONE], [ONE, O]], [[O, -I], [I, O]], [[ONE, O], [O, -ONE]]]
}

/// `op` on qubit `q` (qubit 0 is the most significant bit).
fn embed(op: &M2, q: usize) -> Rho {
    let mut m = [[O; 8]; 8];
    let shift = 2 - q;
    for r in 0..8 {
        for c in 0..8 {
            let rest = (r ^ c) & !(1 << shift);
            if rest == 0 {
                m[r][c] = op[(r >> shift) & 1][(c >> shift) & 1];
            }
        }
    }
    m
}

fn mul(a: &Rho, b: &Rho) -> Rho {
    let mut m = [[O; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            m[i][j] = (0..8).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn dagger(a: &Rho) -> Rho {
    let mut m = [[O; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            m[i][j] = a[j][i].conj();
        }
    }
    m
}

/// `ρ → (1−p)ρ + (p/4) Σ_P PρP` on every qubit.
fn depolarize(rho: &Rho, p: f64) -> Rho {
    let mut cur = *rho;
    for q in 0..3 {
        let mut next = [[O; 8]; 8];
        for (k, pauli) in paulis().iter().enumerate() {
            let w = if k == 0 { 1.0 - p + p / 4.0 } else { p / 4.0 };
            let e = embed(pauli, q);
            let term = mul(&mul(&e, &cur), &dagger(&e));
            for i in 0..8 {
                for j in 0..8 {
                    next[i][j] += term[i][j] * w;
                }
            }
        }
        cur = next;
    }
    cur
}

fn ghz() -> Rho {
    let mut m = [[O; 8]; 8];
    for &i in &[0, 7] {
        for &j in &[0, 7] {
            m[i][j] = Complex64::new(0.5, 0.0);
        }
    }
    m
}

/// `Tr(ρ · A_x ⊗ B_y ⊗ C_z)` with setting 0 ↦ X and setting 1 ↦ Y.
fn correlator(rho: &Rho, xyz: [u8; 3]) -> f64 {
    let p = paulis();
    let mut obs = embed(&p[0], 0);
    for (q, &s) in xyz.iter().enumerate() {
        obs = mul(&obs, &embed(&p[if s == 0 { 1 } else { 2 }], q));
    }
    let prod = mul(rho, &obs);
    (0..8).map(|i| prod[i][i].re).sum()
}

fn mabk(rho: &Rho) -> f64 {
    MABK_SETTINGS.iter().map(|&[x, y, z]| f64::from(tau(x, y, z).unwrap()) * correlator(rho, [x, y, z])).sum()
}

#[test]
fn pure_ghz_reaches_four() {
    assert!((mabk(&ghz()) - 4.0).abs() < 1e-12);
}

#[test]
fn depolarized_value_matches_closed_form() {
    for p in [0.0, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let oracle = mabk(&depolarize(&ghz(), p));
        let spec = if p == 0.0 { NoiseSpec::none() } else { NoiseSpec::depolarizing(p).unwrap() };
        assert!((oracle - spec.expected_violation()).abs() < 1e-12, "p = {p}: {oracle}");
    }
}

#[test]
fn simulated_estimate_tracks_oracle() {
    let dist = SettingsDistribution::uniform();
    for (p, seed) in [(0.1, 1u64), (0.2, 2)] {
        let k = 20_000;
        let records = run_trials(k, &dist, &NoiseSpec::depolarizing(p).unwrap(), seed).unwrap();
        let l_hat = estimate(&records, &dist).unwrap().l_hat;
        let oracle = mabk(&depolarize(&ghz(), p));
        // Each round contributes ±4, so the standard error is below 4/√k.
        let se = 4.0 / (k as f64).sqrt();
        assert!((l_hat - oracle).abs() < 5.0 * se, "p = {p}: L̂ = {l_hat}, oracle {oracle}");
        assert!(l_hat < 4.0);
    }
}
