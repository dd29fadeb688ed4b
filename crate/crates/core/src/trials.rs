//! Protocol rounds: settings sampling, GHZ preparation, optional noise and
//! readout.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::logical::{prepare_ghz, LogicalState, Pauli};
use crate::mabk::{setting_index, MABK_SETTINGS};

/// Input distribution over the four MABK setting triples, in the order of
/// [`MABK_SETTINGS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsDistribution {
    probabilities: [f64; 4],
    r: f64,
}

impl SettingsDistribution {
    pub fn new(probabilities: [f64; 4]) -> Result<Self> {
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return invalid("setting probabilities must be finite and non-negative");
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("setting probabilities sum to {total}, expected 1"));
        }
        let r = probabilities
            .iter()
            .copied()
            .filter(|p| *p > 0.0)
            .fold(f64::INFINITY, f64::min);
        Ok(Self { probabilities, r })
    }

    pub fn uniform() -> Self {
        Self { probabilities: [0.25; 4], r: 0.25 }
    }

    /// `P(011) = P(101) = P(110) = α/√k`, `P(000) = 1 - 3α/√k`.
    pub fn biased(k: u64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return invalid(format!("alpha must be positive, got {alpha}"));
        }
        if k == 0 || (k as f64) <= (3.0 * alpha).powi(2) {
            return invalid(format!("biased distribution needs k > (3α)² = {}", (3.0 * alpha).powi(2)));
        }
        let q = alpha / (k as f64).sqrt();
        Self::new([1.0 - 3.0 * q, q, q, q])
    }

    pub fn probabilities(&self) -> &[f64; 4] {
        &self.probabilities
    }

    /// `P(x,y,z)`; zero outside the MABK settings.
    pub fn prob(&self, x: u8, y: u8, z: u8) -> f64 {
        setting_index(x, y, z).map_or(0.0, |i| self.probabilities[i])
    }

    /// Smallest non-zero setting probability.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Shannon entropy in bits consumed per round.
    pub fn entropy_bits(&self) -> f64 {
        self.probabilities
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.log2())
            .sum()
    }

    /// Draws an index into [`MABK_SETTINGS`].
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in self.probabilities.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [u8; 3] {
        MABK_SETTINGS[self.sample_index(rng)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialRecord {
    pub x: u8,
    pub y: u8,
    pub z: u8,
    pub a: u8,
    pub b: u8,
    pub c: u8,
}

impl TrialRecord {
    pub fn settings(&self) -> [u8; 3] {
        [self.x, self.y, self.z]
    }

    pub fn outcomes(&self) -> [u8; 3] {
        [self.a, self.b, self.c]
    }

    pub fn parity(&self) -> u8 {
        self.a ^ self.b ^ self.c
    }

    fn validate(&self) -> Result<()> {
        if setting_index(self.x, self.y, self.z).is_none() {
            return Err(Error::DataIntegrity(format!(
                "settings ({},{},{}) outside the MABK set",
                self.x, self.y, self.z
            )));
        }
        if self.outcomes().iter().any(|o| *o > 1) {
            return Err(Error::DataIntegrity("outcome bits must be 0 or 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    LogicalDepolarizing,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub p: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn depolarizing(p: f64) -> Result<Self> {
        let spec = Self { kind: NoiseKind::LogicalDepolarizing, p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return invalid(format!("noise probability must lie in [0, 1], got {}", self.p));
        }
        Ok(())
    }

    /// Exact MABK value of the noisy device. Each qubit is hit by a uniformly
    /// random Pauli with probability `p`, which shrinks every full correlator
    /// by `(1 - p)` per qubit.
    pub fn expected_violation(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 4.0,
            NoiseKind::LogicalDepolarizing => 4.0 * (1.0 - self.p).powi(3),
        }
    }
}

/// With probability `p` per qubit, applies a Pauli drawn uniformly from
/// `{I, X, Y, Z}` using the braid-level Pauli operators.
pub fn apply_noise<R: Rng + ?Sized>(state: &mut LogicalState, noise: &NoiseSpec, rng: &mut R) -> Result<()> {
    noise.validate()?;
    if noise.kind == NoiseKind::None || noise.p == 0.0 {
        return Ok(());
    }
    for q in 0..state.n_qubits() {
        if rng.random::<f64>() < noise.p {
            let pauli = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)];
            state.apply_pauli(q, pauli)?;
        }
    }
    Ok(())
}

/// Runs one round with its own generator.
pub fn run_trial(dist: &SettingsDistribution, noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> Result<TrialRecord> {
    let [x, y, z] = dist.sample(rng);
    let mut state = prepare_ghz(rng.random())?;
    apply_noise(&mut state, noise, rng)?;
    let a = state.readout(0, x)?;
    let b = state.readout(1, y)?;
    let c = state.readout(2, z)?;
    Ok(TrialRecord { x, y, z, a, b, c })
}

/// Generator for trial `index`: the master seed keyed ChaCha8 stream number
/// `index`, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `k` independent rounds in parallel; records are in trial order.
pub fn run_trials(k: u64, dist: &SettingsDistribution, noise: &NoiseSpec, seed: u64) -> Result<Vec<TrialRecord>> {
    if k == 0 {
        return invalid("need at least one trial");
    }
    noise.validate()?;
    (0..k)
        .into_par_iter()
        .map(|i| run_trial(dist, noise, &mut trial_rng(seed, i)))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    trial: u64,
    x: u8,
    y: u8,
    z: u8,
    a: u8,
    b: u8,
    c: u8,
}

pub fn write_records_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for (i, r) in records.iter().enumerate() {
        let row = CsvRow { trial: i as u64, x: r.x, y: r.y, z: r.z, a: r.a, b: r.b, c: r.c };
        w.serialize(row).map_err(csv_err)?;
    }
    if records.is_empty() {
        w.write_record(["trial", "x", "y", "z", "a", "b", "c"]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}

/// Parses a record CSV. Trial indices must run `0, 1, 2, …`.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(integrity)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["trial", "x", "y", "z", "a", "b", "c"] {
        return Err(Error::DataIntegrity(format!("unexpected CSV header {:?}", headers)));
    }
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(integrity)?;
        if row.trial != i as u64 {
            return Err(Error::DataIntegrity(format!("trial index {} at row {i}", row.trial)));
        }
        let rec = TrialRecord { x: row.x, y: row.y, z: row.z, a: row.a, b: row.b, c: row.c };
        rec.validate()?;
        records.push(rec);
    }
    Ok(records)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(e.to_string())
}

fn integrity(e: csv::Error) -> Error {
    Error::DataIntegrity(e.to_string())
}
