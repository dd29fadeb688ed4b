//! Seeded Toeplitz hashing over GF(2).
//!
//! Bits are `u8` values 0 or 1. The `m × n` matrix defined by a seed `s` of
//! length `n + m − 1` is `T[i][j] = s[i − j + n − 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trials::TrialRecord;

/// `floor(H − 2·log₂(1/ε_ext))`, or 0 when that is negative.
pub fn output_length(min_entropy_bits: f64, security: f64) -> Result<usize> {
    if !(security > 0.0 && security <= 1.0) {
        return invalid(format!("extractor security must lie in (0, 1], got {security}"));
    }
    if !(min_entropy_bits.is_finite() && min_entropy_bits >= 0.0) {
        return invalid("min-entropy must be finite and non-negative");
    }
    let m = (min_entropy_bits + 2.0 * security.log2()).floor();
    Ok(if m > 0.0 { m as usize } else { 0 })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToeplitzSeed {
    bits: Vec<u8>,
}

impl ToeplitzSeed {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        check_bits(&bits)?;
        Ok(Self { bits })
    }

    /// Seed of the right length for an `n`-bit input and `m`-bit output.
    pub fn for_shape(bits: Vec<u8>, n: usize, m: usize) -> Result<Self> {
        let seed = Self::new(bits)?;
        seed.check_shape(n, m)?;
        Ok(seed)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    fn check_shape(&self, n: usize, m: usize) -> Result<()> {
        if m == 0 {
            return Ok(());
        }
        if m > n {
            return invalid(format!("output length {m} exceeds input length {n}"));
        }
        if self.bits.len() != n + m - 1 {
            return invalid(format!("seed has {} bits, expected n + m − 1 = {}", self.bits.len(), n + m - 1));
        }
        Ok(())
    }
}

/// Pseudo-random seed of the right shape, expanded from `seed` with
/// ChaCha8. Only for reproducible runs; a real seed must come from an
/// independent source.
pub fn seed_from_u64(seed: u64, n: usize, m: usize) -> ToeplitzSeed {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ToeplitzSeed { bits: (0..seed_length(n, m)).map(|_| rng.random::<bool>() as u8).collect() }
}

/// Required seed length for shape `(n, m)`.
pub fn seed_length(n: usize, m: usize) -> usize {
    if m == 0 { 0 } else { n + m - 1 }
}

/// `T·x` over GF(2).
pub fn extract(raw: &[u8], seed: &ToeplitzSeed, m: usize) -> Result<Vec<u8>> {
    check_bits(raw)?;
    let n = raw.len();
    seed.check_shape(n, m)?;
    if m == 0 {
        return Ok(Vec::new());
    }
    // out_i = Σ_t s[i + t]·x[n − 1 − t], a sliding window over the seed.
    let rev: Vec<u8> = raw.iter().rev().copied().collect();
    let x = pack(&rev);
    let s = pack(&seed.bits);
    let words = x.len();
    let tail = n % 64;
    Ok((0..m)
        .map(|i| {
            let mut acc = 0u64;
            for (w, xw) in x.iter().enumerate() {
                let mut sw = window(&s, i + 64 * w);
                if w + 1 == words && tail != 0 {
                    sw &= (1u64 << tail) - 1;
                }
                acc ^= sw & xw;
            }
            (acc.count_ones() & 1) as u8
        })
        .collect())
}

fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().position(|b| *b > 1) {
        Some(i) => invalid(format!("bit {i} has value {}, expected 0 or 1", bits[i])),
        None => Ok(()),
    }
}

/// LSB-first words with one zero word of padding.
fn pack(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
    for (i, b) in bits.iter().enumerate() {
        words[i / 64] |= u64::from(*b) << (i % 64);
    }
    words
}

/// 64 bits starting at bit `off`.
fn window(words: &[u64], off: usize) -> u64 {
    let (idx, sh) = (off / 64, off % 64);
    let lo = words.get(idx).copied().unwrap_or(0) >> sh;
    let hi = if sh == 0 { 0 } else { words.get(idx + 1).copied().unwrap_or(0) << (64 - sh) };
    lo | hi
}

/// Outcome bits `a₁b₁c₁…a_k b_k c_k`.
pub fn raw_bits(records: &[TrialRecord]) -> Vec<u8> {
    records.iter().flat_map(|r| [r.a, r.b, r.c]).collect()
}

/// Packs bits MSB-first into bytes, zero-padding the last byte.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, b)| acc | (b & 1) << (7 - i)))
        .collect()
}

pub fn bytes_to_bits(bytes: &[u8], n: usize) -> Result<Vec<u8>> {
    if n > 8 * bytes.len() {
        return invalid(format!("{} bytes hold fewer than {n} bits", bytes.len()));
    }
    Ok((0..n).map(|i| bytes[i / 8] >> (7 - i % 8) & 1).collect())
}

pub fn bits_to_hex(bits: &[u8]) -> String {
    hex::encode(bits_to_bytes(bits))
}

pub fn hex_to_bits(text: &str, n: usize) -> Result<Vec<u8>> {
    let bytes = hex::decode(text.trim()).map_err(|e| Error::InvalidArgument(format!("bad hex: {e}")))?;
    bytes_to_bits(&bytes, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(raw: &[u8], seed: &[u8], m: usize) -> Vec<u8> {
        let n = raw.len();
        (0..m)
            .map(|i| (0..n).fold(0, |acc, j| acc ^ (seed[i + n - 1 - j] & raw[j])))
            .collect()
    }

    #[test]
    fn sizing() {
        assert_eq!(output_length(1000.0, (-64f64).exp2()).unwrap(), 872);
        assert_eq!(output_length(100.0, (-64f64).exp2()).unwrap(), 0);
        assert_eq!(output_length(17.9, 1.0).unwrap(), 17);
        assert!(output_length(10.0, 0.0).is_err());
    }

    #[test]
    fn matches_naive_across_word_boundaries() {
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut bit = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state & 1) as u8
        };
        for (n, m) in [(1, 1), (8, 4), (63, 5), (64, 64), (65, 3), (130, 70), (200, 129)] {
            let raw: Vec<u8> = (0..n).map(|_| bit()).collect();
            let s: Vec<u8> = (0..n + m - 1).map(|_| bit()).collect();
            let seed = ToeplitzSeed::for_shape(s.clone(), n, m).unwrap();
            assert_eq!(extract(&raw, &seed, m).unwrap(), naive(&raw, &s, m), "n={n} m={m}");
        }
    }

    #[test]
    fn shape_errors() {
        let seed = ToeplitzSeed::new(vec![0; 5]).unwrap();
        assert!(extract(&[1, 0, 1], &seed, 2).is_err());
        assert!(extract(&[1, 0], &ToeplitzSeed::new(vec![0; 4]).unwrap(), 3).is_err());
        assert!(ToeplitzSeed::new(vec![2]).is_err());
        assert!(extract(&[1, 0, 1], &ToeplitzSeed::new(vec![]).unwrap(), 0).unwrap().is_empty());
    }

    #[test]
    fn hex_round_trip() {
        let bits = vec![1, 0, 1, 1, 0, 0, 0, 1, 1, 1];
        let h = bits_to_hex(&bits);
        assert_eq!(h, "b1c0");
        assert_eq!(hex_to_bits(&h, bits.len()).unwrap(), bits);
        assert!(hex_to_bits("zz", 4).is_err());
        assert!(hex_to_bits("ff", 9).is_err());
    }
}
