//! Certified min-entropy from an observed MABK value, net randomness
//! accounting and an empirical check of the concentration step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::FCurveTable;
use crate::error::{invalid, Error, Result};
use crate::mabk::{estimate, ViolationEstimate};
use crate::trials::{run_trials, NoiseSpec, SettingsDistribution};

/// Format version written into serialized certificates.
pub const CERTIFICATE_FORMAT: u32 = 1;

pub const DEFAULT_DELTA: f64 = 0.001;
pub const DEFAULT_EPSILON_PRIME: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationParams {
    pub delta: f64,
    pub epsilon_prime: f64,
    /// Violation thresholds, strictly increasing from 2 to 4.
    pub thresholds: Vec<f64>,
    pub k: u64,
    /// Smallest setting probability.
    pub r: f64,
}

/// 21 evenly spaced thresholds on `[2, 4]`.
pub fn default_thresholds() -> Vec<f64> {
    (20..=40).map(|i| f64::from(i) / 10.0).collect()
}

impl CertificationParams {
    pub fn new(k: u64, r: f64, delta: f64, epsilon_prime: f64, thresholds: Vec<f64>) -> Result<Self> {
        let p = Self { delta, epsilon_prime, thresholds, k, r };
        p.validate()?;
        Ok(p)
    }

    /// Default δ, ε′ and thresholds.
    pub fn with_defaults(k: u64, r: f64) -> Result<Self> {
        Self::new(k, r, DEFAULT_DELTA, DEFAULT_EPSILON_PRIME, default_thresholds())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.epsilon_prime > 0.0 && self.epsilon_prime < 1.0) {
            return invalid(format!("epsilon_prime must lie in (0, 1), got {}", self.epsilon_prime));
        }
        if !(self.r > 0.0 && self.r <= 0.25) {
            return invalid(format!("r must lie in (0, 1/4], got {}", self.r));
        }
        if self.k == 0 {
            return invalid("k must be at least 1");
        }
        let t = &self.thresholds;
        if t.len() < 2 || t[0] != 2.0 || t[t.len() - 1] != 4.0 || t.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("thresholds must increase strictly from 2 to 4");
        }
        Ok(())
    }

    pub fn epsilon(&self) -> Result<f64> {
        epsilon_of(self.k, self.r, self.epsilon_prime)
    }

    /// Index `m` with `L_m ≤ l_hat < L_{m+1}`; `l_hat` at the top threshold
    /// falls in the last interval. `None` below `L₀`.
    pub fn threshold_index(&self, l_hat: f64) -> Option<usize> {
        let t = &self.thresholds;
        if l_hat < t[0] {
            return None;
        }
        let above = t.partition_point(|x| *x <= l_hat);
        Some((above - 1).min(t.len() - 2))
    }
}

/// Azuma deviation `ε = (4 + 1/r)·√(−2 ln ε′ / k)`.
pub fn epsilon_of(k: u64, r: f64, epsilon_prime: f64) -> Result<f64> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if !(r > 0.0 && r <= 1.0) {
        return invalid(format!("r must lie in (0, 1], got {r}"));
    }
    if !(epsilon_prime > 0.0 && epsilon_prime < 1.0) {
        return invalid(format!("epsilon_prime must lie in (0, 1), got {epsilon_prime}"));
    }
    Ok((4.0 + 1.0 / r) * (-2.0 * epsilon_prime.ln() / k as f64).sqrt())
}

/// Settings randomness consumed by `k` rounds, `k·H(P)` bits.
pub fn input_bits(k: u64, dist: &SettingsDistribution) -> f64 {
    k as f64 * dist.entropy_bits()
}

/// `max(0, k·f(L_m − ε) − log₂(1/δ))`.
pub fn entropy_bound(k: u64, l_m: f64, epsilon: f64, delta: f64, fcurve: &FCurveTable) -> f64 {
    let f = if l_m - epsilon <= 2.0 { 0.0 } else { fcurve.eval(l_m - epsilon) };
    (k as f64 * f - (1.0 / delta).log2()).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCertificate {
    pub format_version: u32,
    pub params: CertificationParams,
    pub estimate: ViolationEstimate,
    pub setting_probabilities: [f64; 4],
    /// Threshold interval containing `L̂`; `None` when `L̂ < 2`.
    pub m: Option<usize>,
    pub l_m: Option<f64>,
    pub epsilon: f64,
    /// `f(L_m − ε)` read from the curve.
    pub f_value: f64,
    pub fcurve_level: String,
    pub bound_bits: f64,
    pub input_bits: f64,
    pub net_bits: f64,
}

/// Min-entropy bound for the observed estimate.
///
/// `L̂` above 4 by more than the deviation `ε` is rejected: a quantum device
/// reaches it with probability at most `ε′`. Smaller excesses are sampling
/// noise of the design-weighted estimator and are certified in the top
/// interval.
pub fn certify(
    est: &ViolationEstimate,
    params: &CertificationParams,
    fcurve: &FCurveTable,
    dist: &SettingsDistribution,
) -> Result<EntropyCertificate> {
    params.validate()?;
    if est.k != params.k {
        return invalid(format!("estimate has k = {}, parameters have k = {}", est.k, params.k));
    }
    if !est.l_hat.is_finite() {
        return Err(Error::DataIntegrity("estimated violation is not finite".into()));
    }
    if params.r > dist.r() * (1.0 + 1e-12) {
        return invalid(format!("r = {} exceeds the smallest setting probability {}", params.r, dist.r()));
    }
    let epsilon = params.epsilon()?;
    if est.l_hat > 4.0 + epsilon.max(1e-9) {
        return Err(Error::DataIntegrity(format!(
            "L̂ = {} exceeds the quantum maximum 4 beyond the deviation {epsilon:.4}",
            est.l_hat
        )));
    }
    let m = params.threshold_index(est.l_hat);
    let l_m = m.map(|i| params.thresholds[i]);
    let (f_value, bound_bits) = match l_m {
        Some(l) if l - epsilon > 2.0 => (fcurve.eval(l - epsilon), entropy_bound(params.k, l, epsilon, params.delta, fcurve)),
        _ => (0.0, 0.0),
    };
    let input = input_bits(params.k, dist);
    Ok(EntropyCertificate {
        format_version: CERTIFICATE_FORMAT,
        params: params.clone(),
        estimate: est.clone(),
        setting_probabilities: *dist.probabilities(),
        m,
        l_m,
        epsilon,
        f_value,
        fcurve_level: fcurve.level.label().to_string(),
        bound_bits,
        input_bits: input,
        net_bits: bound_bits - input,
    })
}

/// How settings are drawn in an expansion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum InputFamily {
    Uniform,
    /// `P(011) = P(101) = P(110) = α/√k`.
    Biased(f64),
}

impl InputFamily {
    pub fn distribution(self, k: u64) -> Result<SettingsDistribution> {
        match self {
            Self::Uniform => Ok(SettingsDistribution::uniform()),
            Self::Biased(alpha) => SettingsDistribution::biased(k, alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetPoint {
    pub k: u64,
    pub bound_bits: f64,
    pub input_bits: f64,
    pub net_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCurve {
    pub family: InputFamily,
    pub l_m: f64,
    pub delta: f64,
    pub epsilon_prime: f64,
    pub points: Vec<NetPoint>,
    /// Smallest `k` with positive net randomness, located by bisection
    /// between the grid points where the sign first changes.
    pub crossing: Option<u64>,
}

impl NetCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,bound_bits,input_bits,net_bits\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.k, p.bound_bits, p.input_bits, p.net_bits));
        }
        out
    }
}

/// Bound, input cost and net randomness at threshold `l_m` for `k` rounds.
pub fn net_point(k: u64, family: InputFamily, l_m: f64, delta: f64, epsilon_prime: f64, fcurve: &FCurveTable) -> Result<NetPoint> {
    let dist = family.distribution(k)?;
    let epsilon = epsilon_of(k, dist.r(), epsilon_prime)?;
    let bound_bits = entropy_bound(k, l_m, epsilon, delta, fcurve);
    let input = input_bits(k, &dist);
    Ok(NetPoint { k, bound_bits, input_bits: input, net_bits: bound_bits - input })
}

pub fn net_randomness_curve(
    k_grid: &[u64],
    family: InputFamily,
    l_m: f64,
    params: &CertificationParams,
    fcurve: &FCurveTable,
) -> Result<NetCurve> {
    if k_grid.is_empty() || k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("k grid must be non-empty and strictly increasing");
    }
    if !(2.0..=4.0).contains(&l_m) {
        return invalid(format!("threshold must lie in [2, 4], got {l_m}"));
    }
    let (delta, eps) = (params.delta, params.epsilon_prime);
    let points = k_grid
        .iter()
        .map(|&k| net_point(k, family, l_m, delta, eps, fcurve))
        .collect::<Result<Vec<_>>>()?;
    let mut crossing = None;
    if points[0].net_bits > 0.0 {
        crossing = Some(points[0].k);
    } else if let Some(i) = points.windows(2).position(|w| w[0].net_bits <= 0.0 && w[1].net_bits > 0.0) {
        let (mut lo, mut hi) = (points[i].k, points[i + 1].k);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if net_point(mid, family, l_m, delta, eps, fcurve)?.net_bits > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        crossing = Some(hi);
    }
    Ok(NetCurve { family, l_m, delta, epsilon_prime: eps, points, crossing })
}

/// `n` logarithmically spaced trial counts from `lo` to `hi`, deduplicated.
pub fn log_k_grid(lo: u64, hi: u64, n: usize) -> Result<Vec<u64>> {
    if lo == 0 || hi <= lo || n < 2 {
        return invalid("log grid needs 0 < lo < hi and at least two points");
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut g: Vec<u64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp().round() as u64)
        .collect();
    g.dedup();
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzumaCheck {
    pub runs: usize,
    pub k: u64,
    pub epsilon: f64,
    /// Violation of the simulated device.
    pub l_true: f64,
    pub exceedances: usize,
    pub rate: f64,
}

/// Simulates `runs` independent experiments and counts those with
/// `L_true ≤ L̂ − ε·epsilon_scale`. For i.i.d. rounds the conditional
/// expectations in the martingale all equal the device value `L_true`.
pub fn azuma_empirical_check(
    runs: usize,
    k: u64,
    noise: &NoiseSpec,
    dist: &SettingsDistribution,
    epsilon_prime: f64,
    epsilon_scale: f64,
    seed: u64,
) -> Result<AzumaCheck> {
    if runs < 100 {
        return invalid(format!("need at least 100 runs, got {runs}"));
    }
    noise.validate()?;
    let epsilon = epsilon_of(k, dist.r(), epsilon_prime)? * epsilon_scale;
    let l_true = noise.expected_violation();
    let hits = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let run_seed = seed.wrapping_add(run.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let records = run_trials(k, dist, noise, run_seed)?;
            Ok(l_true <= estimate(&records, dist)?.l_hat - epsilon)
        })
        .collect::<Result<Vec<bool>>>()?;
    let exceedances = hits.iter().filter(|h| **h).count();
    Ok(AzumaCheck { runs, k, epsilon, l_true, exceedances, rate: exceedances as f64 / runs as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::{FCurvePoint, HierarchyLevel};

    fn linear_curve() -> FCurveTable {
        let points = [(2.0, 0.0), (3.0, 0.5), (4.0, 1.0)]
            .iter()
            .map(|&(l, f)| FCurvePoint {
                l,
                f_raw: f,
                f,
                p_star: (-f).exp2(),
                argmax_outcomes: [0; 3],
                argmax_settings: [0; 3],
                max_gap: 0.0,
            })
            .collect();
        FCurveTable::from_points(HierarchyLevel::OnePlusAb, 0.0, points).unwrap()
    }

    fn est(l_hat: f64, k: u64) -> ViolationEstimate {
        ViolationEstimate { l_hat, k, counts: vec![] }
    }

    #[test]
    fn epsilon_closed_form() {
        let e = epsilon_of(100_000, 0.25, 0.01).unwrap();
        assert!((e - 8.0 * (2.0 * 100f64.ln() / 1e5).sqrt()).abs() < 1e-15);
        assert!((e - 0.0768).abs() < 1e-4);
        let e16 = epsilon_of(1_600_000, 0.25, 0.01).unwrap();
        assert!((e / e16 - 4.0).abs() < 1e-12);
        assert!(epsilon_of(10, 0.25, 1.0 - 1e-15).unwrap() < 1e-6);
        assert!(epsilon_of(0, 0.25, 0.01).is_err());
        assert!(epsilon_of(10, 0.0, 0.01).is_err());
        assert!(epsilon_of(10, 0.25, 1.0).is_err());
    }

    #[test]
    fn threshold_lookup() {
        let p = CertificationParams::with_defaults(10, 0.25).unwrap();
        assert_eq!(p.thresholds.len(), 21);
        assert_eq!(p.threshold_index(1.9), None);
        assert_eq!(p.threshold_index(2.0), Some(0));
        assert_eq!(p.threshold_index(3.95), Some(19));
        assert_eq!(p.threshold_index(4.0), Some(19));
        assert!(CertificationParams::new(10, 0.25, 0.001, 0.01, vec![2.0, 3.0, 3.0, 4.0]).is_err());
        assert!(CertificationParams::new(10, 0.3, 0.001, 0.01, default_thresholds()).is_err());
    }

    #[test]
    fn bound_clamps_and_grows() {
        let curve = linear_curve();
        let dist = SettingsDistribution::uniform();
        let p = CertificationParams::with_defaults(100_000, 0.25).unwrap();
        let c = certify(&est(3.95, 100_000), &p, &curve, &dist).unwrap();
        let eps = epsilon_of(100_000, 0.25, 0.01).unwrap();
        let expect = 1e5 * (3.9 - eps - 2.0) / 2.0 - 1000f64.log2();
        assert!((c.bound_bits - expect).abs() < 1e-6);
        assert_eq!(c.input_bits, 2e5);
        assert_eq!(certify(&est(2.0, 100_000), &p, &curve, &dist).unwrap().bound_bits, 0.0);
        assert_eq!(certify(&est(-1.0, 100_000), &p, &curve, &dist).unwrap().m, None);
        let small = CertificationParams::with_defaults(10, 0.25).unwrap();
        assert_eq!(certify(&est(4.0, 10), &small, &curve, &dist).unwrap().bound_bits, 0.0);
        assert!(matches!(certify(&est(4.5, 100_000), &p, &curve, &dist), Err(Error::DataIntegrity(_))));
        assert!(certify(&est(3.0, 5), &p, &curve, &dist).is_err());
    }

    #[test]
    fn certificate_round_trips() {
        let p = CertificationParams::with_defaults(5000, 0.25).unwrap();
        let c = certify(&est(3.7, 5000), &p, &linear_curve(), &SettingsDistribution::uniform()).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<EntropyCertificate>(&json).unwrap(), c);
    }

    #[test]
    fn log_grid() {
        let g = log_k_grid(1000, 10_000_000, 5).unwrap();
        assert_eq!(g, vec![1000, 10_000, 100_000, 1_000_000, 10_000_000]);
    }

    #[test]
    fn crossing_is_first_positive_k() {
        let curve = linear_curve();
        let p = CertificationParams::with_defaults(1, 0.25).unwrap();
        let grid = log_k_grid(1000, 10_000_000, 9).unwrap();
        let c = net_randomness_curve(&grid, InputFamily::Biased(10.0), 3.9, &p, &curve).unwrap();
        let k = c.crossing.expect("crossing");
        let at = |k| net_point(k, InputFamily::Biased(10.0), 3.9, 0.001, 0.01, &curve).unwrap().net_bits;
        assert!(at(k) > 0.0 && at(k - 1) <= 0.0);
        assert!(c.to_csv().starts_with("k,bound_bits,input_bits,net_bits\n"));
    }
}
