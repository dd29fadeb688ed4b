//! Tabulated `f(L)` with monotone cleanup and linear interpolation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::npa::{guessing_probability, HierarchyLevel, NpaOptions};
use crate::error::{invalid, Error, Result};

/// Format version written into serialized tables.
pub const FCURVE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FCurvePoint {
    pub l: f64,
    /// `-log₂ P*` as solved.
    pub f_raw: f64,
    /// After monotone cleanup.
    pub f: f64,
    pub p_star: f64,
    pub argmax_outcomes: [u8; 3],
    pub argmax_settings: [u8; 3],
    pub max_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FCurveTable {
    pub format_version: u32,
    pub level: HierarchyLevel,
    pub tolerance: f64,
    /// Largest downward correction applied by the monotone cleanup.
    pub max_adjustment: f64,
    pub points: Vec<FCurvePoint>,
}

impl FCurveTable {
    /// Builds a table from solved points sorted by `l`. `f` is replaced by
    /// `min_{j ≥ i} f_raw[j]`, the largest non-decreasing minorant, so any
    /// solver jitter is resolved toward smaller entropy.
    pub fn from_points(level: HierarchyLevel, tolerance: f64, mut points: Vec<FCurvePoint>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("an f-curve needs at least two points");
        }
        if points.windows(2).any(|w| !(w[0].l < w[1].l)) || points.iter().any(|p| !p.f_raw.is_finite()) {
            return invalid("f-curve points must be finite with strictly increasing L");
        }
        let mut running = f64::INFINITY;
        let mut max_adjustment: f64 = 0.0;
        for p in points.iter_mut().rev() {
            running = running.min(p.f_raw);
            p.f = running.max(0.0);
            max_adjustment = max_adjustment.max(p.f_raw - p.f);
        }
        Ok(Self { format_version: FCURVE_FORMAT, level, tolerance, max_adjustment, points })
    }

    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.l).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.f).collect()
    }

    /// Linear interpolation; zero below the first grid point, the last value
    /// above the final one.
    pub fn eval(&self, l: f64) -> f64 {
        let first = &self.points[0];
        let last = &self.points[self.points.len() - 1];
        if !(l >= first.l) {
            return 0.0;
        }
        if l >= last.l {
            return last.f;
        }
        let i = self.points.partition_point(|p| p.l <= l);
        let (lo, hi) = (&self.points[i - 1], &self.points[i]);
        let t = (l - lo.l) / (hi.l - lo.l);
        lo.f + t * (hi.f - lo.f)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,f\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.l, p.f));
        }
        out
    }

    /// Reads an `L,f` table. Solver metadata is absent, so the level is
    /// reported as given and per-point diagnostics are zeroed.
    pub fn from_csv(text: &str, level: HierarchyLevel) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::DataIntegrity(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["L", "f"] {
            return Err(Error::DataIntegrity(format!("expected header L,f, got {header:?}")));
        }
        let mut points = Vec::new();
        for row in rdr.deserialize::<(f64, f64)>() {
            let (l, f) = row.map_err(|e| Error::DataIntegrity(e.to_string()))?;
            points.push(FCurvePoint {
                l,
                f_raw: f,
                f,
                p_star: (-f).exp2(),
                argmax_outcomes: [0; 3],
                argmax_settings: [0; 3],
                max_gap: 0.0,
            });
        }
        Self::from_points(level, 0.0, points).map_err(|e| Error::DataIntegrity(e.to_string()))
    }
}

/// `n` evenly spaced points on `[2, 4]`.
pub fn uniform_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return invalid("grid needs at least two points");
    }
    Ok((0..n).map(|i| 2.0 + 2.0 * i as f64 / (n - 1) as f64).collect())
}

/// Solves `f` on an even grid over `[2, 4]`.
pub fn build_fcurve(grid_points: usize, options: &NpaOptions) -> Result<FCurveTable> {
    let grid = uniform_grid(grid_points)?;
    build_fcurve_on(&grid, options)
}

pub fn build_fcurve_on(grid: &[f64], options: &NpaOptions) -> Result<FCurveTable> {
    if grid.iter().any(|l| !(2.0..=4.0).contains(l)) {
        return invalid("f-curve grid must lie in [2, 4]");
    }
    let points = grid
        .par_iter()
        .map(|&l| {
            let g = guessing_probability(l, options)?;
            Ok(FCurvePoint {
                l,
                f_raw: if l <= 2.0 { 0.0 } else { (-g.p_star.log2()).max(0.0) },
                f: 0.0,
                p_star: g.p_star,
                argmax_outcomes: g.argmax_outcomes,
                argmax_settings: g.argmax_settings,
                max_gap: g.max_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FCurveTable::from_points(options.level, options.sdp.tolerance, points)
}
