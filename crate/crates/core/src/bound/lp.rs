//! Dense two-phase simplex for `max cᵀx s.t. Ax = b, x ≥ 0`.
//!
//! Bland's rule is used throughout, which rules out cycling on the highly
//! degenerate polytopes met here.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    n: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    objective: Vec<f64>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self { n: n_vars, objective: vec![0.0; n_vars], ..Self::default() }
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.rows.iter().map(Vec::as_slice).zip(self.rhs.iter().copied())
    }

    pub fn add_equality(&mut self, row: Vec<f64>, rhs: f64) -> Result<()> {
        if row.len() != self.n {
            return invalid(format!("constraint has {} coefficients, expected {}", row.len(), self.n));
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn set_objective(&mut self, c: Vec<f64>) -> Result<()> {
        if c.len() != self.n {
            return invalid("objective length mismatch");
        }
        self.objective = c;
        Ok(())
    }

    pub fn solve(&self) -> LpSolution {
        let m = self.rows.len();
        let n = self.n;
        // Columns: n structural, m artificial, then the right-hand side.
        let width = n + m + 1;
        let mut t: Vec<Vec<f64>> = self
            .rows
            .iter()
            .zip(&self.rhs)
            .enumerate()
            .map(|(i, (row, &b))| {
                let s = if b < 0.0 { -1.0 } else { 1.0 };
                let mut r: Vec<f64> = row.iter().map(|v| s * v).collect();
                r.resize(width, 0.0);
                r[n + i] = 1.0;
                r[width - 1] = s * b;
                r
            })
            .collect();
        let mut basis: Vec<usize> = (n..n + m).collect();

        // Phase one: minimize the sum of artificials.
        let mut cost = vec![0.0; width];
        cost[n..n + m].iter_mut().for_each(|c| *c = -1.0);
        if pivot_loop(&mut t, &mut basis, &cost, n + m) == LpStatus::Unbounded {
            return LpSolution { status: LpStatus::Infeasible, value: f64::NAN, x: vec![] };
        }
        let infeasibility: f64 = basis.iter().zip(&t).filter(|(b, _)| **b >= n).map(|(_, r)| r[width - 1]).sum();
        if infeasibility > 1e-9 * (1.0 + self.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            return LpSolution { status: LpStatus::Infeasible, value: f64::NAN, x: vec![] };
        }

        // Drive zero-level artificials out; rows with no structural pivot are redundant.
        let mut i = 0;
        while i < t.len() {
            if basis[i] >= n {
                match (0..n).find(|&j| t[i][j].abs() > EPS) {
                    Some(j) => pivot(&mut t, &mut basis, i, j),
                    None => {
                        t.remove(i);
                        basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in &mut t {
            row[n..n + m].iter_mut().for_each(|v| *v = 0.0);
        }

        let mut cost = vec![0.0; width];
        cost[..n].copy_from_slice(&self.objective);
        let status = pivot_loop(&mut t, &mut basis, &cost, n);
        let mut x = vec![0.0; n];
        for (r, &bj) in t.iter().zip(&basis) {
            x[bj] = r[width - 1];
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        LpSolution { status, value, x }
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    t[row].iter_mut().for_each(|v| *v /= p);
    let pr = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i != row {
            let f = r[col];
            if f != 0.0 {
                r.iter_mut().zip(&pr).for_each(|(v, q)| *v -= f * q);
            }
        }
    }
    basis[row] = col;
}

/// Maximizes `cost·x` over the current tableau using columns `< allowed`.
fn pivot_loop(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> LpStatus {
    let width = cost.len();
    loop {
        // Reduced cost of column j: c_j - c_Bᵀ B⁻¹ A_j.
        let entering = (0..allowed).find(|&j| {
            !basis.contains(&j) && cost[j] - t.iter().zip(basis.iter()).map(|(r, &b)| cost[b] * r[j]).sum::<f64>() > EPS
        });
        let Some(j) = entering else {
            return LpStatus::Optimal;
        };
        let mut leave: Option<(usize, f64)> = None;
        for (i, r) in t.iter().enumerate() {
            if r[j] > EPS {
                let ratio = r[width - 1] / r[j];
                let better = match leave {
                    None => true,
                    Some((k, best)) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[k]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((i, _)) = leave else {
            return LpStatus::Unbounded;
        };
        pivot(t, basis, i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_lp() {
        // max 3x + 2y s.t. x + y + s1 = 4, x + 3y + s2 = 6.
        let mut lp = LinearProgram::new(4);
        lp.add_equality(vec![1.0, 1.0, 1.0, 0.0], 4.0).unwrap();
        lp.add_equality(vec![1.0, 3.0, 0.0, 1.0], 6.0).unwrap();
        lp.set_objective(vec![3.0, 2.0, 0.0, 0.0]).unwrap();
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 12.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_and_infeasibility() {
        let mut lp = LinearProgram::new(2);
        lp.add_equality(vec![1.0, 1.0], 1.0).unwrap();
        lp.add_equality(vec![2.0, 2.0], 2.0).unwrap();
        lp.set_objective(vec![1.0, 0.0]).unwrap();
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);

        let mut bad = LinearProgram::new(2);
        bad.add_equality(vec![1.0, 1.0], 1.0).unwrap();
        bad.add_equality(vec![1.0, 1.0], 2.0).unwrap();
        assert_eq!(bad.solve().status, LpStatus::Infeasible);

        let mut neg = LinearProgram::new(1);
        neg.add_equality(vec![1.0], -1.0).unwrap();
        assert_eq!(neg.solve().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::new(2);
        lp.add_equality(vec![1.0, -1.0], 0.0).unwrap();
        lp.set_objective(vec![1.0, 0.0]).unwrap();
        assert_eq!(lp.solve().status, LpStatus::Unbounded);
    }
}
