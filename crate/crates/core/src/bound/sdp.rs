//! Dense primal-dual interior-point solver for small block-diagonal SDPs.
//!
//! Problems are in the standard pair
//!
//! ```text
//! (P)  minimize ⟨C, X⟩   s.t. ⟨Aᵢ, X⟩ = bᵢ,  X ⪰ 0
//! (D)  maximize bᵀy      s.t. C − Σ yᵢ Aᵢ = Z ⪰ 0
//! ```
//!
//! Blocks are either dense PSD blocks or diagonal (LP) blocks. The search
//! direction is HKM with a Mehrotra predictor-corrector; iterates need not be
//! feasible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Psd,
    Diag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub size: usize,
}

impl BlockSpec {
    pub fn psd(size: usize) -> Self {
        Self { kind: BlockKind::Psd, size }
    }

    pub fn diag(size: usize) -> Self {
        Self { kind: BlockKind::Diag, size }
    }
}

/// One upper-triangle entry of a symmetric block matrix. Off-diagonal entries
/// stand for both `(row, col)` and `(col, row)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Symmetric block matrix given by its upper-triangle entries. Repeated
/// positions are summed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSym {
    entries: Vec<Entry>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, block: usize, row: usize, col: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push(Entry { block, row, col, value });
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// `⟨self, G⟩` for a possibly non-symmetric `G`, i.e. against `(G + Gᵀ)/2`.
    fn inner(&self, g: &BlockMatrix) -> f64 {
        self.entries
            .iter()
            .map(|e| match &g.blocks[e.block] {
                Block::Dense(m) if e.row == e.col => e.value * m[(e.row, e.row)],
                Block::Dense(m) => e.value * (m[(e.row, e.col)] + m[(e.col, e.row)]),
                Block::Diag(d) => e.value * d[e.row],
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub blocks: Vec<Block>,
}

impl BlockMatrix {
    fn scaled_identity(specs: &[BlockSpec], s: f64) -> Self {
        let blocks = specs
            .iter()
            .map(|b| match b.kind {
                BlockKind::Psd => Block::Dense(DMatrix::identity(b.size, b.size) * s),
                BlockKind::Diag => Block::Diag(DVector::from_element(b.size, s)),
            })
            .collect();
        Self { blocks }
    }

    fn from_sparse(specs: &[BlockSpec], a: &SparseSym) -> Self {
        let mut m = Self::scaled_identity(specs, 0.0);
        m.add_sparse(a, 1.0);
        m
    }

    fn add_sparse(&mut self, a: &SparseSym, s: f64) {
        for e in &a.entries {
            match &mut self.blocks[e.block] {
                Block::Dense(m) => {
                    m[(e.row, e.col)] += s * e.value;
                    if e.row != e.col {
                        m[(e.col, e.row)] += s * e.value;
                    }
                }
                Block::Diag(d) => d[e.row] += s * e.value,
            }
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>, g: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>) -> Self {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|pair| match pair {
                (Block::Dense(a), Block::Dense(b)) => Block::Dense(f(a, b)),
                (Block::Diag(a), Block::Diag(b)) => Block::Diag(g(a, b)),
                _ => unreachable!("block structure mismatch"),
            })
            .collect();
        Self { blocks }
    }

    fn add(&self, other: &Self, s: f64) -> Self {
        self.zip(other, |a, b| a + b * s, |a, b| a + b * s)
    }

    fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b, |a, b| a.component_mul(b))
    }

    fn inner(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|pair| match pair {
                (Block::Dense(a), Block::Dense(b)) => a.dot(b),
                (Block::Diag(a), Block::Diag(b)) => a.dot(b),
                _ => unreachable!("block structure mismatch"),
            })
            .sum()
    }

    fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn symmetrize(&mut self) {
        for b in &mut self.blocks {
            if let Block::Dense(m) = b {
                let t = m.transpose();
                *m += t;
                *m *= 0.5;
            }
        }
    }

    fn add_identity(&mut self, s: f64) {
        for b in &mut self.blocks {
            match b {
                Block::Dense(m) => {
                    for i in 0..m.nrows() {
                        m[(i, i)] += s;
                    }
                }
                Block::Diag(d) => d.add_scalar_mut(s),
            }
        }
    }

    fn inverse(&self) -> Option<Self> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| match b {
                Block::Dense(m) => m.clone().cholesky().map(|c| Block::Dense(c.inverse())),
                Block::Diag(d) => d.iter().all(|v| *v > 0.0).then(|| Block::Diag(d.map(|v| 1.0 / v))),
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self { blocks })
    }

    /// Largest `α` with `self + α·dir ⪰ 0`, assuming `self ≻ 0`.
    fn max_step(&self, dir: &Self) -> Option<f64> {
        let mut alpha = f64::INFINITY;
        for pair in self.blocks.iter().zip(&dir.blocks) {
            match pair {
                (Block::Dense(x), Block::Dense(dx)) => {
                    let l = x.clone().cholesky()?.l();
                    let t = l.solve_lower_triangular(dx)?;
                    let w = l.solve_lower_triangular(&t.transpose())?;
                    let w = (&w + w.transpose()) * 0.5;
                    let lam = SymmetricEigen::new(w).eigenvalues.min();
                    if lam < 0.0 {
                        alpha = alpha.min(-1.0 / lam);
                    }
                }
                (Block::Diag(x), Block::Diag(dx)) => {
                    for (xi, di) in x.iter().zip(dx.iter()) {
                        if *di < 0.0 {
                            alpha = alpha.min(-xi / di);
                        }
                    }
                }
                _ => unreachable!("block structure mismatch"),
            }
        }
        Some(alpha)
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Dense(m) if m.nrows() == 0 => f64::INFINITY,
                Block::Dense(m) => SymmetricEigen::new(m.clone()).eigenvalues.min(),
                Block::Diag(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn dense_block(&self, i: usize) -> Option<&DMatrix<f64>> {
        match self.blocks.get(i) {
            Some(Block::Dense(m)) => Some(m),
            _ => None,
        }
    }

    pub fn diag_block(&self, i: usize) -> Option<&DVector<f64>> {
        match self.blocks.get(i) {
            Some(Block::Diag(d)) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    blocks: Vec<BlockSpec>,
    c: SparseSym,
    a: Vec<SparseSym>,
    b: Vec<f64>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        Self { blocks, c: SparseSym::new(), a: Vec::new(), b: Vec::new() }
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn c_mut(&mut self) -> &mut SparseSym {
        &mut self.c
    }

    /// Adds a dual variable `yᵢ` with matrix `Aᵢ` and objective weight `bᵢ`.
    pub fn add_constraint(&mut self, a: SparseSym, b: f64) -> usize {
        self.a.push(a);
        self.b.push(b);
        self.a.len() - 1
    }

    pub fn n_constraints(&self) -> usize {
        self.a.len()
    }

    fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.iter().any(|b| b.size == 0) {
            return invalid("SDP needs at least one non-empty block");
        }
        if self.a.is_empty() {
            return invalid("SDP needs at least one constraint");
        }
        for e in self.a.iter().chain(std::iter::once(&self.c)).flat_map(|m| m.entries.iter()) {
            let Some(spec) = self.blocks.get(e.block) else {
                return invalid(format!("entry refers to missing block {}", e.block));
            };
            if e.col >= spec.size {
                return invalid(format!("entry ({},{}) outside block of size {}", e.row, e.col, spec.size));
            }
            if spec.kind == BlockKind::Diag && e.row != e.col {
                return invalid("off-diagonal entry in a diagonal block");
            }
            if !e.value.is_finite() {
                return invalid("non-finite SDP coefficient");
            }
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite SDP objective");
        }
        Ok(())
    }

    /// The feasibility problem `max t s.t. C − Σ yᵢAᵢ − tI ⪰ 0, t ≤ 1`.
    fn phase_one(&self) -> Self {
        let extra = self.blocks.len();
        let mut blocks = self.blocks.clone();
        blocks.push(BlockSpec::diag(1));
        let mut p = Self::new(blocks);
        p.c = self.c.clone();
        p.c.push(extra, 0, 0, 1.0);
        for a in &self.a {
            p.add_constraint(a.clone(), 0.0);
        }
        let mut id = SparseSym::new();
        for (k, spec) in self.blocks.iter().enumerate() {
            for i in 0..spec.size {
                id.push(k, i, i, 1.0);
            }
        }
        id.push(extra, 0, 0, 1.0);
        p.add_constraint(id, 1.0);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tolerance: 1e-7, max_iterations: 200, step_fraction: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    /// No `y` makes `C − Σ yᵢAᵢ` positive semidefinite.
    Infeasible,
    MaxIterations,
    /// Progress stopped before the tolerance was met, typically because the
    /// problem has no strictly feasible point. The best iterate is returned.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// `⟨C, X⟩`, an upper bound on the maximization problem when `X` is feasible.
    pub primal_objective: f64,
    /// `bᵀy`.
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub x: BlockMatrix,
    pub y: Vec<f64>,
    pub z: BlockMatrix,
    /// `b − A(X)`, needed to audit the bound carried by `X`.
    pub primal_residual: Vec<f64>,
}

impl SdpSolution {
    pub fn gap(&self) -> f64 {
        self.primal_objective - self.dual_objective
    }

    /// Upper bound on `bᵀy'` over every feasible `y'` with `‖y'‖₂ ≤ y_bound`
    /// and `tr Z' ≤ z_trace`. With `A(X) = b − r` one has
    /// `bᵀy' = ⟨C, X⟩ − ⟨X, Z'⟩ + rᵀy'`, and `⟨X, Z'⟩ ≥ λ_min(X)·tr Z'`.
    pub fn certified_upper_bound(&self, y_bound: f64, z_trace: f64) -> f64 {
        let r: f64 = self.primal_residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        let neg = (-self.x.min_eigenvalue()).max(0.0);
        self.primal_objective + y_bound * r + neg * z_trace
    }
}

/// Solves the problem; if the main run does not converge, a phase-one
/// problem decides whether the failure is infeasibility.
pub fn solve(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution> {
    problem.validate()?;
    if !(options.tolerance > 0.0) || options.max_iterations == 0 || !(0.0..1.0).contains(&options.step_fraction) {
        return invalid("bad SDP options");
    }
    let mut sol = interior_point(problem, options);
    if sol.status != SdpStatus::Optimal && feasibility_margin(problem, options)? < -10.0 * options.tolerance {
        sol.status = SdpStatus::Infeasible;
    }
    Ok(sol)
}

/// Upper bound on `max { t : C − Σ yᵢAᵢ ⪰ tI }` (capped at 1). Negative
/// values prove infeasibility.
pub fn feasibility_margin(problem: &SdpProblem, options: &SdpOptions) -> Result<f64> {
    problem.validate()?;
    let sol = interior_point(&problem.phase_one(), options);
    match sol.status {
        SdpStatus::Infeasible => Err(Error::Solver("phase-one problem reported infeasible".into())),
        _ => Ok(sol.primal_objective.max(sol.dual_objective)),
    }
}

struct Iterate {
    x: BlockMatrix,
    y: DVector<f64>,
    z: BlockMatrix,
    rp: DVector<f64>,
    pinf: f64,
    dinf: f64,
    merit: f64,
}

/// Rows of `Gᵢ` with `M = GᵀG`, `Mᵢⱼ = Σ_blocks tr(Aᵢ X Aⱼ Z⁻¹)`. Dense blocks
/// use `Gᵢ = Lₓᵀ Aᵢ L_z⁻ᵀ`, diagonal blocks `gᵢ = aᵢ·√(x/z)`.
fn schur_factor_columns(x: &BlockMatrix, z: &BlockMatrix, a_dense: &[BlockMatrix]) -> Option<DMatrix<f64>> {
    let mut factors = Vec::new();
    let mut rows = 0;
    for (xb, zb) in x.blocks.iter().zip(&z.blocks) {
        match (xb, zb) {
            (Block::Dense(xm), Block::Dense(zm)) => {
                let lx = xm.clone().cholesky()?.l();
                let lz = zm.clone().cholesky()?.l();
                rows += xm.nrows() * xm.nrows();
                factors.push((Some((lx, lz)), None));
            }
            (Block::Diag(xd), Block::Diag(zd)) => {
                if zd.iter().chain(xd.iter()).any(|v| *v <= 0.0) {
                    return None;
                }
                rows += xd.len();
                factors.push((None, Some(xd.zip_map(zd, |a, b| (a / b).sqrt()))));
            }
            _ => unreachable!("block structure mismatch"),
        }
    }
    let mut g = DMatrix::zeros(rows, a_dense.len());
    for (j, aj) in a_dense.iter().enumerate() {
        let mut offset = 0;
        for (blk, f) in aj.blocks.iter().zip(&factors) {
            match (blk, f) {
                (Block::Dense(am), (Some((lx, lz)), _)) => {
                    let h = lz.solve_lower_triangular(am)?;
                    let gj = lx.transpose() * h.transpose();
                    let len = gj.len();
                    g.view_mut((offset, j), (len, 1)).copy_from_slice(gj.as_slice());
                    offset += len;
                }
                (Block::Diag(ad), (_, Some(scale))) => {
                    let gj = ad.component_mul(scale);
                    g.view_mut((offset, j), (gj.len(), 1)).copy_from(&gj);
                    offset += gj.len();
                }
                _ => unreachable!("block structure mismatch"),
            }
        }
    }
    Some(g)
}

fn interior_point(p: &SdpProblem, o: &SdpOptions) -> SdpSolution {
    const STALL_WINDOW: usize = 10;
    let specs = &p.blocks;
    let m = p.a.len();
    let n: usize = specs.iter().map(|b| b.size).sum();
    let nf = n as f64;
    let c = BlockMatrix::from_sparse(specs, &p.c);
    let a_dense: Vec<BlockMatrix> = p.a.iter().map(|a| BlockMatrix::from_sparse(specs, a)).collect();
    let b = DVector::from_column_slice(&p.b);
    let norm_b = b.norm();
    let norm_c = c.norm();

    let apply_a = |g: &BlockMatrix| DVector::from_iterator(m, p.a.iter().map(|a| a.inner(g)));
    let apply_at = |y: &DVector<f64>| {
        let mut out = BlockMatrix::scaled_identity(specs, 0.0);
        for (a, yi) in p.a.iter().zip(y.iter()) {
            out.add_sparse(a, *yi);
        }
        out
    };

    let a_norms: Vec<f64> = a_dense.iter().map(BlockMatrix::norm).collect();
    let xi = (0..m)
        .map(|k| nf * (1.0 + p.b[k].abs()) / (1.0 + a_norms[k]))
        .fold(10.0_f64.max(nf.sqrt()), f64::max);
    let eta = a_norms.iter().copied().fold(10.0_f64.max(nf.sqrt()).max(norm_c), f64::max);
    let mut x = BlockMatrix::scaled_identity(specs, xi);
    let mut z = BlockMatrix::scaled_identity(specs, eta);
    let mut y = DVector::zeros(m);

    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut best: Option<Iterate> = None;
    let mut since_best = 0;
    loop {
        let rp = &b - apply_a(&x);
        let rd = c.add(&apply_at(&y), -1.0).add(&z, -1.0);
        let pinf = rp.norm() / (1.0 + norm_b);
        let dinf = rd.norm() / (1.0 + norm_c);
        let pobj = c.inner(&x);
        let dobj = b.dot(&y);
        let scale = 1.0 + pobj.abs() + dobj.abs();
        let rel_gap = (pobj - dobj).abs() / scale;
        let comp = x.inner(&z) / scale;
        let merit = pinf.max(dinf).max(rel_gap).max(comp);
        if best.as_ref().is_none_or(|bst| merit < bst.merit) {
            best = Some(Iterate { x: x.clone(), y: y.clone(), z: z.clone(), rp: rp.clone(), pinf, dinf, merit });
            since_best = 0;
        } else {
            since_best += 1;
        }
        if merit < o.tolerance {
            status = SdpStatus::Optimal;
            break;
        }
        if iterations >= o.max_iterations {
            break;
        }
        if since_best >= STALL_WINDOW || !(x.norm() < 1e12 && z.norm() < 1e12 && y.norm() < 1e12) {
            status = SdpStatus::Stalled;
            break;
        }
        iterations += 1;

        let stalled = |status: &mut SdpStatus| *status = SdpStatus::Stalled;
        let (Some(z_inv), Some(g)) = (z.inverse(), schur_factor_columns(&x, &z, &a_dense)) else {
            stalled(&mut status);
            break;
        };
        let schur = g.tr_mul(&g);
        let Some(chol) = schur.cholesky() else {
            stalled(&mut status);
            break;
        };
        let base = &rp + apply_a(&x.mul(&rd).mul(&z_inv));
        let direction = |r: &BlockMatrix| {
            let rhs = &base - apply_a(&r.mul(&z_inv));
            let dy = chol.solve(&rhs);
            let dz = rd.add(&apply_at(&dy), -1.0);
            let mut dx = r.add(&x.mul(&dz), -1.0).mul(&z_inv);
            dx.symmetrize();
            (dx, dy, dz)
        };
        let xz = x.mul(&z);
        let mu = x.inner(&z) / nf;

        let neg_xz = xz.add(&xz, -2.0);
        let (dx_a, _, dz_a) = direction(&neg_xz);
        let (Some(sp), Some(sd)) = (x.max_step(&dx_a), z.max_step(&dz_a)) else {
            stalled(&mut status);
            break;
        };
        let (ap, ad) = (sp.min(1.0), sd.min(1.0));
        let mu_aff = x.add(&dx_a, ap).inner(&z.add(&dz_a, ad)) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let mut r = neg_xz.add(&dx_a.mul(&dz_a), -1.0);
        r.add_identity(sigma * mu);
        let (dx, dy, dz) = direction(&r);
        let (Some(sp), Some(sd)) = (x.max_step(&dx), z.max_step(&dz)) else {
            stalled(&mut status);
            break;
        };
        let ap = (o.step_fraction * sp).min(1.0);
        let ad = (o.step_fraction * sd).min(1.0);
        x = x.add(&dx, ap);
        y += dy * ad;
        z = z.add(&dz, ad);
    }

    let it = best.expect("at least one iterate is evaluated");
    SdpSolution {
        status,
        primal_objective: c.inner(&it.x),
        dual_objective: b.dot(&it.y),
        primal_infeasibility: it.pinf,
        dual_infeasibility: it.dinf,
        iterations,
        x: it.x,
        y: it.y.iter().copied().collect(),
        z: it.z,
        primal_residual: it.rp.iter().copied().collect(),
    }
}
