//! Primal-dual interior-point solver for block-diagonal SDPs.
//!
//! Standard form:
//!
//! ```text
//! primal:  min  <C, X>   s.t.  <A_k, X> = b_k,  X ⪰ 0
//! dual:    max  bᵀy      s.t.  Σ y_k A_k + Z = C,  Z ⪰ 0
//! ```
//!
//! The search direction is HKM (`ΔX = (T − X ΔZ) Z⁻¹ − X`, symmetrized)
//! with a Mehrotra predictor-corrector. Constraint matrices are stored
//! sparse, which keeps the Schur complement cheap for the certificate
//! programs in this crate (most variables touch only a handful of entries).

mod lmi;

pub use lmi::{LmiBlock, LmiSolution, LmiSystem, MarginSolution, SkewVar, SymVar, Verdict, TOL_FEAS};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::SymMatrix;

/// Fraction-to-boundary factor for the corrector step.
const STEP_FRACTION: f64 = 0.98;

/// Symmetric sparse matrix as upper-triangle triplets `(i, j, v)`, `i ≤ j`.
/// An off-diagonal triplet stands for `v (E_ij + E_ji)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSym {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(dim: usize) -> Self {
        SparseSym { dim, entries: Vec::new() }
    }

    /// Builds from arbitrary triplets; `(i, j)` and `(j, i)` address the
    /// same entry and duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets
            .into_iter()
            .map(|(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) })
            .collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            assert!(j < dim, "triplet ({i}, {j}) outside a {dim}x{dim} matrix");
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != 0.0);
        SparseSym { dim, entries: merged }
    }

    pub fn from_dense(a: &SymMatrix) -> Self {
        let n = a.dim();
        let mut entries = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                let v = a.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        SparseSym { dim: n, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// `tr(A W)` for any square `W` (not necessarily symmetric).
    pub fn dot(&self, w: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * w[(i, i)] } else { v * (w[(i, j)] + w[(j, i)]) })
            .sum()
    }

    /// `acc += s · A`.
    pub fn add_scaled_to(&self, acc: &mut DMatrix<f64>, s: f64) {
        for &(i, j, v) in &self.entries {
            acc[(i, j)] += s * v;
            if i != j {
                acc[(j, i)] += s * v;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        self.add_scaled_to(&mut m, 1.0);
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    /// Number of stored entries counting both mirrors.
    fn full_nnz(&self) -> usize {
        self.entries.iter().map(|&(i, j, _)| if i == j { 1 } else { 2 }).sum()
    }
}

/// One equality constraint `Σ_blocks <A_kb, X_b> = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub parts: Vec<(usize, SparseSym)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub objective: Vec<SymMatrix>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    /// A problem with zero objective and no constraints.
    pub fn new(block_dims: Vec<usize>) -> Self {
        let objective = block_dims.iter().map(|&d| SymMatrix::zeros(d)).collect();
        SdpProblem { block_dims, objective, constraints: Vec::new() }
    }

    pub fn add_constraint(&mut self, parts: Vec<(usize, SparseSym)>, rhs: f64) {
        self.constraints.push(Constraint { parts, rhs });
    }

    /// Convenience form taking dense per-block matrices.
    pub fn add_dense_constraint(&mut self, parts: Vec<(usize, SymMatrix)>, rhs: f64) {
        let parts = parts.iter().map(|(b, a)| (*b, SparseSym::from_dense(a))).collect();
        self.add_constraint(parts, rhs);
    }

    fn validate(&self) -> Result<()> {
        if self.block_dims.is_empty() || self.block_dims.contains(&0) {
            return Err(Error::Dimension("block dimensions must be positive".into()));
        }
        if self.objective.len() != self.block_dims.len() {
            return Err(Error::Dimension(format!(
                "{} objective blocks for {} block dims",
                self.objective.len(),
                self.block_dims.len()
            )));
        }
        for (c, &d) in self.objective.iter().zip(&self.block_dims) {
            if c.dim() != d {
                return Err(Error::Dimension(format!("objective block {} vs dim {d}", c.dim())));
            }
        }
        for (k, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(Error::InvalidInput(format!("constraint {k} has non-finite rhs")));
            }
            for (idx, (b, a)) in con.parts.iter().enumerate() {
                if con.parts[..idx].iter().any(|(other, _)| other == b) {
                    return Err(Error::InvalidInput(format!(
                        "constraint {k} lists block {b} twice"
                    )));
                }
                let d = *self.block_dims.get(*b).ok_or_else(|| {
                    Error::Dimension(format!("constraint {k} references block {b}"))
                })?;
                if a.dim() != d {
                    return Err(Error::Dimension(format!(
                        "constraint {k} block {b} has dim {} instead of {d}",
                        a.dim()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped early; the returned iterate is the best seen and within `100 tol`.
    NearOptimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Emit one JSON line per iteration at `log::debug!` level.
    pub log_iterates: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iters: 200, log_iterates: true }
    }
}

/// Convergence measures of one iterate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterateInfo {
    pub iteration: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub complementarity: f64,
    pub rel_gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    /// `yᵀ r_p` and `<R_d, X>`, so that
    /// `primal_obj − dual_obj = complementarity − residual_y + residual_x`.
    pub residual_y: f64,
    pub residual_x: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: Vec<SymMatrix>,
    pub y: Vec<f64>,
    pub z: Vec<SymMatrix>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub iterations: usize,
    pub trace: Vec<IterateInfo>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }

    pub fn last(&self) -> Option<&IterateInfo> {
        self.trace.last()
    }
}

/// Sparse constraint data regrouped by block.
struct BlockTerms<'a> {
    /// For each block: `(constraint index, matrix)` sorted by constraint.
    by_block: Vec<Vec<(usize, &'a SparseSym)>>,
}

impl<'a> BlockTerms<'a> {
    fn new(p: &'a SdpProblem) -> Self {
        let mut by_block = vec![Vec::new(); p.block_dims.len()];
        for (k, con) in p.constraints.iter().enumerate() {
            for (b, a) in &con.parts {
                if !a.is_empty() {
                    by_block[*b].push((k, a));
                }
            }
        }
        BlockTerms { by_block }
    }

    /// `A(W)_k = Σ_b <A_kb, W_b>`.
    fn apply(&self, w: &[DMatrix<f64>], ncons: usize) -> DVector<f64> {
        let mut out = DVector::zeros(ncons);
        for (b, terms) in self.by_block.iter().enumerate() {
            for &(k, a) in terms {
                out[k] += a.dot(&w[b]);
            }
        }
        out
    }

    /// `Σ_k y_k A_k`, per block.
    fn adjoint(&self, y: &DVector<f64>, dims: &[usize]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (b, terms) in self.by_block.iter().enumerate() {
            for &(k, a) in terms {
                if y[k] != 0.0 {
                    a.add_scaled_to(&mut out[b], y[k]);
                }
            }
        }
        out
    }

    /// Schur complement `M_kl = Σ_b tr(A_kb X_b A_lb Z_b⁻¹)`.
    fn schur(&self, x: &[DMatrix<f64>], zinv: &[DMatrix<f64>], ncons: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(ncons, ncons);
        for (b, terms) in self.by_block.iter().enumerate() {
            let xb = &x[b];
            let zb = &zinv[b];
            let n = xb.nrows();
            for (pos, &(k, ak)) in terms.iter().enumerate() {
                // B = X A_k Z⁻¹
                let bmat = if ak.full_nnz() < n {
                    let mut acc = DMatrix::zeros(n, n);
                    for &(i, j, v) in ak.entries() {
                        acc.ger(v, &xb.column(i), &zb.row(j).transpose(), 1.0);
                        if i != j {
                            acc.ger(v, &xb.column(j), &zb.row(i).transpose(), 1.0);
                        }
                    }
                    acc
                } else {
                    xb * (ak.to_dense() * zb)
                };
                for &(l, al) in &terms[pos..] {
                    let v = al.dot(&bmat);
                    m[(k, l)] += v;
                    if k != l {
                        m[(l, k)] += v;
                    }
                }
            }
        }
        m
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// Largest `α ≤ cap` with `X + α ΔX ⪰ 0`, given the lower Cholesky factor of X.
fn max_step(chol_l: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let tmp = chol_l.solve_lower_triangular(dx)?;
    let s = chol_l.solve_lower_triangular(&tmp.transpose())?;
    let s = sym(&s);
    let eig = nalgebra::SymmetricEigen::try_new(s, f64::EPSILON, 10_000)?;
    let lam = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Some(if lam < 0.0 { -1.0 / lam } else { f64::INFINITY })
}

fn block_step(chols: &[DMatrix<f64>], d: &[DMatrix<f64>]) -> Option<f64> {
    let mut a = f64::INFINITY;
    for (l, db) in chols.iter().zip(d) {
        a = a.min(max_step(l, db)?);
    }
    Some(a)
}

fn cholesky_blocks(m: &[DMatrix<f64>]) -> Option<Vec<DMatrix<f64>>> {
    m.iter().map(|b| Cholesky::new(b.clone()).map(|c| c.l())).collect()
}

fn inverse_blocks(m: &[DMatrix<f64>]) -> Option<Vec<DMatrix<f64>>> {
    m.iter()
        .map(|b| Cholesky::new(b.clone()).map(|c| sym(&c.inverse())))
        .collect()
}

struct Best {
    score: f64,
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    info: IterateInfo,
}

enum SchurFactor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    /// Pseudo-inverse for a numerically singular Schur matrix.
    Pinv(DMatrix<f64>),
}

impl SchurFactor {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            SchurFactor::Chol(c) => c.solve(rhs),
            SchurFactor::Pinv(p) => p * rhs,
        }
    }
}

fn factor_schur(m: &DMatrix<f64>) -> Option<SchurFactor> {
    if m.nrows() == 0 {
        return Cholesky::new(m.clone()).map(SchurFactor::Chol);
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(SchurFactor::Chol(c));
    }
    let dmax = m.diagonal().amax().max(f64::MIN_POSITIVE);
    for reg in [1e-14, 1e-12, 1e-10] {
        let mut r = m.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += reg * dmax;
        }
        if let Some(c) = Cholesky::new(r) {
            return Some(SchurFactor::Chol(c));
        }
    }
    let eig = nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5);
    let top = eig.eigenvalues.amax();
    if !(top.is_finite() && top > 0.0) {
        return None;
    }
    let inv = eig.eigenvalues.map(|l| if l > 1e-13 * top { 1.0 / l } else { 0.0 });
    let v = &eig.eigenvectors;
    Some(SchurFactor::Pinv(v * DMatrix::from_diagonal(&inv) * v.transpose()))
}

pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    p.validate()?;
    let dims = &p.block_dims;
    let ncons = p.constraints.len();
    let nbar: f64 = dims.iter().sum::<usize>() as f64;
    let terms = BlockTerms::new(p);
    let c: Vec<DMatrix<f64>> = p.objective.iter().map(|b| b.as_matrix().clone()).collect();
    let b = DVector::from_iterator(ncons, p.constraints.iter().map(|c| c.rhs));
    let norm_b = b.amax();
    let norm_c = frob(&c);

    // Identity-scaled start.
    let mut x = Vec::with_capacity(dims.len());
    let mut z = Vec::with_capacity(dims.len());
    for (bi, &d) in dims.iter().enumerate() {
        let df = d as f64;
        let mut xi: f64 = 10f64.max(df.sqrt());
        let mut zi: f64 = 10f64.max(df.sqrt()).max(p.objective[bi].frobenius_norm());
        for &(k, a) in &terms.by_block[bi] {
            let na = a.frobenius_norm();
            xi = xi.max(df * (1.0 + b[k].abs()) / (1.0 + na));
            zi = zi.max(na);
        }
        x.push(DMatrix::identity(d, d) * xi);
        z.push(DMatrix::identity(d, d) * zi);
    }
    let mut y = DVector::zeros(ncons);

    let mut trace = Vec::new();
    let mut status;
    let mut stalls = 0usize;
    let mut iter = 0usize;
    let mut best: Option<Best> = None;

    loop {
        let ax = terms.apply(&x, ncons);
        let rp = &b - &ax;
        let aty = terms.adjoint(&y, dims);
        let rd: Vec<DMatrix<f64>> = (0..dims.len()).map(|i| &c[i] - &z[i] - &aty[i]).collect();
        let pobj = inner(&c, &x);
        let dobj = b.dot(&y);
        let comp = inner(&x, &z);
        let mu = comp / nbar;
        let info = IterateInfo {
            iteration: iter,
            primal_obj: pobj,
            dual_obj: dobj,
            complementarity: comp,
            rel_gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            primal_infeas: rp.amax() / (1.0 + norm_b),
            dual_infeas: frob(&rd) / (1.0 + norm_c),
            residual_y: y.dot(&rp),
            residual_x: inner(&rd, &x),
        };
        if opts.log_iterates && log::log_enabled!(log::Level::Debug) {
            if let Ok(line) = serde_json::to_string(&info) {
                log::debug!("{line}");
            }
        }
        trace.push(info);
        if !(pobj.is_finite() && dobj.is_finite() && mu.is_finite()) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let gap_ok = info.rel_gap <= opts.tol && comp / (1.0 + pobj.abs() + dobj.abs()) <= opts.tol * 10.0;
        if gap_ok && info.primal_infeas <= opts.tol && info.dual_infeas <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        let score = info.rel_gap.max(info.primal_infeas).max(info.dual_infeas);
        if best.as_ref().is_none_or(|b: &Best| score < b.score) {
            best = Some(Best { score, x: x.clone(), y: y.clone(), z: z.clone(), info });
        }
        if iter >= opts.max_iters {
            status = SolveStatus::MaxIterations;
            break;
        }
        iter += 1;

        let (Some(zinv), Some(xl), Some(zl)) =
            (inverse_blocks(&z), cholesky_blocks(&x), cholesky_blocks(&z))
        else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let schur = terms.schur(&x, &zinv, ncons);
        let Some(schur_chol) = factor_schur(&schur) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        // X R_d Z⁻¹ is shared by predictor and corrector.
        let xrdz: Vec<DMatrix<f64>> = (0..dims.len()).map(|i| &x[i] * &rd[i] * &zinv[i]).collect();
        let a_xrdz = terms.apply(&xrdz, ncons);

        let direction = |tz: &[DMatrix<f64>]| -> (DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
            let rhs = &b - terms.apply(tz, ncons) + &a_xrdz;
            let dy = if ncons > 0 {
                let dy = schur_chol.solve(&rhs);
                // One step of iterative refinement.
                let r = &rhs - &schur * &dy;
                dy + schur_chol.solve(&r)
            } else {
                DVector::zeros(0)
            };
            let atdy = terms.adjoint(&dy, dims);
            let dz: Vec<DMatrix<f64>> = (0..dims.len()).map(|i| &rd[i] - &atdy[i]).collect();
            let dx: Vec<DMatrix<f64>> = (0..dims.len())
                .map(|i| sym(&(&tz[i] - &x[i] - &x[i] * &dz[i] * &zinv[i])))
                .collect();
            (dy, dx, dz)
        };

        // Predictor.
        let zero_t: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        let (_, dxa, dza) = direction(&zero_t);
        let (Some(ap), Some(ad)) = (block_step(&xl, &dxa), block_step(&zl, &dza)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let x_aff: Vec<DMatrix<f64>> = (0..dims.len()).map(|i| &x[i] + &dxa[i] * ap).collect();
        let z_aff: Vec<DMatrix<f64>> = (0..dims.len()).map(|i| &z[i] + &dza[i] * ad).collect();
        let mu_aff = inner(&x_aff, &z_aff) / nbar;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector with target σμI − ΔXₐΔZₐ.
        let tz: Vec<DMatrix<f64>> = (0..dims.len())
            .map(|i| {
                let d = dims[i];
                (DMatrix::identity(d, d) * (sigma * mu) - &dxa[i] * &dza[i]) * &zinv[i]
            })
            .collect();
        let (dy, dx, dz) = direction(&tz);
        let (Some(ap), Some(ad)) = (block_step(&xl, &dx), block_step(&zl, &dz)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                status = SolveStatus::NumericalFailure;
                break;
            }
        }
        for i in 0..dims.len() {
            x[i] += &dx[i] * ap;
            z[i] += &dz[i] * ad;
            x[i] = sym(&x[i]);
            z[i] = sym(&z[i]);
        }
        y += &dy * ad;
    }

    let mut last = trace.last().copied();
    if status != SolveStatus::Optimal {
        // Fall back to the best iterate seen when it is close enough.
        if let Some(b) = best.filter(|b| b.score <= 100.0 * opts.tol) {
            x = b.x;
            y = b.y;
            z = b.z;
            last = Some(b.info);
            status = SolveStatus::NearOptimal;
        }
    }
    Ok(SdpSolution {
        status,
        x: x.iter().map(SymMatrix::symmetrize).collect(),
        y: y.iter().copied().collect(),
        z: z.iter().map(SymMatrix::symmetrize).collect(),
        primal_obj: last.map_or(f64::NAN, |l| l.primal_obj),
        dual_obj: last.map_or(f64::NAN, |l| l.dual_obj),
        iterations: iter,
        trace,
    })
}
