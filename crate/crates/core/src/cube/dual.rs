//! The moment-side program of the quadratic certificate and recovery of
//! worst-case vertices from its solution.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::instance::MatrixCubeInstance;
use crate::error::{Error, Result};
use crate::numerics::{eig_sym, SymMatrix};
use crate::sdp::{solve, SdpProblem, SolveOptions, SolveStatus, SparseSym};

pub const DEFAULT_RANK_TOL: f64 = 1e-6;
/// Eigenvalues of the `D_i` within this distance of ±1 are rounded.
pub const SIGN_ROUND_TOL: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub n: usize,
    pub m: usize,
    /// Optimal `L` (dimension `n (m + 1)`), `tr L_00 = 1`.
    pub l_star: SymMatrix,
    /// `min tr(H L)` in the units of the instance.
    pub d_star: f64,
    pub status: SolveStatus,
}

impl DualSolution {
    /// Block `L_ij`, `0 ≤ i, j ≤ m`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.l_star.as_matrix().view((i * self.n, j * self.n), (self.n, self.n)).into_owned()
    }
}

/// Bordered matrix `[[H_0, H_i / 2], [H_i / 2, 0]]`.
fn bordered(h: &[SymMatrix]) -> SymMatrix {
    let n = h[0].dim();
    let m = h.len() - 1;
    let mut b = DMatrix::zeros(n * (m + 1), n * (m + 1));
    b.view_mut((0, 0), (n, n)).copy_from(h[0].as_matrix());
    for i in 1..=m {
        let half = h[i].as_matrix() * 0.5;
        b.view_mut((0, i * n), (n, n)).copy_from(&half);
        b.view_mut((i * n, 0), (n, n)).copy_from(&half);
    }
    SymMatrix::symmetrize(&b)
}

/// `min tr(H L)` over `L ⪰ 0`, `L_ii = L_00`, `tr L_00 = 1`, symmetric
/// off-diagonal blocks.
pub fn dual_solve(inst: &MatrixCubeInstance) -> Result<DualSolution> {
    dual_solve_with(inst, &SolveOptions::default())
}

pub fn dual_solve_with(inst: &MatrixCubeInstance, opts: &SolveOptions) -> Result<DualSolution> {
    let n = inst.n();
    let m = inst.m();
    let dim = n * (m + 1);
    let s = inst.coeff_scale();
    let h: Vec<SymMatrix> = inst.normalized().iter().map(|hi| hi.scale(1.0 / s)).collect();

    let mut p = SdpProblem::new(vec![dim]);
    p.objective[0] = bordered(&h);
    p.add_constraint(vec![(0, SparseSym::from_triplets(dim, (0..n).map(|i| (i, i, 1.0))))], 1.0);
    for i in 1..=m {
        for q in 0..n {
            for r in 0..=q {
                let a = SparseSym::from_triplets(dim, [(i * n + r, i * n + q, 1.0), (r, q, -1.0)]);
                p.add_constraint(vec![(0, a)], 0.0);
            }
        }
    }
    for i in 0..=m {
        for j in (i + 1)..=m {
            for q in 0..n {
                for r in 0..q {
                    let a = SparseSym::from_triplets(dim, [(i * n + r, j * n + q, 1.0), (i * n + q, j * n + r, -1.0)]);
                    p.add_constraint(vec![(0, a)], 0.0);
                }
            }
        }
    }
    let sol = solve(&p, opts)?;
    if !sol.is_optimal() {
        return Err(Error::Solver { status: sol.status });
    }
    Ok(DualSolution { n, m, l_star: sol.x[0].clone(), d_star: sol.primal_obj * s, status: sol.status })
}

/// One term `α (1, δ)(1, δ)ᵀ ⊗ x xᵀ` of the decomposition of `L*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub delta: Vec<f64>,
    /// Unit vector.
    pub x: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Extraction {
    pub atoms: Vec<Atom>,
    pub rank: usize,
    pub rank_l00: usize,
    /// `‖L* − Σ atoms‖_F / ‖L*‖_F` (1 when nothing was extracted).
    pub reconstruction_error: f64,
    pub diagnostic: Option<String>,
}

impl Extraction {
    fn failed(rank: usize, rank_l00: usize, why: String) -> Self {
        Self { atoms: Vec::new(), rank, rank_l00, reconstruction_error: 1.0, diagnostic: Some(why) }
    }
}

fn numerical_rank(values: &[f64], tol: f64) -> usize {
    let top = values.iter().copied().fold(0.0, f64::max);
    values.iter().filter(|&&v| v > tol * top).count()
}

/// Recovers `(δ, x)` pairs from `L*` when `rank L* = rank L*_00`.
pub fn rank_one_extract(d: &DualSolution, rank_tol: f64, seed: u64) -> Result<Extraction> {
    let (n, m) = (d.n, d.m);
    let eig = eig_sym(&d.l_star)?;
    let rank = numerical_rank(eig.values.as_slice(), rank_tol);
    let l00 = SymMatrix::symmetrize(&d.block(0, 0));
    let rank_l00 = numerical_rank(eig_sym(&l00)?.values.as_slice(), rank_tol);
    if rank == 0 || rank != rank_l00 {
        return Ok(Extraction::failed(rank, rank_l00, format!("rank condition fails: rank L* = {rank}, rank L_00 = {rank_l00}")));
    }

    let dim = n * (m + 1);
    let mut v = DMatrix::zeros(dim, rank);
    for (c, k) in ((dim - rank)..dim).enumerate() {
        let lam = eig.values[k].max(0.0).sqrt();
        v.set_column(c, &(eig.vectors.column(k) * lam));
    }
    let v0 = v.rows(0, n).into_owned();
    let gram = v0.transpose() * &v0;
    let Some(gram_inv) = gram.try_inverse() else {
        return Ok(Extraction::failed(rank, rank_l00, "leading factor is rank deficient".into()));
    };
    let pinv = gram_inv * v0.transpose();
    let ds: Vec<DMatrix<f64>> = (1..=m)
        .map(|i| {
            let di = &pinv * v.rows(i * n, n);
            (&di + di.transpose()) * 0.5
        })
        .collect();

    let mut diagnostic = None;
    let mut commute = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            commute = commute.max((&ds[i] * &ds[j] - &ds[j] * &ds[i]).norm());
        }
    }
    if commute > 1e-3 {
        diagnostic = Some(format!("D_i commute only to {commute:.3e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(rank, rank);
    for di in &ds {
        let c: f64 = StandardNormal.sample(&mut rng);
        w += di * c;
    }
    let u = eig_sym(&SymMatrix::symmetrize(&w))?.vectors;

    let mut atoms = Vec::new();
    let mut rejected = 0;
    for k in 0..rank {
        let uk = u.column(k).into_owned();
        let mut delta = Vec::with_capacity(m);
        let mut ok = true;
        for di in &ds {
            let sig = (uk.transpose() * di * &uk)[(0, 0)];
            if (sig - 1.0).abs() < SIGN_ROUND_TOL {
                delta.push(1.0);
            } else if (sig + 1.0).abs() < SIGN_ROUND_TOL {
                delta.push(-1.0);
            } else {
                ok = false;
                break;
            }
        }
        if !ok {
            rejected += 1;
            continue;
        }
        let xk = &v0 * &uk;
        let weight = xk.norm_squared();
        if weight == 0.0 {
            rejected += 1;
            continue;
        }
        let x = (xk / weight.sqrt()).iter().copied().collect();
        atoms.push(Atom { delta, x, weight });
    }
    if rejected > 0 {
        diagnostic = Some(format!("{rejected} of {rank} atoms had eigenvalues away from ±1"));
    }

    let recon = reconstruct(&atoms, n, m);
    let reconstruction_error = (d.l_star.as_matrix() - recon).norm() / d.l_star.frobenius_norm().max(f64::MIN_POSITIVE);
    Ok(Extraction { atoms, rank, rank_l00, reconstruction_error, diagnostic })
}

/// `Σ α (1, δ)(1, δ)ᵀ ⊗ x xᵀ`.
pub fn reconstruct(atoms: &[Atom], n: usize, m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n * (m + 1), n * (m + 1));
    for a in atoms {
        let mut col = DMatrix::zeros(n * (m + 1), 1);
        for b in 0..=m {
            let s = if b == 0 { 1.0 } else { a.delta[b - 1] };
            for i in 0..n {
                col[(b * n + i, 0)] = s * a.x[i];
            }
        }
        out += &col * col.transpose() * a.weight;
    }
    out
}
