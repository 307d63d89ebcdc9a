//! Degree-2m certificates with `S_i` of degree at most two per variable.

use nalgebra::{DMatrix, DVector};

use super::certificate::{verify_certificate, Certificate, FullPath};
use super::instance::{g_poly, vertex, vertex_oracle, MatrixCubeInstance, VERTEX_LIMIT};
use crate::error::{Error, Result};
use crate::mpoly::{coeff_residual_at, expand_gram, GramForm, MatrixPoly, MultiExponent};
use crate::numerics::{solve_linear, SymMatrix};
use crate::sdp::{solve, SdpProblem, SolveOptions, SparseSym};

/// Vertex-oracle slack tolerated by the constructions, relative to scale.
pub const PRECONDITION_TOL: f64 = 1e-9;

/// Which construction [`construct_full_certificate_with`] may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FullStrategy {
    /// Closed form, falling back to the SDP search if its identity check fails.
    Auto,
    ClosedForm,
    Sdp,
}

/// `N_m`: block `(a, b)` is `H_0` on the diagonal and `H_k` when `a ⊕ b = 2^{k−1}`.
pub fn nm_matrix(h: &[SymMatrix]) -> SymMatrix {
    let n = h[0].dim();
    let m = h.len() - 1;
    let k = 1usize << m;
    let mut out = DMatrix::zeros(k * n, k * n);
    for a in 0..k {
        for b in 0..k {
            let x = a ^ b;
            let blk = if x == 0 {
                Some(&h[0])
            } else if x.is_power_of_two() {
                Some(&h[x.trailing_zeros() as usize + 1])
            } else {
                None
            };
            if let Some(blk) = blk {
                out.view_mut((a * n, b * n), (n, n)).copy_from(blk.as_matrix());
            }
        }
    }
    SymMatrix::symmetrize(&out)
}

fn check_vertices(inst: &MatrixCubeInstance) -> Result<()> {
    let v = vertex_oracle(inst)?;
    if v.min_lambda < -PRECONDITION_TOL * inst.coeff_scale() {
        return Err(Error::Precondition(format!(
            "G is not PSD at vertex {:?} (min eigenvalue {:.6e})",
            v.argmin, v.min_lambda
        )));
    }
    Ok(())
}

/// `N_m` of the unit-cube coefficients, after checking that `G` is PSD at every vertex.
pub fn build_nm(inst: &MatrixCubeInstance) -> Result<SymMatrix> {
    check_vertices(inst)?;
    Ok(nm_matrix(&inst.normalized()))
}

/// `z_m`: entry `j` carries `δ_{i+1}` exactly when bit `i` of `j` is set.
pub fn monomial_basis_z(m: usize) -> Vec<MultiExponent> {
    (0..1usize << m)
        .map(|j| MultiExponent::new((0..m).map(|i| ((j >> i) & 1) as u32).collect()))
        .collect()
}

fn z_values(delta: &[f64]) -> DVector<f64> {
    let m = delta.len();
    DVector::from_iterator(
        1 << m,
        (0..1usize << m).map(|j| (0..m).filter(|i| (j >> i) & 1 == 1).map(|i| delta[i]).product()),
    )
}

/// Lower bidiagonal with diagonal `k, k−1, …, 1` and subdiagonal `−1, −2, …`.
fn bidiagonal(k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for j in 0..k {
        m[(j, j)] = (k - j) as f64;
        if j + 1 < k {
            m[(j + 1, j)] = -((j + 1) as f64);
        }
    }
    m
}

fn weights(k: usize, pow: i32) -> Result<Vec<f64>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut rhs = DVector::from_element(k, -(2f64).powi(-pow));
    rhs[0] += 1.0;
    Ok(solve_linear(&bidiagonal(k), &rhs)?.iter().copied().collect())
}

/// The constants `c ∈ ℝ^m` and `d ∈ ℝ^{m−1}` of the closed form.
pub fn full_constants(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = weights(m, m as i32)?;
    let d = if m >= 2 { weights(m - 1, m as i32 - 1)? } else { Vec::new() };
    Ok((c, d))
}

fn closed_form_multipliers(h: &[SymMatrix]) -> Result<Vec<MatrixPoly>> {
    let n = h[0].dim();
    let m = h.len() - 1;
    let (c, d) = full_constants(m)?;
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut s = MatrixPoly::zero(n, m);
        // H_0 · (c_1 + Σ_l c_{l+1} p_{k,l}); subsets of indices other than k.
        for mask in 0..(1usize << m) {
            if (mask >> k) & 1 == 1 {
                continue;
            }
            let l = mask.count_ones() as usize;
            let alpha: Vec<u32> = (0..m).map(|j| 2 * ((mask >> j) & 1) as u32).collect();
            s.add_term(MultiExponent::new(alpha), &h[0].scale(c[l]));
        }
        // δ_i H_i · (d_1 + Σ_l d_{l+1} q_{i,k,l}).
        for i in (0..m).filter(|&i| i != k) {
            for mask in 0..(1usize << m) {
                if (mask >> k) & 1 == 1 || (mask >> i) & 1 == 1 {
                    continue;
                }
                let l = mask.count_ones() as usize;
                let mut alpha: Vec<u32> = (0..m).map(|j| 2 * ((mask >> j) & 1) as u32).collect();
                alpha[i] = 1;
                s.add_term(MultiExponent::new(alpha), &h[i + 1].scale(d[l]));
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Writes `r = Σ (1 − δ_i²) S_i + rem` with `rem` of degree below two in
/// every variable.
pub fn divide_by_cube(r: &MatrixPoly) -> (Vec<MatrixPoly>, MatrixPoly) {
    let (n, m) = (r.n(), r.m());
    let mut rem = r.clone();
    let mut mult = vec![MatrixPoly::zero(n, m); m];
    for (i, s) in mult.iter_mut().enumerate() {
        loop {
            let Some((alpha, c)) = rem
                .terms()
                .find(|(a, _)| a.as_slice()[i] >= 2)
                .map(|(a, c)| (a.clone(), c.clone()))
            else {
                break;
            };
            rem.add_term(alpha.clone(), &-&c);
            let mut lower = alpha.as_slice().to_vec();
            lower[i] -= 2;
            let lower = MultiExponent::new(lower);
            // c δ_i² x = c x − (1 − δ_i²) c x
            rem.add_term(lower.clone(), &c);
            s.add_term(lower, &-&c);
        }
    }
    (mult, rem)
}

/// Gram `N ⪰ 0` over `z_m` whose form matches `G` at every vertex.
fn vertex_interpolating_gram(h: &[SymMatrix], opts: &SolveOptions) -> Result<SymMatrix> {
    let n = h[0].dim();
    let m = h.len() - 1;
    let nv = 1usize << m;
    let dim = nv * n;
    let s = h.iter().map(SymMatrix::frobenius_norm).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let verts: Vec<Vec<f64>> = (0..nv).map(|v| vertex(v, m)).collect();
    let g_at = |delta: &[f64]| {
        let mut g = h[0].as_matrix().clone();
        for (d, hi) in delta.iter().zip(&h[1..]) {
            g += hi.as_matrix() * *d;
        }
        g
    };

    let mut p = SdpProblem::new(vec![dim]);
    p.objective[0] = SymMatrix::identity(dim);
    for delta in &verts {
        let z = z_values(delta);
        let g = g_at(delta) / s;
        for q in 0..n {
            for pp in 0..=q {
                let mut trip = Vec::new();
                for a in 0..nv {
                    for b in 0..nv {
                        let v = z[a] * z[b];
                        let (i, j) = (a * n + pp, b * n + q);
                        // uᵀ N w with u = z ⊗ e_p, w = z ⊗ e_q.
                        trip.push((i, j, if i == j { v } else { 0.5 * v }));
                    }
                }
                p.add_constraint(vec![(0, SparseSym::from_triplets(dim, trip))], g[(pp, q)]);
            }
        }
    }
    let sol = solve(&p, opts)?;
    if !sol.is_optimal() {
        log::info!("vertex interpolation SDP stopped with {:?}; correcting the last iterate", sol.status);
    }
    let mut gram = sol.x[0].as_matrix() * s;

    // The z(v) are orthogonal with |z(v)|² = 2^m, so this restores every
    // vertex equation exactly.
    let inv = 1.0 / (nv * nv) as f64;
    let zs: Vec<DVector<f64>> = verts.iter().map(|d| z_values(d)).collect();
    let mut correction = DMatrix::zeros(dim, dim);
    for (delta, z) in verts.iter().zip(&zs) {
        let zi = crate::numerics::kron(&DMatrix::from_column_slice(nv, 1, z.as_slice()), &DMatrix::identity(n, n));
        let err = g_at(delta) - zi.transpose() * &gram * &zi;
        correction += crate::numerics::kron(&(z * z.transpose()), &err) * inv;
    }
    gram += correction;
    if !sol.is_optimal() && !gram.iter().all(|v| v.is_finite()) {
        return Err(Error::Solver { status: sol.status });
    }
    Ok(SymMatrix::symmetrize(&gram))
}

pub fn construct_full_certificate(inst: &MatrixCubeInstance) -> Result<Certificate> {
    construct_full_certificate_with(inst, FullStrategy::Auto, &SolveOptions::default())
}

pub fn construct_full_certificate_with(
    inst: &MatrixCubeInstance,
    strategy: FullStrategy,
    opts: &SolveOptions,
) -> Result<Certificate> {
    let m = inst.m();
    if m > VERTEX_LIMIT {
        return Err(Error::TooManyVertices { m, limit: VERTEX_LIMIT });
    }
    check_vertices(inst)?;
    let h = inst.normalized();
    let basis = monomial_basis_z(m);
    let g = g_poly(inst);
    let tol = 1e-8 * g.max_coeff_norm().max(1.0);

    if strategy != FullStrategy::Sdp {
        let gram = nm_matrix(&h).scale((0.5f64).powi(m as i32));
        let s0 = GramForm::new(basis.clone(), gram)?;
        let s = closed_form_multipliers(&h)?;
        let mut rhs = expand_gram(&s0);
        for (i, si) in s.iter().enumerate() {
            rhs = rhs.add(&si.mul_scalar_poly(&MatrixPoly::one_minus_square(m, i))?)?;
        }
        let (residual, worst) = coeff_residual_at(&g, &rhs)?;
        if residual <= tol {
            return Ok(Certificate::Full { s0, s, path: FullPath::ClosedForm });
        }
        log::warn!("closed-form full certificate misses the identity by {residual:.3e}");
        if strategy == FullStrategy::ClosedForm {
            return Err(Error::ConstructionMismatch {
                residual,
                exponent: worst.map(|a| a.as_slice().to_vec()).unwrap_or_default(),
            });
        }
    }

    let gram = vertex_interpolating_gram(&h, opts)?;
    let s0 = GramForm::new(basis, gram)?;
    let (s, rem) = divide_by_cube(&g.sub(&expand_gram(&s0))?);
    let cert = Certificate::Full { s0, s, path: FullPath::SdpFallback };
    let report = verify_certificate(inst, &cert)?;
    if !report.valid {
        return Err(Error::ConstructionMismatch {
            residual: report.residual.max(rem.max_coeff_norm()),
            exponent: rem.terms().next().map(|(a, _)| a.as_slice().to_vec()).unwrap_or_default(),
        });
    }
    Ok(cert)
}
