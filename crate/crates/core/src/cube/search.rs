use serde::Serialize;

use super::certificate::{verify_certificate, Certificate, VerifyReport};
use super::instance::{vertex, AffineSym, MatrixCubeInstance, VERTEX_LIMIT};
use crate::error::{Error, Result};
use crate::numerics::SymMatrix;
use crate::sdp::{LmiSystem, SolveOptions, SymVar, Verdict};

/// Which sufficient (or exact) LMI condition to impose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relaxation {
    /// One LMI per cube vertex (exact, `2^m` blocks).
    Vertex,
    BenTal,
    Quadratic,
}

/// Variables and blocks added by [`add_relaxation`].
#[derive(Debug, Clone)]
pub struct RelaxationVars {
    pub kind: Relaxation,
    pub x: Vec<SymVar>,
    pub blocks: Vec<usize>,
}

/// Adds the LMIs certifying `h[0] + Σ δ_i h[i] ⪰ 0` on the unit cube.
/// The `h[i]` may themselves depend on variables already in `sys`.
pub fn add_relaxation(sys: &mut LmiSystem, h: &[AffineSym], kind: Relaxation, margin: bool) -> Result<RelaxationVars> {
    let n = h[0].dim();
    let m = h.len() - 1;
    let mut blocks = Vec::new();
    let mut x = Vec::new();
    match kind {
        Relaxation::Vertex => {
            if m > VERTEX_LIMIT {
                return Err(Error::TooManyVertices { m, limit: VERTEX_LIMIT });
            }
            for idx in 0..(1usize << m) {
                let b = sys.add_block(n, margin);
                let blk = sys.block_mut(b);
                h[0].place(blk, 0, 0, 1.0);
                for (d, hi) in vertex(idx, m).iter().zip(&h[1..]) {
                    hi.place(blk, 0, 0, *d);
                }
                blocks.push(b);
            }
        }
        Relaxation::BenTal => {
            x = (0..m).map(|_| sys.add_sym_var(n)).collect();
            let b0 = sys.add_block(n, margin);
            h[0].place(sys.block_mut(b0), 0, 0, 1.0);
            for xi in &x {
                xi.place(sys.block_mut(b0), 0, -1.0);
            }
            blocks.push(b0);
            for (xi, hi) in x.iter().zip(&h[1..]) {
                for sign in [1.0, -1.0] {
                    let b = sys.add_block(n, margin);
                    xi.place(sys.block_mut(b), 0, 1.0);
                    hi.place(sys.block_mut(b), 0, 0, sign);
                    blocks.push(b);
                }
            }
        }
        Relaxation::Quadratic => {
            x = (0..m).map(|_| sys.add_sym_var(n)).collect();
            let k0: Vec<_> = (0..m).map(|_| sys.add_skew_var(n)).collect();
            let mut kij = Vec::new();
            for i in 1..=m {
                for j in (i + 1)..=m {
                    kij.push((i, j, sys.add_skew_var(n)));
                }
            }
            let b = sys.add_block(n * (m + 1), margin);
            let blk = sys.block_mut(b);
            h[0].place(blk, 0, 0, 1.0);
            for (i, xi) in x.iter().enumerate() {
                let off = (i + 1) * n;
                xi.place(blk, 0, -1.0);
                xi.place(blk, off, 1.0);
                h[i + 1].place(blk, 0, off, 0.5);
                k0[i].place(blk, 0, off);
            }
            for (i, j, k) in &kij {
                k.place(blk, i * n, j * n);
            }
            blocks.push(b);
        }
    }
    Ok(RelaxationVars { kind, x, blocks })
}

impl RelaxationVars {
    /// Certificate at `y`, with every matrix multiplied by `scale`.
    pub fn certificate(&self, sys: &LmiSystem, y: &[f64], scale: f64) -> Option<Certificate> {
        let x: Vec<SymMatrix> = self.x.iter().map(|v| v.value(y).scale(scale)).collect();
        match self.kind {
            Relaxation::Vertex => None,
            Relaxation::BenTal => Some(Certificate::BenTal { x }),
            Relaxation::Quadratic => {
                let gram = sys.evaluate(y).swap_remove(self.blocks[0]).scale(scale);
                Some(Certificate::Quadratic { x, gram })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub verdict: Verdict,
    /// Margin `t*` of the scale-normalized system.
    pub margin: f64,
    /// Present when the system is not infeasible and the extracted
    /// certificate passes verification.
    pub certificate: Option<Certificate>,
    pub report: Option<VerifyReport>,
}

impl SearchResult {
    pub fn certified(&self) -> bool {
        self.certificate.is_some()
    }
}

/// Unit-cube coefficients divided by their largest Frobenius norm.
fn scaled_coefficients(inst: &MatrixCubeInstance) -> (Vec<AffineSym>, f64) {
    let s = inst.coeff_scale();
    (inst.normalized().iter().map(|hi| AffineSym::constant(&hi.scale(1.0 / s))).collect(), s)
}

fn margin_search(inst: &MatrixCubeInstance, kind: Relaxation, opts: &SolveOptions) -> Result<SearchResult> {
    let (h, s) = scaled_coefficients(inst);
    let mut sys = LmiSystem::new();
    let vars = add_relaxation(&mut sys, &h, kind, true)?;
    let sol = sys.solve_margin(opts)?;
    let mut out = SearchResult { verdict: sol.verdict, margin: sol.t_star, certificate: None, report: None };
    if sol.verdict != Verdict::Infeasible {
        if let Some(cert) = vars.certificate(&sys, &sol.y, s) {
            let report = verify_certificate(inst, &cert)?;
            if report.valid {
                out.certificate = Some(cert);
            } else if sol.verdict == Verdict::Feasible {
                log::warn!("{kind:?} certificate failed verification: {:?}", report.message);
            }
            out.report = Some(report);
        }
    }
    Ok(out)
}

pub fn bental_test(inst: &MatrixCubeInstance) -> Result<SearchResult> {
    bental_test_with(inst, &SolveOptions::default())
}

pub fn bental_test_with(inst: &MatrixCubeInstance, opts: &SolveOptions) -> Result<SearchResult> {
    margin_search(inst, Relaxation::BenTal, opts)
}

pub fn quad_test(inst: &MatrixCubeInstance) -> Result<SearchResult> {
    quad_test_with(inst, &SolveOptions::default())
}

pub fn quad_test_with(inst: &MatrixCubeInstance, opts: &SolveOptions) -> Result<SearchResult> {
    margin_search(inst, Relaxation::Quadratic, opts)
}

/// Largest `t` for which the relaxation certifies `G − tI ⪰ 0` on the cube.
pub fn relaxation_margin(inst: &MatrixCubeInstance, kind: Relaxation, opts: &SolveOptions) -> Result<f64> {
    let (mut h, s) = scaled_coefficients(inst);
    let mut sys = LmiSystem::new();
    let t = sys.add_var();
    let n = inst.n();
    h[0] = h[0].clone().with_term(t, -nalgebra::DMatrix::identity(n, n));
    add_relaxation(&mut sys, &h, kind, false)?;
    let sol = sys.maximize(&[(t, 1.0)], opts)?;
    Ok(sol.value * s)
}

pub fn quad_margin(inst: &MatrixCubeInstance) -> Result<f64> {
    relaxation_margin(inst, Relaxation::Quadratic, &SolveOptions::default())
}

pub fn bental_margin(inst: &MatrixCubeInstance) -> Result<f64> {
    relaxation_margin(inst, Relaxation::BenTal, &SolveOptions::default())
}
