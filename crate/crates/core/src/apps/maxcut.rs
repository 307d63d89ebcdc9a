//! Binary quadratic minimization and MAXCUT through the matrix cube.
//!
//! For `B ≻ 0`, `[[t, xᵀ], [x, B⁻¹]] ⪰ 0` holds for every `x ∈ {±1}^n`
//! exactly when `t ≥ max_x xᵀBx`. Minimizing `xᵀAx` is turned into that form
//! with `B = cI − A`, `c = λ_max(A) + 1`, since `xᵀBx = cn − xᵀAx` on the
//! vertices.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cube::instance::{vertex, vertex_oracle, MatrixCubeInstance, VERTEX_LIMIT};
use crate::cube::search::{add_relaxation, Relaxation};
use crate::cube::{dual_solve, rank_one_extract, AffineSym};
use crate::error::{Error, Result};
use crate::numerics::{eig_sym, min_eig, SymMatrix};
use crate::sdp::{solve, LmiSystem, SdpProblem, SolveOptions, SparseSym};

/// Absolute tolerance of the vertex bisection on `t`.
pub const VERTEX_T_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    /// 0-based, `i < j`.
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Edges use 0-based endpoints in either order.
    pub fn new(node_count: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidInput("graph needs at least one node".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (a, b, w) in edges {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= node_count {
                return Err(Error::InvalidInput(format!("edge ({a}, {b}) outside {node_count} nodes")));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self loop at node {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("edge ({a}, {b}) has weight {w}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidInput(format!("duplicate edge ({a}, {b})")));
            }
            out.push((i, j, w));
        }
        Ok(Self { node_count, edges: out })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, 1.0))).collect();
        Self { node_count: n, edges }
    }

    pub fn cycle(n: usize) -> Self {
        let edges = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Self::new(n, edges).expect("cycle is simple")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn adjacency(&self) -> SymMatrix {
        let mut w = DMatrix::zeros(self.node_count, self.node_count);
        for &(i, j, v) in &self.edges {
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        SymMatrix::symmetrize(&w)
    }

    /// Weight of edges crossing the partition given by the signs of `x`.
    pub fn cut_value(&self, x: &[f64]) -> f64 {
        self.edges.iter().filter(|&&(i, j, _)| (x[i] > 0.0) != (x[j] > 0.0)).map(|e| e.2).sum()
    }
}

/// The family `t ↦ G_t` certifying `t ≥ max_x xᵀBx`.
#[derive(Debug, Clone)]
pub struct BqpCube {
    /// `B = cI − A`.
    pub b: SymMatrix,
    pub shift: f64,
    b_inv: SymMatrix,
}

impl BqpCube {
    pub fn n(&self) -> usize {
        self.b.dim()
    }

    fn border(&self) -> Vec<SymMatrix> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut h = SymMatrix::zeros(n + 1);
                h.set(0, i + 1, 1.0);
                h
            })
            .collect()
    }

    fn h0_constant(&self) -> SymMatrix {
        let n = self.n();
        let mut h = DMatrix::zeros(n + 1, n + 1);
        h.view_mut((1, 1), (n, n)).copy_from(self.b_inv.as_matrix());
        SymMatrix::symmetrize(&h)
    }

    /// `H_0(t) = [[t, 0], [0, B⁻¹]]`, `H_i = e_0 e_iᵀ + e_i e_0ᵀ`.
    pub fn instance(&self, t: f64) -> MatrixCubeInstance {
        let mut h0 = self.h0_constant();
        h0.set(0, 0, t);
        let mut h = vec![h0];
        h.extend(self.border());
        MatrixCubeInstance::unit(h).expect("consistent dimensions")
    }

    /// Bound on `min xᵀAx` implied by a certified `t`.
    pub fn lower_bound(&self, t: f64) -> f64 {
        self.shift * self.n() as f64 - t
    }

    /// Instance that is PSD on the cube iff `min xᵀAx ≥ bound`.
    pub fn claim_instance(&self, bound: f64) -> MatrixCubeInstance {
        self.instance(self.shift * self.n() as f64 - bound)
    }
}

/// Instance that is PSD on the cube iff every cut of `g` weighs at most `capacity`.
pub fn cut_claim_instance(g: &WeightedGraph, capacity: f64) -> Result<MatrixCubeInstance> {
    let n = g.node_count();
    let w = g.adjacency();
    let c1 = min_eig(&w)?.abs() + 1.0;
    let cube = bqp_to_cube(&(&w + &SymMatrix::identity(n).scale(c1)))?;
    // cut(x) = W/2 − (xᵀAx − c1 n)/4
    Ok(cube.claim_instance(c1 * n as f64 + 2.0 * g.total_weight() - 4.0 * capacity))
}

/// Builds the cube family for minimizing `xᵀAx` over `{±1}^n`; `A ≻ 0` required.
pub fn bqp_to_cube(a: &SymMatrix) -> Result<BqpCube> {
    let lam = min_eig(a)?;
    if lam <= 1e-8 * a.frobenius_norm() {
        return Err(Error::Precondition(format!("A must be positive definite (min eigenvalue {lam:.3e})")));
    }
    let shift = eig_sym(a)?.values.max() + 1.0;
    let b = &SymMatrix::identity(a.dim()).scale(shift) - a;
    let b_inv = b
        .as_matrix()
        .clone()
        .try_inverse()
        .map(|m| SymMatrix::symmetrize(&m))
        .ok_or_else(|| Error::Numerical("B is singular".into()))?;
    Ok(BqpCube { b, shift, b_inv })
}

#[derive(Debug, Clone, Serialize)]
pub struct BqpBound {
    pub method: Relaxation,
    /// Smallest `t` the method certifies.
    pub t: f64,
    /// Lower bound on `min xᵀAx` (the minimum itself for the vertex method).
    pub lower_bound: f64,
    /// Minimizing vertex, when known.
    pub argmin: Option<Vec<f64>>,
}

/// `min xᵀAx` by enumeration.
pub fn bqp_brute_force(a: &SymMatrix) -> Result<(f64, Vec<f64>)> {
    let n = a.dim();
    if n > VERTEX_LIMIT {
        return Err(Error::TooManyVertices { m: n, limit: VERTEX_LIMIT });
    }
    let am = a.as_matrix();
    let mut best = (f64::INFINITY, Vec::new());
    for idx in 0..(1usize << n) {
        let x = vertex(idx, n);
        let v = nalgebra::DVector::from_column_slice(&x);
        let val = (v.transpose() * am * &v)[(0, 0)];
        if val < best.0 {
            best = (val, x);
        }
    }
    Ok(best)
}

fn vertex_t(cube: &BqpCube) -> Result<(f64, Vec<f64>)> {
    let n = cube.n();
    if n > VERTEX_LIMIT {
        return Err(Error::TooManyVertices { m: n, limit: VERTEX_LIMIT });
    }
    let psd = |t: f64| -> Result<(bool, Vec<f64>)> {
        let r = vertex_oracle(&cube.instance(t))?;
        Ok((r.min_lambda >= 0.0, r.argmin))
    };
    // xᵀBx ≤ n λ_max(B) bounds the threshold from above.
    let mut hi = n as f64 * eig_sym(&cube.b)?.values.max() + 1.0;
    let mut lo = 0.0;
    let mut arg = psd(lo)?.1;
    while hi - lo > VERTEX_T_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        let (ok, a) = psd(mid)?;
        if ok {
            hi = mid;
        } else {
            lo = mid;
            arg = a;
        }
    }
    Ok((hi, arg))
}

/// Smallest `t` certifiable by `method`, found as one SDP with `t` a variable.
fn relaxed_t(cube: &BqpCube, method: Relaxation, opts: &SolveOptions) -> Result<f64> {
    let n = cube.n();
    let mut sys = LmiSystem::new();
    let t = sys.add_var();
    let mut e00 = DMatrix::zeros(n + 1, n + 1);
    e00[(0, 0)] = 1.0;
    let mut h = vec![AffineSym::constant(&cube.h0_constant()).with_term(t, e00)];
    h.extend(cube.border().iter().map(AffineSym::constant));
    add_relaxation(&mut sys, &h, method, false)?;
    let sol = sys.maximize(&[(t, -1.0)], opts)?;
    Ok(-sol.value)
}

pub fn bqp_lower_bound(a: &SymMatrix, method: Relaxation) -> Result<BqpBound> {
    let cube = bqp_to_cube(a)?;
    match method {
        Relaxation::Vertex => {
            let (t, arg) = vertex_t(&cube)?;
            Ok(BqpBound { method, t, lower_bound: cube.lower_bound(t), argmin: Some(arg) })
        }
        _ => {
            let t = relaxed_t(&cube, method, &SolveOptions::default())?;
            Ok(BqpBound { method, t, lower_bound: cube.lower_bound(t), argmin: None })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutMethod {
    Exact,
    Quad,
    Bental,
    GwSdp,
}

impl CutMethod {
    pub fn label(self) -> &'static str {
        match self {
            CutMethod::Exact => "exact",
            CutMethod::Quad => "psatz",
            CutMethod::Bental => "Ben-Tal",
            CutMethod::GwSdp => "relaxed SDP",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CutBound {
    pub method: CutMethod,
    /// Upper bound on the maximum cut (exact value for `Exact`).
    pub capacity_bound: f64,
    pub cuts: Vec<Vec<f64>>,
    pub cut_values: Vec<f64>,
    pub diagnostic: Option<String>,
}

fn exact_cut(g: &WeightedGraph) -> Result<CutBound> {
    let n = g.node_count();
    if n > VERTEX_LIMIT {
        return Err(Error::TooManyVertices { m: n, limit: VERTEX_LIMIT });
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    // x_1 = +1 fixes the global sign symmetry.
    for idx in 0..(1usize << (n - 1)) {
        let x = vertex(idx, n);
        let v = g.cut_value(&x);
        if v > best.0 {
            best = (v, x);
        }
    }
    Ok(CutBound { method: CutMethod::Exact, capacity_bound: best.0, cut_values: vec![best.0], cuts: vec![best.1], diagnostic: None })
}

fn gw_bound(g: &WeightedGraph, opts: &SolveOptions) -> Result<f64> {
    let n = g.node_count();
    let mut p = SdpProblem::new(vec![n]);
    p.objective[0] = g.adjacency().scale(0.25);
    for i in 0..n {
        p.add_constraint(vec![(0, SparseSym::from_triplets(n, [(i, i, 1.0)]))], 1.0);
    }
    let sol = solve(&p, opts)?;
    if !sol.is_optimal() {
        return Err(Error::Solver { status: sol.status });
    }
    Ok(g.total_weight() / 2.0 - sol.primal_obj)
}

/// Capacity bound and, where the dual allows it, extracted cuts.
pub fn maxcut_bound(g: &WeightedGraph, method: CutMethod, seed: u64) -> Result<CutBound> {
    let relax = match method {
        CutMethod::Exact => return exact_cut(g),
        CutMethod::GwSdp => {
            let b = gw_bound(g, &SolveOptions::default())?;
            return Ok(CutBound { method, capacity_bound: b, cuts: Vec::new(), cut_values: Vec::new(), diagnostic: None });
        }
        CutMethod::Quad => Relaxation::Quadratic,
        CutMethod::Bental => Relaxation::BenTal,
    };
    let n = g.node_count();
    let w = g.adjacency();
    let c1 = min_eig(&w)?.abs() + 1.0;
    let a = &w + &SymMatrix::identity(n).scale(c1);
    let cube = bqp_to_cube(&a)?;
    let t = relaxed_t(&cube, relax, &SolveOptions::default())?;
    let lb = cube.lower_bound(t);
    let capacity_bound = g.total_weight() / 2.0 - (lb - c1 * n as f64) / 4.0;

    let mut out = CutBound { method, capacity_bound, cuts: Vec::new(), cut_values: Vec::new(), diagnostic: None };
    match dual_solve(&cube.instance(t)).and_then(|d| rank_one_extract(&d, crate::cube::dual::DEFAULT_RANK_TOL, seed)) {
        Ok(ex) => {
            out.diagnostic = ex.diagnostic;
            for atom in ex.atoms {
                if !out.cuts.contains(&atom.delta) && !out.cuts.contains(&atom.delta.iter().map(|v| -v).collect()) {
                    out.cut_values.push(g.cut_value(&atom.delta));
                    out.cuts.push(atom.delta);
                }
            }
        }
        Err(e) => out.diagnostic = Some(format!("cut extraction failed: {e}")),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bqp_examples() {
        let a = SymMatrix::identity(2);
        let r = bqp_lower_bound(&a, Relaxation::Vertex).unwrap();
        assert_abs_diff_eq!(r.lower_bound, 2.0, epsilon = 1e-8);
        let a = SymMatrix::from_diag(&[1.0, 4.0]);
        let r = bqp_lower_bound(&a, Relaxation::Vertex).unwrap();
        assert_abs_diff_eq!(r.lower_bound, 5.0, epsilon = 1e-8);
        let q = bqp_lower_bound(&a, Relaxation::Quadratic).unwrap();
        assert!(q.lower_bound <= 5.0 + 1e-6);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(bqp_to_cube(&SymMatrix::from_diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn single_edge() {
        let g = WeightedGraph::new(2, vec![(0, 1, 1.0)]).unwrap();
        for m in [CutMethod::Exact, CutMethod::Quad, CutMethod::Bental, CutMethod::GwSdp] {
            let b = maxcut_bound(&g, m, 0).unwrap();
            assert_abs_diff_eq!(b.capacity_bound, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn graph_validation() {
        assert!(WeightedGraph::new(2, vec![(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(WeightedGraph::new(2, vec![(0, 2, 1.0)]).is_err());
        assert!(WeightedGraph::new(2, vec![(0, 1, -1.0)]).is_err());
        assert_eq!(WeightedGraph::cycle(5).cut_value(&[1.0, -1.0, 1.0, -1.0, 1.0]), 4.0);
    }

    #[test]
    fn claim_instances() {
        let g = WeightedGraph::complete(4);
        // Max cut of K4 is 4.
        assert!(vertex_oracle(&cut_claim_instance(&g, 4.0 + 1e-6).unwrap()).unwrap().min_lambda >= 0.0);
        assert!(vertex_oracle(&cut_claim_instance(&g, 3.9).unwrap()).unwrap().min_lambda < 0.0);
        let cube = bqp_to_cube(&SymMatrix::from_diag(&[1.0, 4.0])).unwrap();
        assert!(vertex_oracle(&cube.claim_instance(4.9)).unwrap().min_lambda >= 0.0);
        assert!(vertex_oracle(&cube.claim_instance(5.1)).unwrap().min_lambda < 0.0);
    }

    #[test]
    fn c5_exact() {
        let b = maxcut_bound(&WeightedGraph::cycle(5), CutMethod::Exact, 0).unwrap();
        assert_eq!(b.capacity_bound, 4.0);
    }
}
