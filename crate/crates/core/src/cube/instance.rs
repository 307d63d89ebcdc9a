use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mpoly::{MatrixPoly, MultiExponent};
use crate::numerics::{self, SymMatrix};
use crate::sdp::LmiBlock;

/// Largest `m` accepted by vertex enumeration.
pub const VERTEX_LIMIT: usize = 24;

/// `G(δ) = H_0 + Σ δ_i H_i ⪰ 0` for `|δ_i| ≤ R`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCubeInstance {
    n: usize,
    h: Vec<SymMatrix>,
    radius: f64,
}

impl MatrixCubeInstance {
    pub fn new(h: Vec<SymMatrix>, radius: f64) -> Result<Self> {
        let Some(first) = h.first() else {
            return Err(Error::InvalidInput("instance needs at least H_0".into()));
        };
        let n = first.dim();
        if let Some((i, bad)) = h.iter().enumerate().find(|(_, hi)| hi.dim() != n) {
            return Err(Error::Dimension(format!("H_{i} has dimension {}, expected {n}", bad.dim())));
        }
        if h.iter().any(|hi| !hi.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient matrix".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { n, h, radius })
    }

    pub fn unit(h: Vec<SymMatrix>) -> Result<Self> {
        Self::new(h, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.h.len() - 1
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Coefficients as given (before radius folding).
    pub fn raw(&self) -> &[SymMatrix] {
        &self.h
    }

    /// `H_0, R·H_1, …, R·H_m`: the unit-cube coefficients.
    pub fn normalized(&self) -> Vec<SymMatrix> {
        self.h
            .iter()
            .enumerate()
            .map(|(i, hi)| if i == 0 || self.radius == 1.0 { hi.clone() } else { hi.scale(self.radius) })
            .collect()
    }

    /// The same problem posed on the unit cube.
    pub fn folded(&self) -> Self {
        Self { n: self.n, h: self.normalized(), radius: 1.0 }
    }

    /// `max_i ‖H_i‖_F` of the unit-cube coefficients (1 for the zero instance).
    pub fn coeff_scale(&self) -> f64 {
        let s = self.normalized().iter().map(SymMatrix::frobenius_norm).fold(0.0, f64::max);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// `H_0 − tI` with the other coefficients untouched.
    pub fn shifted(&self, t: f64) -> Self {
        let mut h = self.h.clone();
        h[0] = &h[0] - &SymMatrix::identity(self.n).scale(t);
        Self { n: self.n, h, radius: self.radius }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { n: self.n, h: self.h.iter().map(|hi| hi.scale(lambda)).collect(), radius: self.radius }
    }

    /// `G(δ)` in unit-cube coordinates.
    pub fn eval(&self, delta: &[f64]) -> Result<SymMatrix> {
        if delta.len() != self.m() {
            return Err(Error::Dimension(format!("δ has length {}, expected {}", delta.len(), self.m())));
        }
        let h = self.normalized();
        let mut g = h[0].as_matrix().clone();
        for (d, hi) in delta.iter().zip(&h[1..]) {
            g += hi.as_matrix() * *d;
        }
        Ok(SymMatrix::symmetrize(&g))
    }
}

/// `G(δ)` as a matrix polynomial on the unit cube.
pub fn g_poly(inst: &MatrixCubeInstance) -> MatrixPoly {
    let m = inst.m();
    let h = inst.normalized();
    let mut p = MatrixPoly::constant(h[0].clone(), m);
    for (i, hi) in h[1..].iter().enumerate() {
        p.add_term(MultiExponent::unit(m, i), hi);
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexResult {
    pub min_lambda: f64,
    pub argmin: Vec<f64>,
}

/// Vertex number `idx` in enumeration order: `δ_1` is the most significant
/// bit and a set bit means `−1`.
pub fn vertex(idx: usize, m: usize) -> Vec<f64> {
    (0..m).map(|i| if (idx >> (m - 1 - i)) & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

pub fn vertex_oracle(inst: &MatrixCubeInstance) -> Result<VertexResult> {
    let m = inst.m();
    if m > VERTEX_LIMIT {
        return Err(Error::TooManyVertices { m, limit: VERTEX_LIMIT });
    }
    let h = inst.normalized();
    let mut best: Option<VertexResult> = None;
    let mut g = DMatrix::zeros(inst.n(), inst.n());
    for idx in 0..(1usize << m) {
        let delta = vertex(idx, m);
        g.copy_from(h[0].as_matrix());
        for (d, hi) in delta.iter().zip(&h[1..]) {
            g += hi.as_matrix() * *d;
        }
        let lam = numerics::min_eig(&SymMatrix::symmetrize(&g))?;
        if best.as_ref().is_none_or(|b| lam < b.min_lambda) {
            best = Some(VertexResult { min_lambda: lam, argmin: delta });
        }
    }
    Ok(best.expect("at least one vertex"))
}

/// A symmetric matrix affine in LMI variables: `C + Σ y_k M_k`.
#[derive(Debug, Clone)]
pub struct AffineSym {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl AffineSym {
    pub fn constant(c: &SymMatrix) -> Self {
        Self { constant: c.as_matrix().clone(), terms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn with_term(mut self, var: usize, m: DMatrix<f64>) -> Self {
        self.terms.push((var, m));
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: &self.constant * s,
            terms: self.terms.iter().map(|(k, m)| (*k, m * s)).collect(),
        }
    }

    /// Adds `s ·` self at block offset `(r0, c0)`.
    pub fn place(&self, blk: &mut LmiBlock, r0: usize, c0: usize, s: f64) {
        blk.add_constant_block(r0, c0, &(&self.constant * s));
        for (k, m) in &self.terms {
            blk.add_var_block(*k, r0, c0, &(m * s));
        }
    }

    pub fn value(&self, y: &[f64]) -> SymMatrix {
        let mut v = self.constant.clone();
        for (k, m) in &self.terms {
            v += m * y[*k];
        }
        SymMatrix::symmetrize(&v)
    }
}
