//! Symmetric-matrix-valued polynomials in `δ ∈ ℝ^m`.
//!
//! A [`MatrixPoly`] is a sparse map from multi-exponents to symmetric
//! coefficient matrices. Scalar polynomials are the `n = 1` case. A
//! [`GramForm`] is a PSD matrix over a monomial basis; expanding it yields
//! a sum-of-squares matrix polynomial.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{self, SymMatrix};

/// Coefficients whose largest entry falls below this are dropped.
pub const PRUNE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiExponent(Vec<u32>);

impl MultiExponent {
    pub fn new(alpha: Vec<u32>) -> Self {
        MultiExponent(alpha)
    }

    pub fn zero(m: usize) -> Self {
        MultiExponent(vec![0; m])
    }

    /// The exponent of `δ_i` (0-based `i`).
    pub fn unit(m: usize, i: usize) -> Self {
        let mut a = vec![0; m];
        a[i] = 1;
        MultiExponent(a)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn mul(&self, other: &MultiExponent) -> MultiExponent {
        debug_assert_eq!(self.len(), other.len());
        MultiExponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, delta: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(delta)
            .map(|(&a, &d)| d.powi(a as i32))
            .product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPoly {
    n: usize,
    m: usize,
    terms: BTreeMap<MultiExponent, SymMatrix>,
}

impl MatrixPoly {
    pub fn zero(n: usize, m: usize) -> Self {
        MatrixPoly { n, m, terms: BTreeMap::new() }
    }

    pub fn constant(c: SymMatrix, m: usize) -> Self {
        let mut p = Self::zero(c.dim(), m);
        p.add_term(MultiExponent::zero(m), &c);
        p
    }

    /// Scalar (`n = 1`) monomial `c · δ^α`.
    pub fn scalar_monomial(alpha: MultiExponent, c: f64) -> Self {
        let mut p = Self::zero(1, alpha.len());
        p.add_term(alpha, &SymMatrix::scalar(c));
        p
    }

    /// The scalar polynomial `1 − δ_i²`.
    pub fn one_minus_square(m: usize, i: usize) -> Self {
        let mut p = Self::scalar_monomial(MultiExponent::zero(m), 1.0);
        let mut sq = vec![0; m];
        sq[i] = 2;
        p.add_term(MultiExponent::new(sq), &SymMatrix::scalar(-1.0));
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiExponent, &SymMatrix)> {
        self.terms.iter()
    }

    pub fn coeff(&self, alpha: &MultiExponent) -> Option<&SymMatrix> {
        self.terms.get(alpha)
    }

    /// Adds `c · δ^α`, pruning the coefficient if it cancels.
    pub fn add_term(&mut self, alpha: MultiExponent, c: &SymMatrix) {
        assert_eq!(alpha.len(), self.m, "exponent length must equal m");
        assert_eq!(c.dim(), self.n, "coefficient dimension must equal n");
        match self.terms.get_mut(&alpha) {
            Some(existing) => {
                let sum = &*existing + c;
                if sum.max_abs() < PRUNE_TOL {
                    self.terms.remove(&alpha);
                } else {
                    *existing = sum;
                }
            }
            None => {
                if c.max_abs() >= PRUNE_TOL {
                    self.terms.insert(alpha, c.clone());
                }
            }
        }
    }

    fn check_compatible(&self, other: &MatrixPoly) -> Result<()> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::Dimension(format!(
                "polynomials over (n={}, m={}) and (n={}, m={})",
                self.n, self.m, other.n, other.m
            )));
        }
        Ok(())
    }

    pub fn eval(&self, delta: &[f64]) -> Result<SymMatrix> {
        if delta.len() != self.m {
            return Err(Error::Dimension(format!(
                "evaluation point has length {}, polynomial has m = {}",
                delta.len(),
                self.m
            )));
        }
        let mut acc = DMatrix::zeros(self.n, self.n);
        for (alpha, c) in &self.terms {
            acc += c.as_matrix() * alpha.eval(delta);
        }
        Ok(SymMatrix::symmetrize(&acc))
    }

    pub fn add(&self, other: &MatrixPoly) -> Result<MatrixPoly> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (alpha, c) in &other.terms {
            out.add_term(alpha.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MatrixPoly) -> Result<MatrixPoly> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> MatrixPoly {
        let mut out = MatrixPoly::zero(self.n, self.m);
        for (alpha, c) in &self.terms {
            out.add_term(alpha.clone(), &c.scale(s));
        }
        out
    }

    /// Product with a scalar polynomial `s` (which must have `n = 1`).
    pub fn mul_scalar_poly(&self, s: &MatrixPoly) -> Result<MatrixPoly> {
        if s.n != 1 {
            return Err(Error::Dimension(format!(
                "scalar multiplier must have n = 1, got n = {}",
                s.n
            )));
        }
        if s.m != self.m {
            return Err(Error::Dimension(format!(
                "variable counts differ: {} vs {}",
                self.m, s.m
            )));
        }
        let mut out = MatrixPoly::zero(self.n, self.m);
        for (beta, sc) in &s.terms {
            let sv = sc.get(0, 0);
            for (alpha, c) in &self.terms {
                out.add_term(alpha.mul(beta), &c.scale(sv));
            }
        }
        Ok(out)
    }

    /// Every exponent has each `α_i ≤ 2`.
    pub fn in_q1(&self) -> bool {
        self.terms.keys().all(|a| a.max_degree() <= 2)
    }

    /// Every exponent has `Σ α_i ≤ 2`.
    pub fn in_q2(&self) -> bool {
        self.terms.keys().all(|a| a.total_degree() <= 2)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(MultiExponent::total_degree).max().unwrap_or(0)
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(SymMatrix::frobenius_norm).fold(0.0, f64::max)
    }
}

/// `max_α ‖C_α(p) − C_α(q)‖_F`, together with the worst exponent.
pub fn coeff_residual_at(p: &MatrixPoly, q: &MatrixPoly) -> Result<(f64, Option<MultiExponent>)> {
    let diff = p.sub(q)?;
    let mut worst = (0.0, None);
    for (alpha, c) in diff.terms() {
        let r = c.frobenius_norm();
        if r > worst.0 {
            worst = (r, Some(alpha.clone()));
        }
    }
    Ok(worst)
}

pub fn coeff_residual(p: &MatrixPoly, q: &MatrixPoly) -> Result<f64> {
    Ok(coeff_residual_at(p, q)?.0)
}

/// A Gram representation `(z ⊗ I)ᵀ G (z ⊗ I)` of an SOS matrix polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct GramForm {
    pub basis: Vec<MultiExponent>,
    pub gram: SymMatrix,
}

impl GramForm {
    pub fn new(basis: Vec<MultiExponent>, gram: SymMatrix) -> Result<Self> {
        if basis.is_empty() || !gram.dim().is_multiple_of(basis.len()) {
            return Err(Error::Dimension(format!(
                "gram of dimension {} does not split into {} blocks",
                gram.dim(),
                basis.len()
            )));
        }
        let m = basis[0].len();
        if basis.iter().any(|b| b.len() != m) {
            return Err(Error::Dimension("basis exponents have mixed lengths".into()));
        }
        Ok(GramForm { basis, gram })
    }

    /// Block size `n`.
    pub fn block_dim(&self) -> usize {
        self.gram.dim() / self.basis.len()
    }

    pub fn num_vars(&self) -> usize {
        self.basis[0].len()
    }

    /// Relative minimum eigenvalue of the Gram matrix.
    pub fn psd_margin(&self) -> Result<f64> {
        numerics::relative_min_eig(&self.gram)
    }
}

pub fn expand_gram(g: &GramForm) -> MatrixPoly {
    let n = g.block_dim();
    let k = g.basis.len();
    let gm = g.gram.as_matrix();
    let mut out = MatrixPoly::zero(n, g.num_vars());
    for a in 0..k {
        for b in a..k {
            let block = gm.view((a * n, b * n), (n, n));
            let coeff = if a == b {
                SymMatrix::symmetrize(&block.into_owned())
            } else {
                SymMatrix::symmetrize(&(block.into_owned() * 2.0))
            };
            out.add_term(g.basis[a].mul(&g.basis[b]), &coeff);
        }
    }
    out
}
