//! Dense symmetric linear algebra.
//!
//! Everything here works on small dense matrices (dimensions up to a few
//! hundred). Eigen-decompositions are delegated to nalgebra's symmetric
//! tridiagonal QR; the Cholesky factorization is our own so that PSD tests
//! have an independent second route.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Iteration cap handed to the symmetric eigensolver.
const EIG_MAX_ITERS: usize = 10_000;

/// A real symmetric matrix.
///
/// Both triangles are kept in memory but every constructor symmetrizes, so
/// `a[(i, j)] == a[(j, i)]` holds bit-for-bit.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.0)
    }
}

/// Serializes as nested rows.
impl serde::Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.get(i, j)).collect()).collect();
        serde::Serialize::serialize(&rows, s)
    }
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// A 1x1 matrix.
    pub fn scalar(v: f64) -> Self {
        SymMatrix(DMatrix::from_element(1, 1, v))
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Averages `m` with its transpose. Panics if `m` is not square.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
        SymMatrix((m + m.transpose()) * 0.5)
    }

    /// Accepts a matrix that must already be symmetric up to
    /// `tol * max(1, ‖m‖_F)`; the small asymmetry is averaged out.
    pub fn try_from_matrix(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Dimension("matrix dimension must be at least 1".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let asym = (&m - m.transpose()).amax();
        let scale = m.norm().max(1.0);
        if asym > tol * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        Ok(Self::symmetrize(&m))
    }

    /// Row-major nested rows, symmetry checked at `1e-9` relative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows must form a square matrix".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::try_from_matrix(m, 1e-9)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Sets entry `(i, j)` and its mirror.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Frobenius inner product `tr(A B)`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `Bᵀ A B` for an arbitrary (possibly rectangular) `B`.
    pub fn congruence(&self, b: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::symmetrize(&(b.transpose() * &self.0 * b))
    }

    /// Extracts the `size x size` diagonal sub-block starting at `offset`.
    pub fn diag_block(&self, offset: usize, size: usize) -> SymMatrix {
        SymMatrix(self.0.view((offset, offset), (size, size)).into_owned())
    }

    /// Row-major copy of all entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix(-&self.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// (columns of `vectors`).
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn eig_sym(a: &SymMatrix) -> Result<SymEigen> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("eigendecomposition of non-finite matrix".into()));
    }
    let n = a.dim();
    let eig = nalgebra::SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, EIG_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

pub fn min_eig(a: &SymMatrix) -> Result<f64> {
    Ok(eig_sym(a)?.values[0])
}

/// `true` iff `λ_min(a) ≥ −tol · max(1, ‖a‖_F)`.
pub fn psd_check(a: &SymMatrix, tol: f64) -> Result<bool> {
    Ok(min_eig(a)? >= -tol * a.frobenius_norm().max(1.0))
}

/// Minimum eigenvalue divided by `max(1, ‖a‖_F)`.
pub fn relative_min_eig(a: &SymMatrix) -> Result<f64> {
    Ok(min_eig(a)? / a.frobenius_norm().max(1.0))
}

/// Lower-triangular Cholesky factor, or `None` when a pivot drops below
/// `-pivot_tol · max(1, max|a_ii|)`. Pivots in `[-tol, tol]` are treated as
/// zero and their column is skipped, which makes this a semidefinite test.
pub fn cholesky(a: &SymMatrix, pivot_tol: f64) -> Option<DMatrix<f64>> {
    let n = a.dim();
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(1.0_f64, f64::max);
    let thresh = pivot_tol * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -thresh {
            return None;
        }
        if d <= thresh {
            // Zero pivot: the rest of the column must vanish too.
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > 10.0 * (thresh * scale).sqrt() {
                    return None;
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Solves `M x = b` by LU with partial pivoting.
pub fn solve_linear(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if m.nrows() != m.ncols() || m.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "solve_linear: {}x{} system with rhs of length {}",
            m.nrows(),
            m.ncols(),
            b.len()
        )));
    }
    let lu = m.clone().lu();
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))?;
    let resid = (m * &x - b).norm();
    let bound = 1e-10 * (m.norm() * x.norm() + b.norm());
    if !x.iter().all(|v| v.is_finite()) || resid > bound.max(f64::MIN_POSITIVE) * 1e3 {
        return Err(Error::Numerical(format!(
            "linear system is numerically singular (residual {resid:.3e})"
        )));
    }
    Ok(x)
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}
