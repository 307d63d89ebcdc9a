//! Closed-form certificates for the cases where simple certificates are exact.

use nalgebra::DMatrix;

use super::certificate::{verify_certificate, Certificate};
use super::instance::{vertex_oracle, MatrixCubeInstance};
use crate::error::{Error, Result};
use crate::numerics::{psd_check, SymMatrix};

const SIGN_TOL: f64 = 1e-9;

fn require_vertex_psd(inst: &MatrixCubeInstance) -> Result<()> {
    let v = vertex_oracle(inst)?;
    if v.min_lambda < -super::full::PRECONDITION_TOL * inst.coeff_scale() {
        return Err(Error::Precondition(format!(
            "G is not PSD at vertex {:?} (min eigenvalue {:.6e})",
            v.argmin, v.min_lambda
        )));
    }
    Ok(())
}

fn checked(inst: &MatrixCubeInstance, cert: Certificate) -> Result<Certificate> {
    let r = verify_certificate(inst, &cert)?;
    if r.valid {
        Ok(cert)
    } else {
        Err(Error::ConstructionMismatch { residual: r.residual, exponent: Vec::new() })
    }
}

/// Gram matrix with `L_00`, `L_0i = H_i / 2`, `L_ii`, and off-diagonal `L_ij`.
fn assemble(l00: &DMatrix<f64>, h: &[SymMatrix], diag: &[DMatrix<f64>], off: &[(usize, usize, DMatrix<f64>)]) -> SymMatrix {
    let n = l00.nrows();
    let m = diag.len();
    let mut l = DMatrix::zeros(n * (m + 1), n * (m + 1));
    l.view_mut((0, 0), (n, n)).copy_from(l00);
    for i in 0..m {
        let half = h[i + 1].as_matrix() * 0.5;
        l.view_mut((0, (i + 1) * n), (n, n)).copy_from(&half);
        l.view_mut(((i + 1) * n, 0), (n, n)).copy_from(&half);
        l.view_mut(((i + 1) * n, (i + 1) * n), (n, n)).copy_from(&diag[i]);
    }
    for (i, j, b) in off {
        l.view_mut((i * n, j * n), (n, n)).copy_from(b);
        l.view_mut((j * n, i * n), (n, n)).copy_from(&b.transpose());
    }
    SymMatrix::symmetrize(&l)
}

/// Closed-form certificate on the unit simplex `{δ ≥ 0, Σ δ_i ≤ 1}`:
/// `S_0 = 0`, `S_i = H_0 + H_i`, `S_{m+1} = H_0`. `None` when some vertex fails.
pub fn simplex_test(h: &[SymMatrix]) -> Result<Option<Certificate>> {
    let Some(h0) = h.first() else {
        return Err(Error::InvalidInput("simplex test needs H_0".into()));
    };
    let n = h0.dim();
    if h.iter().any(|hi| hi.dim() != n) {
        return Err(Error::Dimension("coefficient dimensions differ".into()));
    }
    let mut s = vec![SymMatrix::zeros(n)];
    for hi in &h[1..] {
        s.push(h0 + hi);
    }
    s.push(h0.clone());
    for si in &s[1..] {
        if !psd_check(si, SIGN_TOL)? {
            return Ok(None);
        }
    }
    Ok(Some(Certificate::Simplex { s }))
}

/// Quadratic certificate for `m ≤ 2` built from Schur complements of `N_2`.
pub fn m2_certificate(inst: &MatrixCubeInstance) -> Result<Certificate> {
    let m = inst.m();
    if m > 2 {
        return Err(Error::Precondition(format!("m2_certificate needs m <= 2, got {m}")));
    }
    require_vertex_psd(inst)?;
    let n = inst.n();
    let h = inst.normalized();
    if m == 0 {
        return checked(inst, Certificate::Quadratic { x: Vec::new(), gram: h[0].clone() });
    }
    let h0 = h[0].as_matrix();
    let h1 = h[1].as_matrix().clone();
    let h2 = if m == 2 { h[2].as_matrix().clone() } else { DMatrix::zeros(n, n) };

    let eps = SIGN_TOL * h[0].frobenius_norm();
    let mut reg = h0.clone();
    for i in 0..n {
        reg[(i, i)] += eps;
    }
    let inv = reg.clone().try_inverse().ok_or_else(|| Error::Numerical("H_0 + εI is singular".into()))?;
    let q1 = &h2 * &inv * &h2;
    let q2 = &h2 * &inv * &h1;
    let q3 = &h1 * &inv * &h1;
    let w1 = (h0 + &q3 - &q1) * 0.25;
    let w2 = (h0 - &q3 + &q1) * 0.25;
    let skew = (q2.transpose() - &q2) * 0.25;

    let cert = if m == 2 {
        let l00 = h0 - &w1 - &w2;
        let gram = assemble(&l00, &h, &[w1.clone(), w2.clone()], &[(1, 2, skew)]);
        Certificate::Quadratic { x: vec![SymMatrix::symmetrize(&w1), SymMatrix::symmetrize(&w2)], gram }
    } else {
        let l00 = h0 - &w1;
        let gram = assemble(&l00, &h, std::slice::from_ref(&w1), &[]);
        Certificate::Quadratic { x: vec![SymMatrix::symmetrize(&w1)], gram }
    };
    checked(inst, cert)
}

/// Quadratic certificate when `H_1..H_m` are all PSD or all NSD.
pub fn definite_case_certificate(inst: &MatrixCubeInstance) -> Result<Certificate> {
    let h = inst.normalized();
    let mut all_psd = true;
    let mut all_nsd = true;
    for hi in &h[1..] {
        all_psd &= psd_check(hi, SIGN_TOL)?;
        all_nsd &= psd_check(&-hi, SIGN_TOL)?;
    }
    let sign = if all_psd {
        1.0
    } else if all_nsd {
        -1.0
    } else {
        return Err(Error::Precondition("coefficients H_1..H_m are not uniformly semidefinite".into()));
    };
    require_vertex_psd(inst)?;
    let halves: Vec<DMatrix<f64>> = h[1..].iter().map(|hi| hi.as_matrix() * (0.5 * sign)).collect();
    let mut l00 = h[0].as_matrix().clone();
    for q in &halves {
        l00 -= q;
    }
    let gram = assemble(&l00, &h, &halves, &[]);
    let x = halves.iter().map(SymMatrix::symmetrize).collect();
    checked(inst, Certificate::Quadratic { x, gram })
}

/// Quadratic certificate obtained from a Ben-Tal one.
pub fn quad_from_bental(inst: &MatrixCubeInstance, x: &[SymMatrix]) -> Result<Certificate> {
    let h = inst.normalized();
    let halves: Vec<DMatrix<f64>> = x.iter().map(|xi| xi.as_matrix() * 0.5).collect();
    let mut l00 = h[0].as_matrix().clone();
    for q in &halves {
        l00 -= q;
    }
    let gram = assemble(&l00, &h, &halves, &[]);
    let x = halves.iter().map(SymMatrix::symmetrize).collect();
    Ok(Certificate::Quadratic { x, gram })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scal(v: &[f64]) -> MatrixCubeInstance {
        MatrixCubeInstance::unit(v.iter().map(|&x| SymMatrix::scalar(x)).collect()).unwrap()
    }

    #[test]
    fn simplex_examples() {
        let i = SymMatrix::identity(2);
        assert!(simplex_test(&[i.clone(), i.scale(-0.5)]).unwrap().is_some());
        assert!(simplex_test(&[i.clone(), i.scale(-2.0)]).unwrap().is_none());
        let Some(Certificate::Simplex { s }) = simplex_test(&[SymMatrix::zeros(2)]).unwrap() else { panic!() };
        assert!(s.iter().all(|si| si.max_abs() == 0.0));
    }

    #[test]
    fn m2_examples() {
        let inst = scal(&[2.0, 1.0, 1.0]);
        let cert = m2_certificate(&inst).unwrap();
        let r = verify_certificate(&inst, &cert).unwrap();
        assert!(r.valid && r.residual <= 1e-9);

        let inst = scal(&[1.0, -0.8]);
        assert!(m2_certificate(&inst).is_ok());

        assert!(matches!(m2_certificate(&scal(&[1.0, 2.0])), Err(Error::Precondition(_))));
    }

    #[test]
    fn m2_matrix_example() {
        let h = vec![
            SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.5]]).unwrap(),
            SymMatrix::from_rows(&[vec![0.4, 0.5], vec![0.5, -0.2]]).unwrap(),
            SymMatrix::from_rows(&[vec![-0.3, 0.2], vec![0.2, 0.6]]).unwrap(),
        ];
        let inst = MatrixCubeInstance::unit(h).unwrap();
        assert!(m2_certificate(&inst).is_ok());
    }

    #[test]
    fn definite_examples() {
        let i = SymMatrix::identity(2);
        let inst = MatrixCubeInstance::unit(vec![i.scale(3.0), i.clone(), i.clone()]).unwrap();
        assert!(definite_case_certificate(&inst).is_ok());

        let mixed = MatrixCubeInstance::unit(vec![i.scale(3.0), i.clone(), i.scale(-1.0)]).unwrap();
        assert!(matches!(definite_case_certificate(&mixed), Err(Error::Precondition(_))));

        let neg = MatrixCubeInstance::unit(vec![i.scale(2.0), SymMatrix::from_diag(&[-1.0, -0.5])]).unwrap();
        assert!(definite_case_certificate(&neg).is_ok());
    }

    #[test]
    fn embedding_from_bental() {
        let inst = scal(&[3.0, 1.0, -1.0]);
        let x = vec![SymMatrix::scalar(1.0), SymMatrix::scalar(1.5)];
        assert!(verify_certificate(&inst, &Certificate::BenTal { x: x.clone() }).unwrap().valid);
        let q = quad_from_bental(&inst, &x).unwrap();
        assert!(verify_certificate(&inst, &q).unwrap().valid);
    }
}
