use serde::{Deserialize, Serialize};

use super::instance::{g_poly, MatrixCubeInstance};
use crate::error::{Error, Result};
use crate::mpoly::{coeff_residual, expand_gram, GramForm, MatrixPoly, MultiExponent};
use crate::numerics::{relative_min_eig, SymMatrix};

/// Identity residuals are accepted up to `VERIFY_TOL · max(1, max_α ‖C_α(G)‖_F)`.
pub const VERIFY_TOL: f64 = 1e-8;
/// PSD memberships are accepted down to this relative minimum eigenvalue.
pub const PSD_TOL: f64 = 1e-8;

/// How a full certificate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullPath {
    ClosedForm,
    SdpFallback,
}

/// Positivity certificates for `G` on the unit cube (or unit simplex).
///
/// All matrices refer to the radius-folded coefficients of the instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// `H_0 − Σ X_i ⪰ 0` and `X_i ± H_i ⪰ 0`.
    BenTal { x: Vec<SymMatrix> },
    /// `G = S_0 + Σ (1 − δ_i²) X_i` with `S_0` the Gram form of `gram`
    /// over the basis `(1, δ_1, …, δ_m)`.
    Quadratic { x: Vec<SymMatrix>, gram: SymMatrix },
    /// `G = S_0 + Σ (1 − δ_i²) S_i` with `S_0` SOS and every `S_i` of degree
    /// at most two in each variable.
    Full { s0: GramForm, s: Vec<MatrixPoly>, path: FullPath },
    /// `G = S_0 + Σ δ_i S_i + (1 − Σ δ_i) S_{m+1}` with constant PSD `S_i`.
    Simplex { s: Vec<SymMatrix> },
}

impl Certificate {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Certificate::BenTal { .. } => "bental",
            Certificate::Quadratic { .. } => "quadratic",
            Certificate::Full { .. } => "full",
            Certificate::Simplex { .. } => "simplex",
        }
    }

    /// `S_0` as a polynomial (`None` for the Ben-Tal variant, which has none).
    pub fn s0(&self, m: usize) -> Option<MatrixPoly> {
        match self {
            Certificate::BenTal { .. } => None,
            Certificate::Quadratic { gram, .. } => {
                GramForm::new(quad_basis(m), gram.clone()).ok().map(|g| expand_gram(&g))
            }
            Certificate::Full { s0, .. } => Some(expand_gram(s0)),
            Certificate::Simplex { s } => s.first().map(|c| MatrixPoly::constant(c.clone(), m)),
        }
    }
}

/// `(1, δ_1, …, δ_m)`.
pub fn quad_basis(m: usize) -> Vec<MultiExponent> {
    std::iter::once(MultiExponent::zero(m)).chain((0..m).map(|i| MultiExponent::unit(m, i))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub valid: bool,
    /// Largest coefficient mismatch of the defining identity.
    pub residual: f64,
    pub tolerance: f64,
    /// Relative minimum eigenvalue of every matrix required to be PSD.
    pub psd_margins: Vec<f64>,
    pub degree_ok: bool,
    pub message: Option<String>,
}

fn check_dims(n: usize, mats: &[&SymMatrix]) -> Result<()> {
    match mats.iter().find(|a| a.dim() != n) {
        Some(bad) => Err(Error::Dimension(format!("certificate matrix of dimension {}, expected {n}", bad.dim()))),
        None => Ok(()),
    }
}

fn count(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what}: got {got}, expected {want}")))
    }
}

/// Re-checks a certificate from scratch against the instance.
pub fn verify_certificate(inst: &MatrixCubeInstance, cert: &Certificate) -> Result<VerifyReport> {
    let n = inst.n();
    let m = inst.m();
    let h = inst.normalized();
    let g = g_poly(inst);
    let tolerance = VERIFY_TOL * g.max_coeff_norm().max(1.0);
    let mut margins = Vec::new();
    let mut residual = 0.0;
    let mut degree_ok = true;

    match cert {
        Certificate::BenTal { x } => {
            count("Ben-Tal matrices", x.len(), m)?;
            check_dims(n, &x.iter().collect::<Vec<_>>())?;
            let mut rest = h[0].clone();
            for xi in x {
                rest = &rest - xi;
            }
            margins.push(relative_min_eig(&rest)?);
            for (xi, hi) in x.iter().zip(&h[1..]) {
                margins.push(relative_min_eig(&(xi + hi))?);
                margins.push(relative_min_eig(&(xi - hi))?);
            }
        }
        Certificate::Quadratic { x, gram } => {
            count("quadratic multipliers", x.len(), m)?;
            check_dims(n, &x.iter().collect::<Vec<_>>())?;
            count("gram dimension", gram.dim(), n * (m + 1))?;
            let s0 = expand_gram(&GramForm::new(quad_basis(m), gram.clone())?);
            degree_ok = s0.in_q2();
            let mut rhs = s0;
            for (i, xi) in x.iter().enumerate() {
                let term = MatrixPoly::constant(xi.clone(), m).mul_scalar_poly(&MatrixPoly::one_minus_square(m, i))?;
                rhs = rhs.add(&term)?;
            }
            residual = coeff_residual(&g, &rhs)?;
            margins.push(relative_min_eig(gram)?);
            for xi in x {
                margins.push(relative_min_eig(xi)?);
            }
        }
        Certificate::Full { s0, s, .. } => {
            count("full multipliers", s.len(), m)?;
            if s0.block_dim() != n || s0.num_vars() != m || s.iter().any(|p| p.n() != n || p.m() != m) {
                return Err(Error::Dimension("full certificate does not match the instance".into()));
            }
            let mut rhs = expand_gram(s0);
            for (i, si) in s.iter().enumerate() {
                degree_ok &= si.in_q1();
                rhs = rhs.add(&si.mul_scalar_poly(&MatrixPoly::one_minus_square(m, i))?)?;
            }
            residual = coeff_residual(&g, &rhs)?;
            margins.push(s0.psd_margin()?);
        }
        Certificate::Simplex { s } => {
            count("simplex multipliers", s.len(), m + 2)?;
            check_dims(n, &s.iter().collect::<Vec<_>>())?;
            let mut rhs = MatrixPoly::constant(&s[0] + &s[m + 1], m);
            for i in 0..m {
                rhs.add_term(MultiExponent::unit(m, i), &(&s[i + 1] - &s[m + 1]));
            }
            residual = coeff_residual(&g, &rhs)?;
            for si in s {
                margins.push(relative_min_eig(si)?);
            }
        }
    }

    let psd_ok = margins.iter().all(|&v| v >= -PSD_TOL);
    let resid_ok = residual <= tolerance;
    let valid = psd_ok && resid_ok && degree_ok;
    let message = (!valid).then(|| {
        let mut why = Vec::new();
        if !resid_ok {
            why.push(format!("identity residual {residual:.3e} exceeds {tolerance:.3e}"));
        }
        if !psd_ok {
            let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
            why.push(format!("PSD margin {worst:.3e} below -{PSD_TOL:e}"));
        }
        if !degree_ok {
            why.push("degree membership violated".to_string());
        }
        why.join("; ")
    });
    Ok(VerifyReport { valid, residual, tolerance, psd_margins: margins, degree_ok, message })
}
