//! Quadratic stability of `ẋ = (A_0 + Σ δ_i A_i) x` for `|δ_i| ≤ R`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cube::search::{add_relaxation, Relaxation};
use crate::cube::AffineSym;
use crate::error::{Error, Result};
use crate::numerics::SymMatrix;
use crate::sdp::{LmiSystem, SolveOptions, Verdict};

/// Strictness margin: `A(δ)ᵀP + P A(δ) ⪯ −ε I`.
pub const STRICT_EPS: f64 = 1e-6;
/// Upper bracket cap for the radius search.
pub const MAX_RADIUS: f64 = 1048576.0;

#[derive(Debug, Clone, PartialEq)]
pub struct UncertainLinearSystem {
    n: usize,
    a: Vec<DMatrix<f64>>,
}

impl UncertainLinearSystem {
    pub fn new(a: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = a.first() else {
            return Err(Error::InvalidInput("system needs A_0".into()));
        };
        let n = first.nrows();
        if n == 0 || a.iter().any(|ai| ai.nrows() != n || ai.ncols() != n) {
            return Err(Error::Dimension(format!("all A_i must be {n}x{n}")));
        }
        if a.iter().any(|ai| ai.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("non-finite system matrix".into()));
        }
        Ok(Self { n, a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.a.len() - 1
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.a
    }

    /// `true` when every eigenvalue of `A_0` has negative real part.
    pub fn nominal_hurwitz(&self) -> bool {
        self.a[0].complex_eigenvalues().iter().all(|l| l.re < 0.0)
    }

    /// The three-state, two-parameter benchmark system.
    pub fn benchmark() -> Self {
        let a0 = DMatrix::from_row_slice(3, 3, &[-0.4, 0.0, 1.0, 0.0, -3.2, -0.5, -0.8, -2.2, -1.7]);
        let a1 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -0.3, 0.0, 0.0, 0.3, 0.0, 0.0, 1.0]);
        let a2 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.4, 0.3, 0.0]);
        Self { n: 3, a: vec![a0, a1, a2] }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityCheck {
    pub feasible: bool,
    pub verdict: Verdict,
    pub margin: f64,
    /// Lyapunov matrix with `tr P = n`.
    pub p: SymMatrix,
}

/// `P = n E_nn + Σ y_k B_k` with `tr P = n` built in.
fn lyapunov_vars(sys: &mut LmiSystem, n: usize) -> (DMatrix<f64>, Vec<(usize, DMatrix<f64>)>) {
    let mut pc = DMatrix::zeros(n, n);
    pc[(n - 1, n - 1)] = n as f64;
    let mut terms = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            if i == n - 1 && j == n - 1 {
                continue;
            }
            let mut b = DMatrix::zeros(n, n);
            if i == j {
                b[(i, i)] = 1.0;
                b[(n - 1, n - 1)] = -1.0;
            } else {
                b[(i, j)] = 1.0;
                b[(j, i)] = 1.0;
            }
            terms.push((sys.add_var(), b));
        }
    }
    (pc, terms)
}

/// Searches for `P ≻ 0` with `A(δ)ᵀP + PA(δ) ≺ 0` on the `R`-cube, using
/// `method` for the robust part.
pub fn stability_feasible(sys_def: &UncertainLinearSystem, r: f64, method: Relaxation) -> Result<StabilityCheck> {
    stability_feasible_with(sys_def, r, method, &SolveOptions::default())
}

pub fn stability_feasible_with(
    sys_def: &UncertainLinearSystem,
    r: f64,
    method: Relaxation,
    opts: &SolveOptions,
) -> Result<StabilityCheck> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be nonnegative, got {r}")));
    }
    let n = sys_def.n;
    let mut sys = LmiSystem::new();
    let (pc, pterms) = lyapunov_vars(&mut sys, n);
    let lyap = |a: &DMatrix<f64>, p: &DMatrix<f64>| -(a.transpose() * p + p * a);

    let h: Vec<AffineSym> = sys_def
        .a
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let s = if i == 0 { 1.0 } else { r };
            let mut c = lyap(a, &pc) * s;
            if i == 0 {
                c -= DMatrix::identity(n, n) * STRICT_EPS;
            }
            AffineSym { constant: c, terms: pterms.iter().map(|(k, b)| (*k, lyap(a, b) * s)).collect() }
        })
        .collect();
    let p_aff = AffineSym { constant: pc.clone(), terms: pterms.clone() };
    let pb = sys.add_block(n, true);
    p_aff.place(sys.block_mut(pb), 0, 0, 1.0);
    add_relaxation(&mut sys, &h, method, true)?;

    let sol = match sys.solve_margin(opts) {
        Ok(sol) => sol,
        // Only certified radii count; a breakdown is treated as not certified.
        Err(Error::Solver { status }) => {
            log::warn!("stability LMI at R = {r} stopped with {status:?}; treating as not certified");
            return Ok(StabilityCheck { feasible: false, verdict: Verdict::Marginal, margin: f64::NAN, p: SymMatrix::zeros(n) });
        }
        Err(e) => return Err(e),
    };
    Ok(StabilityCheck {
        feasible: sol.verdict == Verdict::Feasible,
        verdict: sol.verdict,
        margin: sol.t_star,
        p: p_aff.value(&sol.y),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub method: Relaxation,
    /// Largest radius found feasible (0 when even `R = 0` fails).
    pub radius: f64,
    pub lyapunov: Option<SymMatrix>,
    /// `(R, feasible)` in the order tested.
    pub trace: Vec<(f64, bool)>,
    pub nominal_hurwitz: bool,
}

/// Bracket by doubling from `R = 1`, then bisect to `tol_r`.
pub fn stability_radius(sys: &UncertainLinearSystem, method: Relaxation, tol_r: f64) -> Result<StabilityReport> {
    if !(tol_r > 0.0) {
        return Err(Error::InvalidInput("tol_r must be positive".into()));
    }
    let mut trace = Vec::new();
    let check = |r: f64, trace: &mut Vec<(f64, bool)>| -> Result<StabilityCheck> {
        let c = stability_feasible(sys, r, method)?;
        trace.push((r, c.feasible));
        Ok(c)
    };

    let mut best: Option<(f64, SymMatrix)>;
    let (mut lo, mut hi);
    let first = check(1.0, &mut trace)?;
    if first.feasible {
        best = Some((1.0, first.p));
        lo = 1.0;
        hi = 2.0;
        loop {
            let c = check(hi, &mut trace)?;
            if !c.feasible {
                break;
            }
            best = Some((hi, c.p));
            lo = hi;
            if hi >= MAX_RADIUS {
                break;
            }
            hi *= 2.0;
        }
        if lo >= MAX_RADIUS {
            hi = lo;
        }
    } else {
        let zero = check(0.0, &mut trace)?;
        if !zero.feasible {
            return Ok(StabilityReport { method, radius: 0.0, lyapunov: None, trace, nominal_hurwitz: sys.nominal_hurwitz() });
        }
        best = Some((0.0, zero.p));
        lo = 0.0;
        hi = 1.0;
    }
    while hi - lo > tol_r {
        let mid = 0.5 * (lo + hi);
        let c = check(mid, &mut trace)?;
        if c.feasible {
            lo = mid;
            best = Some((mid, c.p));
        } else {
            hi = mid;
        }
    }
    let (radius, p) = best.expect("a feasible radius was recorded");
    Ok(StabilityReport { method, radius, lyapunov: Some(p), trace, nominal_hurwitz: sys.nominal_hurwitz() })
}
