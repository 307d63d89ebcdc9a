//! Linear matrix inequality systems over free scalar variables.
//!
//! An [`LmiSystem`] is a list of blocks `F_b(y) = F_b0 + Σ_k y_k F_bk ⪰ 0`.
//! It maps onto the dual side of the standard-form solver: the free `y` are
//! the dual multipliers and each block is a dual slack `Z_b = C_b − Σ y_k A_bk`
//! with `C_b = F_b0` and `A_bk = −F_bk`.
//!
//! Every feasibility question is posed through [`LmiSystem::solve_margin`],
//! which maximizes `t` subject to `F_b(y) ⪰ t I` on the margin blocks and a
//! cap `t ≤ 1`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{solve, SdpProblem, SdpSolution, SolveOptions, SparseSym};
use crate::error::{Error, Result};
use crate::numerics::SymMatrix;

/// Margins within `±TOL_FEAS` are reported as marginal.
pub const TOL_FEAS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Feasible,
    Infeasible,
    Marginal,
}

impl Verdict {
    pub fn from_margin(t: f64) -> Verdict {
        if t >= TOL_FEAS {
            Verdict::Feasible
        } else if t <= -TOL_FEAS {
            Verdict::Infeasible
        } else {
            Verdict::Marginal
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmiBlock {
    dim: usize,
    margin: bool,
    constant: Vec<(usize, usize, f64)>,
    terms: Vec<(usize, usize, usize, f64)>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `v` to entry `(i, j)` and its mirror.
    pub fn add_constant(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.constant.push((i, j, v));
        }
    }

    /// Adds `v · y_var` to entry `(i, j)` and its mirror.
    pub fn add_var(&mut self, var: usize, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.terms.push((var, i, j, v));
        }
    }

    /// Places `m` at block offset `(r0, c0)`. Diagonal placements
    /// (`r0 == c0`) read the upper triangle of a symmetric `m`; off-diagonal
    /// placements take every entry and mirror it into `(c0, r0)`.
    pub fn add_constant_block(&mut self, r0: usize, c0: usize, m: &DMatrix<f64>) {
        for_block_entries(r0, c0, m, |i, j, v| self.add_constant(i, j, v));
    }

    pub fn add_var_block(&mut self, var: usize, r0: usize, c0: usize, m: &DMatrix<f64>) {
        let mut pending = Vec::new();
        for_block_entries(r0, c0, m, |i, j, v| pending.push((i, j, v)));
        for (i, j, v) in pending {
            self.add_var(var, i, j, v);
        }
    }
}

fn for_block_entries(r0: usize, c0: usize, m: &DMatrix<f64>, mut f: impl FnMut(usize, usize, f64)) {
    if r0 == c0 {
        for b in 0..m.ncols() {
            for a in 0..=b {
                f(r0 + a, r0 + b, m[(a, b)]);
            }
        }
    } else {
        for a in 0..m.nrows() {
            for b in 0..m.ncols() {
                f(r0 + a, c0 + b, m[(a, b)]);
            }
        }
    }
}

/// A symmetric `n x n` matrix of fresh variables (upper triangle, column-major).
#[derive(Debug, Clone)]
pub struct SymVar {
    n: usize,
    vars: Vec<usize>,
}

impl SymVar {
    pub fn var(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.vars[j * (j + 1) / 2 + i]
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    /// Adds `scale · X` to the diagonal block at offset `r0`.
    pub fn place(&self, block: &mut LmiBlock, r0: usize, scale: f64) {
        for j in 0..self.n {
            for i in 0..=j {
                block.add_var(self.var(i, j), r0 + i, r0 + j, scale);
            }
        }
    }

    pub fn value(&self, y: &[f64]) -> SymMatrix {
        SymMatrix::from_fn(self.n, |i, j| y[self.var(i, j)])
    }
}

/// A skew-symmetric `n x n` matrix of fresh variables (strict upper triangle).
#[derive(Debug, Clone)]
pub struct SkewVar {
    n: usize,
    vars: Vec<usize>,
}

impl SkewVar {
    fn index(i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        j * (j - 1) / 2 + i
    }

    /// Adds `K` to the off-diagonal block at `(r0, c0)` (and `Kᵀ` at the mirror).
    pub fn place(&self, block: &mut LmiBlock, r0: usize, c0: usize) {
        for j in 0..self.n {
            for i in 0..j {
                let v = self.vars[Self::index(i, j)];
                block.add_var(v, r0 + i, c0 + j, 1.0);
                block.add_var(v, r0 + j, c0 + i, -1.0);
            }
        }
    }

    pub fn value(&self, y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => y[self.vars[Self::index(i, j)]],
            std::cmp::Ordering::Greater => -y[self.vars[Self::index(j, i)]],
            std::cmp::Ordering::Equal => 0.0,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct LmiSystem {
    num_vars: usize,
    blocks: Vec<LmiBlock>,
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    /// Optimal objective value.
    pub value: f64,
    pub y: Vec<f64>,
    /// Every block evaluated exactly at `y`.
    pub blocks: Vec<SymMatrix>,
    pub solution: SdpSolution,
}

#[derive(Debug, Clone)]
pub struct MarginSolution {
    pub t_star: f64,
    pub verdict: Verdict,
    pub y: Vec<f64>,
    pub blocks: Vec<SymMatrix>,
    pub solution: SdpSolution,
}

impl LmiSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_sym_var(&mut self, n: usize) -> SymVar {
        let vars = (0..n * (n + 1) / 2).map(|_| self.add_var()).collect();
        SymVar { n, vars }
    }

    pub fn add_skew_var(&mut self, n: usize) -> SkewVar {
        let vars = (0..n * n.saturating_sub(1) / 2).map(|_| self.add_var()).collect();
        SkewVar { n, vars }
    }

    /// Adds a block; `margin` blocks take part in the `⪰ t I` margin.
    pub fn add_block(&mut self, dim: usize, margin: bool) -> usize {
        self.blocks.push(LmiBlock { dim, margin, constant: Vec::new(), terms: Vec::new() });
        self.blocks.len() - 1
    }

    pub fn block_mut(&mut self, idx: usize) -> &mut LmiBlock {
        &mut self.blocks[idx]
    }

    pub fn evaluate(&self, y: &[f64]) -> Vec<SymMatrix> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut m = DMatrix::zeros(blk.dim, blk.dim);
                let mut put = |i: usize, j: usize, v: f64| {
                    m[(i, j)] += v;
                    if i != j {
                        m[(j, i)] += v;
                    }
                };
                for &(i, j, v) in &blk.constant {
                    put(i, j, v);
                }
                for &(k, i, j, v) in &blk.terms {
                    put(i, j, v * y[k]);
                }
                SymMatrix::symmetrize(&m)
            })
            .collect()
    }

    /// Builds the standard-form problem. Returns the problem, the constraint
    /// index of each variable (`None` for variables that appear nowhere) and
    /// the constraint index of the margin variable.
    fn to_problem(
        &self,
        objective: &[(usize, f64)],
        margin: bool,
    ) -> Result<(SdpProblem, Vec<Option<usize>>, Option<usize>)> {
        let mut dims: Vec<usize> = self.blocks.iter().map(|b| b.dim).collect();
        if margin {
            dims.push(1);
        }
        if dims.is_empty() {
            return Err(Error::InvalidInput("LMI system has no blocks".into()));
        }
        let mut problem = SdpProblem::new(dims);

        let mut per_var: Vec<BTreeMap<usize, Vec<(usize, usize, f64)>>> =
            vec![BTreeMap::new(); self.num_vars];
        for (bi, blk) in self.blocks.iter().enumerate() {
            if blk.constant.iter().any(|&(i, j, _)| i.max(j) >= blk.dim)
                || blk.terms.iter().any(|&(_, i, j, _)| i.max(j) >= blk.dim)
            {
                return Err(Error::Dimension(format!("entry outside LMI block {bi}")));
            }
            let c = SparseSym::from_triplets(blk.dim, blk.constant.iter().copied());
            problem.objective[bi] = SymMatrix::symmetrize(&c.to_dense());
            for &(k, i, j, v) in &blk.terms {
                per_var[k].entry(bi).or_default().push((i, j, -v));
            }
        }
        let mut rhs = vec![0.0; self.num_vars];
        for &(k, c) in objective {
            if k >= self.num_vars {
                return Err(Error::Dimension(format!("objective references variable {k}")));
            }
            rhs[k] += c;
        }

        let mut var_map = vec![None; self.num_vars];
        for (k, parts) in per_var.into_iter().enumerate() {
            let parts: Vec<(usize, SparseSym)> = parts
                .into_iter()
                .map(|(b, trip)| (b, SparseSym::from_triplets(self.blocks[b].dim, trip)))
                .filter(|(_, s)| !s.is_empty())
                .collect();
            if parts.is_empty() {
                if rhs[k] != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "objective variable {k} appears in no block (unbounded)"
                    )));
                }
                continue;
            }
            var_map[k] = Some(problem.constraints.len());
            problem.add_constraint(parts, rhs[k]);
        }

        let t_index = if margin {
            let cap = self.blocks.len();
            problem.objective[cap] = SymMatrix::scalar(1.0);
            let mut parts: Vec<(usize, SparseSym)> = self
                .blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| b.margin)
                .map(|(bi, b)| (bi, SparseSym::from_triplets(b.dim, (0..b.dim).map(|i| (i, i, 1.0)))))
                .collect();
            parts.push((cap, SparseSym::from_triplets(1, [(0, 0, 1.0)])));
            let idx = problem.constraints.len();
            problem.add_constraint(parts, 1.0);
            Some(idx)
        } else {
            None
        };
        Ok((problem, var_map, t_index))
    }

    fn unpack(&self, var_map: &[Option<usize>], sol: &SdpSolution) -> Vec<f64> {
        var_map.iter().map(|idx| idx.map_or(0.0, |i| sol.y[i])).collect()
    }

    /// Maximizes `Σ c_k y_k` subject to every block being PSD.
    pub fn maximize(&self, objective: &[(usize, f64)], opts: &SolveOptions) -> Result<LmiSolution> {
        let (problem, var_map, _) = self.to_problem(objective, false)?;
        let solution = solve(&problem, opts)?;
        if !solution.is_optimal() {
            return Err(Error::Solver { status: solution.status });
        }
        let y = self.unpack(&var_map, &solution);
        let value = objective.iter().map(|&(k, c)| c * y[k]).sum();
        let blocks = self.evaluate(&y);
        Ok(LmiSolution { value, y, blocks, solution })
    }

    /// Maximizes `t ≤ 1` with every margin block `⪰ t I` (other blocks `⪰ 0`).
    pub fn solve_margin(&self, opts: &SolveOptions) -> Result<MarginSolution> {
        let (problem, var_map, t_index) = self.to_problem(&[], true)?;
        let solution = solve(&problem, opts)?;
        if !solution.is_optimal() {
            return Err(Error::Solver { status: solution.status });
        }
        let t_star = solution.y[t_index.expect("margin index")];
        let y = self.unpack(&var_map, &solution);
        let blocks = self.evaluate(&y);
        Ok(MarginSolution { t_star, verdict: Verdict::from_margin(t_star), y, blocks, solution })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn centered_between_zero_and_identity() {
        // X ⪰ tI and I − X ⪰ tI: t* = 1/2 at X = I/2.
        let mut sys = LmiSystem::new();
        let x = sys.add_sym_var(2);
        let b0 = sys.add_block(2, true);
        x.place(sys.block_mut(b0), 0, 1.0);
        let b1 = sys.add_block(2, true);
        sys.block_mut(b1).add_constant_block(0, 0, &DMatrix::identity(2, 2));
        x.place(sys.block_mut(b1), 0, -1.0);
        let r = sys.solve_margin(&SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(r.t_star, 0.5, epsilon = 1e-7);
        assert_eq!(r.verdict, Verdict::Feasible);
        let xv = x.value(&r.y);
        assert!((xv.as_matrix() - DMatrix::identity(2, 2) * 0.5).amax() < 1e-6);
    }

    #[test]
    fn constant_negative_block_is_infeasible() {
        let mut sys = LmiSystem::new();
        let _unused = sys.add_var();
        let b = sys.add_block(1, true);
        sys.block_mut(b).add_constant(0, 0, -1.0);
        let r = sys.solve_margin(&SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(r.t_star, -1.0, epsilon = 1e-7);
        assert_eq!(r.verdict, Verdict::Infeasible);
    }

    #[test]
    fn margin_is_capped() {
        let mut sys = LmiSystem::new();
        let b = sys.add_block(3, true);
        sys.block_mut(b).add_constant_block(0, 0, &DMatrix::identity(3, 3));
        let r = sys.solve_margin(&SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(r.t_star, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn maximize_eigenvalue_bound() {
        // max s  s.t.  diag(3, 2) − s I ⪰ 0.
        let mut sys = LmiSystem::new();
        let s = sys.add_var();
        let b = sys.add_block(2, false);
        sys.block_mut(b).add_constant(0, 0, 3.0);
        sys.block_mut(b).add_constant(1, 1, 2.0);
        sys.block_mut(b).add_var(s, 0, 0, -1.0);
        sys.block_mut(b).add_var(s, 1, 1, -1.0);
        let r = sys.maximize(&[(s, 1.0)], &SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn skew_var_places_antisymmetric_block() {
        let mut sys = LmiSystem::new();
        let k = sys.add_skew_var(3);
        let b = sys.add_block(6, false);
        k.place(sys.block_mut(b), 0, 3);
        let y: Vec<f64> = (1..=3).map(|v| v as f64).collect();
        let f = &sys.evaluate(&y)[0];
        let kv = k.value(&y);
        let top_right = f.as_matrix().view((0, 3), (3, 3)).into_owned();
        assert_eq!(top_right, kv);
        assert_eq!(&kv + kv.transpose(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn unused_objective_variable_is_rejected() {
        let mut sys = LmiSystem::new();
        let v = sys.add_var();
        let b = sys.add_block(1, false);
        sys.block_mut(b).add_constant(0, 0, 1.0);
        assert!(sys.maximize(&[(v, 1.0)], &SolveOptions::default()).is_err());
    }
}
