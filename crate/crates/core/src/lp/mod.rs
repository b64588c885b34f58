//! Generic linear programming kernel.
//!
//! Problems are `minimize c'x` over equality rows `a'x = b`, inequality rows
//! `a'x <= b` and per-variable bounds. The dual sign convention is fixed
//! once, for every consumer:
//!
//! ```text
//! L = c'x + y'(Aeq x - beq) + mu'(Aub x - bub) - vl'(x - lo) + vu'(x - hi)
//! ```
//!
//! with `mu, vl, vu >= 0` at an optimum, so a multiplier on a `<=` row is
//! nonnegative. Stationarity reads `c + Aeq'y + Aub'mu - vl + vu = 0`.
//!
//! The solver is a Mehrotra-style primal-dual interior-point method (see
//! [`solve`]); interior paths converge to the analytic center of the optimal
//! face, which keeps reported duals stable under primal degeneracy. A
//! vertex-enumeration oracle ([`vertex_oracle`]) provides an independent
//! check for small problems.

mod format;
mod oracle;
mod random;
mod solver;

pub use format::write_lp_format;
pub use oracle::{vertex_oracle, OracleError};
pub use random::{random_lp, SplitMix64};
pub use solver::{solve, solve_with, LpError, SolverOptions};

use serde::{Deserialize, Serialize};

/// Sparse row: sorted, deduplicated (index, coefficient) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|&(i, _)| i);
        entries.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        entries.retain(|&(_, v)| v != 0.0);
        SparseRow { entries }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * x[i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v.abs()).fold(0.0, f64::max)
    }
}

/// LP in the kernel's canonical shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub n_vars: usize,
    /// Minimized cost vector.
    pub objective: Vec<f64>,
    pub eq_rows: Vec<(SparseRow, f64)>,
    pub ub_rows: Vec<(SparseRow, f64)>,
    /// Per-variable `[lo, hi]`; use `f64::NEG_INFINITY` / `f64::INFINITY`
    /// for one-sided or free variables.
    pub bounds: Vec<(f64, f64)>,
    pub var_names: Vec<String>,
    pub eq_names: Vec<String>,
    pub ub_names: Vec<String>,
}

impl LpProblem {
    pub fn new(n_vars: usize) -> Self {
        LpProblem {
            n_vars,
            objective: vec![0.0; n_vars],
            eq_rows: Vec::new(),
            ub_rows: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n_vars],
            var_names: (0..n_vars).map(|i| format!("x{i}")).collect(),
            eq_names: Vec::new(),
            ub_names: Vec::new(),
        }
    }

    pub fn add_eq(&mut self, entries: Vec<(usize, f64)>, rhs: f64, name: impl Into<String>) {
        self.eq_rows.push((SparseRow::new(entries), rhs));
        self.eq_names.push(name.into());
    }

    pub fn add_ub(&mut self, entries: Vec<(usize, f64)>, rhs: f64, name: impl Into<String>) {
        self.ub_rows.push((SparseRow::new(entries), rhs));
        self.ub_names.push(name.into());
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    /// Quick structural sanity check: dimensions, finite coefficients,
    /// ordered bounds.
    pub fn well_formed(&self) -> Result<(), String> {
        if self.objective.len() != self.n_vars || self.bounds.len() != self.n_vars {
            return Err("objective/bounds length mismatch".into());
        }
        if self.eq_names.len() != self.eq_rows.len() || self.ub_names.len() != self.ub_rows.len() {
            return Err("row name length mismatch".into());
        }
        for c in &self.objective {
            if !c.is_finite() {
                return Err("non-finite objective coefficient".into());
            }
        }
        for (row, rhs) in self.eq_rows.iter().chain(&self.ub_rows) {
            if !rhs.is_finite() {
                return Err("non-finite right-hand side".into());
            }
            for &(i, v) in &row.entries {
                if i >= self.n_vars {
                    return Err(format!("row references variable {i} out of {}", self.n_vars));
                }
                if !v.is_finite() {
                    return Err("non-finite row coefficient".into());
                }
            }
        }
        for &(lo, hi) in &self.bounds {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err("invalid variable bounds".into());
            }
        }
        Ok(())
    }

    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A dual certificate of primal infeasibility: multipliers for which the
/// aggregated constraint is unsatisfiable within the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub eq_weights: Vec<f64>,
    /// Nonnegative weights on `<=` rows.
    pub ub_weights: Vec<f64>,
    /// Aggregated slack: strictly negative proves infeasibility.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// One multiplier per equality row (free sign).
    pub eq_duals: Vec<f64>,
    /// One multiplier per `<=` row, `>= 0`.
    pub ub_duals: Vec<f64>,
    /// Multipliers on `x >= lo` (zero for infinite bounds).
    pub lower_bound_duals: Vec<f64>,
    /// Multipliers on `x <= hi`.
    pub upper_bound_duals: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    /// Rows/bounds where both slack and multiplier are below 1e-7: the
    /// sites where dual non-uniqueness can appear.
    pub degenerate: Vec<String>,
    /// Present when `status == Infeasible`.
    pub farkas: Option<FarkasCertificate>,
    /// A feasible improving ray when `status == Unbounded`.
    pub ray: Option<Vec<f64>>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective under the documented sign convention.
    pub fn dual_objective(&self, problem: &LpProblem) -> f64 {
        let mut acc = 0.0;
        for ((_, b), y) in problem.eq_rows.iter().zip(&self.eq_duals) {
            acc -= b * y;
        }
        for ((_, b), mu) in problem.ub_rows.iter().zip(&self.ub_duals) {
            acc -= b * mu;
        }
        for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
            if lo.is_finite() {
                acc += lo * self.lower_bound_duals[j];
            }
            if hi.is_finite() {
                acc -= hi * self.upper_bound_duals[j];
            }
        }
        acc
    }
}

/// Worst-case KKT residuals of a claimed optimal solution, each scaled by
/// `1 + |reference|` so tolerances compose across problem magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.dual)
            .max(self.stationarity)
            .max(self.complementarity)
            .max(self.duality_gap)
    }
}

/// Evaluate the KKT system of `solution` against `problem`.
pub fn check_kkt(problem: &LpProblem, solution: &LpSolution) -> KktResiduals {
    let x = &solution.x;
    let mut primal: f64 = 0.0;
    for (row, b) in &problem.eq_rows {
        primal = primal.max((row.dot(x) - b).abs() / (1.0 + b.abs()));
    }
    for (row, b) in &problem.ub_rows {
        primal = primal.max((row.dot(x) - b).max(0.0) / (1.0 + b.abs()));
    }
    for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
        if lo.is_finite() {
            primal = primal.max((lo - x[j]).max(0.0) / (1.0 + lo.abs()));
        }
        if hi.is_finite() {
            primal = primal.max((x[j] - hi).max(0.0) / (1.0 + hi.abs()));
        }
    }

    let mut dual: f64 = 0.0;
    for &mu in &solution.ub_duals {
        dual = dual.max(-mu);
    }
    for v in solution
        .lower_bound_duals
        .iter()
        .chain(&solution.upper_bound_duals)
    {
        dual = dual.max(-v);
    }

    // c + Aeq'y + Aub'mu - vl + vu per coordinate.
    let mut grad = problem.objective.clone();
    for ((row, _), y) in problem.eq_rows.iter().zip(&solution.eq_duals) {
        for &(i, v) in &row.entries {
            grad[i] += v * y;
        }
    }
    for ((row, _), mu) in problem.ub_rows.iter().zip(&solution.ub_duals) {
        for &(i, v) in &row.entries {
            grad[i] += v * mu;
        }
    }
    let mut stationarity: f64 = 0.0;
    for j in 0..problem.n_vars {
        let g = grad[j] - solution.lower_bound_duals[j] + solution.upper_bound_duals[j];
        stationarity = stationarity.max(g.abs() / (1.0 + problem.objective[j].abs()));
    }

    let scale = 1.0 + solution.objective_value.abs();
    let mut complementarity: f64 = 0.0;
    for ((row, b), mu) in problem.ub_rows.iter().zip(&solution.ub_duals) {
        complementarity = complementarity.max((mu * (b - row.dot(x))).abs() / scale);
    }
    for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
        if lo.is_finite() {
            complementarity =
                complementarity.max((solution.lower_bound_duals[j] * (x[j] - lo)).abs() / scale);
        }
        if hi.is_finite() {
            complementarity =
                complementarity.max((solution.upper_bound_duals[j] * (hi - x[j])).abs() / scale);
        }
    }

    let duality_gap =
        (solution.objective_value - solution.dual_objective(problem)).abs() / scale;

    KktResiduals {
        primal,
        dual,
        stationarity,
        complementarity,
        duality_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_row_merges_duplicates() {
        let row = SparseRow::new(vec![(2, 1.0), (0, 2.0), (2, 3.0), (1, 0.0)]);
        assert_eq!(row.entries, vec![(0, 2.0), (2, 4.0)]);
    }

    #[test]
    fn kkt_flags_perturbed_primal() {
        // min x, x >= 3: solution x = 3, lower dual 1.
        let mut p = LpProblem::new(1);
        p.objective = vec![1.0];
        p.set_bounds(0, 3.0, f64::INFINITY);
        let sol = solve(&p).unwrap();
        assert!(check_kkt(&p, &sol).max() < 1e-8);

        let mut poked = sol.clone();
        poked.x[0] += 1e-3;
        let res = check_kkt(&p, &poked);
        assert!(res.complementarity > 1e-4, "{res:?}");

        let mut flipped = sol.clone();
        flipped.lower_bound_duals[0] = -flipped.lower_bound_duals[0];
        let res = check_kkt(&p, &flipped);
        assert!(res.dual > 0.5, "{res:?}");
    }

    #[test]
    fn kkt_detects_binding_row_perturbation() {
        // min -x-y st x+y <= 1, box [0,1]^2.
        let mut p = LpProblem::new(2);
        p.objective = vec![-1.0, -1.0];
        p.add_ub(vec![(0, 1.0), (1, 1.0)], 1.0, "cap");
        p.set_bounds(0, 0.0, 1.0);
        p.set_bounds(1, 0.0, 1.0);
        let sol = solve(&p).unwrap();
        let mut poked = sol.clone();
        poked.x[0] += 1e-3;
        assert!(check_kkt(&p, &poked).primal > 4e-4);
    }
}
