//! Builders and solvers for the two clearing formulations.
//!
//! The scenario-oriented co-optimization procures energy and reserve against
//! every non-base scenario simultaneously: reserve bounds the per-scenario
//! re-dispatch, and each scenario carries its own balance and network
//! limits. The traditional formulation clears reserve against a system-wide
//! megawatt requirement with base-case network limits only; it exists here
//! as the comparison baseline.
//!
//! Row orientation is chosen so extracted multipliers carry the textbook
//! signs: balance rows are written demand-minus-supply (the balance dual is
//! the system energy price) and flow rows are written in the injection
//! direction with limits on both signs.

use crate::lp::{solve_with, LpError, LpProblem, LpSolution, LpStatus, SolverOptions};
use crate::model::{validate_case, MarketCase, ValidationReport};
use crate::ptdf::{
    base_capacities, base_shift_factors, scenario_shift_factors, PtdfError, ShiftFactors,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entries with |S| below this are dropped from flow rows; the induced flow
/// error is orders below every verification tolerance.
const S_EPS: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ClearingError {
    #[error("case failed validation with {} errors", .0.n_errors())]
    Validation(ValidationReport),
    #[error(transparent)]
    Network(#[from] PtdfError),
    #[error(transparent)]
    Solver(#[from] LpError),
    #[error("market is infeasible; leading constraints: {constraints:?}")]
    InfeasibleMarket { constraints: Vec<String> },
    #[error("market is unbounded (check bid signs)")]
    UnboundedMarket,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Network data one side of the model was built against.
#[derive(Debug, Clone)]
pub struct NetworkSide {
    pub factors: ShiftFactors,
    /// Capacity per in-service line row (exceed rate included for
    /// scenarios).
    pub capacities: Vec<f64>,
}

/// Column and row layout of the scenario model. Columns: g, r_U, r_D, then
/// per scenario [dg_up, dg_down, shed].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableIndex {
    pub n_gens: usize,
    pub n_loads: usize,
    pub n_scenarios: usize,
    /// (pos, neg) ub-row pairs per base in-service line row.
    pub base_flow_rows: Vec<(usize, usize)>,
    pub cap_up_rows: Vec<usize>,
    pub cap_dn_rows: Vec<usize>,
    /// eq row of each scenario balance (base balance is eq row 0).
    pub scen_balance_rows: Vec<usize>,
    pub scen_flow_rows: Vec<Vec<(usize, usize)>>,
    pub couple_up_rows: Vec<Vec<usize>>,
    pub couple_dn_rows: Vec<Vec<usize>>,
}

impl VariableIndex {
    pub fn g(&self, j: usize) -> usize {
        j
    }
    pub fn r_u(&self, j: usize) -> usize {
        self.n_gens + j
    }
    pub fn r_d(&self, j: usize) -> usize {
        2 * self.n_gens + j
    }
    fn scen_base(&self, k: usize) -> usize {
        3 * self.n_gens + k * (2 * self.n_gens + self.n_loads)
    }
    pub fn dg_up(&self, k: usize, j: usize) -> usize {
        self.scen_base(k) + j
    }
    pub fn dg_down(&self, k: usize, j: usize) -> usize {
        self.scen_base(k) + self.n_gens + j
    }
    pub fn shed(&self, k: usize, l: usize) -> usize {
        self.scen_base(k) + 2 * self.n_gens + l
    }
    pub fn n_cols(&self) -> usize {
        3 * self.n_gens + self.n_scenarios * (2 * self.n_gens + self.n_loads)
    }
}

/// The scenario model ready to solve.
pub struct ModelTwo {
    pub problem: LpProblem,
    pub index: VariableIndex,
    pub base: NetworkSide,
    pub scenarios: Vec<NetworkSide>,
    /// Lazy-eligibility mask over ub rows (flow rows only).
    lazy_mask: Vec<bool>,
}

fn checked(case: &MarketCase) -> Result<(), ClearingError> {
    let report = validate_case(case);
    if !report.is_ok() {
        return Err(ClearingError::Validation(report));
    }
    Ok(())
}

/// Build the scenario-oriented co-optimization LP.
pub fn build_model_two(case: &MarketCase) -> Result<ModelTwo, ClearingError> {
    checked(case)?;
    let n_g = case.n_gens();
    let n_l = case.n_loads();
    let n_k = case.n_scenarios();

    let base_factors = base_shift_factors(case)?;
    let base_caps = base_capacities(case);
    let mut scen_sides = Vec::with_capacity(n_k);
    for k in 0..n_k {
        let (factors, capacities) = scenario_shift_factors(case, k)?;
        scen_sides.push(NetworkSide { factors, capacities });
    }

    let mut index = VariableIndex {
        n_gens: n_g,
        n_loads: n_l,
        n_scenarios: n_k,
        base_flow_rows: Vec::new(),
        cap_up_rows: Vec::new(),
        cap_dn_rows: Vec::new(),
        scen_balance_rows: Vec::new(),
        scen_flow_rows: Vec::new(),
        couple_up_rows: Vec::new(),
        couple_dn_rows: Vec::new(),
    };

    let mut lp = LpProblem::new(index.n_cols());
    let mut lazy_mask: Vec<bool> = Vec::new();

    // Column names, objective, bounds.
    for (j, gen) in case.generators.iter().enumerate() {
        lp.var_names[index.g(j)] = format!("g{j}");
        lp.var_names[index.r_u(j)] = format!("rU{j}");
        lp.var_names[index.r_d(j)] = format!("rD{j}");
        lp.objective[index.g(j)] = gen.c_energy;
        lp.objective[index.r_u(j)] = gen.c_ru;
        lp.objective[index.r_d(j)] = gen.c_rd;
        lp.set_bounds(index.r_u(j), 0.0, gen.ru_max);
        lp.set_bounds(index.r_d(j), 0.0, gen.rd_max);
    }
    for (k, scen) in case.scenarios.iter().enumerate() {
        for j in 0..n_g {
            lp.var_names[index.dg_up(k, j)] = format!("dgU_k{k}_g{j}");
            lp.var_names[index.dg_down(k, j)] = format!("dgD_k{k}_g{j}");
            lp.objective[index.dg_up(k, j)] = scen.probability * scen.c_redispatch_up[j];
            lp.objective[index.dg_down(k, j)] = -scen.probability * scen.c_redispatch_down[j];
            lp.set_bounds(index.dg_up(k, j), 0.0, f64::INFINITY);
            lp.set_bounds(index.dg_down(k, j), 0.0, f64::INFINITY);
        }
        for (l, load) in case.loads.iter().enumerate() {
            lp.var_names[index.shed(k, l)] = format!("shed_k{k}_d{l}");
            lp.objective[index.shed(k, l)] = scen.probability * load.c_shed;
            lp.set_bounds(index.shed(k, l), 0.0, load.base_demand + scen.load_fluctuation[l]);
        }
    }

    // Base balance: sum(d) - sum(g) = 0, written as -sum(g) = -sum(d).
    lp.add_eq(
        (0..n_g).map(|j| (index.g(j), -1.0)).collect(),
        -case.total_demand(),
        "balance_base",
    );
    for k in 0..n_k {
        let scen = &case.scenarios[k];
        let scen_demand: f64 = case
            .loads
            .iter()
            .zip(&scen.load_fluctuation)
            .map(|(l, pi)| l.base_demand + pi)
            .sum();
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * n_g + n_l + n_g);
        for j in 0..n_g {
            entries.push((index.g(j), -1.0));
            entries.push((index.dg_up(k, j), -1.0));
            entries.push((index.dg_down(k, j), 1.0));
        }
        for l in 0..n_l {
            entries.push((index.shed(k, l), -1.0));
        }
        index.scen_balance_rows.push(lp.eq_rows.len());
        lp.add_eq(entries, -scen_demand, format!("balance_k{k}"));
    }

    // Base flow rows, both directions.
    for (row, &line_id) in base_factors.line_ids.iter().enumerate() {
        let s_row = base_factors.matrix.row(row);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (j, gen) in case.generators.iter().enumerate() {
            let s = s_row[gen.bus];
            if s.abs() > S_EPS {
                entries.push((index.g(j), s));
            }
        }
        let load_term: f64 = case
            .loads
            .iter()
            .map(|l| s_row[l.bus] * l.base_demand)
            .sum();
        let cap = base_caps[line_id];
        let pos_row = lp.ub_rows.len();
        lp.add_ub(entries.clone(), cap + load_term, format!("flow_base_l{line_id}_pos"));
        lazy_mask.push(true);
        let neg_row = lp.ub_rows.len();
        lp.add_ub(
            entries.iter().map(|&(c, v)| (c, -v)).collect(),
            cap - load_term,
            format!("flow_base_l{line_id}_neg"),
        );
        lazy_mask.push(true);
        index.base_flow_rows.push((pos_row, neg_row));
    }

    // Capacity boxes: g + rU <= Gmax and -g + rD <= -Gmin.
    for (j, gen) in case.generators.iter().enumerate() {
        index.cap_up_rows.push(lp.ub_rows.len());
        lp.add_ub(
            vec![(index.g(j), 1.0), (index.r_u(j), 1.0)],
            gen.g_max,
            format!("cap_up_g{j}"),
        );
        lazy_mask.push(false);
        index.cap_dn_rows.push(lp.ub_rows.len());
        lp.add_ub(
            vec![(index.g(j), -1.0), (index.r_d(j), 1.0)],
            -gen.g_min,
            format!("cap_dn_g{j}"),
        );
        lazy_mask.push(false);
    }

    // Per-scenario flow rows and reserve coupling rows.
    for (k, side) in scen_sides.iter().enumerate() {
        let scen = &case.scenarios[k];
        let mut flow_rows = Vec::with_capacity(side.factors.line_ids.len());
        for row in 0..side.factors.matrix.rows {
            let s_row = side.factors.matrix.row(row);
            let line_id = side.factors.line_ids[row];
            let mut entries: Vec<(usize, f64)> = Vec::new();
            for (j, gen) in case.generators.iter().enumerate() {
                let s = s_row[gen.bus];
                if s.abs() > S_EPS {
                    entries.push((index.g(j), s));
                    entries.push((index.dg_up(k, j), s));
                    entries.push((index.dg_down(k, j), -s));
                }
            }
            let mut load_term = 0.0;
            for (l, load) in case.loads.iter().enumerate() {
                let s = s_row[load.bus];
                if s.abs() > S_EPS {
                    entries.push((index.shed(k, l), s));
                    load_term += s * (load.base_demand + scen.load_fluctuation[l]);
                }
            }
            let cap = side.capacities[row];
            let pos_row = lp.ub_rows.len();
            lp.add_ub(entries.clone(), cap + load_term, format!("flow_k{k}_l{line_id}_pos"));
            lazy_mask.push(true);
            let neg_row = lp.ub_rows.len();
            lp.add_ub(
                entries.iter().map(|&(c, v)| (c, -v)).collect(),
                cap - load_term,
                format!("flow_k{k}_l{line_id}_neg"),
            );
            lazy_mask.push(true);
            flow_rows.push((pos_row, neg_row));
        }
        index.scen_flow_rows.push(flow_rows);

        let mut ups = Vec::with_capacity(n_g);
        let mut downs = Vec::with_capacity(n_g);
        for j in 0..n_g {
            ups.push(lp.ub_rows.len());
            lp.add_ub(
                vec![(index.dg_up(k, j), 1.0), (index.r_u(j), -1.0)],
                0.0,
                format!("couple_up_k{k}_g{j}"),
            );
            lazy_mask.push(false);
            downs.push(lp.ub_rows.len());
            lp.add_ub(
                vec![(index.dg_down(k, j), 1.0), (index.r_d(j), -1.0)],
                0.0,
                format!("couple_dn_k{k}_g{j}"),
            );
            lazy_mask.push(false);
        }
        index.couple_up_rows.push(ups);
        index.couple_dn_rows.push(downs);
    }

    Ok(ModelTwo {
        problem: lp,
        index,
        base: NetworkSide {
            factors: base_factors,
            capacities: base_caps,
        },
        scenarios: scen_sides,
        lazy_mask,
    })
}

/// Primal dispatch plus every multiplier the pricing and settlement layers
/// need, with the network data the model was built against.
#[derive(Debug, Clone)]
pub struct ClearingSolution {
    pub g: Vec<f64>,
    pub r_u: Vec<f64>,
    pub r_d: Vec<f64>,
    /// Upward re-dispatch per scenario per generator.
    pub dg_up: Vec<Vec<f64>>,
    pub dg_down: Vec<Vec<f64>>,
    /// Load shedding per scenario per load.
    pub shed: Vec<Vec<f64>>,

    /// Base balance dual (system energy price component).
    pub lambda: f64,
    /// Flow duals per base in-service line row, forward/reverse.
    pub mu_pos: Vec<f64>,
    pub mu_neg: Vec<f64>,
    pub lambda_k: Vec<f64>,
    pub mu_k_pos: Vec<Vec<f64>>,
    pub mu_k_neg: Vec<Vec<f64>>,
    /// Duals of dg_up <= r_U (alpha-bar) and the lower bound of dg_up
    /// (alpha-underbar), per scenario per generator.
    pub alpha_up: Vec<Vec<f64>>,
    pub alpha_lo: Vec<Vec<f64>>,
    pub beta_up: Vec<Vec<f64>>,
    pub beta_lo: Vec<Vec<f64>>,
    /// Duals of shed <= d + pi (tau-bar) and shed >= 0 (tau-underbar).
    pub tau_up: Vec<Vec<f64>>,
    pub tau_lo: Vec<Vec<f64>>,
    /// Duals of g + rU <= Gmax and Gmin + rD <= g.
    pub cap_up_dual: Vec<f64>,
    pub cap_dn_dual: Vec<f64>,

    pub expected_total_cost: f64,
    pub iterations: usize,
    /// Degenerate rows/bounds flagged by the solver (dual values there may
    /// not be unique).
    pub degenerate: Vec<String>,
    pub kkt: crate::lp::KktResiduals,

    pub base: NetworkSide,
    pub scen_net: Vec<NetworkSide>,
}

impl ClearingSolution {
    /// Signed base flow dual per in-service line row: forward minus
    /// reverse. Exactly one side is nonzero away from degeneracy.
    pub fn mu_signed(&self) -> Vec<f64> {
        self.mu_pos
            .iter()
            .zip(&self.mu_neg)
            .map(|(p, n)| p - n)
            .collect()
    }

    pub fn mu_k_signed(&self, k: usize) -> Vec<f64> {
        self.mu_k_pos[k]
            .iter()
            .zip(&self.mu_k_neg[k])
            .map(|(p, n)| p - n)
            .collect()
    }

    pub fn n_scenarios(&self) -> usize {
        self.lambda_k.len()
    }

    pub fn has_degeneracy(&self) -> bool {
        !self.degenerate.is_empty()
    }
}

fn clearing_solver_options(model: &ModelTwo, tol: Option<f64>) -> SolverOptions {
    let mut options = SolverOptions {
        lazy_rows: Some(model.lazy_mask.clone()),
        ..SolverOptions::default()
    };
    if let Some(tol) = tol {
        options.tol = tol;
        options.accept_progress = tol;
    }
    options
}

/// Solve the scenario model and extract all named quantities.
pub fn solve_clearing(case: &MarketCase) -> Result<ClearingSolution, ClearingError> {
    solve_clearing_tol(case, None)
}

/// Same with an explicit solver tolerance (scaled residuals).
pub fn solve_clearing_tol(
    case: &MarketCase,
    tol: Option<f64>,
) -> Result<ClearingSolution, ClearingError> {
    let model = build_model_two(case)?;
    let options = clearing_solver_options(&model, tol);
    let solution = solve_with(&model.problem, &options)?;
    extract_clearing(case, &model, solution)
}

fn extract_clearing(
    case: &MarketCase,
    model: &ModelTwo,
    solution: LpSolution,
) -> Result<ClearingSolution, ClearingError> {
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(ClearingError::InfeasibleMarket {
                constraints: leading_constraints(&model.problem, &solution),
            })
        }
        LpStatus::Unbounded => return Err(ClearingError::UnboundedMarket),
    }
    let idx = &model.index;
    let n_g = idx.n_gens;
    let n_l = idx.n_loads;
    let n_k = idx.n_scenarios;
    let x = &solution.x;

    let kkt = crate::lp::check_kkt(&model.problem, &solution);

    let pick = |rows: &[(usize, usize)], duals: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let pos = rows.iter().map(|&(p, _)| duals[p]).collect();
        let neg = rows.iter().map(|&(_, n)| duals[n]).collect();
        (pos, neg)
    };

    let (mu_pos, mu_neg) = pick(&idx.base_flow_rows, &solution.ub_duals);
    let mut mu_k_pos = Vec::with_capacity(n_k);
    let mut mu_k_neg = Vec::with_capacity(n_k);
    for k in 0..n_k {
        let (p, n) = pick(&idx.scen_flow_rows[k], &solution.ub_duals);
        mu_k_pos.push(p);
        mu_k_neg.push(n);
    }

    let sol = ClearingSolution {
        g: (0..n_g).map(|j| x[idx.g(j)]).collect(),
        r_u: (0..n_g).map(|j| x[idx.r_u(j)]).collect(),
        r_d: (0..n_g).map(|j| x[idx.r_d(j)]).collect(),
        dg_up: (0..n_k)
            .map(|k| (0..n_g).map(|j| x[idx.dg_up(k, j)]).collect())
            .collect(),
        dg_down: (0..n_k)
            .map(|k| (0..n_g).map(|j| x[idx.dg_down(k, j)]).collect())
            .collect(),
        shed: (0..n_k)
            .map(|k| (0..n_l).map(|l| x[idx.shed(k, l)]).collect())
            .collect(),
        lambda: solution.eq_duals[0],
        mu_pos,
        mu_neg,
        lambda_k: idx
            .scen_balance_rows
            .iter()
            .map(|&r| solution.eq_duals[r])
            .collect(),
        mu_k_pos,
        mu_k_neg,
        alpha_up: (0..n_k)
            .map(|k| {
                idx.couple_up_rows[k]
                    .iter()
                    .map(|&r| solution.ub_duals[r])
                    .collect()
            })
            .collect(),
        alpha_lo: (0..n_k)
            .map(|k| {
                (0..n_g)
                    .map(|j| solution.lower_bound_duals[idx.dg_up(k, j)])
                    .collect()
            })
            .collect(),
        beta_up: (0..n_k)
            .map(|k| {
                idx.couple_dn_rows[k]
                    .iter()
                    .map(|&r| solution.ub_duals[r])
                    .collect()
            })
            .collect(),
        beta_lo: (0..n_k)
            .map(|k| {
                (0..n_g)
                    .map(|j| solution.lower_bound_duals[idx.dg_down(k, j)])
                    .collect()
            })
            .collect(),
        tau_up: (0..n_k)
            .map(|k| {
                (0..n_l)
                    .map(|l| solution.upper_bound_duals[idx.shed(k, l)])
                    .collect()
            })
            .collect(),
        tau_lo: (0..n_k)
            .map(|k| {
                (0..n_l)
                    .map(|l| solution.lower_bound_duals[idx.shed(k, l)])
                    .collect()
            })
            .collect(),
        cap_up_dual: idx.cap_up_rows.iter().map(|&r| solution.ub_duals[r]).collect(),
        cap_dn_dual: idx.cap_dn_rows.iter().map(|&r| solution.ub_duals[r]).collect(),
        expected_total_cost: solution.objective_value,
        iterations: solution.iterations,
        degenerate: solution.degenerate.clone(),
        kkt,
        base: model.base.clone(),
        scen_net: model.scenarios.clone(),
    };
    debug_assert!(
        (objective_from_primal(case, &sol) - sol.expected_total_cost).abs()
            < 1e-6 * (1.0 + sol.expected_total_cost.abs())
    );
    Ok(sol)
}

/// Evaluate the bid-cost objective directly from a primal point.
pub fn objective_from_primal(case: &MarketCase, sol: &ClearingSolution) -> f64 {
    let mut acc = 0.0;
    for (j, gen) in case.generators.iter().enumerate() {
        acc += gen.c_energy * sol.g[j] + gen.c_ru * sol.r_u[j] + gen.c_rd * sol.r_d[j];
    }
    for (k, scen) in case.scenarios.iter().enumerate() {
        for j in 0..case.n_gens() {
            acc += scen.probability
                * (scen.c_redispatch_up[j] * sol.dg_up[k][j]
                    - scen.c_redispatch_down[j] * sol.dg_down[k][j]);
        }
        for (l, load) in case.loads.iter().enumerate() {
            acc += scen.probability * load.c_shed * sol.shed[k][l];
        }
    }
    acc
}

fn leading_constraints(problem: &LpProblem, solution: &LpSolution) -> Vec<String> {
    let Some(farkas) = &solution.farkas else {
        return vec!["(no certificate)".into()];
    };
    let mut weighted: Vec<(f64, String)> = Vec::new();
    for (i, w) in farkas.eq_weights.iter().enumerate() {
        if w.abs() > 0.0 {
            weighted.push((w.abs(), problem.eq_names[i].clone()));
        }
    }
    for (i, w) in farkas.ub_weights.iter().enumerate() {
        if *w > 0.0 {
            weighted.push((*w, problem.ub_names[i].clone()));
        }
    }
    weighted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let cutoff = weighted.first().map(|w| w.0 * 1e-3).unwrap_or(0.0);
    weighted
        .into_iter()
        .take_while(|(w, _)| *w >= cutoff)
        .take(12)
        .map(|(_, name)| name)
        .collect()
}

/// Traditional model: energy plus reserve against fixed megawatt
/// requirements, base-case network only.
pub struct ModelOne {
    pub problem: LpProblem,
    pub base: NetworkSide,
    /// eq row of 1'rU = R_U and 1'rD = R_D.
    pub gamma_up_row: usize,
    pub gamma_dn_row: usize,
}

#[derive(Debug, Clone)]
pub struct TraditionalSolution {
    pub g: Vec<f64>,
    pub r_u: Vec<f64>,
    pub r_d: Vec<f64>,
    pub lambda: f64,
    pub mu_pos: Vec<f64>,
    pub mu_neg: Vec<f64>,
    /// Reserve clearing prices from the requirement rows.
    pub gamma_up: f64,
    pub gamma_dn: f64,
    pub bid_cost: f64,
}

pub fn build_model_one(case: &MarketCase, r_u_req: f64, r_d_req: f64) -> Result<ModelOne, ClearingError> {
    checked(case)?;
    let n_g = case.n_gens();
    let base_factors = base_shift_factors(case)?;
    let base_caps = base_capacities(case);

    let mut lp = LpProblem::new(3 * n_g);
    for (j, gen) in case.generators.iter().enumerate() {
        lp.var_names[j] = format!("g{j}");
        lp.var_names[n_g + j] = format!("rU{j}");
        lp.var_names[2 * n_g + j] = format!("rD{j}");
        lp.objective[j] = gen.c_energy;
        lp.objective[n_g + j] = gen.c_ru;
        lp.objective[2 * n_g + j] = gen.c_rd;
        lp.set_bounds(n_g + j, 0.0, gen.ru_max);
        lp.set_bounds(2 * n_g + j, 0.0, gen.rd_max);
    }
    lp.add_eq(
        (0..n_g).map(|j| (j, -1.0)).collect(),
        -case.total_demand(),
        "balance_base",
    );
    let gamma_up_row = lp.eq_rows.len();
    lp.add_eq((0..n_g).map(|j| (n_g + j, 1.0)).collect(), r_u_req, "reserve_up_req");
    let gamma_dn_row = lp.eq_rows.len();
    lp.add_eq(
        (0..n_g).map(|j| (2 * n_g + j, 1.0)).collect(),
        r_d_req,
        "reserve_dn_req",
    );

    for (row, &line_id) in base_factors.line_ids.iter().enumerate() {
        let s_row = base_factors.matrix.row(row);
        let entries: Vec<(usize, f64)> = case
            .generators
            .iter()
            .enumerate()
            .filter(|(_, gen)| s_row[gen.bus].abs() > S_EPS)
            .map(|(j, gen)| (j, s_row[gen.bus]))
            .collect();
        let load_term: f64 = case
            .loads
            .iter()
            .map(|l| s_row[l.bus] * l.base_demand)
            .sum();
        let cap = base_caps[line_id];
        lp.add_ub(entries.clone(), cap + load_term, format!("flow_base_l{line_id}_pos"));
        lp.add_ub(
            entries.iter().map(|&(c, v)| (c, -v)).collect(),
            cap - load_term,
            format!("flow_base_l{line_id}_neg"),
        );
    }
    for (j, gen) in case.generators.iter().enumerate() {
        lp.add_ub(vec![(j, 1.0), (n_g + j, 1.0)], gen.g_max, format!("cap_up_g{j}"));
        lp.add_ub(vec![(j, -1.0), (2 * n_g + j, 1.0)], -gen.g_min, format!("cap_dn_g{j}"));
    }

    Ok(ModelOne {
        problem: lp,
        base: NetworkSide {
            factors: base_factors,
            capacities: base_caps,
        },
        gamma_up_row,
        gamma_dn_row,
    })
}

pub fn solve_model_one(
    case: &MarketCase,
    r_u_req: f64,
    r_d_req: f64,
) -> Result<TraditionalSolution, ClearingError> {
    let model = build_model_one(case, r_u_req, r_d_req)?;
    let solution = solve_with(&model.problem, &SolverOptions::default())?;
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(ClearingError::InfeasibleMarket {
                constraints: leading_constraints(&model.problem, &solution),
            })
        }
        LpStatus::Unbounded => return Err(ClearingError::UnboundedMarket),
    }
    let n_g = case.n_gens();
    let x = &solution.x;
    let n_lines = model.base.factors.line_ids.len();
    Ok(TraditionalSolution {
        g: x[..n_g].to_vec(),
        r_u: x[n_g..2 * n_g].to_vec(),
        r_d: x[2 * n_g..3 * n_g].to_vec(),
        lambda: solution.eq_duals[0],
        mu_pos: (0..n_lines).map(|r| solution.ub_duals[2 * r]).collect(),
        mu_neg: (0..n_lines).map(|r| solution.ub_duals[2 * r + 1]).collect(),
        gamma_up: solution.eq_duals[model.gamma_up_row],
        gamma_dn: solution.eq_duals[model.gamma_dn_row],
        bid_cost: solution.objective_value,
    })
}

/// Hold `(g, r_U, r_D)` fixed and optimize only the recourse variables of
/// the scenario model; the returned value scores the fixed point under the
/// expected-cost objective.
pub fn evaluate_recourse_cost(
    case: &MarketCase,
    fixed_g: &[f64],
    fixed_r_u: &[f64],
    fixed_r_d: &[f64],
) -> Result<f64, ClearingError> {
    if fixed_g.len() != case.n_gens()
        || fixed_r_u.len() != case.n_gens()
        || fixed_r_d.len() != case.n_gens()
    {
        return Err(ClearingError::Precondition(
            "fixed vectors must have one entry per generator".into(),
        ));
    }
    for (j, gen) in case.generators.iter().enumerate() {
        let box_tol = 1e-7 * (1.0 + gen.g_max.abs());
        if fixed_g[j] + fixed_r_u[j] > gen.g_max + box_tol
            || gen.g_min + fixed_r_d[j] > fixed_g[j] + box_tol
            || fixed_r_u[j] < -box_tol
            || fixed_r_u[j] > gen.ru_max + box_tol
            || fixed_r_d[j] < -box_tol
            || fixed_r_d[j] > gen.rd_max + box_tol
        {
            return Err(ClearingError::Precondition(format!(
                "fixed point violates generator {j} capacity/reserve box"
            )));
        }
    }

    let mut model = build_model_two(case)?;
    let idx = model.index.clone();
    for j in 0..case.n_gens() {
        model.problem.set_bounds(idx.g(j), fixed_g[j], fixed_g[j]);
        model.problem.set_bounds(idx.r_u(j), fixed_r_u[j], fixed_r_u[j]);
        model.problem.set_bounds(idx.r_d(j), fixed_r_d[j], fixed_r_d[j]);
    }
    let options = clearing_solver_options(&model, None);
    let solution = solve_with(&model.problem, &options)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution.objective_value),
        LpStatus::Infeasible => Err(ClearingError::InfeasibleMarket {
            constraints: leading_constraints(&model.problem, &solution),
        }),
        LpStatus::Unbounded => Err(ClearingError::UnboundedMarket),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::fixture_twobus;
    use crate::model::{Bus, Generator, Line, Load, Scenario};

    #[test]
    fn twobus_variable_count_matches_structure() {
        let case = fixture_twobus();
        let model = build_model_two(&case).unwrap();
        // 3 gens x 3 base vars + 5 scenarios x (3 + 3 + 3).
        assert_eq!(model.problem.n_vars, 54);
        assert_eq!(model.index.n_cols(), 54);
        // eq rows: base balance + 5 scenario balances.
        assert_eq!(model.problem.eq_rows.len(), 6);
    }

    fn single_bus_case() -> MarketCase {
        MarketCase {
            buses: vec![
                Bus { id: 0, name: "only".into() },
                Bus { id: 1, name: "stub".into() },
            ],
            lines: vec![Line {
                id: 0,
                from_bus: 0,
                to_bus: 1,
                reactance: 0.1,
                capacity: 100.0,
                parallel_count: 1,
            }],
            generators: vec![Generator {
                id: 0,
                bus: 0,
                g_min: 0.0,
                g_max: 50.0,
                ru_max: 10.0,
                rd_max: 10.0,
                c_energy: 12.5,
                c_ru: 1.0,
                c_rd: 1.0,
            }],
            loads: vec![Load { id: 0, bus: 0, base_demand: 20.0, c_shed: 500.0 }],
            scenarios: vec![],
            slack_bus: 0,
        }
    }

    #[test]
    fn single_bus_no_scenarios_prices_at_bid() {
        let case = single_bus_case();
        let sol = solve_clearing(&case).unwrap();
        assert!((sol.g[0] - 20.0).abs() < 1e-7);
        assert!((sol.lambda - 12.5).abs() < 1e-7);
        assert!(sol.r_u[0].abs() < 1e-7);
        assert!(sol.r_d[0].abs() < 1e-7);
        assert!(sol.kkt.max() < 1e-8);
    }

    #[test]
    fn empty_scenario_set_reduces_to_dcopf() {
        let mut case = fixture_twobus();
        case.scenarios.clear();
        let sol = solve_clearing(&case).unwrap();
        assert!(sol.r_u.iter().all(|v| v.abs() < 1e-7));
        assert!(sol.r_d.iter().all(|v| v.abs() < 1e-7));
        // Cheapest dispatch subject to the 2 MW line: G1 serves d1 plus the
        // line, G2 the rest.
        assert!((sol.g[0] - 8.0).abs() < 1e-6, "g = {:?}", sol.g);
        assert!((sol.g[1] - 17.0).abs() < 1e-6);
    }

    #[test]
    fn shedding_keeps_scarce_scenario_feasible() {
        let mut case = single_bus_case();
        case.generators[0].g_max = 25.0;
        case.scenarios.push(Scenario {
            id: 0,
            probability: 0.2,
            outaged_lines: vec![],
            load_fluctuation: vec![30.0], // demand 50 > capacity 25
            exceed_rate: 1.0,
            c_redispatch_up: vec![20.0],
            c_redispatch_down: vec![20.0],
        });
        let sol = solve_clearing(&case).unwrap();
        assert!(sol.shed[0][0] > 1.0, "shed = {:?}", sol.shed);
        assert!(sol.kkt.max() < 1e-8);
    }

    #[test]
    fn restriction_at_optimum_reproduces_cost() {
        let case = fixture_twobus();
        let sol = solve_clearing(&case).unwrap();
        let cost = evaluate_recourse_cost(&case, &sol.g, &sol.r_u, &sol.r_d).unwrap();
        assert!(
            (cost - sol.expected_total_cost).abs() < 1e-6 * (1.0 + cost.abs()),
            "{cost} vs {}",
            sol.expected_total_cost
        );
    }

    #[test]
    fn exceed_rate_relaxation_never_costs_more() {
        let case = fixture_twobus();
        let base_cost = solve_clearing(&case).unwrap().expected_total_cost;
        let mut relaxed = case.clone();
        for scen in &mut relaxed.scenarios {
            scen.exceed_rate += 0.3;
        }
        let relaxed_cost = solve_clearing(&relaxed).unwrap().expected_total_cost;
        assert!(relaxed_cost <= base_cost + 1e-6 * (1.0 + base_cost.abs()));
    }

    #[test]
    fn model_one_zero_requirements_is_pure_dcopf() {
        let case = fixture_twobus();
        let sol = solve_model_one(&case, 0.0, 0.0).unwrap();
        assert!(sol.r_u.iter().all(|v| v.abs() < 1e-7));
        assert!((sol.g.iter().sum::<f64>() - 25.0).abs() < 1e-6);
    }

    #[test]
    fn zero_fixed_reserve_recourse_is_costly_or_infeasible() {
        let case = fixture_twobus();
        let sol = solve_clearing(&case).unwrap();
        let zeros = vec![0.0; 3];
        match evaluate_recourse_cost(&case, &sol.g, &zeros, &zeros) {
            Ok(cost) => assert!(cost > sol.expected_total_cost),
            Err(ClearingError::InfeasibleMarket { constraints }) => {
                assert!(!constraints.is_empty());
            }
            Err(other) => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn objective_matches_bid_evaluation() {
        let case = fixture_twobus();
        let sol = solve_clearing(&case).unwrap();
        let direct = objective_from_primal(&case, &sol);
        assert!((direct - sol.expected_total_cost).abs() < 1e-7 * (1.0 + direct.abs()));
    }
}

