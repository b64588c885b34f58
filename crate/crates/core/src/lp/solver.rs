//! Interior-point LP solver.
//!
//! Pipeline: presolve fixed variables, Ruiz-equilibrate, convert `<=` rows
//! to equalities with slacks, then run a Mehrotra predictor-corrector on the
//! box-bounded form. Normal equations are formed sparsely and factored with
//! the dense blocked Cholesky from `linalg`.
//!
//! Infeasible and unbounded problems are certified rather than guessed: when
//! the main iteration stalls, a phase-one feasibility problem decides
//! infeasibility (its duals are the Farkas certificate), and a ray-search
//! feasibility problem decides unboundedness (its solution is the improving
//! ray). Both auxiliary problems are feasible and bounded by construction.
//!
//! Problems with many `<=` rows (network flow limits) are solved lazily:
//! start without them, solve, add violated rows, repeat. Rows never added
//! carry zero multipliers, which is exactly complementary slackness.

use super::{FarkasCertificate, LpProblem, LpSolution, LpStatus, SparseRow};
use crate::linalg::{cholesky_in_place, cholesky_solve, Matrix};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("solver could not certify a status: {0}")]
    NumericalFailure(String),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Convergence tolerance on scaled residuals.
    pub tol: f64,
    /// Accept the best iterate when the loop ends above `tol` but at or
    /// below this progress level (conditioning floor escape). Equal to
    /// `tol` by default, i.e. disabled.
    pub accept_progress: f64,
    pub max_iter: usize,
    /// Per-ub-row flags marking rows that may start inactive and be added
    /// only when violated (network flow limits). Rows outside the mask are
    /// always present. `None` disables lazy activation.
    pub lazy_rows: Option<Vec<bool>>,
    /// Deferrable-row count below which laziness is not worth the rounds.
    pub lazy_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            accept_progress: 1e-9,
            max_iter: 200,
            lazy_rows: None,
            lazy_threshold: 256,
        }
    }
}

pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_with(problem, &SolverOptions::default())
}

pub fn solve_with(problem: &LpProblem, options: &SolverOptions) -> Result<LpSolution, LpError> {
    problem.well_formed().map_err(LpError::Malformed)?;

    let deferrable = match &options.lazy_rows {
        Some(mask) if mask.len() == problem.ub_rows.len() => {
            mask.iter().filter(|&&d| d).count()
        }
        _ => 0,
    };
    if deferrable <= options.lazy_threshold {
        return classify_solve(problem, options);
    }
    let mask = options.lazy_rows.as_ref().unwrap();

    // Lazy activation of deferrable <= rows. Intermediate rounds only
    // locate violated rows, so they run at loose tolerance; once a round
    // adds nothing the active set is re-solved tight.
    let loose = SolverOptions {
        tol: options.tol.max(1e-6),
        accept_progress: options.accept_progress.max(1e-6),
        ..options.clone()
    };
    let mut active: Vec<usize> = (0..problem.ub_rows.len()).filter(|&i| !mask[i]).collect();
    let mut active_mask: Vec<bool> = mask.iter().map(|&d| !d).collect();
    let mut tight_round = false;
    for _round in 0..200 {
        let sub = subset_problem(problem, &active);
        let sub_solution = classify_solve(&sub, if tight_round { options } else { &loose })?;
        match sub_solution.status {
            LpStatus::Infeasible => {
                // A relaxation is infeasible, so the full problem is too.
                return Ok(expand_solution(problem, &active, sub_solution));
            }
            LpStatus::Unbounded => {
                let ray = sub_solution.ray.as_ref().expect("unbounded without ray");
                let violated = violated_rows(problem, &active_mask, ray, 1e-9, true);
                if violated.is_empty() {
                    return Ok(expand_solution(problem, &active, sub_solution));
                }
                for row in violated {
                    active_mask[row] = true;
                    active.push(row);
                }
                active.sort_unstable();
                tight_round = false;
            }
            LpStatus::Optimal => {
                let violated = violated_rows(problem, &active_mask, &sub_solution.x, 1e-9, false);
                if violated.is_empty() {
                    if tight_round {
                        return Ok(expand_solution(problem, &active, sub_solution));
                    }
                    tight_round = true;
                    continue;
                }
                for row in violated {
                    active_mask[row] = true;
                    active.push(row);
                }
                active.sort_unstable();
                tight_round = false;
            }
        }
    }
    Err(LpError::NumericalFailure(
        "lazy row activation did not settle".into(),
    ))
}

fn subset_problem(problem: &LpProblem, active: &[usize]) -> LpProblem {
    let mut sub = problem.clone();
    sub.ub_rows = active.iter().map(|&i| problem.ub_rows[i].clone()).collect();
    sub.ub_names = active.iter().map(|&i| problem.ub_names[i].clone()).collect();
    sub
}

fn violated_rows(
    problem: &LpProblem,
    active_mask: &[bool],
    x: &[f64],
    tol: f64,
    ray_mode: bool,
) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, (row, b)) in problem.ub_rows.iter().enumerate() {
        if active_mask[i] {
            continue;
        }
        let lhs = row.dot(x);
        let violated = if ray_mode {
            lhs > tol * (1.0 + row.max_abs())
        } else {
            lhs - b > tol * (1.0 + b.abs())
        };
        if violated {
            out.push(i);
        }
    }
    out
}

fn expand_solution(problem: &LpProblem, active: &[usize], sub: LpSolution) -> LpSolution {
    let mut ub_duals = vec![0.0; problem.ub_rows.len()];
    for (pos, &row) in active.iter().enumerate() {
        ub_duals[row] = sub.ub_duals[pos];
    }
    let farkas = sub.farkas.map(|f| {
        let mut ub_weights = vec![0.0; problem.ub_rows.len()];
        for (pos, &row) in active.iter().enumerate() {
            ub_weights[row] = f.ub_weights[pos];
        }
        FarkasCertificate {
            eq_weights: f.eq_weights,
            ub_weights,
            gap: f.gap,
        }
    });
    let mut degenerate = sub.degenerate;
    degenerate.sort();
    degenerate.dedup();
    LpSolution {
        ub_duals,
        farkas,
        degenerate,
        ..sub
    }
}

/// Solve and, when the interior-point iteration cannot conclude, classify
/// the problem via the two auxiliary feasibility problems.
fn classify_solve(problem: &LpProblem, options: &SolverOptions) -> Result<LpSolution, LpError> {
    match mehrotra_solve(problem, options, 1e4) {
        MehrotraOutcome::Converged(solution) => Ok(solution),
        MehrotraOutcome::ArtificialBoundHit => classify_stalled(problem, options, true),
        MehrotraOutcome::Stalled => classify_stalled(problem, options, false),
    }
}

fn classify_stalled(
    problem: &LpProblem,
    options: &SolverOptions,
    suspect_unbounded: bool,
) -> Result<LpSolution, LpError> {
    // Infeasibility test first unless the evidence points at unboundedness.
    if !suspect_unbounded {
        if let Some(solution) = try_infeasibility(problem, options)? {
            return Ok(solution);
        }
        if let Some(solution) = try_unbounded(problem, options)? {
            return Ok(solution);
        }
    } else {
        if let Some(solution) = try_unbounded(problem, options)? {
            return Ok(solution);
        }
        if let Some(solution) = try_infeasibility(problem, options)? {
            return Ok(solution);
        }
    }
    // Feasible and bounded, but the first run stalled: retry harder with a
    // wider artificial box.
    let retry = SolverOptions {
        max_iter: options.max_iter * 3,
        accept_progress: 1e-7,
        ..options.clone()
    };
    match mehrotra_solve(problem, &retry, 1e6) {
        MehrotraOutcome::Converged(solution) => Ok(solution),
        _ => Err(LpError::NumericalFailure(
            "iteration stalled on a problem certified feasible and bounded".into(),
        )),
    }
}

/// Phase-one feasibility: returns an `Infeasible` solution with a Farkas
/// certificate when the constraints are inconsistent.
fn try_infeasibility(
    problem: &LpProblem,
    options: &SolverOptions,
) -> Result<Option<LpSolution>, LpError> {
    let n = problem.n_vars;
    let me = problem.eq_rows.len();
    let mu = problem.ub_rows.len();
    let mut aux = LpProblem::new(n + 2 * me + mu);
    aux.bounds[..n].copy_from_slice(&problem.bounds);
    for j in n..aux.n_vars {
        aux.bounds[j] = (0.0, f64::INFINITY);
        aux.objective[j] = 1.0;
    }
    for (i, (row, b)) in problem.eq_rows.iter().enumerate() {
        let mut entries = row.entries.clone();
        entries.push((n + 2 * i, 1.0));
        entries.push((n + 2 * i + 1, -1.0));
        aux.add_eq(entries, *b, format!("feas_eq{i}"));
    }
    for (i, (row, b)) in problem.ub_rows.iter().enumerate() {
        let mut entries = row.entries.clone();
        entries.push((n + 2 * me + i, -1.0));
        aux.add_ub(entries, *b, format!("feas_ub{i}"));
    }

    let aux_options = SolverOptions {
        accept_progress: 1e-7,
        ..options.clone()
    };
    let aux_solution = match mehrotra_solve(&aux, &aux_options, 1e4) {
        MehrotraOutcome::Converged(s) => s,
        _ => {
            return Err(LpError::NumericalFailure(
                "phase-one feasibility problem did not converge".into(),
            ))
        }
    };
    let scale = 1.0 + problem
        .eq_rows
        .iter()
        .chain(&problem.ub_rows)
        .map(|(_, b)| b.abs())
        .fold(0.0, f64::max);
    // The cut sits well above the loose-convergence floor (~1e-6 scale) and
    // well below any economically meaningful deficit.
    if aux_solution.objective_value <= 1e-5 * scale {
        return Ok(None);
    }

    // Certificate: y on eq rows, mu on ub rows, gap = -dual objective < 0.
    let gap = -aux_solution.dual_objective(&aux);
    Ok(Some(LpSolution {
        status: LpStatus::Infeasible,
        x: aux_solution.x[..n].to_vec(),
        eq_duals: vec![0.0; me],
        ub_duals: vec![0.0; mu],
        lower_bound_duals: vec![0.0; n],
        upper_bound_duals: vec![0.0; n],
        objective_value: f64::INFINITY,
        iterations: aux_solution.iterations,
        degenerate: Vec::new(),
        farkas: Some(FarkasCertificate {
            eq_weights: aux_solution.eq_duals.clone(),
            ub_weights: aux_solution.ub_duals.clone(),
            gap,
        }),
        ray: None,
    }))
}

/// Ray search: feasibility of {Aeq d = 0, Aub d <= 0, sign-restricted d,
/// c'd = -1}. A solution is a certified improving ray.
fn try_unbounded(
    problem: &LpProblem,
    options: &SolverOptions,
) -> Result<Option<LpSolution>, LpError> {
    let n = problem.n_vars;
    let mut ray_problem = LpProblem::new(n);
    for j in 0..n {
        let (lo, hi) = problem.bounds[j];
        ray_problem.bounds[j] = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (0.0, 0.0),
            (true, false) => (0.0, f64::INFINITY),
            (false, true) => (f64::NEG_INFINITY, 0.0),
            (false, false) => (f64::NEG_INFINITY, f64::INFINITY),
        };
    }
    for (i, (row, _)) in problem.eq_rows.iter().enumerate() {
        ray_problem.add_eq(row.entries.clone(), 0.0, format!("ray_eq{i}"));
    }
    for (i, (row, _)) in problem.ub_rows.iter().enumerate() {
        ray_problem.add_ub(row.entries.clone(), 0.0, format!("ray_ub{i}"));
    }
    let cost_row: Vec<(usize, f64)> = problem
        .objective
        .iter()
        .enumerate()
        .filter(|&(_, c)| *c != 0.0)
        .map(|(j, &c)| (j, c))
        .collect();
    if cost_row.is_empty() {
        return Ok(None);
    }
    ray_problem.add_eq(cost_row, -1.0, "ray_descent");

    // One phase-one solve decides both questions: a near-zero optimum means
    // the ray system is feasible and the x part is the ray.
    let aux = ray_feasible_point_problem(&ray_problem);
    let aux_options = SolverOptions {
        accept_progress: 1e-7,
        ..options.clone()
    };
    let aux_solution = match mehrotra_solve(&aux, &aux_options, 1e4) {
        MehrotraOutcome::Converged(s) => s,
        _ => {
            return Err(LpError::NumericalFailure(
                "ray feasibility problem did not converge".into(),
            ))
        }
    };
    if aux_solution.objective_value > 1e-7 {
        return Ok(None); // no improving ray: the problem is bounded
    }
    let ray = aux_solution.x[..n].to_vec();

    // Verify the candidate against the original rows before certifying.
    let norm = ray.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if norm <= 0.0 {
        return Ok(None);
    }
    let ray: Vec<f64> = ray.iter().map(|v| v / norm).collect();
    let ok_eq = problem
        .eq_rows
        .iter()
        .all(|(row, _)| row.dot(&ray).abs() <= 1e-6 * (1.0 + row.max_abs()));
    let ok_ub = problem
        .ub_rows
        .iter()
        .all(|(row, _)| row.dot(&ray) <= 1e-6 * (1.0 + row.max_abs()));
    let descent = problem.objective_of(&ray);
    if !(ok_eq && ok_ub && descent < 0.0) {
        return Ok(None);
    }

    Ok(Some(LpSolution {
        status: LpStatus::Unbounded,
        x: vec![0.0; n],
        eq_duals: vec![0.0; problem.eq_rows.len()],
        ub_duals: vec![0.0; problem.ub_rows.len()],
        lower_bound_duals: vec![0.0; n],
        upper_bound_duals: vec![0.0; n],
        objective_value: f64::NEG_INFINITY,
        iterations: 0,
        degenerate: Vec::new(),
        farkas: None,
        ray: Some(ray),
    }))
}

/// Phase-one shape of the ray system, used to extract a concrete point.
fn ray_feasible_point_problem(ray_problem: &LpProblem) -> LpProblem {
    let n = ray_problem.n_vars;
    let me = ray_problem.eq_rows.len();
    let mu = ray_problem.ub_rows.len();
    let mut aux = LpProblem::new(n + 2 * me + mu);
    aux.bounds[..n].copy_from_slice(&ray_problem.bounds);
    for j in n..aux.n_vars {
        aux.bounds[j] = (0.0, f64::INFINITY);
        aux.objective[j] = 1.0;
    }
    for (i, (row, b)) in ray_problem.eq_rows.iter().enumerate() {
        let mut entries = row.entries.clone();
        entries.push((n + 2 * i, 1.0));
        entries.push((n + 2 * i + 1, -1.0));
        aux.add_eq(entries, *b, format!("ray_feas_eq{i}"));
    }
    for (i, (row, b)) in ray_problem.ub_rows.iter().enumerate() {
        let mut entries = row.entries.clone();
        entries.push((n + 2 * me + i, -1.0));
        aux.add_ub(entries, *b, format!("ray_feas_ub{i}"));
    }
    aux
}

enum MehrotraOutcome {
    Converged(LpSolution),
    Stalled,
    ArtificialBoundHit,
}

/// Presolved, scaled, slack-extended problem state.
struct Prepared {
    /// Kept rows over internal columns, scaled.
    rows: Vec<SparseRow>,
    b: Vec<f64>,
    c: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// True where the bound is artificial (originally infinite).
    art_lo: Vec<bool>,
    art_hi: Vec<bool>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost_scale: f64,
    /// internal column(s) of each original variable, or fixed value.
    var_map: Vec<VarState>,
    /// Original combined row index (eq then ub) of each kept row.
    row_map: Vec<usize>,
    me: usize,
    mu: usize,
}

#[derive(Clone, Copy)]
enum VarState {
    Col(usize),
    /// Free variables are split x = plus - minus so both pieces live near
    /// their finite lower bound; a single free column at the center of a
    /// wide artificial box makes the normal equations numerically singular.
    Split(usize, usize),
    Fixed(f64),
}

enum PrepareOutcome {
    Ready(Box<Prepared>),
    /// Fixed variables alone make a row unsatisfiable.
    TriviallyInfeasible { eq_weights: Vec<f64>, ub_weights: Vec<f64>, gap: f64 },
}

fn prepare(problem: &LpProblem, artificial: f64) -> PrepareOutcome {
    let n = problem.n_vars;
    let me = problem.eq_rows.len();
    let mu = problem.ub_rows.len();

    // Fix zero-width variables, split free ones.
    let mut var_map = Vec::with_capacity(n);
    let mut n_internal = 0;
    for &(lo, hi) in &problem.bounds {
        if lo.is_finite() && hi.is_finite() && hi - lo <= 1e-11 * (1.0 + lo.abs()) {
            var_map.push(VarState::Fixed(0.5 * (lo + hi)));
        } else if !lo.is_finite() && !hi.is_finite() {
            var_map.push(VarState::Split(n_internal, n_internal + 1));
            n_internal += 2;
        } else {
            var_map.push(VarState::Col(n_internal));
            n_internal += 1;
        }
    }

    let mut c = vec![0.0; n_internal];
    let mut lo = vec![0.0; n_internal];
    let mut hi = vec![0.0; n_internal];
    for (j, state) in var_map.iter().enumerate() {
        match *state {
            VarState::Fixed(_) => {}
            VarState::Col(col) => {
                c[col] = problem.objective[j];
                lo[col] = problem.bounds[j].0;
                hi[col] = problem.bounds[j].1;
            }
            VarState::Split(plus, minus) => {
                c[plus] = problem.objective[j];
                c[minus] = -problem.objective[j];
                lo[plus] = 0.0;
                hi[plus] = f64::INFINITY;
                lo[minus] = 0.0;
                hi[minus] = f64::INFINITY;
            }
        }
    }

    let mut rows = Vec::with_capacity(me + mu);
    let mut b = Vec::with_capacity(me + mu);
    let mut row_map = Vec::with_capacity(me + mu);
    for (idx, (row, rhs)) in problem.eq_rows.iter().chain(&problem.ub_rows).enumerate() {
        let mut rhs = *rhs;
        let mut entries = Vec::with_capacity(row.entries.len());
        for &(j, v) in &row.entries {
            match var_map[j] {
                VarState::Fixed(val) => rhs -= v * val,
                VarState::Col(col) => entries.push((col, v)),
                VarState::Split(plus, minus) => {
                    entries.push((plus, v));
                    entries.push((minus, -v));
                }
            }
        }
        let is_eq = idx < me;
        if entries.is_empty() {
            let tol = 1e-9 * (1.0 + rhs.abs());
            let bad = if is_eq { rhs.abs() > tol } else { rhs < -tol };
            if bad {
                let mut eq_weights = vec![0.0; me];
                let mut ub_weights = vec![0.0; mu];
                let gap;
                if is_eq {
                    eq_weights[idx] = -rhs.signum();
                    gap = -rhs.abs();
                } else {
                    ub_weights[idx - me] = 1.0;
                    gap = rhs;
                }
                return PrepareOutcome::TriviallyInfeasible { eq_weights, ub_weights, gap };
            }
            // Satisfied constant row: drop it, its dual stays zero.
            continue;
        }
        rows.push(SparseRow { entries });
        b.push(rhs);
        row_map.push(idx);
    }

    // Ruiz equilibration, scales snapped to powers of two.
    let mut row_scale = vec![1.0f64; rows.len()];
    let mut col_scale = vec![1.0f64; n_internal];
    for _pass in 0..6 {
        let mut row_max = vec![0.0f64; rows.len()];
        let mut col_max = vec![0.0f64; n_internal];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                let scaled = (v * row_scale[i] * col_scale[j]).abs();
                row_max[i] = row_max[i].max(scaled);
                col_max[j] = col_max[j].max(scaled);
            }
        }
        let snap = |m: f64| -> f64 {
            if m <= 0.0 {
                1.0
            } else {
                (2.0f64).powi((-0.5 * m.log2()).round() as i32)
            }
        };
        let mut moved = false;
        for (i, m) in row_max.iter().enumerate() {
            let s = snap(*m);
            if s != 1.0 {
                row_scale[i] *= s;
                moved = true;
            }
        }
        for (j, m) in col_max.iter().enumerate() {
            let s = snap(*m);
            if s != 1.0 {
                col_scale[j] *= s;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    let rows: Vec<SparseRow> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| SparseRow {
            entries: row
                .entries
                .iter()
                .map(|&(j, v)| (j, v * row_scale[i] * col_scale[j]))
                .collect(),
        })
        .collect();
    let b: Vec<f64> = b.iter().zip(&row_scale).map(|(v, s)| v * s).collect();
    for j in 0..n_internal {
        // x_hat = x / col_scale
        if lo[j].is_finite() {
            lo[j] /= col_scale[j];
        }
        if hi[j].is_finite() {
            hi[j] /= col_scale[j];
        }
        c[j] *= col_scale[j];
    }
    let cost_scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for v in &mut c {
        *v /= cost_scale;
    }

    // Slacks for kept ub rows; then artificial finite bounds everywhere.
    let mut full_rows = rows;
    let mut c_full = c;
    let mut lo_full = lo;
    let mut hi_full = hi;
    let mut next_col = n_internal;
    for (pos, &orig) in row_map.iter().enumerate() {
        if orig >= me {
            full_rows[pos].entries.push((next_col, 1.0));
            c_full.push(0.0);
            lo_full.push(0.0);
            hi_full.push(f64::INFINITY);
            next_col += 1;
        }
    }

    let data_mag = b
        .iter()
        .map(|v| v.abs())
        .chain(lo_full.iter().filter(|v| v.is_finite()).map(|v| v.abs()))
        .chain(hi_full.iter().filter(|v| v.is_finite()).map(|v| v.abs()))
        .fold(1.0f64, f64::max);
    let big = artificial * data_mag;
    let mut art_lo = vec![false; c_full.len()];
    let mut art_hi = vec![false; c_full.len()];
    for j in 0..c_full.len() {
        if !lo_full[j].is_finite() {
            lo_full[j] = -big;
            art_lo[j] = true;
        }
        if !hi_full[j].is_finite() {
            hi_full[j] = big;
            art_hi[j] = true;
        }
    }

    PrepareOutcome::Ready(Box::new(Prepared {
        rows: full_rows,
        b,
        c: c_full,
        lo: lo_full,
        hi: hi_full,
        art_lo,
        art_hi,
        row_scale,
        col_scale,
        cost_scale,
        var_map,
        row_map,
        me,
        mu,
    }))
}

fn mehrotra_solve(
    problem: &LpProblem,
    options: &SolverOptions,
    artificial: f64,
) -> MehrotraOutcome {
    let prepared = match prepare(problem, artificial) {
        PrepareOutcome::Ready(p) => p,
        PrepareOutcome::TriviallyInfeasible { eq_weights, ub_weights, gap } => {
            return MehrotraOutcome::Converged(LpSolution {
                status: LpStatus::Infeasible,
                x: problem.bounds.iter().map(|&(lo, hi)| clamp_finite(0.0, lo, hi)).collect(),
                eq_duals: vec![0.0; problem.eq_rows.len()],
                ub_duals: vec![0.0; problem.ub_rows.len()],
                lower_bound_duals: vec![0.0; problem.n_vars],
                upper_bound_duals: vec![0.0; problem.n_vars],
                objective_value: f64::INFINITY,
                iterations: 0,
                degenerate: Vec::new(),
                farkas: Some(FarkasCertificate { eq_weights, ub_weights, gap }),
                ray: None,
            });
        }
    };
    let p = &*prepared;
    let m = p.rows.len();
    let n = p.c.len();

    if n == 0 {
        // Everything fixed; rows were checked in presolve.
        return MehrotraOutcome::Converged(extract_solution(problem, p, &State::empty(m), 0));
    }

    let mut state = State::start(p);
    if std::env::var("RESERVEFLOW_LP_TRACE").is_ok() {
        eprintln!("=== solve: m {m} n {n} ===");
    }
    let b_norm = 1.0 + p.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let c_norm = 1.0 + p.c.iter().map(|v| v.abs()).fold(0.0, f64::max);

    let mut history: Vec<f64> = Vec::new();
    let mut last_alpha = 1.0f64;
    let mut best: Option<(f64, State, usize)> = None;
    for iter in 0..options.max_iter {
        let r_p = residual_primal(p, &state);
        let r_d = residual_dual(p, &state);
        let mu_bar = state.average_gap(p);

        let rel_p = inf_norm(&r_p) / b_norm;
        let rel_d = inf_norm(&r_d) / c_norm;
        let primal_obj: f64 = dot_vec(&p.c, &state.x);
        let dual_obj: f64 = dot_vec(&p.b, &state.y)
            + state.zl.iter().zip(&p.lo).map(|(z, l)| z * l).sum::<f64>()
            - state.zu.iter().zip(&p.hi).map(|(z, h)| z * h).sum::<f64>();
        // Converge on feasibility plus complementarity; the summed
        // products bound both the per-product residual and the products'
        // contribution to the duality gap. The raw objective difference is
        // not usable as a test: when the primal has no strict interior the
        // dual optimal set is unbounded, the central path's dual iterate
        // drifts, and y'r_p pollutes the difference even at optimality.
        let products_sum = 2.0 * state.x.len() as f64 * mu_bar;
        let progress = rel_p
            .max(rel_d)
            .max(products_sum / (1.0 + primal_obj.abs()));

        if std::env::var("RESERVEFLOW_LP_TRACE").is_ok() {
            let rel_gap = (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs());
            eprintln!(
                "iter {iter}: rel_p {rel_p:.3e} rel_d {rel_d:.3e} gap {rel_gap:.3e} mu {mu_bar:.3e} obj {primal_obj:.6e} |y| {:.3e}",
                inf_norm(&state.y)
            );
        }
        if progress < options.tol {
            // Converged in scaled space; refuse if an artificial bound does
            // the work of a missing real bound.
            if artificial_bound_binding(p, &state) {
                return MehrotraOutcome::ArtificialBoundHit;
            }
            return MehrotraOutcome::Converged(extract_solution(problem, p, &state, iter + 1));
        }
        if best.as_ref().is_none_or(|(b, _, _)| progress < *b) {
            best = Some((progress, state.clone(), iter));
        }
        history.push(progress);
        if stalled(&history) {
            break;
        }

        // Normal-equations factorization shared by both direction solves.
        let d: Vec<f64> = (0..n)
            .map(|j| state.zl[j] / state.p[j] + state.zu[j] / state.q[j])
            .collect();
        // Capping theta from above is dual regularization for loose columns
        // (far from both bounds): the capped system is solved exactly and
        // the O(1e-10 |dx|) dual-equation error self-corrects next
        // iteration. No floor: tiny theta on pinned columns is correct and
        // flooring it corrupts converged coordinates.
        let theta: Vec<f64> = d.iter().map(|v| (1.0 / v).min(1e10)).collect();
        let Some(factor) = factor_normal_equations(p, &theta) else {
            return MehrotraOutcome::Stalled;
        };

        // Affine direction.
        let rc_l: Vec<f64> = (0..n).map(|j| -state.p[j] * state.zl[j]).collect();
        let rc_u: Vec<f64> = (0..n).map(|j| -state.q[j] * state.zu[j]).collect();
        let affine = solve_newton(p, &state, &factor, &theta, &r_p, &r_d, &rc_l, &rc_u);
        let (alpha_p_aff, alpha_d_aff) = max_steps(&state, &affine, 1.0);

        let gap_aff = {
            let mut acc = 0.0;
            let mut count = 0usize;
            for j in 0..n {
                let pj = state.p[j] + alpha_p_aff * affine.dx[j];
                let qj = state.q[j] - alpha_p_aff * affine.dx[j];
                let zlj = state.zl[j] + alpha_d_aff * affine.dzl[j];
                let zuj = state.zu[j] + alpha_d_aff * affine.dzu[j];
                acc += pj.max(0.0) * zlj.max(0.0) + qj.max(0.0) * zuj.max(0.0);
                count += 2;
            }
            acc / count as f64
        };
        // Re-center hard after a blocked step instead of driving mu down
        // along a wedged direction.
        let sigma_floor = if last_alpha < 0.05 { 0.5 } else { 1e-10 };
        let sigma = (gap_aff / mu_bar).powi(3).clamp(sigma_floor, 0.99);

        // Corrector direction reusing the factorization.
        let target = sigma * mu_bar;
        let rc_l: Vec<f64> = (0..n)
            .map(|j| target - state.p[j] * state.zl[j] - affine.dx[j] * affine.dzl[j])
            .collect();
        let rc_u: Vec<f64> = (0..n)
            .map(|j| target - state.q[j] * state.zu[j] + affine.dx[j] * affine.dzu[j])
            .collect();
        let step = solve_newton(p, &state, &factor, &theta, &r_p, &r_d, &rc_l, &rc_u);
        let (alpha_p, alpha_d) = max_steps(&state, &step, 0.9995);

        last_alpha = alpha_p.min(alpha_d);
        state.apply(&step, alpha_p, alpha_d);
        if !state.finite() {
            break;
        }
    }
    // Loop ended above tol: accept the best iterate if the caller allows
    // loose convergence (conditioning floors on interior-free problems).
    if let Some((progress, state, iter)) = best {
        if progress <= options.accept_progress && !artificial_bound_binding(p, &state) {
            return MehrotraOutcome::Converged(extract_solution(problem, p, &state, iter + 1));
        }
    }
    MehrotraOutcome::Stalled
}

fn clamp_finite(v: f64, lo: f64, hi: f64) -> f64 {
    let lo = if lo.is_finite() { lo } else { v.min(0.0) };
    let hi = if hi.is_finite() { hi } else { v.max(lo) };
    v.clamp(lo, hi)
}

#[derive(Clone)]
struct State {
    x: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    /// x - lo, always > 0.
    p: Vec<f64>,
    /// hi - x, always > 0.
    q: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dzl: Vec<f64>,
    dzu: Vec<f64>,
}

impl State {
    fn empty(m: usize) -> State {
        State {
            x: Vec::new(),
            y: vec![0.0; m],
            zl: Vec::new(),
            zu: Vec::new(),
            p: Vec::new(),
            q: Vec::new(),
        }
    }

    /// Least-squares starting point: the min-norm solution of `A x = b`
    /// pulled inside the box, and duals from the unconstrained stationarity
    /// fit. Starting on the row geometry instead of an arbitrary interior
    /// point avoids wedging onto a wrong vertex early.
    fn start(p: &Prepared) -> State {
        let n = p.c.len();
        let m = p.rows.len();

        let (x_ls, y_ls) = if m > 0 {
            let theta = vec![1.0; n];
            match factor_normal_equations(p, &theta) {
                Some(factor) => {
                    let w = cholesky_solve(&factor.l, &p.b);
                    let mut x0 = vec![0.0; n];
                    for (row, wi) in p.rows.iter().zip(&w) {
                        for &(j, v) in &row.entries {
                            x0[j] += v * wi;
                        }
                    }
                    let mut a_c = vec![0.0; m];
                    for (i, row) in p.rows.iter().enumerate() {
                        a_c[i] = row.entries.iter().map(|&(j, v)| v * p.c[j]).sum();
                    }
                    let y0 = cholesky_solve(&factor.l, &a_c);
                    (x0, y0)
                }
                None => (vec![0.0; n], vec![0.0; m]),
            }
        } else {
            (vec![0.0; n], Vec::new())
        };

        let mut x = vec![0.0; n];
        for j in 0..n {
            let width = p.hi[j] - p.lo[j];
            let margin = (0.25 * width).min(1.0 + 0.01 * x_ls[j].abs());
            x[j] = x_ls[j].clamp(p.lo[j] + margin, p.hi[j] - margin);
        }

        // z0 = c - A'y0; split the sign into the two bound duals.
        let mut z0 = p.c.clone();
        for (row, yi) in p.rows.iter().zip(&y_ls) {
            for &(j, v) in &row.entries {
                z0[j] -= v * yi;
            }
        }
        let pvec: Vec<f64> = (0..n).map(|j| x[j] - p.lo[j]).collect();
        let qvec: Vec<f64> = (0..n).map(|j| p.hi[j] - x[j]).collect();

        // Balance the initial complementarity products: coordinates far
        // from a bound get a small multiplier so p*zl starts near 10
        // everywhere instead of scaling with the box width.
        let mut zl = vec![0.0; n];
        let mut zu = vec![0.0; n];
        for j in 0..n {
            zl[j] = z0[j].max(0.0) + 10.0 / (1.0 + pvec[j]);
            zu[j] = (-z0[j]).max(0.0) + 10.0 / (1.0 + qvec[j]);
        }
        State {
            x,
            y: y_ls,
            zl,
            zu,
            p: pvec,
            q: qvec,
        }
    }

    fn average_gap(&self, _p: &Prepared) -> f64 {
        let n = self.x.len();
        if n == 0 {
            return 0.0;
        }
        let acc: f64 = (0..n)
            .map(|j| self.p[j] * self.zl[j] + self.q[j] * self.zu[j])
            .sum();
        acc / (2 * n) as f64
    }

    fn apply(&mut self, step: &Direction, alpha_p: f64, alpha_d: f64) {
        for j in 0..self.x.len() {
            self.x[j] += alpha_p * step.dx[j];
            self.p[j] += alpha_p * step.dx[j];
            self.q[j] -= alpha_p * step.dx[j];
            self.zl[j] += alpha_d * step.dzl[j];
            self.zu[j] += alpha_d * step.dzu[j];
        }
        for i in 0..self.y.len() {
            self.y[i] += alpha_d * step.dy[i];
        }
    }

    fn finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.y.iter().all(|v| v.is_finite())
            && self.zl.iter().all(|v| v.is_finite())
            && self.zu.iter().all(|v| v.is_finite())
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn dot_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual_primal(p: &Prepared, state: &State) -> Vec<f64> {
    p.rows
        .iter()
        .zip(&p.b)
        .map(|(row, b)| b - row.dot(&state.x))
        .collect()
}

fn residual_dual(p: &Prepared, state: &State) -> Vec<f64> {
    let n = p.c.len();
    let mut at_y = vec![0.0; n];
    for (row, y) in p.rows.iter().zip(&state.y) {
        if *y != 0.0 {
            for &(j, v) in &row.entries {
                at_y[j] += v * y;
            }
        }
    }
    (0..n)
        .map(|j| p.c[j] - at_y[j] - state.zl[j] + state.zu[j])
        .collect()
}

fn stalled(history: &[f64]) -> bool {
    let k = history.len();
    if k < 30 {
        return false;
    }
    let now = history[k - 1];
    let before = history[k - 15];
    now > 0.25 * before
}

fn artificial_bound_binding(p: &Prepared, state: &State) -> bool {
    for j in 0..p.c.len() {
        let width = p.hi[j] - p.lo[j];
        if p.art_lo[j] && state.p[j] < 1e-5 * width {
            return true;
        }
        if p.art_hi[j] && state.q[j] < 1e-5 * width {
            return true;
        }
    }
    false
}

struct NormalFactor {
    l: Matrix,
}

/// Form and factor M = A Theta A' + delta I, retrying with stronger
/// regularization when the Cholesky meets a non-positive pivot.
fn factor_normal_equations(p: &Prepared, theta: &[f64]) -> Option<NormalFactor> {
    let m = p.rows.len();
    let n = p.c.len();
    if m == 0 {
        return Some(NormalFactor {
            l: Matrix::zeros(0, 0),
        });
    }
    let mut base = Matrix::zeros(m, m);

    // Lower triangle of A Theta A', one row strip at a time.
    let rows = &p.rows;
    base.data
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(i, out_row)| {
            let mut scratch = vec![0.0; n];
            for &(jcol, v) in &rows[i].entries {
                scratch[jcol] = v * theta[jcol];
            }
            for j in 0..=i {
                let mut acc = 0.0;
                for &(jcol, v) in &rows[j].entries {
                    acc += scratch[jcol] * v;
                }
                out_row[j] = acc;
            }
        });

    let max_diag = (0..m).map(|i| base.at(i, i)).fold(1.0f64, f64::max);
    let mut delta = 1e-12 * max_diag;
    for _attempt in 0..8 {
        let mut l = base.clone();
        for i in 0..m {
            *l.at_mut(i, i) += delta;
        }
        if cholesky_in_place(&mut l).is_ok() {
            return Some(NormalFactor { l });
        }
        delta = (delta * 1e3).max(1e-10 * max_diag);
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn solve_newton(
    p: &Prepared,
    state: &State,
    factor: &NormalFactor,
    theta: &[f64],
    r_p: &[f64],
    r_d: &[f64],
    rc_l: &[f64],
    rc_u: &[f64],
) -> Direction {
    let n = p.c.len();
    let m = p.rows.len();

    let r_hat: Vec<f64> = (0..n)
        .map(|j| r_d[j] - rc_l[j] / state.p[j] + rc_u[j] / state.q[j])
        .collect();

    // rhs = r_p + A Theta r_hat
    let mut rhs = r_p.to_vec();
    for (i, row) in p.rows.iter().enumerate() {
        let mut acc = 0.0;
        for &(j, v) in &row.entries {
            acc += v * theta[j] * r_hat[j];
        }
        rhs[i] += acc;
    }

    let dy = if m == 0 {
        Vec::new()
    } else {
        // The factor holds M + delta I; refine against plain M so the
        // primal Newton equation A dx = r_p holds to machine precision
        // even when the regularization shift is sizable.
        let mut dy = cholesky_solve(&factor.l, &rhs);
        for _round in 0..2 {
            let m_dy = apply_normal_matrix(p, theta, &dy);
            let resid: Vec<f64> = rhs.iter().zip(&m_dy).map(|(r, v)| r - v).collect();
            let resid_norm = inf_norm(&resid);
            if resid_norm <= 1e-14 * (1.0 + inf_norm(&rhs)) {
                break;
            }
            let corr = cholesky_solve(&factor.l, &resid);
            for (d, c) in dy.iter_mut().zip(&corr) {
                *d += c;
            }
        }
        dy
    };

    // dx = Theta (A' dy - r_hat)
    let mut at_dy = vec![0.0; n];
    for (row, dyi) in p.rows.iter().zip(&dy) {
        if *dyi != 0.0 {
            for &(j, v) in &row.entries {
                at_dy[j] += v * dyi;
            }
        }
    }
    let dx: Vec<f64> = (0..n).map(|j| theta[j] * (at_dy[j] - r_hat[j])).collect();
    let dzl: Vec<f64> = (0..n)
        .map(|j| (rc_l[j] - state.zl[j] * dx[j]) / state.p[j])
        .collect();
    let dzu: Vec<f64> = (0..n)
        .map(|j| (rc_u[j] + state.zu[j] * dx[j]) / state.q[j])
        .collect();

    Direction { dx, dy, dzl, dzu }
}

/// y -> A Theta A' y without forming the matrix.
fn apply_normal_matrix(p: &Prepared, theta: &[f64], y: &[f64]) -> Vec<f64> {
    let n = p.c.len();
    let mut tmp = vec![0.0; n];
    for (row, yi) in p.rows.iter().zip(y) {
        if *yi != 0.0 {
            for &(j, v) in &row.entries {
                tmp[j] += v * yi;
            }
        }
    }
    for (t, th) in tmp.iter_mut().zip(theta) {
        *t *= th;
    }
    p.rows
        .iter()
        .map(|row| row.entries.iter().map(|&(j, v)| v * tmp[j]).sum())
        .collect()
}

fn max_steps(state: &State, step: &Direction, fraction: f64) -> (f64, f64) {
    let mut alpha_p = 1.0f64;
    let mut alpha_d = 1.0f64;
    for j in 0..state.x.len() {
        if step.dx[j] < 0.0 {
            alpha_p = alpha_p.min(-state.p[j] / step.dx[j]);
        }
        if step.dx[j] > 0.0 {
            alpha_p = alpha_p.min(state.q[j] / step.dx[j]);
        }
        if step.dzl[j] < 0.0 {
            alpha_d = alpha_d.min(-state.zl[j] / step.dzl[j]);
        }
        if step.dzu[j] < 0.0 {
            alpha_d = alpha_d.min(-state.zu[j] / step.dzu[j]);
        }
    }
    (alpha_p * fraction, alpha_d * fraction)
}

/// Map the scaled interior point back to the original problem and collect
/// duals under the documented sign convention.
fn extract_solution(
    problem: &LpProblem,
    p: &Prepared,
    state: &State,
    iterations: usize,
) -> LpSolution {
    let n = problem.n_vars;

    let mut x = vec![0.0; n];
    for (j, vs) in p.var_map.iter().enumerate() {
        x[j] = match *vs {
            VarState::Fixed(v) => v,
            VarState::Col(col) => state.x[col] * p.col_scale[col],
            VarState::Split(plus, minus) => {
                state.x[plus] * p.col_scale[plus] - state.x[minus] * p.col_scale[minus]
            }
        };
    }

    // y_ext = -cost_scale * row_scale * y_hat; mu = -y_ext on ub rows.
    // Dropped rows keep zero duals.
    let me = p.me;
    let mut eq_duals = vec![0.0; me];
    let mut ub_duals = vec![0.0; p.mu];
    for (pos, &orig) in p.row_map.iter().enumerate() {
        let value = -p.cost_scale * p.row_scale[pos] * state.y[pos];
        if orig < me {
            eq_duals[orig] = value;
        } else {
            ub_duals[orig - me] = value.max(0.0);
        }
    }

    let mut lower_bound_duals = vec![0.0; n];
    let mut upper_bound_duals = vec![0.0; n];
    for (j, vs) in p.var_map.iter().enumerate() {
        match *vs {
            VarState::Col(col) => {
                let (olo, ohi) = problem.bounds[j];
                if olo.is_finite() {
                    lower_bound_duals[j] = p.cost_scale / p.col_scale[col] * state.zl[col];
                }
                if ohi.is_finite() {
                    upper_bound_duals[j] = p.cost_scale / p.col_scale[col] * state.zu[col];
                }
            }
            VarState::Split(..) => {}
            VarState::Fixed(_) => {
                // Both bounds bind; split the stationarity residual.
                let mut grad = problem.objective[j];
                for ((row, _), y) in problem.eq_rows.iter().zip(&eq_duals) {
                    for &(jj, v) in &row.entries {
                        if jj == j {
                            grad += v * y;
                        }
                    }
                }
                for ((row, _), mu) in problem.ub_rows.iter().zip(&ub_duals) {
                    for &(jj, v) in &row.entries {
                        if jj == j {
                            grad += v * mu;
                        }
                    }
                }
                if grad >= 0.0 {
                    lower_bound_duals[j] = grad;
                } else {
                    upper_bound_duals[j] = -grad;
                }
            }
        }
    }

    let objective_value = problem.objective_of(&x);

    // Degeneracy: binding with a vanishing multiplier.
    let mut degenerate = Vec::new();
    for (i, (row, b)) in problem.ub_rows.iter().enumerate() {
        let slack = b - row.dot(&x);
        if slack.abs() < 1e-7 * (1.0 + b.abs()) && ub_duals[i] < 1e-7 {
            degenerate.push(problem.ub_names[i].clone());
        }
    }
    for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
        if lo.is_finite() && (x[j] - lo).abs() < 1e-7 * (1.0 + lo.abs()) && lower_bound_duals[j] < 1e-7
        {
            degenerate.push(format!("lo:{}", problem.var_names[j]));
        }
        if hi.is_finite() && (hi - x[j]).abs() < 1e-7 * (1.0 + hi.abs()) && upper_bound_duals[j] < 1e-7
        {
            degenerate.push(format!("hi:{}", problem.var_names[j]));
        }
    }

    LpSolution {
        status: LpStatus::Optimal,
        x,
        eq_duals,
        ub_duals,
        lower_bound_duals,
        upper_bound_duals,
        objective_value,
        iterations,
        degenerate,
        farkas: None,
        ray: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{check_kkt, vertex_oracle};

    #[test]
    fn one_dimensional_lower_bound() {
        let mut p = LpProblem::new(1);
        p.objective = vec![1.0];
        p.set_bounds(0, 3.0, f64::INFINITY);
        let sol = solve(&p).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.x[0] - 3.0).abs() < 1e-8);
        assert!((sol.lower_bound_duals[0] - 1.0).abs() < 1e-8);
        assert!(check_kkt(&p, &sol).max() < 1e-8);
    }

    #[test]
    fn box_lp_with_degenerate_face() {
        // min -x-y st x+y <= 1, x,y in [0,1]: objective -1 along a face.
        let mut p = LpProblem::new(2);
        p.objective = vec![-1.0, -1.0];
        p.add_ub(vec![(0, 1.0), (1, 1.0)], 1.0, "cap");
        p.set_bounds(0, 0.0, 1.0);
        p.set_bounds(1, 0.0, 1.0);
        let sol = solve(&p).unwrap();
        assert!((sol.objective_value + 1.0).abs() < 1e-8);
        assert!((sol.ub_duals[0] - 1.0).abs() < 1e-7);
        assert!(check_kkt(&p, &sol).max() < 1e-8);
    }

    #[test]
    fn equality_with_free_descent_is_unbounded() {
        // min -x + 4y st x+y = 1, -3x+y <= 6, x+2y <= 4, x and y free.
        // Along x = 1 - y with y -> -inf both rows stay satisfied and the
        // objective falls without bound.
        let mut p = LpProblem::new(2);
        p.objective = vec![-1.0, 4.0];
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0, "sum");
        p.add_ub(vec![(0, -3.0), (1, 1.0)], 6.0, "c1");
        p.add_ub(vec![(0, 1.0), (1, 2.0)], 4.0, "c2");
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
        let ray = sol.ray.expect("ray");
        // Ray must keep the equality: dx + dy = 0, with descent.
        assert!((ray[0] + ray[1]).abs() < 1e-6);
        assert!(-ray[0] + 4.0 * ray[1] < 0.0);
    }

    #[test]
    fn equality_with_box_is_optimal() {
        // Same rows, y >= 0: optimum at (1, 0).
        let mut p = LpProblem::new(2);
        p.objective = vec![-1.0, 4.0];
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0, "sum");
        p.add_ub(vec![(0, -3.0), (1, 1.0)], 6.0, "c1");
        p.add_ub(vec![(0, 1.0), (1, 2.0)], 4.0, "c2");
        p.set_bounds(1, 0.0, f64::INFINITY);
        let sol = solve(&p).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
        assert!(sol.x[1].abs() < 1e-7);
        assert!(check_kkt(&p, &sol).max() < 1e-8);
    }

    #[test]
    fn detects_infeasible_box() {
        // x <= 0 and x >= 1 via rows.
        let mut p = LpProblem::new(1);
        p.add_ub(vec![(0, 1.0)], 0.0, "le0");
        p.add_ub(vec![(0, -1.0)], -1.0, "ge1");
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        let farkas = sol.farkas.expect("certificate");
        assert!(farkas.gap < 0.0);
        // Verify the certificate: weights >= 0 on ub rows and the
        // aggregated row has no variable support.
        let combo: f64 = farkas.ub_weights[0] - farkas.ub_weights[1];
        assert!(combo.abs() < 1e-6);
    }

    #[test]
    fn detects_unbounded_direction() {
        let mut p = LpProblem::new(1);
        p.objective = vec![-1.0];
        p.set_bounds(0, 0.0, f64::INFINITY);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
        let ray = sol.ray.expect("ray");
        assert!(ray[0] > 0.5);
    }

    #[test]
    fn fixed_variables_are_eliminated() {
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, 2.0];
        p.set_bounds(0, 5.0, 5.0);
        p.set_bounds(1, 0.0, 10.0);
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 8.0, "sum");
        let sol = solve(&p).unwrap();
        assert!((sol.x[0] - 5.0).abs() < 1e-9);
        assert!((sol.x[1] - 3.0).abs() < 1e-8);
        assert!(check_kkt(&p, &sol).max() < 1e-8);
    }

    #[test]
    fn matches_oracle_on_seeded_problems() {
        let mut agree = 0;
        for seed in 0..50u64 {
            let p = crate::lp::random_lp(seed, 6);
            let ipm = solve(&p).unwrap();
            let oracle = vertex_oracle(&p).unwrap();
            assert_eq!(ipm.status, oracle.status, "seed {seed}");
            if ipm.is_optimal() {
                assert!(
                    (ipm.objective_value - oracle.objective_value).abs()
                        / (1.0 + oracle.objective_value.abs())
                        < 1e-8,
                    "seed {seed}: ipm {} oracle {}",
                    ipm.objective_value,
                    oracle.objective_value
                );
                assert!(check_kkt(&p, &ipm).max() < 1e-8, "seed {seed}");
                agree += 1;
            }
        }
        assert!(agree > 10, "expected a healthy share of optimal instances");
    }

    #[test]
    fn lazy_rows_match_direct_solve() {
        // A transportation-flavored LP with many redundant <= rows.
        let n = 20;
        let mut p = LpProblem::new(n);
        for j in 0..n {
            p.objective[j] = 1.0 + (j as f64) * 0.1;
            p.set_bounds(j, 0.0, 100.0);
        }
        p.add_eq((0..n).map(|j| (j, 1.0)).collect(), 50.0, "demand");
        for i in 0..700 {
            let a = i % n;
            let b = (i * 7 + 3) % n;
            if a != b {
                p.add_ub(vec![(a, 1.0), (b, 1.0)], 40.0 + (i % 5) as f64, format!("pair{i}"));
            }
        }
        let direct = classify_solve(&p, &SolverOptions::default()).unwrap();
        let lazy_options = SolverOptions {
            lazy_rows: Some(vec![true; p.ub_rows.len()]),
            lazy_threshold: 8,
            ..SolverOptions::default()
        };
        let lazy = solve_with(&p, &lazy_options).unwrap();
        assert!((direct.objective_value - lazy.objective_value).abs() < 1e-7);
        assert!(check_kkt(&p, &lazy).max() < 1e-8);
    }
}
