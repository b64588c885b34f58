//! Brute-force LP oracle: convert to standard form, enumerate basic
//! solutions, and pick the best feasible vertex. Exponential, deliberately
//! simple, and independent of the interior-point path — used to cross-check
//! the solver on small problems.

use super::{LpProblem, LpSolution, LpStatus};
use crate::linalg::{Lu, Matrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("standard form has {bases} candidate bases; oracle cap is {cap}")]
    TooLarge { bases: u128, cap: u128 },
    #[error("standard-form conversion failed: {0}")]
    Conversion(String),
}

const BASIS_CAP: u128 = 400_000;
const FEAS_TOL: f64 = 1e-9;

/// How each original variable maps into standard-form columns.
enum ColMap {
    /// x = lo + w
    ShiftLo { col: usize, lo: f64 },
    /// x = hi - w
    ShiftHi { col: usize, hi: f64 },
    /// x = w_plus - w_minus
    Split { plus: usize, minus: usize },
}

struct StandardForm {
    a: Vec<Vec<f64>>, // rows over standard columns
    b: Vec<f64>,
    c: Vec<f64>,
    n_cols: usize,
    col_map: Vec<ColMap>,
    /// standard row index -> source
    row_source: Vec<RowSource>,
    offset: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum RowSource {
    Eq(usize),
    Ub(usize),
    /// Upper side of a two-sided bound on an original variable.
    BoundHi(usize),
}

fn standardize(problem: &LpProblem) -> Result<StandardForm, OracleError> {
    let n = problem.n_vars;
    let mut col_map = Vec::with_capacity(n);
    let mut n_cols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new(); // (col, width)

    for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                col_map.push(ColMap::ShiftLo { col: n_cols, lo });
                if hi - lo > 0.0 {
                    bound_rows.push((n_cols, hi - lo));
                } else {
                    bound_rows.push((n_cols, 0.0));
                }
                n_cols += 1;
                let _ = j;
            }
            (true, false) => {
                col_map.push(ColMap::ShiftLo { col: n_cols, lo });
                n_cols += 1;
            }
            (false, true) => {
                col_map.push(ColMap::ShiftHi { col: n_cols, hi });
                n_cols += 1;
            }
            (false, false) => {
                col_map.push(ColMap::Split {
                    plus: n_cols,
                    minus: n_cols + 1,
                });
                n_cols += 2;
            }
        }
    }

    let n_slacks = problem.ub_rows.len() + bound_rows.len();
    let total_cols = n_cols + n_slacks;
    let mut c = vec![0.0; total_cols];
    let mut offset = 0.0;
    for (j, m) in col_map.iter().enumerate() {
        let cj = problem.objective[j];
        match *m {
            ColMap::ShiftLo { col, lo } => {
                c[col] = cj;
                offset += cj * lo;
            }
            ColMap::ShiftHi { col, hi } => {
                c[col] = -cj;
                offset += cj * hi;
            }
            ColMap::Split { plus, minus } => {
                c[plus] = cj;
                c[minus] = -cj;
            }
        }
    }

    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut row_source = Vec::new();
    let mut slack = n_cols;

    let push_row = |entries: &[(usize, f64)],
                        rhs: f64,
                        source: RowSource,
                        slack_col: Option<usize>,
                        a: &mut Vec<Vec<f64>>,
                        b: &mut Vec<f64>,
                        row_source: &mut Vec<RowSource>| {
        let mut row = vec![0.0; total_cols];
        let mut rhs = rhs;
        for &(j, v) in entries {
            match col_map[j] {
                ColMap::ShiftLo { col, lo } => {
                    row[col] += v;
                    rhs -= v * lo;
                }
                ColMap::ShiftHi { col, hi } => {
                    row[col] -= v;
                    rhs -= v * hi;
                }
                ColMap::Split { plus, minus } => {
                    row[plus] += v;
                    row[minus] -= v;
                }
            }
        }
        if let Some(sc) = slack_col {
            row[sc] = 1.0;
        }
        a.push(row);
        b.push(rhs);
        row_source.push(source);
    };

    for (i, (row, rhs)) in problem.eq_rows.iter().enumerate() {
        push_row(&row.entries, *rhs, RowSource::Eq(i), None, &mut a, &mut b, &mut row_source);
    }
    for (i, (row, rhs)) in problem.ub_rows.iter().enumerate() {
        push_row(
            &row.entries,
            *rhs,
            RowSource::Ub(i),
            Some(slack),
            &mut a,
            &mut b,
            &mut row_source,
        );
        slack += 1;
    }
    let two_sided: Vec<usize> = problem
        .bounds
        .iter()
        .enumerate()
        .filter(|(_, &(lo, hi))| lo.is_finite() && hi.is_finite())
        .map(|(j, _)| j)
        .collect();
    for (orig_j, &(col, width)) in two_sided.into_iter().zip(bound_rows.iter()) {
        let mut row = vec![0.0; total_cols];
        row[col] = 1.0;
        row[slack] = 1.0;
        a.push(row);
        b.push(width);
        row_source.push(RowSource::BoundHi(orig_j));
        slack += 1;
    }

    Ok(StandardForm {
        a,
        b,
        c,
        n_cols: total_cols,
        col_map,
        row_source,
        offset,
    })
}

/// Row-reduce to full row rank; inconsistent dependent rows mean the system
/// is infeasible. Returns indices of kept rows, or None when infeasible.
fn independent_rows(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<usize>> {
    let m = a.len();
    if m == 0 {
        return Some(Vec::new());
    }
    let n = a[0].len();
    let mut work: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let mut kept = Vec::new();
    let mut used = vec![false; m];

    for col in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in work.iter().enumerate() {
            if !used[i] {
                let v = row[col].abs();
                if v > 1e-9 && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((i, v));
                }
            }
        }
        let Some((pivot_row, _)) = best else { continue };
        used[pivot_row] = true;
        kept.push(pivot_row);
        let pivot_val = work[pivot_row][col];
        let prow = work[pivot_row].clone();
        let prhs = rhs[pivot_row];
        for (i, row) in work.iter_mut().enumerate() {
            if i != pivot_row && !used[i] && row[col].abs() > 0.0 {
                let f = row[col] / pivot_val;
                for jj in 0..n {
                    row[jj] -= f * prow[jj];
                }
                rhs[i] -= f * prhs;
            }
        }
        if kept.len() == m {
            break;
        }
    }
    // Unused rows are now all-zero combinations; inconsistent if rhs stays.
    for i in 0..m {
        if !used[i] {
            let scale = 1.0 + b[i].abs();
            if rhs[i].abs() > 1e-7 * scale {
                return None;
            }
        }
    }
    kept.sort_unstable();
    Some(kept)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc > u128::MAX / 2 {
            return u128::MAX;
        }
    }
    acc
}

/// Enumerate basic solutions of the LP and return the exact optimum, an
/// `Infeasible` verdict, or an `Unbounded` verdict (a feasible basis with an
/// improving extreme ray).
pub fn vertex_oracle(problem: &LpProblem) -> Result<LpSolution, OracleError> {
    problem.well_formed().map_err(OracleError::Conversion)?;
    let sf = standardize(problem)?;

    let kept = match independent_rows(&sf.a, &sf.b) {
        None => return Ok(infeasible_solution(problem)),
        Some(k) => k,
    };
    let rank = kept.len();
    let n = sf.n_cols;

    let bases = binomial(n, rank);
    if bases > BASIS_CAP || n > 64 {
        return Err(OracleError::TooLarge {
            bases,
            cap: BASIS_CAP,
        });
    }

    let a_kept: Vec<&Vec<f64>> = kept.iter().map(|&i| &sf.a[i]).collect();
    let b_kept: Vec<f64> = kept.iter().map(|&i| sf.b[i]).collect();

    let mut best: Option<(f64, Vec<usize>, Vec<f64>, Lu)> = None;
    let mut unbounded = false;

    if rank == 0 {
        // No rows: w = 0 is the only vertex; any negative cost on a
        // nonnegative column is an unbounded direction.
        if sf.c.iter().any(|&cj| cj < -FEAS_TOL) {
            unbounded = true;
        }
    } else {
        let mut combo: Vec<usize> = (0..rank).collect();
        loop {
            if let Ok(lu) = factor_basis(&a_kept, &combo) {
                let w_b = lu.solve(&b_kept);
                if w_b.iter().all(|&v| v >= -FEAS_TOL) {
                    let obj = combo
                        .iter()
                        .zip(&w_b)
                        .map(|(&col, &v)| sf.c[col] * v)
                        .sum::<f64>();
                    // Improving extreme ray out of this vertex?
                    if has_improving_ray(&sf, &a_kept, &combo, &lu) {
                        unbounded = true;
                        break;
                    }
                    let better = match &best {
                        None => true,
                        Some((bobj, _, _, _)) => obj < bobj - 1e-12 * (1.0 + bobj.abs()),
                    };
                    if better {
                        best = Some((obj, combo.clone(), w_b, lu));
                    }
                }
            }
            if !next_combination(&mut combo, n, rank) {
                break;
            }
        }
    }

    if unbounded {
        let mut sol = infeasible_solution(problem);
        sol.status = LpStatus::Unbounded;
        sol.objective_value = f64::NEG_INFINITY;
        return Ok(sol);
    }

    if rank == 0 {
        // Optimal at w = 0.
        let x = map_back(problem, &sf, &vec![0.0; n]);
        let mut lower_bound_duals = vec![0.0; problem.n_vars];
        let mut upper_bound_duals = vec![0.0; problem.n_vars];
        for (j, m) in sf.col_map.iter().enumerate() {
            match *m {
                ColMap::ShiftLo { col, .. } => lower_bound_duals[j] = sf.c[col].max(0.0),
                ColMap::ShiftHi { col, .. } => upper_bound_duals[j] = sf.c[col].max(0.0),
                ColMap::Split { .. } => {}
            }
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            objective_value: sf.offset,
            x,
            lower_bound_duals,
            upper_bound_duals,
            ..infeasible_solution(problem)
        });
    }

    let Some((obj, basis, w_b, lu)) = best else {
        return Ok(infeasible_solution(problem));
    };

    // Reconstruct x and duals from the optimal basis.
    let mut w = vec![0.0; n];
    for (&col, &v) in basis.iter().zip(&w_b) {
        w[col] = v.max(0.0);
    }
    let x = map_back(problem, &sf, &w);

    // y solves B' y = c_B; reduced costs c_j - y'A_j are the bound duals.
    let y_kept = lu.solve_transposed(&basis.iter().map(|&c| sf.c[c]).collect::<Vec<_>>());
    let mut y_full = vec![0.0; sf.a.len()];
    for (pos, &row) in kept.iter().enumerate() {
        y_full[row] = y_kept[pos];
    }

    let mut eq_duals = vec![0.0; problem.eq_rows.len()];
    let mut ub_duals = vec![0.0; problem.ub_rows.len()];
    let mut upper_from_bound_rows = vec![0.0; problem.n_vars];
    // The basis system uses c - A'y - v = 0; the external convention is
    // c + A'y - vl + vu = 0, so row duals flip sign on the way out.
    for (i, source) in sf.row_source.iter().enumerate() {
        match *source {
            RowSource::Eq(k) => eq_duals[k] = -y_full[i],
            RowSource::Ub(k) => ub_duals[k] = (-y_full[i]).max(0.0),
            RowSource::BoundHi(j) => upper_from_bound_rows[j] = (-y_full[i]).max(0.0),
        }
    }

    let mut lower_bound_duals = vec![0.0; problem.n_vars];
    let mut upper_bound_duals = vec![0.0; problem.n_vars];
    let reduced = |col: usize| -> f64 {
        let mut acc = sf.c[col];
        for (i, row) in sf.a.iter().enumerate() {
            if y_full[i] != 0.0 {
                acc -= y_full[i] * row[col];
            }
        }
        acc
    };
    for (j, m) in sf.col_map.iter().enumerate() {
        match *m {
            ColMap::ShiftLo { col, .. } => lower_bound_duals[j] = reduced(col).max(0.0),
            ColMap::ShiftHi { col, .. } => upper_bound_duals[j] = reduced(col).max(0.0),
            ColMap::Split { .. } => {}
        }
        upper_bound_duals[j] += upper_from_bound_rows[j];
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        eq_duals,
        ub_duals,
        lower_bound_duals,
        upper_bound_duals,
        objective_value: obj + sf.offset,
        iterations: 0,
        degenerate: Vec::new(),
        farkas: None,
        ray: None,
    })
}

fn factor_basis(a_kept: &[&Vec<f64>], combo: &[usize]) -> Result<Lu, crate::linalg::SingularMatrix> {
    let r = combo.len();
    let mut basis = Matrix::zeros(r, r);
    for (ri, row) in a_kept.iter().enumerate() {
        for (ci, &col) in combo.iter().enumerate() {
            *basis.at_mut(ri, ci) = row[col];
        }
    }
    Lu::factor(&basis)
}

fn next_combination(combo: &mut [usize], n: usize, k: usize) -> bool {
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in (i + 1)..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn has_improving_ray(sf: &StandardForm, a_kept: &[&Vec<f64>], combo: &[usize], lu: &Lu) -> bool {
    let y = lu.solve_transposed(&combo.iter().map(|&c| sf.c[c]).collect::<Vec<_>>());
    let in_basis = |col: usize| combo.binary_search(&col).is_ok();
    for col in 0..sf.n_cols {
        if in_basis(col) {
            continue;
        }
        let mut reduced = sf.c[col];
        for (ri, row) in a_kept.iter().enumerate() {
            reduced -= y[ri] * row[col];
        }
        if reduced < -1e-9 {
            // direction: w_col increases by 1, basic vars move by -B^-1 A_col
            let a_col: Vec<f64> = a_kept.iter().map(|row| row[col]).collect();
            let d_b = lu.solve(&a_col);
            if d_b.iter().all(|&v| v <= FEAS_TOL) {
                return true;
            }
        }
    }
    false
}

fn infeasible_solution(problem: &LpProblem) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; problem.n_vars],
        eq_duals: vec![0.0; problem.eq_rows.len()],
        ub_duals: vec![0.0; problem.ub_rows.len()],
        lower_bound_duals: vec![0.0; problem.n_vars],
        upper_bound_duals: vec![0.0; problem.n_vars],
        objective_value: f64::INFINITY,
        iterations: 0,
        degenerate: Vec::new(),
        farkas: None,
        ray: None,
    }
}

fn map_back(problem: &LpProblem, sf: &StandardForm, w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; problem.n_vars];
    for (j, m) in sf.col_map.iter().enumerate() {
        x[j] = match *m {
            ColMap::ShiftLo { col, lo } => lo + w[col],
            ColMap::ShiftHi { col, hi } => hi - w[col],
            ColMap::Split { plus, minus } => w[plus] - w[minus],
        };
    }
    x
}
