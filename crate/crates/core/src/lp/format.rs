//! Dump an [`LpProblem`] in the classic CPLEX LP text format so problems can
//! be cross-checked with external solvers.

use super::LpProblem;
use std::fmt::Write;

pub fn write_lp_format(problem: &LpProblem) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in problem.objective.iter().enumerate() {
        if c != 0.0 {
            write_term(&mut out, c, &problem.var_names[j], first);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for ((row, b), name) in problem.eq_rows.iter().zip(&problem.eq_names) {
        write!(out, " {name}:").unwrap();
        let mut first = true;
        for &(j, v) in &row.entries {
            write_term(&mut out, v, &problem.var_names[j], first);
            first = false;
        }
        writeln!(out, " = {b}").unwrap();
    }
    for ((row, b), name) in problem.ub_rows.iter().zip(&problem.ub_names) {
        write!(out, " {name}:").unwrap();
        let mut first = true;
        for &(j, v) in &row.entries {
            write_term(&mut out, v, &problem.var_names[j], first);
            first = false;
        }
        writeln!(out, " <= {b}").unwrap();
    }
    out.push_str("Bounds\n");
    for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
        let name = &problem.var_names[j];
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(out, " {name} free").unwrap(),
            (true, false) => writeln!(out, " {name} >= {lo}").unwrap(),
            (false, true) => writeln!(out, " {name} <= {hi}").unwrap(),
            (true, true) => writeln!(out, " {lo} <= {name} <= {hi}").unwrap(),
        }
    }
    out.push_str("End\n");
    out
}

fn write_term(out: &mut String, coeff: f64, name: &str, first: bool) {
    if coeff >= 0.0 {
        if first {
            write!(out, " {coeff} {name}").unwrap();
        } else {
            write!(out, " + {coeff} {name}").unwrap();
        }
    } else {
        write!(out, " - {} {name}", -coeff).unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_sections() {
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, -2.0];
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 3.0, "balance");
        p.add_ub(vec![(0, 2.0)], 5.0, "cap");
        p.set_bounds(0, 0.0, 4.0);
        let text = write_lp_format(&p);
        assert!(text.contains("Minimize"));
        assert!(text.contains("balance: 1 x0 + 1 x1 = 3"));
        assert!(text.contains("cap: 2 x0 <= 5"));
        assert!(text.contains("0 <= x0 <= 4"));
        assert!(text.contains("x1 free"));
    }
}
