//! Two-stage settlement and the money-flow ledger.
//!
//! Ex ante, energy and reserve are financially binding at the dual-based
//! prices: loads pay their base demand at every price component and their
//! fluctuations at the scenario components; generators are credited at the
//! same components plus reserve credits. Ex post, the realized scenario's
//! re-dispatch is compensated at the bid re-dispatch prices and downward
//! re-dispatch is paid back to the operator. The ledger stores the expected
//! (probability-weighted) re-dispatch columns used by the balance identity
//! alongside the unweighted realized values.

use crate::clearing::ClearingSolution;
use crate::model::MarketCase;
use crate::pricing::PriceSet;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SettlementError {
    #[error("unknown scenario {0}")]
    UnknownScenario(usize),
}

/// All money-flow entries per column (base case and one per scenario), plus
/// per-load fluctuation payments and the balance residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementLedger {
    /// Base-case generator energy credit.
    pub gamma_g0: f64,
    /// Base-case load energy payment.
    pub gamma_d0: f64,
    /// Base-case congestion rent.
    pub delta0: f64,

    /// Scenario contributions to generator energy credit.
    pub gamma_g_k: Vec<f64>,
    /// Scenario contributions to load energy payment (at base demand).
    pub gamma_d_k: Vec<f64>,
    /// Load fluctuation payments per scenario.
    pub pi_k: Vec<f64>,
    /// Upward reserve credit per scenario.
    pub gamma_ru_k: Vec<f64>,
    /// Downward reserve credit per scenario.
    pub gamma_rd_k: Vec<f64>,
    /// Expected re-dispatch compensation (probability-weighted).
    pub eps_phi_up_k: Vec<f64>,
    /// Expected downward re-dispatch pay-back.
    pub eps_phi_down_k: Vec<f64>,
    /// Expected load shedding credit.
    pub eps_phi_shed_k: Vec<f64>,
    /// Congestion rent per scenario.
    pub delta_k: Vec<f64>,

    /// Unweighted realized re-dispatch values per scenario.
    pub phi_up_k: Vec<f64>,
    pub phi_down_k: Vec<f64>,
    pub phi_shed_k: Vec<f64>,

    /// Per-load fluctuation payment summed over scenarios.
    pub fluctuation_payment_per_load: Vec<f64>,
    /// Per-load per-scenario fluctuation payments.
    pub pi_per_load_k: Vec<Vec<f64>>,

    /// Balance residual of the base column.
    pub residual_base: f64,
    /// Balance residual per scenario column.
    pub residual_k: Vec<f64>,
}

impl SettlementLedger {
    pub fn n_scenarios(&self) -> usize {
        self.delta_k.len()
    }

    pub fn total_delta(&self) -> f64 {
        self.delta0 + self.delta_k.iter().sum::<f64>()
    }

    pub fn total_gamma_d(&self) -> f64 {
        self.gamma_d0 + self.gamma_d_k.iter().sum::<f64>()
    }

    pub fn total_gamma_g(&self) -> f64 {
        self.gamma_g0 + self.gamma_g_k.iter().sum::<f64>()
    }

    /// Gross money movement in a column, the scale for residual checks.
    pub fn column_gross(&self, column: usize) -> f64 {
        if column == 0 {
            self.gamma_d0.abs() + self.gamma_g0.abs() + self.delta0.abs()
        } else {
            let k = column - 1;
            self.gamma_d_k[k].abs()
                + self.pi_k[k].abs()
                + self.gamma_g_k[k].abs()
                + self.gamma_ru_k[k].abs()
                + self.gamma_rd_k[k].abs()
                + self.eps_phi_up_k[k].abs()
                + self.eps_phi_down_k[k].abs()
                + self.eps_phi_shed_k[k].abs()
                + self.delta_k[k].abs()
        }
    }
}

/// Congestion rent: capacity times flow multiplier, both flow directions,
/// for the base case and each scenario.
pub fn congestion_rent(sol: &ClearingSolution) -> (f64, Vec<f64>) {
    let delta0: f64 = sol
        .base
        .capacities
        .iter()
        .zip(sol.mu_pos.iter().zip(&sol.mu_neg))
        .map(|(f, (p, n))| f * (p + n))
        .sum();
    let delta_k: Vec<f64> = (0..sol.n_scenarios())
        .map(|k| {
            sol.scen_net[k]
                .capacities
                .iter()
                .zip(sol.mu_k_pos[k].iter().zip(&sol.mu_k_neg[k]))
                .map(|(f, (p, n))| f * (p + n))
                .sum()
        })
        .collect();
    (delta0, delta_k)
}

/// Build the complete ledger for a solved case.
pub fn settle(sol: &ClearingSolution, prices: &PriceSet, case: &MarketCase) -> SettlementLedger {
    let n_k = sol.n_scenarios();
    let (delta0, delta_k) = congestion_rent(sol);

    let gamma_g0: f64 = case
        .generators
        .iter()
        .enumerate()
        .map(|(j, g)| prices.omega0[g.bus] * sol.g[j])
        .sum();
    let gamma_d0: f64 = case
        .loads
        .iter()
        .map(|l| prices.omega0[l.bus] * l.base_demand)
        .sum();

    let mut gamma_g_k = Vec::with_capacity(n_k);
    let mut gamma_d_k = Vec::with_capacity(n_k);
    let mut pi_k = Vec::with_capacity(n_k);
    let mut gamma_ru_k = Vec::with_capacity(n_k);
    let mut gamma_rd_k = Vec::with_capacity(n_k);
    let mut eps_phi_up_k = Vec::with_capacity(n_k);
    let mut eps_phi_down_k = Vec::with_capacity(n_k);
    let mut eps_phi_shed_k = Vec::with_capacity(n_k);
    let mut phi_up_k = Vec::with_capacity(n_k);
    let mut phi_down_k = Vec::with_capacity(n_k);
    let mut phi_shed_k = Vec::with_capacity(n_k);
    let mut pi_per_load_k = vec![vec![0.0; n_k]; case.n_loads()];

    for k in 0..n_k {
        let scen = &case.scenarios[k];
        let w = &prices.omega_k[k];
        gamma_g_k.push(
            case.generators
                .iter()
                .enumerate()
                .map(|(j, g)| w[g.bus] * sol.g[j])
                .sum(),
        );
        gamma_d_k.push(
            case.loads
                .iter()
                .map(|l| w[l.bus] * l.base_demand)
                .sum(),
        );
        let mut pi_total = 0.0;
        for (l, load) in case.loads.iter().enumerate() {
            let part = w[load.bus] * scen.load_fluctuation[l];
            pi_per_load_k[l][k] = part;
            pi_total += part;
        }
        pi_k.push(pi_total);
        gamma_ru_k.push(
            (0..case.n_gens())
                .map(|j| sol.alpha_up[k][j] * sol.r_u[j])
                .sum(),
        );
        gamma_rd_k.push(
            (0..case.n_gens())
                .map(|j| sol.beta_up[k][j] * sol.r_d[j])
                .sum(),
        );
        let up: f64 = (0..case.n_gens())
            .map(|j| scen.c_redispatch_up[j] * sol.dg_up[k][j])
            .sum();
        let down: f64 = (0..case.n_gens())
            .map(|j| scen.c_redispatch_down[j] * sol.dg_down[k][j])
            .sum();
        let shed: f64 = case
            .loads
            .iter()
            .enumerate()
            .map(|(l, load)| load.c_shed * sol.shed[k][l])
            .sum();
        phi_up_k.push(up);
        phi_down_k.push(down);
        phi_shed_k.push(shed);
        eps_phi_up_k.push(scen.probability * up);
        eps_phi_down_k.push(scen.probability * down);
        eps_phi_shed_k.push(scen.probability * shed);
    }

    let fluctuation_payment_per_load: Vec<f64> = pi_per_load_k
        .iter()
        .map(|per_k| per_k.iter().sum())
        .collect();

    let residual_base = gamma_d0 - gamma_g0 - delta0;
    let residual_k: Vec<f64> = (0..n_k)
        .map(|k| {
            (gamma_d_k[k] + pi_k[k])
                - (gamma_g_k[k]
                    + gamma_ru_k[k]
                    + gamma_rd_k[k]
                    + eps_phi_up_k[k]
                    - eps_phi_down_k[k]
                    + eps_phi_shed_k[k]
                    + delta_k[k])
        })
        .collect();

    SettlementLedger {
        gamma_g0,
        gamma_d0,
        delta0,
        gamma_g_k,
        gamma_d_k,
        pi_k,
        gamma_ru_k,
        gamma_rd_k,
        eps_phi_up_k,
        eps_phi_down_k,
        eps_phi_shed_k,
        delta_k,
        phi_up_k,
        phi_down_k,
        phi_shed_k,
        fluctuation_payment_per_load,
        pi_per_load_k,
        residual_base,
        residual_k,
    }
}

/// Realized-scenario payments, unweighted. `None` means the base case was
/// realized: no re-dispatch, nothing to settle ex post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExPost {
    /// Per-generator upward re-dispatch compensation.
    pub phi_up: Vec<f64>,
    /// Per-generator downward re-dispatch pay-back (owed to the operator).
    pub phi_down: Vec<f64>,
    /// Per-load shedding credit.
    pub phi_shed: Vec<f64>,
}

impl ExPost {
    pub fn total_up(&self) -> f64 {
        self.phi_up.iter().sum()
    }
    pub fn total_down(&self) -> f64 {
        self.phi_down.iter().sum()
    }
    pub fn total_shed(&self) -> f64 {
        self.phi_shed.iter().sum()
    }
}

pub fn settle_ex_post(
    sol: &ClearingSolution,
    case: &MarketCase,
    realized: Option<usize>,
) -> Result<ExPost, SettlementError> {
    match realized {
        None => Ok(ExPost {
            phi_up: vec![0.0; case.n_gens()],
            phi_down: vec![0.0; case.n_gens()],
            phi_shed: vec![0.0; case.n_loads()],
        }),
        Some(k) if k < sol.n_scenarios() => {
            let scen = &case.scenarios[k];
            Ok(ExPost {
                phi_up: (0..case.n_gens())
                    .map(|j| scen.c_redispatch_up[j] * sol.dg_up[k][j])
                    .collect(),
                phi_down: (0..case.n_gens())
                    .map(|j| scen.c_redispatch_down[j] * sol.dg_down[k][j])
                    .collect(),
                phi_shed: case
                    .loads
                    .iter()
                    .enumerate()
                    .map(|(l, load)| load.c_shed * sol.shed[k][l])
                    .collect(),
            })
        }
        Some(k) => Err(SettlementError::UnknownScenario(k)),
    }
}

/// Column-by-column balance verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyReport {
    pub residual_base: f64,
    pub residual_k: Vec<f64>,
    /// Residuals divided by 1 + column gross flow.
    pub relative_residuals: Vec<f64>,
    pub pass: bool,
}

/// Check the balance identity on every column: base-case load payment must
/// cover generator credit plus rent; each scenario's load payment plus
/// fluctuation payment must cover energy, reserve and expected re-dispatch
/// credits plus rent.
pub fn revenue_adequacy(ledger: &SettlementLedger, tolerance: f64) -> AdequacyReport {
    let mut relative = Vec::with_capacity(1 + ledger.n_scenarios());
    relative.push(ledger.residual_base.abs() / (1.0 + ledger.column_gross(0)));
    for k in 0..ledger.n_scenarios() {
        relative.push(ledger.residual_k[k].abs() / (1.0 + ledger.column_gross(k + 1)));
    }
    let pass = relative.iter().all(|r| *r < tolerance);
    AdequacyReport {
        residual_base: ledger.residual_base,
        residual_k: ledger.residual_k.clone(),
        relative_residuals: relative,
        pass,
    }
}

/// The nine ledger rows in display order.
const ROW_LABELS: [&str; 9] = [
    "Gamma_d", "Pi_d", "ePhi_d", "Gamma_g", "Gamma_U", "Gamma_D", "ePhi_U", "ePhi_D", "Delta",
];

fn ledger_cells(ledger: &SettlementLedger) -> Vec<Vec<f64>> {
    let n_k = ledger.n_scenarios();
    let mut rows = Vec::with_capacity(9);
    let build = |base: f64, per_k: &[f64]| -> Vec<f64> {
        let mut cells = Vec::with_capacity(n_k + 2);
        cells.push(base);
        cells.extend_from_slice(per_k);
        cells.push(base + per_k.iter().sum::<f64>());
        cells
    };
    rows.push(build(ledger.gamma_d0, &ledger.gamma_d_k));
    rows.push(build(0.0, &ledger.pi_k));
    rows.push(build(0.0, &ledger.eps_phi_shed_k));
    rows.push(build(ledger.gamma_g0, &ledger.gamma_g_k));
    rows.push(build(0.0, &ledger.gamma_ru_k));
    rows.push(build(0.0, &ledger.gamma_rd_k));
    rows.push(build(0.0, &ledger.eps_phi_up_k));
    rows.push(build(0.0, &ledger.eps_phi_down_k));
    rows.push(build(ledger.delta0, &ledger.delta_k));
    rows
}

fn column_headers(n_k: usize) -> Vec<String> {
    let mut headers = vec!["Base".to_string()];
    headers.extend((1..=n_k).map(|k| format!("S{k}")));
    headers.push("Total".into());
    headers
}

/// Money-flow table as CSV (full float precision, for machine round trips).
pub fn ledger_to_csv(ledger: &SettlementLedger) -> String {
    let mut out = String::new();
    let headers = column_headers(ledger.n_scenarios());
    writeln!(out, "row,{}", headers.join(",")).unwrap();
    for (label, cells) in ROW_LABELS.iter().zip(ledger_cells(ledger)) {
        let rendered: Vec<String> = cells.iter().map(|v| format!("{v:.12}")).collect();
        writeln!(out, "{label},{}", rendered.join(",")).unwrap();
    }
    out
}

/// Money-flow table as Markdown (one decimal, the published layout).
pub fn ledger_to_markdown(ledger: &SettlementLedger) -> String {
    let mut out = String::new();
    let headers = column_headers(ledger.n_scenarios());
    writeln!(out, "| | {} |", headers.join(" | ")).unwrap();
    writeln!(out, "|---{}|", "|---".repeat(headers.len())).unwrap();
    for (label, cells) in ROW_LABELS.iter().zip(ledger_cells(ledger)) {
        let rendered: Vec<String> = cells.iter().map(|v| format!("{v:.1}")).collect();
        writeln!(out, "| {label} | {} |", rendered.join(" | ")).unwrap();
    }
    out
}

/// Parse a ledger CSV produced by [`ledger_to_csv`] back into cells, row
/// label to values.
pub fn parse_ledger_csv(text: &str) -> Option<Vec<(String, Vec<f64>)>> {
    let mut lines = text.lines();
    let _header = lines.next()?;
    let mut out = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let label = parts.next()?.to_string();
        let values: Option<Vec<f64>> = parts.map(|p| p.parse().ok()).collect();
        out.push((label, values?));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::solve_clearing;
    use crate::io::fixture_twobus;
    use crate::pricing::energy_prices;

    fn solved_twobus() -> (crate::model::MarketCase, ClearingSolution, PriceSet, SettlementLedger)
    {
        let case = fixture_twobus();
        let sol = solve_clearing(&case).unwrap();
        let prices = energy_prices(&sol, &case);
        let ledger = settle(&sol, &prices, &case);
        (case, sol, prices, ledger)
    }

    #[test]
    fn base_column_balances() {
        let (_, _, _, ledger) = solved_twobus();
        assert!(
            ledger.residual_base.abs() < 1e-6 * (1.0 + ledger.column_gross(0)),
            "residual {}",
            ledger.residual_base
        );
    }

    #[test]
    fn every_scenario_column_balances() {
        let (_, _, _, ledger) = solved_twobus();
        let report = revenue_adequacy(&ledger, 1e-6);
        assert!(report.pass, "{:?}", report.relative_residuals);
    }

    #[test]
    fn rents_are_nonnegative() {
        let (_, sol, _, ledger) = solved_twobus();
        let (d0, dk) = congestion_rent(&sol);
        assert!(d0 >= -1e-8);
        assert!(dk.iter().all(|d| *d >= -1e-8));
        assert_eq!(d0, ledger.delta0);
    }

    #[test]
    fn zero_fluctuation_scenarios_pay_nothing() {
        let (case, _, _, ledger) = solved_twobus();
        for (k, scen) in case.scenarios.iter().enumerate() {
            if scen.load_fluctuation.iter().all(|p| *p == 0.0) {
                assert!(ledger.pi_k[k].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn per_load_fluctuation_payments_sum_to_scenario_totals() {
        let (_, _, _, ledger) = solved_twobus();
        for k in 0..ledger.n_scenarios() {
            let total: f64 = ledger.pi_per_load_k.iter().map(|per_k| per_k[k]).sum();
            assert!((total - ledger.pi_k[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn reserve_credit_decomposition_matches_price_form() {
        // Gamma_U = eta_U' r_U must equal the per-scenario sum.
        let (_, sol, prices, ledger) = solved_twobus();
        let via_price: f64 = prices
            .eta_up
            .iter()
            .zip(&sol.r_u)
            .map(|(p, r)| p * r)
            .sum();
        let via_columns: f64 = ledger.gamma_ru_k.iter().sum();
        assert!((via_price - via_columns).abs() < 1e-9);
    }

    #[test]
    fn ex_post_base_realization_is_zero() {
        let (case, sol, _, _) = solved_twobus();
        let post = settle_ex_post(&sol, &case, None).unwrap();
        assert_eq!(post.total_up(), 0.0);
        assert_eq!(post.total_down(), 0.0);
        assert_eq!(post.total_shed(), 0.0);
    }

    #[test]
    fn ex_post_unknown_scenario_errors() {
        let (case, sol, _, _) = solved_twobus();
        assert_eq!(
            settle_ex_post(&sol, &case, Some(99)).unwrap_err(),
            SettlementError::UnknownScenario(99)
        );
    }

    #[test]
    fn ex_post_scales_to_expected_column() {
        let (case, sol, _, ledger) = solved_twobus();
        for k in 0..ledger.n_scenarios() {
            let post = settle_ex_post(&sol, &case, Some(k)).unwrap();
            let eps = case.scenarios[k].probability;
            assert!((post.total_up() * eps - ledger.eps_phi_up_k[k]).abs() < 1e-9);
            assert!((post.total_down() * eps - ledger.eps_phi_down_k[k]).abs() < 1e-9);
            assert!((post.total_shed() * eps - ledger.eps_phi_shed_k[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_round_trips_at_high_precision() {
        let (_, _, _, ledger) = solved_twobus();
        let csv = ledger_to_csv(&ledger);
        let parsed = parse_ledger_csv(&csv).unwrap();
        let cells = ledger_cells(&ledger);
        for ((label, values), (expect_label, expect_cells)) in
            parsed.iter().zip(ROW_LABELS.iter().zip(&cells))
        {
            assert_eq!(label, expect_label);
            for (v, e) in values.iter().zip(expect_cells) {
                assert!((v - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn total_column_is_additive() {
        let (_, _, _, ledger) = solved_twobus();
        for cells in ledger_cells(&ledger) {
            let n = cells.len();
            let sum: f64 = cells[..n - 1].iter().sum();
            assert!((sum - cells[n - 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn corrupted_ledger_fails_adequacy() {
        let (_, _, _, mut ledger) = solved_twobus();
        ledger.gamma_g_k[1] += 1.0;
        ledger.residual_k[1] -= 1.0;
        let report = revenue_adequacy(&ledger, 1e-6);
        assert!(!report.pass);
    }
}
