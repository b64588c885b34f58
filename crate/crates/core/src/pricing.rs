//! Locational marginal prices for energy and reserve, read directly off the
//! clearing duals.
//!
//! The per-bus energy price decomposes into a base component
//! `omega0 = lambda - S' mu` and one component per scenario
//! `omega_k = lambda_k - S_k' mu_k`, each with an energy part and a
//! congestion part. A generator's energy price is the sum of all
//! components at its bus; a load's differs only by the shedding-bound
//! multipliers. Reserve prices are sums over scenarios of the coupling
//! multipliers between re-dispatch and procured reserve.
//!
//! Prices are never computed by re-solving per-resource perturbations; the
//! perturbation model survives only as [`envelope_check`], a finite
//! difference test of the same quantities.

use crate::clearing::{build_model_two, ClearingError, ClearingSolution};
use crate::lp::{solve_with, LpStatus, SolverOptions};
use crate::model::MarketCase;
use serde::{Deserialize, Serialize};

/// Energy and reserve prices from one clearing solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSet {
    /// Base-case energy price component per bus.
    pub omega0: Vec<f64>,
    /// Scenario components per scenario per bus.
    pub omega_k: Vec<Vec<f64>>,
    /// Marginal energy price per generator.
    pub eta_g: Vec<f64>,
    /// Marginal energy price per load.
    pub eta_d: Vec<f64>,
    /// Upward reserve marginal price per generator.
    pub eta_up: Vec<f64>,
    /// Downward reserve marginal price per generator.
    pub eta_down: Vec<f64>,
    /// Sum over scenarios of the shedding upper-bound multipliers per load
    /// (the only difference between load and generator energy prices).
    pub shed_adjustment: Vec<f64>,
}

impl PriceSet {
    /// Full per-bus energy price (base plus all scenario components).
    pub fn bus_energy_price(&self, bus: usize) -> f64 {
        self.omega0[bus] + self.omega_k.iter().map(|w| w[bus]).sum::<f64>()
    }
}

fn price_components(sol: &ClearingSolution, n_buses: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut omega0 = vec![sol.lambda; n_buses];
    let mu = sol.mu_signed();
    for (row, m) in mu.iter().enumerate() {
        if *m != 0.0 {
            let s_row = sol.base.factors.matrix.row(row);
            for bus in 0..n_buses {
                omega0[bus] -= s_row[bus] * m;
            }
        }
    }
    let mut omega_k = Vec::with_capacity(sol.n_scenarios());
    for k in 0..sol.n_scenarios() {
        let mut w = vec![sol.lambda_k[k]; n_buses];
        let mu_k = sol.mu_k_signed(k);
        for (row, m) in mu_k.iter().enumerate() {
            if *m != 0.0 {
                let s_row = sol.scen_net[k].factors.matrix.row(row);
                for bus in 0..n_buses {
                    w[bus] -= s_row[bus] * m;
                }
            }
        }
        omega_k.push(w);
    }
    (omega0, omega_k)
}

/// Compute the full price set for a solved case.
pub fn energy_prices(sol: &ClearingSolution, case: &MarketCase) -> PriceSet {
    let (omega0, omega_k) = price_components(sol, case.n_buses());
    let bus_total = |bus: usize| -> f64 {
        omega0[bus] + omega_k.iter().map(|w| w[bus]).sum::<f64>()
    };

    let eta_g: Vec<f64> = case.generators.iter().map(|g| bus_total(g.bus)).collect();
    let shed_adjustment: Vec<f64> = (0..case.n_loads())
        .map(|l| (0..sol.n_scenarios()).map(|k| sol.tau_up[k][l]).sum())
        .collect();
    let eta_d: Vec<f64> = case
        .loads
        .iter()
        .enumerate()
        .map(|(l, load)| bus_total(load.bus) - shed_adjustment[l])
        .collect();
    let (eta_up, eta_down) = reserve_prices(sol);

    PriceSet {
        omega0,
        omega_k,
        eta_g,
        eta_d,
        eta_up,
        eta_down,
        shed_adjustment,
    }
}

/// Reserve marginal prices: per-generator sums over scenarios of the
/// re-dispatch coupling multipliers.
pub fn reserve_prices(sol: &ClearingSolution) -> (Vec<f64>, Vec<f64>) {
    let n_g = sol.g.len();
    let eta_up = (0..n_g)
        .map(|j| (0..sol.n_scenarios()).map(|k| sol.alpha_up[k][j]).sum())
        .collect();
    let eta_down = (0..n_g)
        .map(|j| (0..sol.n_scenarios()).map(|k| sol.beta_up[k][j]).sum())
        .collect();
    (eta_up, eta_down)
}

/// Which resource quantity a finite-difference probe perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Probe {
    Energy(usize),
    ReserveUp(usize),
    ReserveDown(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeProbe {
    pub probe: Probe,
    /// Central finite difference of the other-participant expected cost.
    pub finite_difference: f64,
    /// The dual-based price the difference should reproduce (negated).
    pub price: f64,
    pub abs_error: f64,
    /// Set when the one-sided differences disagree: the optimum is kinked
    /// at this resource, so the probe says nothing about the price.
    pub degenerate: bool,
}

/// Re-solve the clearing with one resource fixed at its optimum, its bid
/// terms removed from the objective and its capacity rows dropped; the
/// sensitivity of the remaining participants' expected cost to the fixed
/// quantity must reproduce the dual-based price (envelope theorem).
pub fn envelope_check(
    case: &MarketCase,
    sol: &ClearingSolution,
    prices: &PriceSet,
    probes: &[Probe],
    h: f64,
) -> Result<Vec<EnvelopeProbe>, ClearingError> {
    let mut out = Vec::with_capacity(probes.len());
    for &probe in probes {
        let j = match probe {
            Probe::Energy(j) | Probe::ReserveUp(j) | Probe::ReserveDown(j) => j,
        };
        let price = match probe {
            Probe::Energy(j) => prices.eta_g[j],
            Probe::ReserveUp(j) => prices.eta_up[j],
            Probe::ReserveDown(j) => prices.eta_down[j],
        };
        let center = restricted_cost(case, sol, j, probe, 0.0)?;
        // A network limit can bind exactly at the optimum, making a probe
        // side infeasible (or numerically intractable): the value function
        // is kinked there and the probe is degenerate, not an error.
        let side = |delta: f64| -> Result<Option<f64>, ClearingError> {
            match restricted_cost(case, sol, j, probe, delta) {
                Ok(v) => Ok(Some(v)),
                Err(ClearingError::InfeasibleMarket { .. }) => Ok(None),
                Err(ClearingError::Solver(crate::lp::LpError::NumericalFailure(_))) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let plus = side(h)?;
        let minus = side(-h)?;
        let (finite_difference, degenerate) = match (plus, minus) {
            (Some(plus), Some(minus)) => {
                let right = (plus - center) / h;
                let left = (center - minus) / h;
                let kinked =
                    (right - left).abs() > 1e-2 * (1.0 + right.abs().max(left.abs()));
                ((plus - minus) / (2.0 * h), kinked)
            }
            (Some(plus), None) => ((plus - center) / h, true),
            (None, Some(minus)) => ((center - minus) / h, true),
            (None, None) => (f64::NAN, true),
        };
        out.push(EnvelopeProbe {
            probe,
            finite_difference,
            price,
            abs_error: (finite_difference + price).abs(),
            degenerate,
        });
    }
    Ok(out)
}

/// Expected cost of all participants except generator `j`, with `j`'s
/// quantities pinned at the clearing optimum plus `delta` on the probed one.
fn restricted_cost(
    case: &MarketCase,
    sol: &ClearingSolution,
    j: usize,
    probe: Probe,
    delta: f64,
) -> Result<f64, ClearingError> {
    let mut model = build_model_two(case)?;
    let idx = model.index.clone();

    let (mut g_j, mut ru_j, mut rd_j) = (sol.g[j], sol.r_u[j], sol.r_d[j]);
    match probe {
        Probe::Energy(_) => g_j += delta,
        Probe::ReserveUp(_) => ru_j += delta,
        Probe::ReserveDown(_) => rd_j += delta,
    }
    model.problem.set_bounds(idx.g(j), g_j, g_j);
    model.problem.set_bounds(idx.r_u(j), ru_j, ru_j);
    model.problem.set_bounds(idx.r_d(j), rd_j, rd_j);
    // Remove j's bid cost and capacity rows, as the perturbation model
    // prescribes.
    model.problem.objective[idx.g(j)] = 0.0;
    model.problem.objective[idx.r_u(j)] = 0.0;
    model.problem.objective[idx.r_d(j)] = 0.0;
    for &row in &[
        model.index.cap_up_rows[j],
        model.index.cap_dn_rows[j],
    ] {
        model.problem.ub_rows[row].0.entries.clear();
        model.problem.ub_rows[row].1 = 1.0;
    }

    let options = SolverOptions::default();
    let solution = solve_with(&model.problem, &options)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution.objective_value),
        LpStatus::Infeasible => Err(ClearingError::InfeasibleMarket {
            constraints: vec![format!("envelope probe at generator {j} infeasible")],
        }),
        LpStatus::Unbounded => Err(ClearingError::UnboundedMarket),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::solve_clearing;
    use crate::io::fixture_twobus;

    #[test]
    fn uncongested_scenario_free_case_prices_at_lambda() {
        let mut case = fixture_twobus();
        case.scenarios.clear();
        case.lines[0].capacity = 1000.0;
        let sol = solve_clearing(&case).unwrap();
        let prices = energy_prices(&sol, &case);
        for bus in 0..2 {
            assert!((prices.bus_energy_price(bus) - sol.lambda).abs() < 1e-7);
        }
        for j in 0..3 {
            assert!((prices.eta_g[j] - sol.lambda).abs() < 1e-7);
        }
    }

    #[test]
    fn scenario_free_reserve_prices_are_zero() {
        let mut case = fixture_twobus();
        case.scenarios.clear();
        let sol = solve_clearing(&case).unwrap();
        let (eta_up, eta_down) = reserve_prices(&sol);
        assert!(eta_up.iter().all(|v| v.abs() < 1e-9));
        assert!(eta_down.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn price_construction_identity_holds() {
        let case = fixture_twobus();
        let sol = solve_clearing(&case).unwrap();
        let prices = energy_prices(&sol, &case);
        for (j, gen) in case.generators.iter().enumerate() {
            let rebuilt = prices.bus_energy_price(gen.bus);
            assert!((prices.eta_g[j] - rebuilt).abs() < 1e-12);
        }
        for (l, load) in case.loads.iter().enumerate() {
            let rebuilt = prices.bus_energy_price(load.bus) - prices.shed_adjustment[l];
            assert!((prices.eta_d[l] - rebuilt).abs() < 1e-12);
        }
    }

    #[test]
    fn unshed_load_prices_at_bus_energy_price() {
        let case = fixture_twobus();
        let sol = solve_clearing(&case).unwrap();
        let prices = energy_prices(&sol, &case);
        for (l, load) in case.loads.iter().enumerate() {
            let fully_shed = (0..sol.n_scenarios()).any(|k| {
                let cap = load.base_demand + case.scenarios[k].load_fluctuation[l];
                sol.shed[k][l] > cap - 1e-7
            });
            if !fully_shed {
                assert!(
                    (prices.eta_d[l] - prices.bus_energy_price(load.bus)).abs() < 1e-6,
                    "load {l}"
                );
            }
        }
    }

    #[test]
    fn envelope_probe_matches_dual_price() {
        let case = fixture_twobus();
        let sol = solve_clearing(&case).unwrap();
        let prices = energy_prices(&sol, &case);
        let probes = vec![Probe::Energy(0), Probe::ReserveUp(2)];
        let results = envelope_check(&case, &sol, &prices, &probes, 1e-3).unwrap();
        for r in &results {
            if !r.degenerate {
                assert!(
                    r.abs_error < 1e-2,
                    "{:?}: fd {} vs price {}",
                    r.probe,
                    r.finite_difference,
                    r.price
                );
            }
        }
    }
}

