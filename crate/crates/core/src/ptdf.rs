//! Shift factors (PTDF) and phase-angle systems for the base topology and
//! per-scenario outage topologies.
//!
//! Everything is dense: at ~100 buses a dense LU on the reduced susceptance
//! matrix is fast and keeps the code short. Scenario matrices are built by
//! full refactorization rather than incremental outage updates.

use crate::linalg::{Lu, Matrix};
use crate::model::MarketCase;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PtdfError {
    /// The (outage-adjusted) network does not connect every bus.
    #[error("network is islanded{}: buses {buses:?} unreachable from slack", scenario.map(|k| format!(" in scenario {k}")).unwrap_or_default())]
    IslandedNetwork {
        scenario: Option<usize>,
        buses: Vec<usize>,
    },
    #[error("susceptance matrix is numerically singular")]
    Singular,
}

/// One line as it exists in a given topology, after outage adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveLine {
    pub line_id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    /// 1 / adjusted reactance.
    pub susceptance: f64,
    /// Adjusted thermal capacity, MW (before the exceed rate).
    pub capacity: f64,
}

/// Lines in service for the base case.
pub fn base_topology(case: &MarketCase) -> Vec<EffectiveLine> {
    case.lines
        .iter()
        .map(|line| EffectiveLine {
            line_id: line.id,
            from_bus: line.from_bus,
            to_bus: line.to_bus,
            susceptance: 1.0 / line.reactance,
            capacity: line.capacity,
        })
        .collect()
}

/// Lines in service for scenario `k`, with parallel-circuit outages folded
/// into reactance and capacity. Lines losing every circuit are dropped.
pub fn scenario_topology(case: &MarketCase, k: usize) -> Vec<EffectiveLine> {
    let scen = &case.scenarios[k];
    case.lines
        .iter()
        .filter_map(|line| {
            let lost = scen
                .outaged_lines
                .iter()
                .find(|(id, _)| *id == line.id)
                .map(|&(_, lost)| lost)
                .unwrap_or(0);
            let remaining = line.parallel_count.saturating_sub(lost);
            if remaining == 0 {
                return None;
            }
            let scale = remaining as f64 / line.parallel_count as f64;
            Some(EffectiveLine {
                line_id: line.id,
                from_bus: line.from_bus,
                to_bus: line.to_bus,
                susceptance: scale / line.reactance,
                capacity: line.capacity * scale,
            })
        })
        .collect()
}

/// Shift factor matrix: MW of line flow per MW injected at a bus, withdrawn
/// at the slack. The slack column is identically zero. Rows follow
/// `lines`: one row per in-service line of the topology it was built from.
#[derive(Debug, Clone)]
pub struct ShiftFactors {
    /// n_in_service_lines x n_buses.
    pub matrix: Matrix,
    /// Line ids for each row.
    pub line_ids: Vec<usize>,
    pub slack_bus: usize,
}

impl ShiftFactors {
    /// Flows for a nodal injection vector (length n_buses).
    pub fn flows(&self, injection: &[f64]) -> Vec<f64> {
        self.matrix.matvec(injection)
    }

    /// Row for a given line id, if that line is in service.
    pub fn row_for_line(&self, line_id: usize) -> Option<&[f64]> {
        let idx = self.line_ids.iter().position(|&id| id == line_id)?;
        Some(self.matrix.row(idx))
    }
}

/// Reduced susceptance matrix plus the angle-to-flow map of one topology.
#[derive(Debug, Clone)]
pub struct PhaseAngleSystem {
    /// Full nodal susceptance matrix, n_buses x n_buses (singular; fix the
    /// slack angle when solving).
    pub b_full: Matrix,
    /// Reduced matrix with the slack row/column removed; nonsingular for a
    /// connected network.
    pub b_reduced: Matrix,
    /// Branch-flow matrix: flow = F * theta, n_in_service_lines x n_buses.
    pub f: Matrix,
    pub line_ids: Vec<usize>,
    pub slack_bus: usize,
}

impl PhaseAngleSystem {
    /// Angles (slack pinned to zero) reproducing a nodal injection.
    pub fn solve_angles(&self, injection: &[f64]) -> Result<Vec<f64>, PtdfError> {
        let n = self.b_full.rows;
        let slack = self.slack_bus;
        let lu = Lu::factor(&self.b_reduced).map_err(|_| PtdfError::Singular)?;
        let reduced_rhs: Vec<f64> = (0..n).filter(|&i| i != slack).map(|i| injection[i]).collect();
        let reduced = lu.solve(&reduced_rhs);
        let mut theta = vec![0.0; n];
        let mut j = 0;
        for i in 0..n {
            if i != slack {
                theta[i] = reduced[j];
                j += 1;
            }
        }
        Ok(theta)
    }
}

fn check_connected(
    n_buses: usize,
    lines: &[EffectiveLine],
    slack: usize,
    scenario: Option<usize>,
) -> Result<(), PtdfError> {
    let mut adjacency = vec![Vec::new(); n_buses];
    for line in lines {
        adjacency[line.from_bus].push(line.to_bus);
        adjacency[line.to_bus].push(line.from_bus);
    }
    let mut seen = vec![false; n_buses];
    let mut stack = vec![slack];
    seen[slack] = true;
    while let Some(bus) = stack.pop() {
        for &next in &adjacency[bus] {
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    let unreachable: Vec<usize> = (0..n_buses).filter(|&b| !seen[b]).collect();
    if unreachable.is_empty() {
        Ok(())
    } else {
        Err(PtdfError::IslandedNetwork {
            scenario,
            buses: unreachable,
        })
    }
}

fn build_phase_angle(
    n_buses: usize,
    lines: &[EffectiveLine],
    slack: usize,
    scenario: Option<usize>,
) -> Result<PhaseAngleSystem, PtdfError> {
    check_connected(n_buses, lines, slack, scenario)?;

    let mut b_full = Matrix::zeros(n_buses, n_buses);
    let mut f = Matrix::zeros(lines.len(), n_buses);
    for (row, line) in lines.iter().enumerate() {
        let (i, j, b) = (line.from_bus, line.to_bus, line.susceptance);
        *b_full.at_mut(i, i) += b;
        *b_full.at_mut(j, j) += b;
        *b_full.at_mut(i, j) -= b;
        *b_full.at_mut(j, i) -= b;
        *f.at_mut(row, i) = b;
        *f.at_mut(row, j) = -b;
    }

    let m = n_buses - 1;
    let mut b_reduced = Matrix::zeros(m, m);
    let keep: Vec<usize> = (0..n_buses).filter(|&i| i != slack).collect();
    for (ri, &i) in keep.iter().enumerate() {
        for (rj, &j) in keep.iter().enumerate() {
            *b_reduced.at_mut(ri, rj) = b_full.at(i, j);
        }
    }

    Ok(PhaseAngleSystem {
        b_full,
        b_reduced,
        f,
        line_ids: lines.iter().map(|l| l.line_id).collect(),
        slack_bus: slack,
    })
}

fn shift_factors_from(system: &PhaseAngleSystem) -> Result<ShiftFactors, PtdfError> {
    let n = system.b_full.rows;
    let slack = system.slack_bus;
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let lu = Lu::factor(&system.b_reduced).map_err(|_| PtdfError::Singular)?;

    // Columns of X = B_reduced^-1, extended with a zero slack column; then
    // S = F * X.
    let mut x = Matrix::zeros(n, n);
    for (col_red, &bus) in keep.iter().enumerate() {
        let mut e = vec![0.0; keep.len()];
        e[col_red] = 1.0;
        let theta = lu.solve(&e);
        for (row_red, &i) in keep.iter().enumerate() {
            *x.at_mut(i, bus) = theta[row_red];
        }
    }

    let mut s = Matrix::zeros(system.f.rows, n);
    for row in 0..system.f.rows {
        for bus in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                let fv = system.f.at(row, i);
                if fv != 0.0 {
                    acc += fv * x.at(i, bus);
                }
            }
            *s.at_mut(row, bus) = acc;
        }
    }

    Ok(ShiftFactors {
        matrix: s,
        line_ids: system.line_ids.clone(),
        slack_bus: slack,
    })
}

/// Shift factors for the base topology.
pub fn base_shift_factors(case: &MarketCase) -> Result<ShiftFactors, PtdfError> {
    let lines = base_topology(case);
    let system = build_phase_angle(case.n_buses(), &lines, case.slack_bus, None)?;
    shift_factors_from(&system)
}

/// Shift factors and the capacity vector `f_k` for scenario `k`. The
/// capacity vector follows the in-service line rows and already includes the
/// scenario's exceed rate.
pub fn scenario_shift_factors(
    case: &MarketCase,
    k: usize,
) -> Result<(ShiftFactors, Vec<f64>), PtdfError> {
    let lines = scenario_topology(case, k);
    let system = build_phase_angle(case.n_buses(), &lines, case.slack_bus, Some(k))?;
    let factors = shift_factors_from(&system)?;
    let exceed = case.scenarios[k].exceed_rate;
    let capacities = lines.iter().map(|l| l.capacity * exceed).collect();
    Ok((factors, capacities))
}

/// Base capacity vector in line order (no exceed rate in the base case).
pub fn base_capacities(case: &MarketCase) -> Vec<f64> {
    base_topology(case).iter().map(|l| l.capacity).collect()
}

/// Phase-angle system for the base case (`scenario = None`) or a scenario.
pub fn phase_angle_system(
    case: &MarketCase,
    scenario: Option<usize>,
) -> Result<PhaseAngleSystem, PtdfError> {
    let lines = match scenario {
        None => base_topology(case),
        Some(k) => scenario_topology(case, k),
    };
    build_phase_angle(case.n_buses(), &lines, case.slack_bus, scenario)
}

/// Checks base and every scenario topology for islands; used at case load
/// time so solves can assume connectivity.
pub fn check_all_topologies(case: &MarketCase) -> Result<(), PtdfError> {
    check_connected(case.n_buses(), &base_topology(case), case.slack_bus, None)?;
    for k in 0..case.n_scenarios() {
        check_connected(
            case.n_buses(),
            &scenario_topology(case, k),
            case.slack_bus,
            Some(k),
        )?;
    }
    Ok(())
}
