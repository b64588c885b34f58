//! Bundled 118-bus fixture.
//!
//! The network file shipped under `assets/sys118_network.json` follows the
//! familiar 118-bus test-system shape: 118 buses, 186 branches, 54
//! generators at the customary generator buses, loads elsewhere. Branch
//! parameters and bids are deterministic synthetic values (the widely
//! circulated 118-bus data carries no usable thermal ratings), so results
//! on this fixture are structural, not a reproduction of any published
//! table.
//!
//! The scenario policy is the independent single-outage x fluctuation grid:
//! three monitored lines (ids 20, 54 and 101) each fail alone with
//! probability 10%, two system-wide fluctuation situations occur with
//! probability 10% each, and the cross product minus the all-quiet cell
//! yields eleven scenarios. The load at bus 59 is split into two co-located
//! halves; the second half (`d119` in the handles) fluctuates against the
//! rest of the system and hedges it.

use super::CaseIoError;
use crate::model::{MarketCase, Scenario};
use serde::{Deserialize, Serialize};

#[cfg(test)]
use crate::lp::SplitMix64;
#[cfg(test)]
use crate::model::{Bus, Generator, Line, Load};

/// 1-based generator bus positions of the classic 118-bus system.
#[cfg(test)]
const GEN_BUSES: [usize; 54] = [
    1, 4, 6, 8, 10, 12, 15, 18, 19, 24, 25, 26, 27, 31, 32, 34, 36, 40, 42, 46, 49, 54, 55, 56,
    59, 61, 62, 65, 66, 69, 70, 72, 73, 74, 76, 77, 80, 85, 87, 89, 90, 91, 92, 99, 100, 103,
    104, 105, 107, 110, 111, 112, 113, 116,
];

/// 1-based buses kept free of load (generator-only or switching buses).
#[cfg(test)]
const NO_LOAD_BUSES: [usize; 20] = [
    5, 9, 10, 25, 26, 30, 37, 38, 61, 63, 64, 65, 68, 69, 71, 81, 87, 89, 111, 116,
];

/// Lines whose single outages the scenario grid monitors (0-based ids,
/// i.e. lines 21, 55 and 102 in 1-based counting).
pub const OUTAGE_LINES: [usize; 3] = [20, 54, 101];

const SPLIT_BUS: usize = 59; // 1-based
#[cfg(test)]
const SPLIT_TOTAL_MW: f64 = 260.0;

/// Ids of the loads and generators the qualitative sweeps address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sys118Handles {
    /// First half of the split bus-59 load.
    pub d59: usize,
    /// Second half, the hedging load.
    pub d119: usize,
    pub d15: usize,
    pub d66: usize,
    pub gen_at_bus15: usize,
    pub gen_at_bus66: usize,
}

/// Deterministic 118-bus network (no scenarios).
#[cfg(test)]
pub(crate) fn generate_network() -> MarketCase {
    let mut rng = SplitMix64::new(0x118);
    let n = 118usize;

    let buses: Vec<Bus> = (0..n)
        .map(|id| Bus {
            id,
            name: format!("B{}", id + 1),
        })
        .collect();

    // Ring backbone plus deterministic chords: 118 + 68 = 186 branches,
    // two-edge-connected, so any single outage leaves the network whole.
    let mut lines = Vec::with_capacity(186);
    for i in 0..n {
        let reactance = (0.03 + 0.09 * rng.unit() * 0.999).min(0.12);
        let tight = i % 13 == 4;
        // The corridors into the sweep buses (15 and 66, 1-based) are kept
        // narrow so local fluctuations must be balanced by local reserve.
        let sweep_corridor = matches!(i, 13 | 14 | 64 | 65);
        let capacity = if sweep_corridor {
            55.0
        } else if tight {
            95.0
        } else {
            250.0
        };
        lines.push(Line {
            id: lines.len(),
            from_bus: i,
            to_bus: (i + 1) % n,
            reactance: (reactance * 1e4).round() / 1e4,
            capacity,
            parallel_count: 1,
        });
    }
    for i in 0..68 {
        let from = (i * 7 + 2) % n;
        let span = 9 + (i % 11);
        let to = (from + span) % n;
        let reactance = 0.05 + 0.15 * rng.unit();
        let tight = i % 9 == 3;
        lines.push(Line {
            id: lines.len(),
            from_bus: from,
            to_bus: to,
            reactance: (reactance * 1e4).round() / 1e4,
            capacity: if tight { 110.0 } else { 200.0 },
            parallel_count: 1,
        });
    }

    let generators: Vec<Generator> = GEN_BUSES
        .iter()
        .enumerate()
        .map(|(id, &bus1)| {
            let g_max = (120.0 + rng.unit() * 280.0).round();
            let c_energy = (12.0 + rng.unit() * 18.0 * 100.0).round() / 100.0;
            let c_res = (1.0 + rng.unit() * 2.0 * 100.0).round() / 100.0;
            // The units at buses 15 and 66 are the reserve stories of the
            // fluctuation sweeps: cheap reserve, generous range.
            let sweeps = bus1 == 15 || bus1 == 66;
            Generator {
                id,
                bus: bus1 - 1,
                g_min: 0.0,
                g_max,
                ru_max: if sweeps { 60.0 } else { (0.15 * g_max).round() },
                rd_max: if sweeps { 60.0 } else { (0.15 * g_max).round() },
                // Expensive energy keeps the sweep units out of the base
                // dispatch; they exist to sell reserve against local
                // fluctuations.
                c_energy: if sweeps { 27.5 } else { c_energy },
                c_ru: if sweeps { 0.8 } else { c_res },
                c_rd: if sweeps { 0.8 } else { c_res },
            }
        })
        .collect();

    let mut loads = Vec::new();
    for bus1 in 1..=n {
        if NO_LOAD_BUSES.contains(&bus1) {
            continue;
        }
        let demand = if bus1 == SPLIT_BUS {
            SPLIT_TOTAL_MW / 2.0
        } else if bus1 == 15 {
            90.0
        } else if bus1 == 66 {
            78.0
        } else {
            (18.0 + rng.unit() * 60.0).round()
        };
        loads.push(Load {
            id: loads.len(),
            bus: bus1 - 1,
            base_demand: demand,
            c_shed: 1000.0,
        });
    }
    // Second half of the split load, appended last.
    loads.push(Load {
        id: loads.len(),
        bus: SPLIT_BUS - 1,
        base_demand: SPLIT_TOTAL_MW / 2.0,
        c_shed: 1000.0,
    });

    MarketCase {
        buses,
        lines,
        generators,
        loads,
        scenarios: vec![],
        slack_bus: 0,
    }
}

const SYS118_NETWORK_JSON: &str = include_str!("../../assets/sys118_network.json");

fn bundled_network() -> Result<MarketCase, CaseIoError> {
    let file: super::CaseFile = serde_json::from_str(SYS118_NETWORK_JSON)?;
    Ok(file.into_case())
}

pub fn sys118_handles(case: &MarketCase) -> Sys118Handles {
    let loads_at = |bus1: usize| -> Vec<usize> {
        case.loads
            .iter()
            .filter(|l| l.bus == bus1 - 1)
            .map(|l| l.id)
            .collect()
    };
    let split = loads_at(SPLIT_BUS);
    let gen_at = |bus1: usize| -> usize {
        case.generators
            .iter()
            .find(|g| g.bus == bus1 - 1)
            .map(|g| g.id)
            .expect("fixture keeps generators at buses 15 and 66")
    };
    Sys118Handles {
        d59: split[0],
        d119: split[1],
        d15: loads_at(15)[0],
        d66: loads_at(66)[0],
        gen_at_bus15: gen_at(15),
        gen_at_bus66: gen_at(66),
    }
}

/// The full 118-bus fixture: bundled network plus the default scenario
/// grid at 3% fluctuation levels and 1.2 exceed rates.
pub fn fixture_ieee118() -> MarketCase {
    fixture_ieee118_with_levels(&[])
}

/// Same fixture with per-load fluctuation levels overridden (fractions of
/// base demand; the default is 0.03 everywhere). Used by the sweeps.
pub fn fixture_ieee118_with_levels(level_overrides: &[(usize, f64)]) -> MarketCase {
    let mut case = bundled_network().expect("bundled 118-bus network must parse");
    let handles = sys118_handles(&case);
    let n_loads = case.n_loads();

    let mut levels = vec![0.03; n_loads];
    for &(load, level) in level_overrides {
        levels[load] = level;
    }

    // Situation I: the hedging load rises while the rest of the system
    // falls; situation II is the reverse.
    let pi = |situation: usize| -> Vec<f64> {
        (0..n_loads)
            .map(|l| {
                let direction = if l == handles.d119 { 1.0 } else { -1.0 }
                    * if situation == 0 { 1.0 } else { -1.0 };
                direction * levels[l] * case.loads[l].base_demand
            })
            .collect()
    };

    let redispatch = |outage: bool| -> Vec<f64> {
        case.generators
            .iter()
            .map(|g| {
                let bus_level = 24.0 + 0.04 * g.bus as f64;
                if outage {
                    bus_level + 2.5
                } else {
                    bus_level
                }
            })
            .collect()
    };

    let mut scenarios = Vec::with_capacity(11);
    let push = |outage: Option<usize>, situation: Option<usize>, probability: f64,
                    scenarios: &mut Vec<Scenario>| {
        let id = scenarios.len();
        let prices = redispatch(outage.is_some());
        scenarios.push(Scenario {
            id,
            probability,
            outaged_lines: outage.map(|l| vec![(l, 1)]).unwrap_or_default(),
            load_fluctuation: situation.map(&pi).unwrap_or_else(|| vec![0.0; n_loads]),
            exceed_rate: 1.2,
            c_redispatch_up: prices.clone(),
            c_redispatch_down: prices,
        });
    };

    for &line in &OUTAGE_LINES {
        push(Some(line), None, 0.10 * 0.80, &mut scenarios);
        push(Some(line), Some(0), 0.10 * 0.10, &mut scenarios);
        push(Some(line), Some(1), 0.10 * 0.10, &mut scenarios);
    }
    push(None, Some(0), 0.70 * 0.10, &mut scenarios);
    push(None, Some(1), 0.70 * 0.10, &mut scenarios);

    case.scenarios = scenarios;
    case
}

/// Load a 118-bus network from an explicit path instead of the bundled
/// asset (for running the fixture against real network data).
pub fn fixture_ieee118_from(path: &std::path::Path) -> Result<MarketCase, CaseIoError> {
    if !path.exists() {
        return Err(CaseIoError::MissingData(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| CaseIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: super::CaseFile = serde_json::from_str(&text)?;
    Ok(file.into_case())
}


#[cfg(test)]
mod solve_probe {
    use super::*;

    #[test]
    #[ignore]
    fn probe_sys118_solve() {
        let case = fixture_ieee118();
        let t0 = std::time::Instant::now();
        let sol = crate::clearing::solve_clearing(&case).unwrap();
        let solve_time = t0.elapsed();
        println!("solve time: {solve_time:?}, iters {}", sol.iterations);
        println!("cost {}", sol.expected_total_cost);
        println!("kkt {:?}", sol.kkt);
        let prices = crate::pricing::energy_prices(&sol, &case);
        let ledger = crate::settlement::settle(&sol, &prices, &case);
        let (d0, dk) = crate::settlement::congestion_rent(&sol);
        println!("delta0 {d0}, delta_k {dk:?}");
        let report = crate::settlement::revenue_adequacy(&ledger, 1e-4);
        println!("adequacy pass {} worst {:?}", report.pass,
            report.relative_residuals.iter().cloned().fold(0.0f64, f64::max));
        let shed_total: f64 = sol.shed.iter().flatten().sum();
        println!("total shed across scenarios {shed_total}");
        println!("degenerate {} entries", sol.degenerate.len());
    }
}
