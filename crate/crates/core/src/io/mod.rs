//! Case file schema, bundled fixtures, and the two-bus calibration search.
//!
//! Cases are single JSON documents with an explicit schema version and
//! strict field checking. Quantities are MW, prices $/MWh, reactances per
//! unit. Scenarios carry their own re-dispatch prices and fluctuation
//! vectors, which no standard network format encodes.

mod matpower;
pub mod sys118;

pub use matpower::import_matpower;
pub use sys118::{fixture_ieee118, fixture_ieee118_with_levels, Sys118Handles};

use crate::model::{Bus, Generator, Line, Load, MarketCase, Scenario};
use crate::ptdf::check_all_topologies;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CaseIoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema version {found} unsupported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("case failed validation:\n{summary}")]
    Validation { summary: String },
    #[error("network data file missing: {0}")]
    MissingData(String),
}

/// On-disk shape of a market case.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub schema_version: u32,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub slack_bus: usize,
}

impl From<MarketCase> for CaseFile {
    fn from(case: MarketCase) -> Self {
        CaseFile {
            schema_version: SCHEMA_VERSION,
            buses: case.buses,
            lines: case.lines,
            generators: case.generators,
            loads: case.loads,
            scenarios: case.scenarios,
            slack_bus: case.slack_bus,
        }
    }
}

impl CaseFile {
    pub fn into_case(self) -> MarketCase {
        MarketCase {
            buses: self.buses,
            lines: self.lines,
            generators: self.generators,
            loads: self.loads,
            scenarios: self.scenarios,
            slack_bus: self.slack_bus,
        }
    }
}

/// Parse and fully validate a case document.
pub fn parse_case_str(text: &str) -> Result<MarketCase, CaseIoError> {
    let file: CaseFile = serde_json::from_str(text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CaseIoError::SchemaVersion {
            found: file.schema_version,
        });
    }
    let case = file.into_case();
    let report = crate::model::validate_case(&case);
    if !report.is_ok() {
        let summary = report
            .errors()
            .map(|f| format!("  error: {}", f.message))
            .collect::<Vec<_>>()
            .join("\n");
        return Err(CaseIoError::Validation { summary });
    }
    if let Err(err) = check_all_topologies(&case) {
        return Err(CaseIoError::Validation {
            summary: format!("  error: {err}"),
        });
    }
    Ok(case)
}

pub fn parse_case(path: &Path) -> Result<MarketCase, CaseIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| CaseIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case_str(&text)
}

pub fn case_to_json(case: &MarketCase) -> String {
    let file: CaseFile = case.clone().into();
    serde_json::to_string_pretty(&file).expect("case serialization cannot fail")
}

pub fn write_case(case: &MarketCase, path: &Path) -> Result<(), CaseIoError> {
    std::fs::write(path, case_to_json(case)).map_err(|source| CaseIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Two-bus fixture
// ---------------------------------------------------------------------------

/// Calibrated parameters of the two-bus fixture. The published description
/// of that system omits the line capacity, the per-scenario capacity exceed
/// rate, the load placement and the shedding price; the calibration search
/// recovers them from the published clearing results, and the result is
/// committed here rather than recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwobusCalibration {
    /// Total capacity of the two-circuit branch, MW.
    pub line_capacity: f64,
    pub exceed_rate: f64,
    /// Bus of each of the three loads.
    pub load_buses: [usize; 3],
    /// Uniform shedding price, $/MWh.
    pub c_shed: f64,
    pub residual: CalibrationResidual,
    /// True when the residual meets the regression thresholds (0.05 MW on
    /// quantities, 0.1 $/MWh on prices).
    pub achieved_tolerance: bool,
}

/// Worst absolute deviations from the published clearing results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CalibrationResidual {
    /// Dispatch and reserve quantities, MW.
    pub quantity_mw: f64,
    /// Energy and reserve prices, $/MWh.
    pub price: f64,
    /// Fluctuation payments, $.
    pub payment: f64,
}

const TWOBUS_CALIBRATION_JSON: &str = include_str!("../../assets/twobus_calibration.json");

pub fn committed_twobus_calibration() -> TwobusCalibration {
    serde_json::from_str(TWOBUS_CALIBRATION_JSON)
        .expect("committed calibration file must parse")
}

/// Published clearing results for the two-bus system, used as calibration
/// targets and regression values.
pub mod twobus_targets {
    pub const G: [f64; 3] = [8.0, 17.0, 0.0];
    pub const R_U: [f64; 3] = [2.4, 1.0, 4.0];
    pub const R_D: [f64; 3] = [0.8, 0.0, 0.0];
    pub const ETA_G: [f64; 3] = [25.4, 35.7, 35.7];
    pub const ETA_U: [f64; 3] = [2.0, 5.3, 5.3];
    pub const ETA_D: [f64; 3] = [2.0, 3.7, 3.7];
    pub const FLUCTUATION_PAYMENTS: [f64; 3] = [23.3, 91.7, -23.5];
    /// Money-flow table, columns Base, S1..S5, Total.
    pub const GAMMA_D: [f64; 7] = [446.9, 24.9, 25.2, 9.7, 238.2, 86.0, 830.7];
    pub const PI_D: [f64; 7] = [0.0, 0.0, 8.0, 0.8, 75.9, 6.9, 91.4];
    pub const EPS_PHI_D: [f64; 7] = [0.0, 0.0, 2.1, 0.0, 6.4, 0.0, 8.6];
    pub const GAMMA_G: [f64; 7] = [443.4, 20.0, 23.6, 9.7, 227.5, 86.0, 810.1];
    pub const GAMMA_U: [f64; 7] = [0.0, 0.0, 2.6, 0.0, 28.7, 0.0, 31.3];
    pub const GAMMA_DN: [f64; 7] = [0.0, 1.6, 0.0, 0.0, 0.0, 0.0, 1.6];
    pub const EPS_PHI_U: [f64; 7] = [0.0, 1.3, 4.0, 0.9, 38.5, 7.5, 52.1];
    pub const EPS_PHI_DN: [f64; 7] = [0.0, 0.9, 0.1, 0.1, 0.0, 0.6, 1.7];
    pub const DELTA: [f64; 7] = [3.5, 2.9, 1.0, 0.0, 12.7, 0.0, 20.1];
}

/// Per-scenario (bus-1, bus-2) re-dispatch price levels; generators at a bus
/// share the value, and the up and down prices coincide (forecast real-time
/// prices with a zero adder).
const TWOBUS_SCENARIO_PRICES: [(f64, f64); 5] = [
    (19.1, 26.3),
    (19.7, 33.8),
    (19.4, 32.7),
    (19.4, 33.5),
    (19.1, 27.5),
];
const TWOBUS_PROBS: [f64; 5] = [0.06, 0.02, 0.02, 0.18, 0.18];
const TWOBUS_FLUCTS: [[f64; 3]; 5] = [
    [0.0, 0.0, 0.0],
    [2.0, 6.0, -1.0],
    [3.0, 2.0, -3.0],
    [2.0, 6.0, -1.0],
    [3.0, 2.0, -3.0],
];
/// Scenarios 1-3 lose one of the two parallel circuits.
const TWOBUS_OUTAGE: [bool; 5] = [true, true, true, false, false];

/// The bundled two-bus case with the committed calibration.
pub fn fixture_twobus() -> MarketCase {
    fixture_twobus_with(&committed_twobus_calibration())
}

/// Two-bus fixture for explicit calibration parameters.
pub fn fixture_twobus_with(calib: &TwobusCalibration) -> MarketCase {
    let base_demand = [6.0, 15.0, 4.0];
    let loads = (0..3)
        .map(|l| Load {
            id: l,
            bus: calib.load_buses[l],
            base_demand: base_demand[l],
            c_shed: calib.c_shed,
        })
        .collect();

    let gen_bus = [0usize, 1, 1];
    let scenarios = (0..5)
        .map(|k| {
            let (p1, p2) = TWOBUS_SCENARIO_PRICES[k];
            let per_gen: Vec<f64> = gen_bus.iter().map(|&b| if b == 0 { p1 } else { p2 }).collect();
            Scenario {
                id: k,
                probability: TWOBUS_PROBS[k],
                outaged_lines: if TWOBUS_OUTAGE[k] { vec![(0, 1)] } else { vec![] },
                load_fluctuation: TWOBUS_FLUCTS[k].to_vec(),
                exceed_rate: calib.exceed_rate,
                c_redispatch_up: per_gen.clone(),
                c_redispatch_down: per_gen,
            }
        })
        .collect();

    MarketCase {
        buses: vec![
            Bus { id: 0, name: "bus1".into() },
            Bus { id: 1, name: "bus2".into() },
        ],
        lines: vec![Line {
            id: 0,
            from_bus: 0,
            to_bus: 1,
            reactance: 0.1,
            capacity: calib.line_capacity,
            parallel_count: 2,
        }],
        generators: vec![
            Generator {
                id: 0, bus: 0, g_min: 0.0, g_max: 16.0, ru_max: 4.0, rd_max: 4.0,
                c_energy: 8.0, c_ru: 2.0, c_rd: 2.0,
            },
            Generator {
                id: 1, bus: 1, g_min: 0.0, g_max: 18.0, ru_max: 4.0, rd_max: 4.0,
                c_energy: 15.0, c_ru: 2.0, c_rd: 2.0,
            },
            Generator {
                id: 2, bus: 1, g_min: 0.0, g_max: 12.0, ru_max: 4.0, rd_max: 4.0,
                c_energy: 20.0, c_ru: 2.5, c_rd: 2.5,
            },
        ],
        loads,
        scenarios,
        slack_bus: 0,
    }
}

// ---------------------------------------------------------------------------
// Calibration search
// ---------------------------------------------------------------------------

/// Score one candidate parameter set against the published results.
fn score_candidate(calib: &TwobusCalibration) -> Option<CalibrationResidual> {
    let case = fixture_twobus_with(calib);
    if crate::ptdf::check_all_topologies(&case).is_err() {
        return None;
    }
    let sol = crate::clearing::solve_clearing(&case).ok()?;
    let prices = crate::pricing::energy_prices(&sol, &case);
    let (eta_u, eta_d) = crate::pricing::reserve_prices(&sol);

    let mut quantity_mw: f64 = 0.0;
    for j in 0..3 {
        quantity_mw = quantity_mw
            .max((sol.g[j] - twobus_targets::G[j]).abs())
            .max((sol.r_u[j] - twobus_targets::R_U[j]).abs())
            .max((sol.r_d[j] - twobus_targets::R_D[j]).abs());
    }
    let mut price: f64 = 0.0;
    for j in 0..3 {
        price = price
            .max((prices.eta_g[j] - twobus_targets::ETA_G[j]).abs())
            .max((eta_u[j] - twobus_targets::ETA_U[j]).abs())
            .max((eta_d[j] - twobus_targets::ETA_D[j]).abs());
    }
    let ledger = crate::settlement::settle(&sol, &prices, &case);
    let mut payment: f64 = 0.0;
    for l in 0..3 {
        payment = payment.max(
            (ledger.fluctuation_payment_per_load[l] - twobus_targets::FLUCTUATION_PAYMENTS[l])
                .abs(),
        );
    }
    Some(CalibrationResidual {
        quantity_mw,
        price,
        payment,
    })
}

/// Quantities dominate the ranking: the published dispatch is exactly
/// reproducible while the published prices are not consistent with the
/// published bids under any calibration, so the search pins quantities
/// first and then minimizes the price and payment deviations.
fn residual_rank(r: &CalibrationResidual) -> f64 {
    r.quantity_mw * 1e6 + r.price * 1e2 + r.payment
}

/// Grid-search the unpublished two-bus parameters against the published
/// clearing results: coarse capacity sweep, exceed rates 1.0..1.5, the
/// eight load placements, a shedding-price sweep, then a fine capacity pass
/// around the winner. Deterministic; ties break toward the first candidate
/// in grid order.
pub fn calibrate_twobus() -> TwobusCalibration {
    let placements: Vec<[usize; 3]> = (0..8usize)
        .map(|mask| [mask & 1, (mask >> 1) & 1, (mask >> 2) & 1])
        .collect();
    let exceed_rates: Vec<f64> = (0..=5).map(|i| 1.0 + 0.1 * i as f64).collect();
    let coarse_caps: Vec<f64> = (2..=40).map(|i| 0.25 * i as f64).collect();
    let mut sheds: Vec<f64> = (6..=20).map(|i| 5.0 * i as f64).collect();
    sheds.extend((11..=30).map(|i| 10.0 * i as f64));
    sheds.extend([400.0, 500.0, 750.0, 1000.0]);

    let mut grid: Vec<TwobusCalibration> = Vec::new();
    for placement in &placements {
        for &rate in &exceed_rates {
            for &cap in &coarse_caps {
                for &shed in &sheds {
                    grid.push(TwobusCalibration {
                        line_capacity: cap,
                        exceed_rate: rate,
                        load_buses: *placement,
                        c_shed: shed,
                        residual: CalibrationResidual::default(),
                        achieved_tolerance: false,
                    });
                }
            }
        }
    }
    let best = search(grid).expect("coarse grid produced no solvable candidate");

    // Fine pass around the winner.
    let mut fine: Vec<TwobusCalibration> = Vec::new();
    for dc in -30..=30 {
        let cap = best.line_capacity + 0.01 * dc as f64;
        if cap <= 0.0 {
            continue;
        }
        for ds in -40..=40 {
            let shed = best.c_shed + 0.5 * ds as f64;
            if shed <= 0.0 {
                continue;
            }
            fine.push(TwobusCalibration {
                line_capacity: cap,
                c_shed: shed,
                ..best.clone()
            });
        }
    }
    let mut winner = search(fine).unwrap_or(best);
    winner.achieved_tolerance =
        winner.residual.quantity_mw <= 0.05 && winner.residual.price <= 0.1;
    winner
}

fn search(grid: Vec<TwobusCalibration>) -> Option<TwobusCalibration> {
    use rayon::prelude::*;
    grid.into_par_iter()
        .enumerate()
        .filter_map(|(i, mut cand)| {
            let residual = score_candidate(&cand)?;
            cand.residual = residual;
            Some((residual_rank(&residual), i, cand))
        })
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
        .map(|(_, _, cand)| cand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twobus_parses_and_round_trips() {
        let case = fixture_twobus();
        let json = case_to_json(&case);
        let parsed = parse_case_str(&json).unwrap();
        assert_eq!(case, parsed);
    }

    #[test]
    fn twobus_probabilities_are_exact() {
        let case = fixture_twobus();
        let probs: Vec<f64> = case.scenarios.iter().map(|s| s.probability).collect();
        assert_eq!(probs, vec![0.06, 0.02, 0.02, 0.18, 0.18]);
        let sum: f64 = probs.iter().sum();
        assert!((sum - 0.46).abs() < 1e-12);
    }

    #[test]
    fn twobus_bids_match_offer_table() {
        let case = fixture_twobus();
        let c_g: Vec<f64> = case.generators.iter().map(|g| g.c_energy).collect();
        let c_u: Vec<f64> = case.generators.iter().map(|g| g.c_ru).collect();
        let c_d: Vec<f64> = case.generators.iter().map(|g| g.c_rd).collect();
        assert_eq!(c_g, vec![8.0, 15.0, 20.0]);
        assert_eq!(c_u, vec![2.0, 2.0, 2.5]);
        assert_eq!(c_d, vec![2.0, 2.0, 2.5]);
    }

    #[test]
    fn twobus_scenario2_is_outage_situation_one() {
        let case = fixture_twobus();
        let s2 = &case.scenarios[1];
        assert_eq!(s2.probability, 0.02);
        assert_eq!(s2.outaged_lines, vec![(0, 1)]);
        assert_eq!(s2.load_fluctuation, vec![2.0, 6.0, -1.0]);
        assert_eq!(s2.c_redispatch_up[0], 19.7);
        assert_eq!(s2.c_redispatch_up[1], 33.8);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut json: serde_json::Value =
            serde_json::from_str(&case_to_json(&fixture_twobus())).unwrap();
        json.as_object_mut()
            .unwrap()
            .insert("surprise".into(), serde_json::json!(1));
        let err = parse_case_str(&json.to_string()).unwrap_err();
        assert!(matches!(err, CaseIoError::Parse(_)));
    }

    #[test]
    fn schema_version_is_checked() {
        let mut json: serde_json::Value =
            serde_json::from_str(&case_to_json(&fixture_twobus())).unwrap();
        json["schema_version"] = serde_json::json!(99);
        let err = parse_case_str(&json.to_string()).unwrap_err();
        assert!(matches!(err, CaseIoError::SchemaVersion { found: 99 }));
    }

    #[test]
    fn text_in_numeric_field_reports_position() {
        let text = r#"{ "schema_version": 1, "buses": [{"id": "zero", "name": "a"}] }"#;
        match parse_case_str(text) {
            Err(CaseIoError::Parse(e)) => {
                assert!(e.line() >= 1);
                assert!(e.column() > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn case_json_round_trips(seed in 0u64..500) {
            // Small random-but-valid cases.
            let mut rng = crate::lp::SplitMix64::new(seed);
            let n_bus = 2 + (rng.below(3) as usize);
            let case = MarketCase {
                buses: (0..n_bus).map(|id| Bus { id, name: format!("b{id}") }).collect(),
                lines: (0..n_bus - 1)
                    .map(|id| Line {
                        id,
                        from_bus: id,
                        to_bus: id + 1,
                        reactance: 0.05 + rng.unit() * 0.1,
                        capacity: 5.0 + rng.unit() * 20.0,
                        parallel_count: 1 + rng.below(3) as u32,
                    })
                    .collect(),
                generators: vec![Generator {
                    id: 0,
                    bus: 0,
                    g_min: 0.0,
                    g_max: 30.0 + rng.unit() * 10.0,
                    ru_max: 5.0,
                    rd_max: 5.0,
                    c_energy: 10.0 + rng.unit() * 10.0,
                    c_ru: 1.0,
                    c_rd: 1.0,
                }],
                loads: vec![Load {
                    id: 0,
                    bus: n_bus - 1,
                    base_demand: 10.0 + rng.unit() * 5.0,
                    c_shed: 900.0,
                }],
                scenarios: vec![Scenario {
                    id: 0,
                    probability: 0.1 + rng.unit() * 0.5,
                    outaged_lines: vec![],
                    load_fluctuation: vec![rng.unit() * 2.0 - 0.5],
                    exceed_rate: 1.0 + rng.unit() * 0.4,
                    c_redispatch_up: vec![15.0 + rng.unit()],
                    c_redispatch_down: vec![14.0 + rng.unit()],
                }],
                slack_bus: 0,
            };
            let parsed = parse_case_str(&case_to_json(&case)).unwrap();
            prop_assert_eq!(case, parsed);
        }
    }
}

#[cfg(test)]
mod calibration_runner {
    /// One-shot calibration; run explicitly to refresh the committed file:
    /// `cargo test -p reserveflow-core run_calibration -- --ignored --nocapture`
    #[test]
    #[ignore]
    fn run_calibration() {
        let result = super::calibrate_twobus();
        let json = serde_json::to_string_pretty(&result).unwrap();
        println!("{json}");
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/twobus_calibration.json");
        std::fs::write(path, json + "\n").unwrap();
    }
}

#[cfg(test)]
mod calibration_debug {
    use super::*;

    #[test]
    #[ignore]
    fn score_hand_candidate() {
        for (cap, rate, buses, shed) in [
            (2.0, 1.2, [0usize, 1, 1], 60.0),
            (2.0, 1.2, [0, 1, 1], 120.0),
            (2.0, 1.2, [0, 1, 1], 180.0),
            (2.0, 1.3, [0, 1, 1], 60.0),
            (2.0, 1.2, [0, 1, 1], 35.0),
            (9.23, 1.5, [1, 1, 0], 997.0),
        ] {
            let cand = TwobusCalibration {
                line_capacity: cap,
                exceed_rate: rate,
                load_buses: buses,
                c_shed: shed,
                residual: CalibrationResidual::default(),
                achieved_tolerance: false,
            };
            match score_candidate(&cand) {
                Some(r) => {
                    let case = fixture_twobus_with(&cand);
                    let sol = crate::clearing::solve_clearing(&case).unwrap();
                    let prices = crate::pricing::energy_prices(&sol, &case);
                    let (eta_u, eta_d) = crate::pricing::reserve_prices(&sol);
                    println!("cap {cap} rate {rate} buses {buses:?} shed {shed}: {r:?} rank {}", residual_rank(&r));
                    println!("  g {:?}", sol.g);
                    println!("  ru {:?} rd {:?}", sol.r_u, sol.r_d);
                    println!("  eta_g {:?}", prices.eta_g);
                    println!("  eta_u {eta_u:?} eta_d {eta_d:?}");
                }
                None => println!("cap {cap} rate {rate} buses {buses:?} shed {shed}: FAILED"),
            }
        }
    }
}
