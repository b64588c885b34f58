//! Domain types for a market case: network, resources, scenarios.
//!
//! All types are plain immutable values. Loads and generators may share a
//! bus; nothing here aggregates per bus, because the pricing checks compare
//! co-located resources individually.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Network node. Ids must be `0..n_buses`, contiguous and unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub name: String,
}

/// Transmission branch between two buses.
///
/// A branch with `parallel_count > 1` models identical parallel circuits as
/// one record: losing one circuit multiplies the reactance by
/// `count/(count-lost)` and scales the capacity by `(count-lost)/count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance, per unit, > 0 (for the full parallel bundle).
    pub reactance: f64,
    /// Thermal capacity in MW, > 0 (for the full parallel bundle).
    pub capacity: f64,
    /// Number of identical parallel circuits, >= 1.
    #[serde(default = "default_parallel_count")]
    pub parallel_count: u32,
}

fn default_parallel_count() -> u32 {
    1
}

/// Dispatchable generator with energy and reserve offers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    /// Minimum stable output, MW.
    pub g_min: f64,
    /// Maximum output, MW.
    pub g_max: f64,
    /// Upward reserve offer cap, MW.
    pub ru_max: f64,
    /// Downward reserve offer cap, MW.
    pub rd_max: f64,
    /// Energy bid, $/MWh.
    pub c_energy: f64,
    /// Upward reserve bid, $/MWh.
    pub c_ru: f64,
    /// Downward reserve bid, $/MWh.
    pub c_rd: f64,
}

/// Demand with a shedding price. Renewables can be modeled as negative
/// fluctuations on a load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: usize,
    pub bus: usize,
    /// Base-case demand, MW, >= 0.
    pub base_demand: f64,
    /// Shedding price, $/MWh.
    pub c_shed: f64,
}

/// A non-base scenario: a joint realization of line outages and load
/// fluctuations, with its own re-dispatch prices and relaxed line limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    /// Occurrence probability, in (0, 1].
    pub probability: f64,
    /// (line id, number of circuits lost) pairs.
    #[serde(default)]
    pub outaged_lines: Vec<(usize, u32)>,
    /// Demand deviation per load, MW; may be negative. Length must equal the
    /// number of loads.
    pub load_fluctuation: Vec<f64>,
    /// Static multiplier >= 1 applied to (outage-adjusted) line capacities;
    /// models short-duration overload tolerance.
    pub exceed_rate: f64,
    /// Upward re-dispatch price per generator, $/MWh.
    pub c_redispatch_up: Vec<f64>,
    /// Downward re-dispatch pay-back price per generator, $/MWh.
    pub c_redispatch_down: Vec<f64>,
}

/// Full problem input for one clearing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketCase {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    pub scenarios: Vec<Scenario>,
    /// Reference bus for the shift factors.
    #[serde(default)]
    pub slack_bus: usize,
}

impl MarketCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_gens(&self) -> usize {
        self.generators.len()
    }

    pub fn n_loads(&self) -> usize {
        self.loads.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    /// Base demand vector indexed by load position.
    pub fn base_demand(&self) -> Vec<f64> {
        self.loads.iter().map(|l| l.base_demand).collect()
    }

    /// Total system demand in the base case.
    pub fn total_demand(&self) -> f64 {
        self.loads.iter().map(|l| l.base_demand).sum()
    }
}

/// One finding from case validation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

/// Outcome of [`validate_case`]: hard errors plus advisory warnings.
/// A case with zero errors is accepted by every downstream module.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Warning)
    }

    pub fn n_errors(&self) -> usize {
        self.errors().count()
    }

    pub fn n_warnings(&self) -> usize {
        self.warnings().count()
    }

    pub fn is_ok(&self) -> bool {
        self.n_errors() == 0
    }

    fn error(&mut self, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warning(&mut self, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Warning,
            message: message.into(),
        });
    }
}

/// Structural validation of a case. Pure: identical input yields an
/// identical report. Connectivity under outages is checked separately by the
/// shift-factor module, which knows the topology rules.
pub fn validate_case(case: &MarketCase) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n_buses = case.buses.len();

    for (pos, bus) in case.buses.iter().enumerate() {
        if bus.id != pos {
            report.error(format!(
                "bus ids must be contiguous 0..{}: position {} has id {}",
                n_buses, pos, bus.id
            ));
        }
    }

    for (pos, line) in case.lines.iter().enumerate() {
        if line.id != pos {
            report.error(format!("line ids must be contiguous: position {pos} has id {}", line.id));
        }
        if line.from_bus >= n_buses || line.to_bus >= n_buses {
            report.error(format!("line {} has a dangling bus reference", line.id));
        }
        if line.from_bus == line.to_bus {
            report.error(format!("line {} connects a bus to itself", line.id));
        }
        if !(line.reactance.is_finite() && line.reactance > 0.0) {
            report.error(format!("line {} reactance must be finite and positive", line.id));
        }
        if !(line.capacity.is_finite() && line.capacity > 0.0) {
            report.error(format!("line {} capacity must be finite and positive", line.id));
        }
        if line.parallel_count < 1 {
            report.error(format!("line {} parallel_count must be >= 1", line.id));
        }
    }

    if case.generators.is_empty() {
        report.error("case has no generators");
    }
    let max_energy_bid = case
        .generators
        .iter()
        .map(|g| g.c_energy)
        .fold(f64::NEG_INFINITY, f64::max);
    for (pos, gen) in case.generators.iter().enumerate() {
        if gen.id != pos {
            report.error(format!("generator ids must be contiguous: position {pos} has id {}", gen.id));
        }
        if gen.bus >= n_buses {
            report.error(format!("generator {} has a dangling bus reference", gen.id));
        }
        if gen.g_min > gen.g_max {
            report.error(format!("generator {} has g_min > g_max", gen.id));
        }
        if gen.ru_max < 0.0 || gen.rd_max < 0.0 {
            report.error(format!("generator {} has a negative reserve cap", gen.id));
        }
        for (label, value) in [
            ("c_energy", gen.c_energy),
            ("c_ru", gen.c_ru),
            ("c_rd", gen.c_rd),
        ] {
            if !value.is_finite() {
                report.error(format!("generator {} has non-finite {label}", gen.id));
            }
        }
    }

    for (pos, load) in case.loads.iter().enumerate() {
        if load.id != pos {
            report.error(format!("load ids must be contiguous: position {pos} has id {}", load.id));
        }
        if load.bus >= n_buses {
            report.error(format!("load {} has a dangling bus reference", load.id));
        }
        if !(load.base_demand.is_finite() && load.base_demand >= 0.0) {
            report.error(format!("load {} base_demand must be >= 0", load.id));
        }
        if load.c_shed < 0.0 {
            report.error(format!("load {} shedding price must be >= 0", load.id));
        } else if load.c_shed <= max_energy_bid {
            report.warning(format!(
                "load {} shedding price {} does not exceed the highest energy bid {}",
                load.id, load.c_shed, max_energy_bid
            ));
        }
    }

    if case.slack_bus >= n_buses {
        report.error("slack bus reference is dangling");
    }

    let mut prob_sum = 0.0;
    for (pos, scen) in case.scenarios.iter().enumerate() {
        if scen.id != pos {
            report.error(format!("scenario ids must be contiguous: position {pos} has id {}", scen.id));
        }
        if !(scen.probability > 0.0 && scen.probability <= 1.0) {
            report.error(format!("scenario {} probability must be in (0, 1]", scen.id));
        } else {
            prob_sum += scen.probability;
        }
        if scen.exceed_rate < 1.0 || !scen.exceed_rate.is_finite() {
            report.error(format!("scenario {} exceed_rate must be >= 1", scen.id));
        }
        if scen.load_fluctuation.len() != case.loads.len() {
            report.error(format!(
                "scenario {} fluctuation vector has {} entries for {} loads",
                scen.id,
                scen.load_fluctuation.len(),
                case.loads.len()
            ));
        } else {
            for (load, pi) in case.loads.iter().zip(&scen.load_fluctuation) {
                if load.base_demand + pi < 0.0 {
                    report.error(format!(
                        "scenario {} drives load {} demand negative ({} {:+})",
                        scen.id, load.id, load.base_demand, pi
                    ));
                }
            }
        }
        for prices in [&scen.c_redispatch_up, &scen.c_redispatch_down] {
            if prices.len() != case.generators.len() {
                report.error(format!(
                    "scenario {} re-dispatch price vector has {} entries for {} generators",
                    scen.id,
                    prices.len(),
                    case.generators.len()
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for &(line_id, lost) in &scen.outaged_lines {
            match case.lines.get(line_id) {
                None => report.error(format!(
                    "scenario {} outages nonexistent line {line_id}",
                    scen.id
                )),
                Some(line) => {
                    if lost == 0 || lost > line.parallel_count {
                        report.error(format!(
                            "scenario {} loses {lost} of {} circuits on line {line_id}",
                            scen.id, line.parallel_count
                        ));
                    }
                }
            }
            if !seen.insert(line_id) {
                report.error(format!(
                    "scenario {} lists line {line_id} more than once",
                    scen.id
                ));
            }
        }
    }
    if prob_sum > 1.0 + 1e-12 {
        report.error(format!("scenario probabilities exceed 1 (sum = {prob_sum})"));
    } else if prob_sum > 0.99 {
        report.warning(format!(
            "scenario probabilities sum to {prob_sum}; near-zero base-case weight"
        ));
    }

    report
}

/// A group of generators sharing a bus and identical re-dispatch prices in
/// every scenario; the reserve-price uniformity property is asserted within
/// these groups.
#[derive(Debug, Clone, PartialEq)]
pub struct RedispatchGroups {
    /// Disjoint groups (generator ids) covering all generators.
    pub groups: Vec<Vec<usize>>,
    /// True when generators at the same bus always share re-dispatch prices
    /// (every group spans all generators of its bus).
    pub price_assumption_holds: bool,
}

/// Partition generators by (bus, per-scenario re-dispatch price pair).
pub fn uniform_redispatch_groups(case: &MarketCase) -> RedispatchGroups {
    // Key on exact bit patterns: prices are input data, not computed values.
    let mut by_key: BTreeMap<(usize, Vec<(u64, u64)>), Vec<usize>> = BTreeMap::new();
    let mut by_bus: BTreeMap<usize, usize> = BTreeMap::new();
    for gen in &case.generators {
        let key: Vec<(u64, u64)> = case
            .scenarios
            .iter()
            .map(|s| {
                (
                    s.c_redispatch_up.get(gen.id).copied().unwrap_or(0.0).to_bits(),
                    s.c_redispatch_down.get(gen.id).copied().unwrap_or(0.0).to_bits(),
                )
            })
            .collect();
        by_key.entry((gen.bus, key)).or_default().push(gen.id);
        *by_bus.entry(gen.bus).or_default() += 1;
    }

    let mut groups_per_bus: BTreeMap<usize, usize> = BTreeMap::new();
    let mut groups = Vec::new();
    for ((bus, _), members) in by_key {
        *groups_per_bus.entry(bus).or_default() += 1;
        groups.push(members);
    }
    let price_assumption_holds = groups_per_bus.values().all(|&n| n == 1);
    RedispatchGroups {
        groups,
        price_assumption_holds,
    }
}
