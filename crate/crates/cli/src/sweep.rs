//! Parameter sweeps: re-solve a case across a range and tabulate payments
//! and prices per point.
//!
//! Two parameter forms:
//! - `fluct:<load_id>`: the load's fluctuation level as a fraction of its
//!   base demand; every scenario's entry for that load is rescaled to the
//!   level while keeping its sign pattern.
//! - `json:/pointer`: a JSON pointer into the case document, set to the
//!   absolute sweep value (for example `json:/lines/0/capacity`).

use anyhow::{bail, Context};
use reserveflow_core::clearing::solve_clearing_tol;
use reserveflow_core::io::{case_to_json, parse_case_str};
use reserveflow_core::model::MarketCase;
use reserveflow_core::pricing::energy_prices;
use reserveflow_core::settlement::settle;
use std::fmt::Write;

pub enum SweepParam {
    FluctuationLevel { load: usize },
    JsonPointer { pointer: String },
}

pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn parse(param: &str, range: &str) -> anyhow::Result<SweepSpec> {
        let param = if let Some(load) = param.strip_prefix("fluct:") {
            SweepParam::FluctuationLevel {
                load: load.parse().context("load id in fluct:<id>")?,
            }
        } else if let Some(pointer) = param.strip_prefix("json:") {
            SweepParam::JsonPointer {
                pointer: pointer.to_string(),
            }
        } else {
            bail!("parameter must be fluct:<load_id> or json:/pointer");
        };

        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            bail!("range must be start:end:points");
        }
        let start: f64 = parts[0].parse().context("range start")?;
        let end: f64 = parts[1].parse().context("range end")?;
        let points: usize = parts[2].parse().context("range point count")?;
        if points < 2 {
            bail!("range needs at least 2 points");
        }
        let values = (0..points)
            .map(|i| start + (end - start) * i as f64 / (points - 1) as f64)
            .collect();
        Ok(SweepSpec { param, values })
    }
}

pub fn apply_param(case: &MarketCase, param: &SweepParam, value: f64) -> anyhow::Result<MarketCase> {
    match param {
        SweepParam::FluctuationLevel { load } => {
            let mut case = case.clone();
            if *load >= case.loads.len() {
                bail!("load {load} out of range");
            }
            let base = case.loads[*load].base_demand;
            for scen in &mut case.scenarios {
                let pi = &mut scen.load_fluctuation[*load];
                if *pi != 0.0 {
                    *pi = pi.signum() * value * base;
                }
            }
            Ok(case)
        }
        SweepParam::JsonPointer { pointer } => {
            let mut doc: serde_json::Value = serde_json::from_str(&case_to_json(case))?;
            let target = doc
                .pointer_mut(pointer)
                .with_context(|| format!("pointer {pointer} not found in case"))?;
            *target = serde_json::json!(value);
            parse_case_str(&doc.to_string()).map_err(|e| anyhow::anyhow!("{e}"))
        }
    }
}

/// Solve per point; columns: parameter value, expected cost, per-load
/// fluctuation payments, per-generator reserve prices.
pub fn run_sweep(case: &MarketCase, spec: &SweepSpec, tol: Option<f64>) -> anyhow::Result<String> {
    let mut out = String::new();
    write!(out, "param,expected_cost").unwrap();
    for l in 0..case.n_loads() {
        write!(out, ",pi_d{l}").unwrap();
    }
    for g in 0..case.n_gens() {
        write!(out, ",eta_up_g{g}").unwrap();
    }
    for g in 0..case.n_gens() {
        write!(out, ",eta_down_g{g}").unwrap();
    }
    out.push('\n');

    for &value in &spec.values {
        let point = apply_param(case, &spec.param, value)?;
        let sol = solve_clearing_tol(&point, tol)?;
        let prices = energy_prices(&sol, &point);
        let ledger = settle(&sol, &prices, &point);
        write!(out, "{value},{:.6}", sol.expected_total_cost).unwrap();
        for l in 0..point.n_loads() {
            write!(out, ",{:.6}", ledger.fluctuation_payment_per_load[l]).unwrap();
        }
        for g in 0..point.n_gens() {
            write!(out, ",{:.6}", prices.eta_up[g]).unwrap();
        }
        for g in 0..point.n_gens() {
            write!(out, ",{:.6}", prices.eta_down[g]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}
