//! Minimal importer for MATPOWER-style `.m` case files: bus, gen, branch
//! and gencost matrices. Produces a scenario-free market case; scenarios
//! are this tool's own concept and come from the case schema or fixtures.
//!
//! Bid linearization is deterministic and documented: a quadratic cost
//! `c2 p^2 + c1 p + c0` becomes the marginal cost at half of capacity,
//! `c1 + c2 * pmax`; linear costs keep their slope. Reserve offers default
//! to 10% of capacity at 10% of the energy bid.

use crate::model::{Bus, Generator, Line, Load, MarketCase};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatpowerError {
    #[error("missing matrix `{0}`")]
    MissingMatrix(&'static str),
    #[error("row {row} of `{matrix}` has {found} columns, expected at least {expected}")]
    ShortRow {
        matrix: &'static str,
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("cannot parse number `{0}`")]
    BadNumber(String),
    #[error("unknown bus number {0} referenced")]
    UnknownBus(u64),
}

fn extract_matrix(text: &str, name: &'static str) -> Result<Vec<Vec<f64>>, MatpowerError> {
    let needle = format!("mpc.{name}");
    let start = text
        .find(&needle)
        .ok_or(MatpowerError::MissingMatrix(name))?;
    let open = text[start..]
        .find('[')
        .ok_or(MatpowerError::MissingMatrix(name))?
        + start;
    let close = text[open..]
        .find(']')
        .ok_or(MatpowerError::MissingMatrix(name))?
        + open;
    let body = &text[open + 1..close];

    let mut rows = Vec::new();
    for line in body.split(';') {
        let line = line.trim();
        let line = line.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            let token = token.trim_end_matches(',');
            if token.is_empty() {
                continue;
            }
            row.push(
                token
                    .parse::<f64>()
                    .map_err(|_| MatpowerError::BadNumber(token.into()))?,
            );
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn need(row: &[f64], matrix: &'static str, idx: usize, at: usize) -> Result<f64, MatpowerError> {
    row.get(idx).copied().ok_or(MatpowerError::ShortRow {
        matrix,
        row: at,
        found: row.len(),
        expected: idx + 1,
    })
}

/// Import a MATPOWER case body into a scenario-free market case.
pub fn import_matpower(text: &str) -> Result<MarketCase, MatpowerError> {
    let bus_rows = extract_matrix(text, "bus")?;
    let gen_rows = extract_matrix(text, "gen")?;
    let branch_rows = extract_matrix(text, "branch")?;
    let gencost_rows = extract_matrix(text, "gencost").unwrap_or_default();

    let mut bus_index: BTreeMap<u64, usize> = BTreeMap::new();
    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut loads = Vec::new();
    for (i, row) in bus_rows.iter().enumerate() {
        let number = need(row, "bus", 0, i)? as u64;
        bus_index.insert(number, i);
        buses.push(Bus {
            id: i,
            name: format!("bus{number}"),
        });
        let pd = need(row, "bus", 2, i)?;
        if pd > 0.0 {
            loads.push(Load {
                id: loads.len(),
                bus: i,
                base_demand: pd,
                c_shed: 1000.0,
            });
        }
    }

    let mut lines = Vec::with_capacity(branch_rows.len());
    for (i, row) in branch_rows.iter().enumerate() {
        let from = need(row, "branch", 0, i)? as u64;
        let to = need(row, "branch", 1, i)? as u64;
        let x = need(row, "branch", 3, i)?;
        let rate_a = need(row, "branch", 5, i)?;
        lines.push(Line {
            id: i,
            from_bus: *bus_index.get(&from).ok_or(MatpowerError::UnknownBus(from))?,
            to_bus: *bus_index.get(&to).ok_or(MatpowerError::UnknownBus(to))?,
            reactance: x.abs().max(1e-5),
            // rate 0 means unlimited in the source format.
            capacity: if rate_a > 0.0 { rate_a } else { 1e6 },
            parallel_count: 1,
        });
    }

    let mut generators = Vec::with_capacity(gen_rows.len());
    for (i, row) in gen_rows.iter().enumerate() {
        let bus_num = need(row, "gen", 0, i)? as u64;
        let pmax = need(row, "gen", 8, i)?;
        let pmin = need(row, "gen", 9, i)?;
        let c_energy = match gencost_rows.get(i) {
            // Polynomial rows: [2, startup, shutdown, n, cn-1.., c0].
            Some(cost) if cost.first() == Some(&2.0) && cost.len() >= 6 => {
                let c2 = cost[cost.len() - 3];
                let c1 = cost[cost.len() - 2];
                c1 + c2 * pmax
            }
            Some(cost) if cost.first() == Some(&2.0) && cost.len() == 5 => cost[cost.len() - 2],
            _ => 20.0,
        };
        generators.push(Generator {
            id: i,
            bus: *bus_index
                .get(&bus_num)
                .ok_or(MatpowerError::UnknownBus(bus_num))?,
            g_min: pmin.max(0.0),
            g_max: pmax,
            ru_max: 0.1 * pmax,
            rd_max: 0.1 * pmax,
            c_energy,
            c_ru: 0.1 * c_energy,
            c_rd: 0.1 * c_energy,
        });
    }

    Ok(MarketCase {
        buses,
        lines,
        generators,
        loads,
        scenarios: vec![],
        slack_bus: 0,
    })
}
