//! Table rendering for the CLI in Markdown or CSV.

use reserveflow_core::model::MarketCase;
use reserveflow_core::pricing::PriceSet;
use reserveflow_core::settlement::ExPost;
use reserveflow_core::verify::TraditionalComparison;
use reserveflow_core::ClearingSolution;
use std::fmt::Write;

fn table(headers: &[&str], rows: &[Vec<String>], csv: bool) -> String {
    let mut out = String::new();
    if csv {
        writeln!(out, "{}", headers.join(",")).unwrap();
        for row in rows {
            writeln!(out, "{}", row.join(",")).unwrap();
        }
    } else {
        writeln!(out, "| {} |", headers.join(" | ")).unwrap();
        writeln!(out, "|{}", "---|".repeat(headers.len())).unwrap();
        for row in rows {
            writeln!(out, "| {} |", row.join(" | ")).unwrap();
        }
    }
    out
}

pub fn clearing_table(
    case: &MarketCase,
    sol: &ClearingSolution,
    prices: &PriceSet,
    csv: bool,
) -> String {
    let rows: Vec<Vec<String>> = case
        .generators
        .iter()
        .map(|g| {
            vec![
                format!("G{}", g.id + 1),
                format!("{:.1}", sol.g[g.id]),
                format!("{:.1}", sol.r_u[g.id]),
                format!("{:.1}", sol.r_d[g.id]),
                format!("{:.1}", prices.eta_g[g.id]),
                format!("{:.1}", prices.eta_up[g.id]),
                format!("{:.1}", prices.eta_down[g.id]),
            ]
        })
        .collect();
    table(
        &["Generator", "g", "r_U", "r_D", "eta_g", "eta_U", "eta_D"],
        &rows,
        csv,
    )
}

pub fn price_tables(case: &MarketCase, prices: &PriceSet, csv: bool) -> String {
    let mut out = String::new();
    let bus_rows: Vec<Vec<String>> = case
        .buses
        .iter()
        .map(|b| {
            let scen_sum: f64 = prices.omega_k.iter().map(|w| w[b.id]).sum();
            vec![
                b.name.clone(),
                format!("{:.4}", prices.omega0[b.id]),
                format!("{:.4}", scen_sum),
                format!("{:.4}", prices.bus_energy_price(b.id)),
            ]
        })
        .collect();
    out.push_str(&table(
        &["Bus", "omega0", "sum omega_k", "energy price"],
        &bus_rows,
        csv,
    ));
    out.push('\n');

    let gen_rows: Vec<Vec<String>> = case
        .generators
        .iter()
        .map(|g| {
            vec![
                format!("G{}", g.id + 1),
                format!("{:.4}", prices.eta_g[g.id]),
                format!("{:.4}", prices.eta_up[g.id]),
                format!("{:.4}", prices.eta_down[g.id]),
            ]
        })
        .collect();
    out.push_str(&table(&["Generator", "eta_g", "eta_U", "eta_D"], &gen_rows, csv));
    out.push('\n');

    let load_rows: Vec<Vec<String>> = case
        .loads
        .iter()
        .map(|l| {
            vec![
                format!("d{}", l.id + 1),
                format!("{:.4}", prices.eta_d[l.id]),
                format!("{:.4}", prices.shed_adjustment[l.id]),
            ]
        })
        .collect();
    out.push_str(&table(&["Load", "eta_d", "shed adjustment"], &load_rows, csv));
    out
}

pub fn ex_post_table(case: &MarketCase, post: &ExPost, csv: bool) -> String {
    let mut rows: Vec<Vec<String>> = case
        .generators
        .iter()
        .map(|g| {
            vec![
                format!("G{}", g.id + 1),
                format!("{:.4}", post.phi_up[g.id]),
                format!("{:.4}", post.phi_down[g.id]),
                String::new(),
            ]
        })
        .collect();
    for l in &case.loads {
        rows.push(vec![
            format!("d{}", l.id + 1),
            String::new(),
            String::new(),
            format!("{:.4}", post.phi_shed[l.id]),
        ]);
    }
    table(
        &["Resource", "redispatch credit", "redispatch payback", "shed credit"],
        &rows,
        csv,
    )
}

pub fn comparison(cmp: &TraditionalComparison) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "requirements: R_U = {:.4} MW, R_D = {:.4} MW",
        cmp.requirements.0, cmp.requirements.1
    )
    .unwrap();
    writeln!(out, "scenario-model expected cost: {:.4} $", cmp.scenario_cost).unwrap();
    match (&cmp.traditional, &cmp.recourse_cost, &cmp.infeasible) {
        (None, _, Some(constraints)) => {
            writeln!(out, "traditional model: INFEASIBLE").unwrap();
            writeln!(out, "  blocking constraints: {constraints:?}").unwrap();
        }
        (Some(trad), Some(cost), _) => {
            writeln!(out, "traditional bid cost: {:.4} $", trad.bid_cost).unwrap();
            writeln!(out, "traditional point under recourse: {cost:.4} $").unwrap();
            writeln!(
                out,
                "suboptimality gap: {:.4} $",
                cmp.gap.unwrap_or(f64::NAN)
            )
            .unwrap();
            writeln!(
                out,
                "traditional reserve prices: gamma_U = {:.4}, gamma_D = {:.4}",
                trad.gamma_up, trad.gamma_dn
            )
            .unwrap();
        }
        (Some(trad), None, Some(constraints)) => {
            writeln!(out, "traditional bid cost: {:.4} $", trad.bid_cost).unwrap();
            writeln!(out, "traditional point under recourse: INFEASIBLE").unwrap();
            writeln!(out, "  blocking constraints: {constraints:?}").unwrap();
            writeln!(
                out,
                "traditional reserve prices: gamma_U = {:.4}, gamma_D = {:.4}",
                trad.gamma_up, trad.gamma_dn
            )
            .unwrap();
        }
        _ => writeln!(out, "comparison produced no outcome").unwrap(),
    }
    out
}
