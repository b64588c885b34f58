//! Command line front end: clear a case, print prices, settle, verify the
//! market-design properties, compare against the traditional reserve
//! requirement formulation, and sweep parameters.

mod render;
mod sweep;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use reserveflow_core::clearing::{solve_clearing_tol, ClearingError};
use reserveflow_core::io::{
    calibrate_twobus, case_to_json, fixture_ieee118, fixture_twobus, parse_case,
};
use reserveflow_core::lp::{check_kkt, random_lp, solve as lp_solve, vertex_oracle, OracleError};
use reserveflow_core::model::MarketCase;
use reserveflow_core::pricing::energy_prices;
use reserveflow_core::settlement::{settle, settle_ex_post};
use reserveflow_core::verify::{
    check_kkt_identities, check_revenue_adequacy, check_uniform_pricing, compare_traditional,
    phase_angle_crosscheck, CheckStatus,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_NO_SOLUTION: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "reserveflow",
    about = "Scenario-oriented energy-reserve market clearing, pricing and settlement",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Table output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Md)]
    format: Format,

    /// Solver tolerance on scaled residuals (also RESERVEFLOW_SOLVER_TOL).
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    /// Skip the automatic verification pass after solving.
    #[arg(long, global = true)]
    no_verify: bool,

    /// Seed for the random self-test problems.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Clear a case and print dispatch, reserve and prices.
    Solve { case: String },
    /// Print the full price decomposition of a cleared case.
    Price { case: String },
    /// Print the settlement ledger (money flow) of a cleared case.
    Settle {
        case: String,
        /// Settle ex post for this realized scenario id.
        #[arg(long)]
        realized: Option<usize>,
    },
    /// Run every market-design check and report pass/fail.
    Verify { case: String },
    /// Clear the traditional requirement-based model and score it under
    /// scenario recourse.
    Compare {
        case: String,
        /// Upward reserve requirement (default: scenario-model total).
        #[arg(long)]
        ru: Option<f64>,
        /// Downward reserve requirement (default: scenario-model total).
        #[arg(long)]
        rd: Option<f64>,
    },
    /// Re-solve over a parameter range and emit a CSV of prices/payments.
    Sweep {
        case: String,
        /// `fluct:<load_id>` (fluctuation level, fraction of base demand)
        /// or `json:/pointer/into/case` (absolute value).
        #[arg(long)]
        param: String,
        /// start:end:points, e.g. 0:0.06:7.
        #[arg(long)]
        range: String,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the bundled fixtures as case files.
    Fixtures {
        #[arg(long)]
        emit: PathBuf,
    },
    /// Grid-search the unpublished two-bus parameters against the
    /// published clearing results.
    Calibrate {
        /// Persist the result to this path.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Cross-check the LP solver against the vertex-enumeration oracle on
    /// random problems.
    Selftest {
        #[arg(long, default_value_t = 200)]
        count: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap help/version are successes, everything else is usage.
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK),
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn solver_tolerance(cli: &Cli) -> Option<f64> {
    cli.tolerance.or_else(|| {
        std::env::var("RESERVEFLOW_SOLVER_TOL")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn load_case(spec: &str) -> anyhow::Result<MarketCase> {
    match spec {
        "twobus" => Ok(fixture_twobus()),
        "sys118" | "ieee118" => Ok(fixture_ieee118()),
        path => {
            let path = Path::new(path);
            parse_case(path).with_context(|| format!("loading case {}", path.display()))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let tol = solver_tolerance(&cli);
    match &cli.command {
        Command::Solve { case } => {
            let case = load_case(case)?;
            let sol = match solve_clearing_tol(&case, tol) {
                Ok(sol) => sol,
                Err(e @ (ClearingError::InfeasibleMarket { .. } | ClearingError::UnboundedMarket)) => {
                    eprintln!("{e}");
                    return Ok(EXIT_NO_SOLUTION);
                }
                Err(e) => return Err(e.into()),
            };
            let prices = energy_prices(&sol, &case);
            print!("{}", render::clearing_table(&case, &sol, &prices, cli.format == Format::Csv));
            println!();
            println!("expected total cost: {:.4} $", sol.expected_total_cost);
            if cli.no_verify {
                return Ok(EXIT_OK);
            }
            let failed = run_verification(&case, &sol)?;
            Ok(if failed { EXIT_VERIFY_FAILED } else { EXIT_OK })
        }
        Command::Price { case } => {
            let case = load_case(case)?;
            let sol = solve_clearing_tol(&case, tol)?;
            let prices = energy_prices(&sol, &case);
            print!("{}", render::price_tables(&case, &prices, cli.format == Format::Csv));
            Ok(EXIT_OK)
        }
        Command::Settle { case, realized } => {
            let case = load_case(case)?;
            let sol = solve_clearing_tol(&case, tol)?;
            let prices = energy_prices(&sol, &case);
            let ledger = settle(&sol, &prices, &case);
            if cli.format == Format::Csv {
                print!("{}", reserveflow_core::settlement::ledger_to_csv(&ledger));
            } else {
                print!("{}", reserveflow_core::settlement::ledger_to_markdown(&ledger));
            }
            if let Some(k) = realized {
                let post = settle_ex_post(&sol, &case, Some(*k))
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                println!();
                print!("{}", render::ex_post_table(&case, &post, cli.format == Format::Csv));
            }
            Ok(EXIT_OK)
        }
        Command::Verify { case } => {
            let case = load_case(case)?;
            let sol = match solve_clearing_tol(&case, tol) {
                Ok(sol) => sol,
                Err(e @ (ClearingError::InfeasibleMarket { .. } | ClearingError::UnboundedMarket)) => {
                    eprintln!("{e}");
                    return Ok(EXIT_NO_SOLUTION);
                }
                Err(e) => return Err(e.into()),
            };
            let failed = run_verification(&case, &sol)?;
            Ok(if failed { EXIT_VERIFY_FAILED } else { EXIT_OK })
        }
        Command::Compare { case, ru, rd } => {
            let case = load_case(case)?;
            let sol = solve_clearing_tol(&case, tol)?;
            let cmp = compare_traditional(&case, &sol, *ru, *rd)?;
            print!("{}", render::comparison(&cmp));
            Ok(EXIT_OK)
        }
        Command::Sweep {
            case,
            param,
            range,
            output,
        } => {
            let case = load_case(case)?;
            let spec = sweep::SweepSpec::parse(param, range)?;
            let csv = sweep::run_sweep(&case, &spec, tol)?;
            match output {
                Some(path) => std::fs::write(path, csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            Ok(EXIT_OK)
        }
        Command::Fixtures { emit } => {
            std::fs::create_dir_all(emit)
                .with_context(|| format!("creating {}", emit.display()))?;
            for (name, case) in [
                ("twobus.case.json", fixture_twobus()),
                ("sys118.case.json", fixture_ieee118()),
            ] {
                let path = emit.join(name);
                std::fs::write(&path, case_to_json(&case))
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("wrote {}", path.display());
            }
            Ok(EXIT_OK)
        }
        Command::Calibrate { write } => {
            let result = calibrate_twobus();
            let json = serde_json::to_string_pretty(&result)?;
            println!("{json}");
            if let Some(path) = write {
                std::fs::write(path, json + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(EXIT_OK)
        }
        Command::Selftest { count } => {
            let mut optimal = 0u64;
            let mut infeasible = 0u64;
            let mut unbounded = 0u64;
            let mut skipped = 0u64;
            for i in 0..*count {
                let seed = cli.seed.wrapping_add(i);
                let problem = random_lp(seed, 6);
                let ours = lp_solve(&problem).map_err(|e| anyhow::anyhow!("seed {seed}: {e}"))?;
                let oracle = match vertex_oracle(&problem) {
                    Ok(o) => o,
                    Err(OracleError::TooLarge { .. }) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(anyhow::anyhow!("oracle failed on seed {seed}: {e}")),
                };
                anyhow::ensure!(
                    ours.status == oracle.status,
                    "seed {seed}: solver {:?} oracle {:?}",
                    ours.status,
                    oracle.status
                );
                match ours.status {
                    reserveflow_core::lp::LpStatus::Optimal => {
                        let gap = (ours.objective_value - oracle.objective_value).abs()
                            / (1.0 + oracle.objective_value.abs());
                        anyhow::ensure!(gap < 1e-8, "seed {seed}: objective gap {gap}");
                        let kkt = check_kkt(&problem, &ours);
                        anyhow::ensure!(kkt.max() < 1e-8, "seed {seed}: kkt {kkt:?}");
                        optimal += 1;
                    }
                    reserveflow_core::lp::LpStatus::Infeasible => infeasible += 1,
                    reserveflow_core::lp::LpStatus::Unbounded => unbounded += 1,
                }
            }
            println!(
                "selftest: {count} problems, {optimal} optimal, {infeasible} infeasible, {unbounded} unbounded, {skipped} skipped; all verdicts matched the oracle"
            );
            Ok(EXIT_OK)
        }
    }
}

/// Runs all checks, prints one line per check, and reports whether any
/// check failed outright.
fn run_verification(
    case: &MarketCase,
    sol: &reserveflow_core::ClearingSolution,
) -> anyhow::Result<bool> {
    let prices = energy_prices(sol, case);
    let ledger = settle(sol, &prices, case);
    let mut reports = vec![
        check_uniform_pricing(case, &prices, sol),
        check_revenue_adequacy(&ledger, 1e-6),
        check_kkt_identities(sol, case),
    ];
    let (angle, _) = phase_angle_crosscheck(case, sol, 1e-5)?;
    reports.push(angle);
    let mut failed = false;
    for report in &reports {
        println!("{}", report.render());
        failed |= report.status == CheckStatus::Fail;
    }
    Ok(failed)
}
