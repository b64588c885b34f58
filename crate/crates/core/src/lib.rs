//! Scenario-oriented energy-reserve co-optimization: market clearing,
//! locational marginal pricing for energy and reserve, two-stage settlement,
//! and machine verification of the uniform-pricing and revenue-adequacy
//! properties on every solve.
//!
//! Modules follow the data flow: [`model`] holds the case, [`ptdf`] builds
//! network sensitivities, [`lp`] solves linear programs with duals,
//! [`clearing`] builds and solves the co-optimization, [`pricing`] and
//! [`settlement`] post-process duals into prices and money flows, and
//! [`verify`] re-derives the market-design properties numerically. [`io`]
//! owns the case file format and the bundled fixtures.

pub mod clearing;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod pricing;
pub mod ptdf;
pub mod settlement;
pub mod verify;

pub use clearing::{
    build_model_one, build_model_two, evaluate_recourse_cost, solve_clearing, ClearingError,
    ClearingSolution, VariableIndex,
};
pub use model::{
    uniform_redispatch_groups, validate_case, Bus, Generator, Line, Load, MarketCase,
    RedispatchGroups, Scenario, ValidationReport,
};
pub use pricing::{energy_prices, reserve_prices, PriceSet};
pub use settlement::{congestion_rent, revenue_adequacy, settle, SettlementLedger};
pub use verify::{run_all_checks, CheckStatus, VerificationReport};
