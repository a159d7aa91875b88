//! Outage analysis and energy-efficient scheduling for multi-user,
//! multi-relay networks where relays forward network-coded combinations of
//! the users' messages and users harvest (and may share) energy.
//!
//! The crate is organised bottom-up:
//! [`model`] holds scenario data, policies and energy accounting,
//! [`outage`] the exact and approximate outage probabilities,
//! [`solver`] the fractional-programming optimizer,
//! [`baselines`] the comparison policies and a brute-force oracle,
//! [`montecarlo`] a channel simulator, and [`experiment`] the sweep and
//! comparison drivers used by the command-line tool.

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod outage;
pub mod solver;
pub mod special;

pub use error::{ConstraintClass, Error, Result};
pub use matrix::Matrix;
pub use model::{
    compute_link_coefficients, energy_efficiency, energy_ledger, total_energy, validate_policy,
    EnergyLedger, FeasibilityReport, LinkCoefficients, OutageMode, OutageReport, Policy,
    ScenarioConfig,
};
pub use outage::{OutageBreakdown, SubsetTables};
