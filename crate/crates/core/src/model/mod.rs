//! Scenario description, decision variables and energy accounting.

mod energy;
mod feasibility;
mod policy;
mod scenario;

use serde::{Deserialize, Serialize};

pub(crate) use energy::total_energy_unchecked;
pub use energy::{energy_efficiency, energy_ledger, expected_bits, total_energy, EnergyLedger};
pub use feasibility::{
    audit_policy, validate_policy, ClassViolation, FeasibilityReport, OutageItem,
};
pub use policy::Policy;
pub use scenario::{
    compute_link_coefficients, LinkCoefficients, LinkParams, ScenarioConfig, OUTAGE_REL_TOL, P_MIN,
    TOL_FEAS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutageMode {
    #[default]
    Exact,
    Approximate,
}

/// Per-period network outage with its split into first-hop failure (A) and
/// second-hop failure (B).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub pr_out: Vec<f64>,
    #[serde(rename = "pr_A")]
    pub pr_a: Vec<f64>,
    #[serde(rename = "pr_B")]
    pub pr_b: Vec<f64>,
    pub mode: OutageMode,
}

impl OutageReport {
    pub fn max(&self) -> f64 {
        self.pr_out.iter().copied().fold(0.0, f64::max)
    }

    /// Same report with every entry clamped to `[0, 1]`; only meaningful
    /// for display of approximate values.
    pub fn clamped(&self) -> OutageReport {
        let c = |v: &Vec<f64>| v.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        OutageReport {
            pr_out: c(&self.pr_out),
            pr_a: c(&self.pr_a),
            pr_b: c(&self.pr_b),
            mode: self.mode,
        }
    }
}
