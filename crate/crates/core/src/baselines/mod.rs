//! Comparison schemes and the brute-force oracle.

mod brute_force;
mod uniform;

use serde::{Deserialize, Serialize};

pub use brute_force::{brute_force_optimize, GridSpec, MAX_JOINT_AXES};
pub use uniform::{uniform_power_policy, PolicyEvaluation};

use crate::error::Result;
use crate::model::ScenarioConfig;
use crate::outage::{LinkOutages, OutageBreakdown};
use crate::solver::{solve_variant, NetworkKind, ProblemVariant, SolveResult, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    DepletedEnergy,
    NoTransfer,
    UniformPower,
    NoncDf,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::NoTransfer,
        BaselineKind::DepletedEnergy,
        BaselineKind::UniformPower,
        BaselineKind::NoncDf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::DepletedEnergy => "depleted_energy",
            BaselineKind::NoTransfer => "no_transfer",
            BaselineKind::UniformPower => "uniform_power",
            BaselineKind::NoncDf => "nonc_df",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::error::Error::InvalidArgument(format!("unknown baseline `{s}`")))
    }
}

/// Outage of user `i` without network coding: lost iff no relay both
/// decodes it and delivers it. `pr_a` is the part where no relay decodes.
pub fn df_user_outage(links: &LinkOutages, i: usize) -> OutageBreakdown {
    let n = links.e_r.len();
    let mut lost = 1.0;
    let mut undecoded = 1.0;
    for j in 0..n {
        let e = links.e_u[(i, j)];
        lost *= e + links.e_r[j] * links.ok_u[(i, j)];
        undecoded *= e;
    }
    OutageBreakdown {
        pr_out: lost,
        pr_a: undecoded,
        pr_b: lost - undecoded,
    }
}

/// Energy can be saved across periods but never shared between users.
pub fn no_transfer_policy(config: &ScenarioConfig, options: &SolverOptions) -> Result<SolveResult> {
    let variant = ProblemVariant {
        transfers: false,
        ..ProblemVariant::default()
    };
    solve_variant(config, variant, options)
}

/// Each user spends exactly the energy it holds in every period; transfers
/// within a period are allowed when `allow_transfers` is set.
pub fn depleted_energy_policy(
    config: &ScenarioConfig,
    allow_transfers: bool,
    options: &SolverOptions,
) -> Result<SolveResult> {
    let variant = ProblemVariant {
        transfers: allow_transfers,
        depleted: true,
        ..ProblemVariant::default()
    };
    solve_variant(config, variant, options)
}

/// Decode-and-forward without network coding, optimized with the same
/// machinery.
pub fn nonc_df_policy(config: &ScenarioConfig, options: &SolverOptions) -> Result<SolveResult> {
    let variant = ProblemVariant {
        network: NetworkKind::PerUserDf,
        ..ProblemVariant::default()
    };
    solve_variant(config, variant, options)
}
