use serde::{Deserialize, Serialize};

use crate::error::{ConstraintClass, Error, Result};
use crate::model::{
    audit_policy, energy_ledger, FeasibilityReport, OutageMode, OutageReport, Policy,
    ScenarioConfig, P_MIN, TOL_FEAS,
};
use crate::solver::{exact_outages, NetworkKind, SolveResult};

/// A fixed policy scored with exact outage, without optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub policy: Policy,
    pub ee_exact: f64,
    pub total_energy: f64,
    pub outage: OutageReport,
    /// Causality and power bounds only; the outage requirement is not part
    /// of this scheme.
    pub feasibility: FeasibilityReport,
    /// Whether every period also meets the outage threshold.
    pub meets_outage: bool,
    /// Common user power actually used, W.
    pub power: f64,
    /// Common user power before any reduction, W.
    pub nominal_power: f64,
    /// Set when the nominal power could not be made causal and was lowered
    /// to the largest level that can.
    pub power_reduced: bool,
}

/// Every user spends the same power in every period: all harvested energy
/// spread evenly over users and periods, capped at `p_max`. Relay powers are
/// copied from `relay_from`. Transfers are the minimal schedule that makes
/// the constant consumption causal. When transfer losses make the nominal
/// level unreachable the level is lowered by bisection.
pub fn uniform_power_policy(
    config: &ScenarioConfig,
    relay_from: &SolveResult,
) -> Result<PolicyEvaluation> {
    config.validate()?;
    relay_from.policy.check_dims(config)?;
    let (m, k_periods) = (config.users, config.periods);
    let harvested: f64 = config.arrivals.sum() + config.eu_0.iter().sum::<f64>();
    let nominal = (harvested / (m as f64 * k_periods as f64 * config.slot)).min(config.p_max);
    if !(nominal >= P_MIN) {
        return Err(Error::Infeasible {
            class: ConstraintClass::PowerBounds,
            detail: format!("uniform power {nominal} W is below the floor {P_MIN} W"),
        });
    }

    let (power, transfers) = match greedy_transfers(config, nominal) {
        Some(t) => (nominal, t),
        None => {
            let (mut lo, mut hi) = (P_MIN, nominal);
            let mut best = greedy_transfers(config, lo).ok_or_else(|| Error::Infeasible {
                class: ConstraintClass::Causality,
                detail: "no uniform power level is causally feasible".into(),
            })?;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                match greedy_transfers(config, mid) {
                    Some(t) => {
                        lo = mid;
                        best = t;
                    }
                    None => hi = mid,
                }
                if hi - lo <= 1e-12 * hi {
                    break;
                }
            }
            (lo, best)
        }
    };

    let policy = Policy {
        p_u: crate::matrix::Matrix::from_fn(m, k_periods, |_, _| power),
        p_r: relay_from.policy.p_r.clone(),
        transfers,
    };
    let (outage, items) = exact_outages(config, NetworkKind::NetworkCoded, &policy)?;
    let feasibility = audit_policy(config, &policy, None, OutageMode::Exact)?;
    let meets_outage = items
        .iter()
        .all(|(_, p)| *p <= config.pr_out_0 * (1.0 + crate::model::OUTAGE_REL_TOL));
    let total_energy = crate::model::total_energy(config, &policy)?;
    let ee_exact = crate::model::energy_efficiency(config, &policy, &outage)?;
    Ok(PolicyEvaluation {
        policy,
        ee_exact,
        total_energy,
        outage,
        feasibility,
        meets_outage,
        power,
        nominal_power: nominal,
        power_reduced: power < nominal,
    })
}

/// Period by period, each user short of energy is topped up by the others,
/// earliest deficit first. Donors first give what they can spare without
/// running short later, so that energy never has to travel back; only then
/// do they lend from their current balance. `None` when some deficit cannot
/// be covered.
fn greedy_transfers(config: &ScenarioConfig, power: f64) -> Option<Vec<crate::matrix::Matrix>> {
    let (m, k_periods) = (config.users, config.periods);
    let mut policy = Policy::for_config(config);
    policy.p_u = crate::matrix::Matrix::from_fn(m, k_periods, |_, _| power);
    for k in 0..k_periods {
        let slack = energy_ledger(config, &policy).ok()?.slack();
        for i in 0..m {
            let deficit = -slack[(i, k)];
            if deficit <= 0.0 {
                continue;
            }
            let mut needed = deficit / config.eta;
            let slack = energy_ledger(config, &policy).ok()?.slack();
            // first what donors can spare for good, then what they hold now
            // and will have to be paid back later
            let lasting: Vec<f64> = (0..m)
                .map(|j| {
                    (k..k_periods)
                        .map(|l| slack[(j, l)])
                        .fold(f64::INFINITY, f64::min)
                        .max(0.0)
                })
                .collect();
            let current: Vec<f64> = (0..m).map(|j| slack[(j, k)].max(0.0)).collect();
            let mut given = vec![0.0; m];
            for pool in [&lasting, &current] {
                for j in (0..m).filter(|&j| j != i) {
                    let give = (pool[j] - given[j]).max(0.0).min(needed);
                    if give > 0.0 {
                        policy.transfers[k][(j, i)] += give;
                        given[j] += give;
                        needed -= give;
                    }
                }
            }
            if needed > TOL_FEAS {
                return None;
            }
        }
    }
    let causal = energy_ledger(config, &policy)
        .ok()?
        .slack()
        .iter()
        .all(|s| *s >= -TOL_FEAS);
    causal.then_some(policy.transfers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn toy(arrivals: Vec<Vec<f64>>, eta: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::bundled();
        c.periods = arrivals[0].len();
        c.arrivals = Matrix::from_rows(arrivals).unwrap();
        c.eta = eta;
        c
    }

    #[test]
    fn equal_arrivals_need_no_transfers() {
        let c = toy(vec![vec![1.0; 10], vec![1.0; 10]], 0.6);
        let t = greedy_transfers(&c, 1.0).unwrap();
        assert!(t.iter().all(|m| m.sum() == 0.0));
    }

    #[test]
    fn lossless_transfer_covers_exact_deficit() {
        let c = toy(vec![vec![0.0, 2.0], vec![2.0, 0.0]], 1.0);
        let t = greedy_transfers(&c, 1.0).unwrap();
        assert!((t[0][(1, 0)] - 1.0).abs() < 1e-12);
        assert!((t[1][(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lossy_transfer_can_make_nominal_level_unreachable() {
        let c = toy(vec![vec![0.0, 0.0], vec![2.0, 2.0]], 0.5);
        assert!(greedy_transfers(&c, 1.0).is_none());
        // user 1 keeps p and sends p / eta: p + 2p = 2 per period
        assert!(greedy_transfers(&c, 2.0 / 3.0 - 1e-9).is_some());
    }
}
