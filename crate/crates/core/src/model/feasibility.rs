use serde::{Deserialize, Serialize};

use crate::error::{ConstraintClass, Result};
use crate::outage;

use super::{energy_ledger, OutageMode, Policy, ScenarioConfig, OUTAGE_REL_TOL, P_MIN, TOL_FEAS};

/// One offending entry: which quantity, its zero-based index and how far it
/// is outside its allowed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub what: String,
    pub index: Vec<usize>,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassViolation {
    pub class: ConstraintClass,
    /// Largest violation found, 0 when the class is satisfied.
    pub worst: f64,
    pub offenders: Vec<Offender>,
}

impl ClassViolation {
    fn new(class: ConstraintClass) -> Self {
        ClassViolation {
            class,
            worst: 0.0,
            offenders: Vec::new(),
        }
    }

    fn push(&mut self, what: &str, index: Vec<usize>, amount: f64) {
        self.worst = self.worst.max(amount);
        self.offenders.push(Offender {
            what: what.to_string(),
            index,
            amount,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub outage_mode: OutageMode,
    /// False for policies whose constraint set has no outage requirement.
    pub outage_checked: bool,
    /// Outage values that were checked against the threshold.
    pub pr_out: Vec<f64>,
    pub classes: Vec<ClassViolation>,
}

impl FeasibilityReport {
    pub fn class(&self, class: ConstraintClass) -> Option<&ClassViolation> {
        self.classes.iter().find(|c| c.class == class)
    }

    pub fn violated_classes(&self) -> Vec<ConstraintClass> {
        self.classes
            .iter()
            .filter(|c| !c.offenders.is_empty())
            .map(|c| c.class)
            .collect()
    }
}

/// An outage constraint's index and its probability.
pub type OutageItem = (Vec<usize>, f64);

/// Checks causality, power bounds, transfer signs and the network outage
/// threshold for a network-coded policy.
pub fn validate_policy(
    config: &ScenarioConfig,
    policy: &Policy,
    mode: OutageMode,
) -> Result<FeasibilityReport> {
    let report = outage::outage_report(config, policy, mode)?;
    let items: Vec<OutageItem> = report
        .pr_out
        .iter()
        .enumerate()
        .map(|(k, &p)| (vec![k], p))
        .collect();
    audit_policy(config, policy, Some(&items), mode)
}

/// Shared audit. `outage` lists `(index, probability)` pairs to compare
/// against the threshold, or `None` when the policy carries no outage
/// requirement.
pub fn audit_policy(
    config: &ScenarioConfig,
    policy: &Policy,
    outage: Option<&[OutageItem]>,
    mode: OutageMode,
) -> Result<FeasibilityReport> {
    let ledger = energy_ledger(config, policy)?;
    let slack = ledger.slack();

    let mut causality = ClassViolation::new(ConstraintClass::Causality);
    for (i, k, s) in slack.indexed() {
        if s < -TOL_FEAS {
            causality.push("causality", vec![i, k], -s);
        }
    }

    let mut bounds = ClassViolation::new(ConstraintClass::PowerBounds);
    for (i, k, p) in policy.p_u.indexed() {
        if p <= 0.0 || p < P_MIN * (1.0 - 1e-6) {
            bounds.push("user_power_min", vec![i, k], P_MIN - p);
        } else if p > config.p_max + TOL_FEAS {
            bounds.push("user_power_max", vec![i, k], p - config.p_max);
        }
    }
    for (j, k, p) in policy.p_r.indexed() {
        if p < -TOL_FEAS {
            bounds.push("relay_power_min", vec![j, k], -p);
        } else if p > config.p_max + TOL_FEAS {
            bounds.push("relay_power_max", vec![j, k], p - config.p_max);
        }
    }

    let mut sign = ClassViolation::new(ConstraintClass::TransferSign);
    for (k, t) in policy.transfers.iter().enumerate() {
        for (a, b, e) in t.indexed() {
            if a == b && e.abs() > TOL_FEAS {
                sign.push("transfer_diagonal", vec![k, a, b], e.abs());
            } else if e < -TOL_FEAS {
                sign.push("transfer_negative", vec![k, a, b], -e);
            }
        }
    }

    let mut out = ClassViolation::new(ConstraintClass::Outage);
    let mut pr_out = Vec::new();
    if let Some(items) = outage {
        let limit = config.pr_out_0 * (1.0 + OUTAGE_REL_TOL);
        for (index, p) in items {
            pr_out.push(*p);
            if !(*p <= limit) {
                out.push("outage", index.clone(), p - config.pr_out_0);
            }
        }
    }

    let classes = vec![causality, bounds, sign, out];
    Ok(FeasibilityReport {
        feasible: classes.iter().all(|c| c.offenders.is_empty()),
        outage_mode: mode,
        outage_checked: outage.is_some(),
        pr_out,
        classes,
    })
}
