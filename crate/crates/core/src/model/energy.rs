use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{OutageReport, Policy, ScenarioConfig};

/// Per-user, per-period energy accounts (all J).
///
/// `available[i][k]` is what user i may spend on transmission in period k.
/// `cumulative_in` counts arrivals, initial storage and received transfers
/// (after the efficiency loss) through period k; `cumulative_out` counts
/// transmission energy and sent transfers through period k. Causality holds
/// iff `cumulative_out <= cumulative_in` everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub available: Matrix,
    pub cumulative_in: Matrix,
    pub cumulative_out: Matrix,
}

impl EnergyLedger {
    /// `cumulative_in - cumulative_out`, equal to `available - p T`.
    pub fn slack(&self) -> Matrix {
        let (r, c) = self.available.shape();
        Matrix::from_fn(r, c, |i, k| {
            self.cumulative_in[(i, k)] - self.cumulative_out[(i, k)]
        })
    }
}

pub fn energy_ledger(config: &ScenarioConfig, policy: &Policy) -> Result<EnergyLedger> {
    policy.check_dims(config)?;
    let (m, k_periods) = (config.users, config.periods);
    let mut available = Matrix::zeros(m, k_periods);
    let mut cum_in = Matrix::zeros(m, k_periods);
    let mut cum_out = Matrix::zeros(m, k_periods);
    for i in 0..m {
        let mut inflow = config.eu_0[i];
        let mut sent = 0.0;
        let mut spent = 0.0;
        for k in 0..k_periods {
            inflow += config.arrivals[(i, k)] + config.eta * policy.received_raw(i, k);
            sent += policy.sent(i, k);
            // spent covers periods before k here
            available[(i, k)] = inflow - sent - spent;
            spent += policy.p_u[(i, k)] * config.slot;
            cum_in[(i, k)] = inflow;
            cum_out[(i, k)] = spent + sent;
        }
    }
    Ok(EnergyLedger {
        available,
        cumulative_in: cum_in,
        cumulative_out: cum_out,
    })
}

/// Transmission energy of users and relays plus transfer losses, J.
pub fn total_energy(config: &ScenarioConfig, policy: &Policy) -> Result<f64> {
    policy.check_dims(config)?;
    Ok(total_energy_unchecked(config, policy, 1.0))
}

/// `relay_slots` multiplies the relay term (one forwarding slot per period
/// under network coding).
pub(crate) fn total_energy_unchecked(
    config: &ScenarioConfig,
    policy: &Policy,
    relay_slots: f64,
) -> f64 {
    let t = config.slot;
    let mut total = 0.0;
    for k in 0..config.periods {
        let users: f64 = policy.p_u.column(k).iter().sum();
        let relays: f64 = policy.p_r.column(k).iter().sum();
        let transferred = policy.transfers[k].sum();
        total += users * t + (1.0 - config.eta) * transferred + relay_slots * relays * t;
    }
    total
}

/// Expected delivered bits over all periods, `Σ_k M α0 T (1 - Pr_out,k)`.
pub fn expected_bits(config: &ScenarioConfig, outage: &OutageReport) -> f64 {
    outage
        .pr_out
        .iter()
        .map(|p| config.bits_per_period() * (1.0 - p))
        .sum()
}

/// Energy efficiency in bits/J.
pub fn energy_efficiency(
    config: &ScenarioConfig,
    policy: &Policy,
    outage: &OutageReport,
) -> Result<f64> {
    if outage.pr_out.len() != config.periods {
        return Err(Error::dims(
            "outage report periods",
            config.periods,
            outage.pr_out.len(),
        ));
    }
    let e_tot = total_energy(config, policy)?;
    if e_tot <= 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(expected_bits(config, outage) / e_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OutageMode;

    fn toy(m: usize, n: usize, k: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::bundled();
        cfg.users = m;
        cfg.relays = n;
        cfg.periods = k;
        let take =
            |src: &Matrix, r: usize, c: usize| Matrix::from_fn(r, c, |a, b| src[(a % 2, b % 4)]);
        cfg.omega_h = take(&cfg.omega_h, m, n);
        cfg.d_h = take(&cfg.d_h, m, n);
        cfg.beta_h = take(&cfg.beta_h, m, n);
        cfg.n0_h = take(&cfg.n0_h, m, n);
        cfg.omega_g.truncate(n);
        cfg.d_g.truncate(n);
        cfg.beta_g.truncate(n);
        cfg.n0_g.truncate(n);
        cfg.arrivals = Matrix::zeros(m, k);
        cfg.eu_0 = vec![0.0; m];
        cfg.slot = 1.0;
        cfg.validate().unwrap();
        cfg
    }

    fn report(pr: Vec<f64>) -> OutageReport {
        OutageReport {
            pr_a: pr.clone(),
            pr_b: vec![0.0; pr.len()],
            pr_out: pr,
            mode: OutageMode::Exact,
        }
    }

    #[test]
    fn ledger_reduces_to_cumulative_arrivals() {
        let mut cfg = toy(2, 2, 3);
        cfg.arrivals = Matrix::from_rows(vec![vec![1.0, 2.0, 0.5], vec![0.0, 3.0, 1.0]]).unwrap();
        let ledger = energy_ledger(&cfg, &Policy::for_config(&cfg)).unwrap();
        assert_eq!(ledger.available.row(0), &[1.0, 3.0, 3.5]);
        assert_eq!(ledger.available.row(1), &[0.0, 3.0, 4.0]);
    }

    #[test]
    fn ledger_hand_example_with_transfer() {
        let mut cfg = toy(2, 2, 2);
        cfg.eta = 0.6;
        cfg.arrivals = Matrix::from_rows(vec![vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let mut policy = Policy::for_config(&cfg);
        policy.transfers[0][(1, 0)] = 1.0;
        let ledger = energy_ledger(&cfg, &policy).unwrap();
        assert!((ledger.available[(0, 0)] - 2.6).abs() < 1e-15);
        assert_eq!(ledger.available[(1, 0)], -1.0);
        assert!(ledger.slack()[(1, 0)] < 0.0);
    }

    #[test]
    fn initial_storage_carries_forward() {
        let mut cfg = toy(1, 1, 4);
        cfg.eu_0 = vec![5.0];
        let ledger = energy_ledger(&cfg, &Policy::for_config(&cfg)).unwrap();
        assert!(ledger.available.iter().all(|&v| v == 5.0));
    }

    #[test]
    fn ledger_rejects_dimension_mismatch() {
        let cfg = toy(2, 2, 2);
        let policy = Policy::zeros(2, 2, 3);
        assert!(matches!(
            energy_ledger(&cfg, &policy),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn total_energy_hand_example() {
        let mut cfg = toy(2, 4, 1);
        cfg.eta = 0.6;
        let mut policy = Policy::for_config(&cfg);
        policy.p_u[(0, 0)] = 2.0;
        policy.p_u[(1, 0)] = 3.0;
        for j in 0..4 {
            policy.p_r[(j, 0)] = 1.0;
        }
        policy.transfers[0][(0, 1)] = 1.0;
        let e = total_energy(&cfg, &policy).unwrap();
        assert!((e - 9.4).abs() < 1e-12, "{e}");
        cfg.eta = 1.0;
        assert_eq!(total_energy(&cfg, &policy).unwrap(), 9.0);
        assert_eq!(total_energy(&cfg, &Policy::for_config(&cfg)).unwrap(), 0.0);
    }

    #[test]
    fn efficiency_edge_cases() {
        let mut cfg = toy(2, 2, 1);
        cfg.alpha0 = 1e5;
        let mut policy = Policy::for_config(&cfg);
        assert!(matches!(
            energy_efficiency(&cfg, &policy, &report(vec![0.0])),
            Err(Error::UndefinedRatio)
        ));
        policy.p_u[(0, 0)] = 4.0;
        policy.p_u[(1, 0)] = 4.0;
        policy.p_r[(0, 0)] = 1.0;
        policy.p_r[(1, 0)] = 1.0;
        let ee = energy_efficiency(&cfg, &policy, &report(vec![0.0])).unwrap();
        assert!((ee - 2e4).abs() < 1e-9);
        assert_eq!(
            energy_efficiency(&cfg, &policy, &report(vec![1.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn efficiency_matches_independent_summation() {
        let mut cfg = toy(2, 2, 4);
        let mut policy = Policy::for_config(&cfg);
        cfg.eta = 0.7;
        for k in 0..4 {
            policy.p_u[(0, k)] = 0.3 + 0.1 * k as f64;
            policy.p_u[(1, k)] = 0.7;
            policy.p_r[(0, k)] = 0.2;
            policy.p_r[(1, k)] = 1.1 - 0.2 * k as f64;
        }
        policy.transfers[2][(1, 0)] = 0.4;
        let pr = vec![1e-3, 0.25, 3e-7, 0.9];
        let ee = energy_efficiency(&cfg, &policy, &report(pr.clone())).unwrap();
        let mut bits = 0.0;
        for p in &pr {
            bits += 2.0 * 1e5 * (1.0 - p);
        }
        let mut joules = 0.0;
        for k in 0..4 {
            joules +=
                policy.p_u[(0, k)] + policy.p_u[(1, k)] + policy.p_r[(0, k)] + policy.p_r[(1, k)];
        }
        joules += 0.3 * 0.4;
        let want = bits / joules;
        assert!(((ee - want) / want).abs() < 1e-12);
    }
}
