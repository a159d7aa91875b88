//! Fixtures shared by the benchmarks.

use ehnc_core::{Matrix, Policy, ScenarioConfig};

/// Bundled scenario at the given outage threshold.
pub fn bundled(pr_out_0: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::bundled();
    c.pr_out_0 = pr_out_0;
    c
}

/// Two users, two relays, two periods with unbalanced arrivals.
pub fn toy() -> ScenarioConfig {
    let mut c = ScenarioConfig::bundled()
        .restrict(&[0, 1], &[0, 2])
        .expect("valid sub-network")
        .with_arrivals(
            Matrix::from_rows(vec![vec![1.0, 6.0], vec![9.0, 3.0]]).expect("rectangular"),
        )
        .expect("valid arrivals");
    c.pr_out_0 = 1e-3;
    c.eta = 0.8;
    c
}

/// Two users and two relays over a single period.
pub fn single_period_toy() -> ScenarioConfig {
    let mut c = toy()
        .with_arrivals(Matrix::from_rows(vec![vec![1.0], vec![12.0]]).expect("rectangular"))
        .expect("valid arrivals");
    c.eta = 0.6;
    c
}

/// Fixed powers on the bundled network giving an outage near 2e-3 in
/// every period.
pub fn moderate_policy(config: &ScenarioConfig) -> Policy {
    let mut p = Policy::for_config(config);
    for k in 0..config.periods {
        for (i, v) in [0.05, 0.08].into_iter().enumerate() {
            p.p_u[(i, k)] = v;
        }
        for (j, v) in [0.02, 1.0, 0.02, 0.03].into_iter().enumerate() {
            p.p_r[(j, k)] = v;
        }
    }
    p
}
