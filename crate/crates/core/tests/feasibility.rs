use ehnc_core::{validate_policy, ConstraintClass, Matrix, OutageMode, Policy, ScenarioConfig};

fn one_period() -> ScenarioConfig {
    ScenarioConfig::bundled()
        .with_arrivals(Matrix::from_rows(vec![vec![5.0], vec![5.0]]).unwrap())
        .unwrap()
}

fn strong_policy(c: &ScenarioConfig) -> Policy {
    let mut p = Policy::for_config(c);
    p.p_u = Matrix::filled(c.users, c.periods, 4.0);
    p.p_r = Matrix::filled(c.relays, c.periods, 4.0);
    p
}

#[test]
fn comfortable_policy_is_feasible() {
    let mut c = one_period();
    c.pr_out_0 = 1e-3;
    let report = validate_policy(&c, &strong_policy(&c), OutageMode::Exact).unwrap();
    assert!(report.feasible, "{report:?}");
    assert!(report.violated_classes().is_empty());
    assert!(report.outage_checked);
}

#[test]
fn overspending_is_a_causality_violation() {
    let mut c = one_period();
    c.pr_out_0 = 1e-3;
    let mut p = strong_policy(&c);
    p.p_u[(1, 0)] = 6.0;
    let report = validate_policy(&c, &p, OutageMode::Exact).unwrap();
    assert!(!report.feasible);
    let v = report.class(ConstraintClass::Causality).unwrap();
    assert_eq!(v.offenders.len(), 1);
    assert_eq!(v.offenders[0].index, vec![1, 0]);
    assert!((v.worst - 1.0).abs() < 1e-12);
}

#[test]
fn transfers_fund_the_receiver_at_efficiency_eta() {
    let mut c = one_period();
    c.pr_out_0 = 1e-3;
    c.eta = 0.5;
    let mut p = strong_policy(&c);
    p.p_u[(0, 0)] = 1.0;
    p.p_u[(1, 0)] = 7.0;
    // 4 J sent arrive as 2 J, exactly the receiver's deficit
    p.transfers[0][(0, 1)] = 4.0;
    assert!(validate_policy(&c, &p, OutageMode::Exact).unwrap().feasible);
    p.transfers[0][(0, 1)] = 3.9;
    let report = validate_policy(&c, &p, OutageMode::Exact).unwrap();
    assert_eq!(report.violated_classes(), vec![ConstraintClass::Causality]);
}

#[test]
fn power_bounds_are_checked() {
    let mut c = one_period();
    c.pr_out_0 = 1e-3;
    c.arrivals = Matrix::filled(2, 1, 100.0);
    let mut p = strong_policy(&c);
    p.p_r[(2, 0)] = c.p_max * 1.5;
    p.p_u[(0, 0)] = 0.0;
    let report = validate_policy(&c, &p, OutageMode::Exact).unwrap();
    let v = report.class(ConstraintClass::PowerBounds).unwrap();
    let what: Vec<&str> = v.offenders.iter().map(|o| o.what.as_str()).collect();
    assert!(
        what.contains(&"relay_power_max") && what.contains(&"user_power_min"),
        "{what:?}"
    );
}

#[test]
fn negative_and_self_transfers_are_flagged() {
    let mut c = one_period();
    c.pr_out_0 = 1e-3;
    let mut p = strong_policy(&c);
    p.transfers[0][(0, 0)] = 0.5;
    p.transfers[0][(1, 0)] = -0.5;
    let report = validate_policy(&c, &p, OutageMode::Exact).unwrap();
    let v = report.class(ConstraintClass::TransferSign).unwrap();
    assert_eq!(v.offenders.len(), 2);
}

#[test]
fn weak_powers_break_the_outage_threshold() {
    let mut c = one_period();
    c.pr_out_0 = 1e-6;
    let mut p = strong_policy(&c);
    p.p_u = Matrix::filled(2, 1, 0.01);
    let report = validate_policy(&c, &p, OutageMode::Exact).unwrap();
    assert_eq!(report.violated_classes(), vec![ConstraintClass::Outage]);
    assert!(report.pr_out[0] > 1e-6);
    // the approximate audit sees the same violation
    let approx = validate_policy(&c, &p, OutageMode::Approximate).unwrap();
    assert_eq!(approx.outage_mode, OutageMode::Approximate);
    assert!(!approx.feasible);
}

#[test]
fn mismatched_dimensions_are_errors() {
    let c = one_period();
    let p = Policy::zeros(2, 3, 1);
    assert!(validate_policy(&c, &p, OutageMode::Exact).is_err());
}
