//! Dinkelbach fractional programming over the convex (log-power) form of
//! the scheduling problem.
//!
//! Each outer iteration fixes a ratio `q` and minimizes
//! `V'(q) = Σ weight · outage_approx + q · E_tot`, which is convex in log
//! powers and transfers; the ratio is then updated to the achieved
//! delivered-bits-per-joule. The final policy is audited with the exact
//! outage expressions.

mod barrier;
mod formulation;
mod problem;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{
    audit_policy, compute_link_coefficients, energy_ledger, total_energy_unchecked,
    FeasibilityReport, OutageItem, OutageMode, OutageReport, Policy, ScenarioConfig, P_MIN,
};
use crate::outage::{self, LinkOutages, SubsetTables};

use barrier::BarrierSettings;
pub use formulation::{EeProblem, NetworkKind, ProblemVariant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Dinkelbach stopping tolerance on `|V(q)|`, relative to `M K α0 T`.
    pub q_tol: f64,
    pub max_outer: usize,
    /// Duality-gap target of the inner barrier method on the normalized
    /// objective.
    pub kkt_tol: f64,
    pub barrier_mu: f64,
    /// Newton decrement threshold `λ²/2` for centering.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub p_min: f64,
    /// Re-solves with a 10% tighter threshold when the exact-outage audit
    /// fails, at most this many times.
    pub max_audit_retries: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            q_tol: 1e-6,
            max_outer: 50,
            kkt_tol: 1e-6,
            barrier_mu: 10.0,
            newton_tol: 1e-10,
            max_newton: 200,
            p_min: P_MIN,
            max_audit_retries: 3,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("q_tol", self.q_tol),
            ("kkt_tol", self.kkt_tol),
            ("newton_tol", self.newton_tol),
            ("p_min", self.p_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.barrier_mu > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "barrier_mu must exceed 1, got {}",
                self.barrier_mu
            )));
        }
        if self.max_outer == 0 || self.max_newton == 0 {
            return Err(Error::InvalidArgument(
                "iteration limits must be positive".into(),
            ));
        }
        if self.p_min != P_MIN {
            return Err(Error::InvalidArgument(format!(
                "p_min is fixed at {P_MIN} W"
            )));
        }
        Ok(())
    }

    fn barrier(&self) -> BarrierSettings {
        BarrierSettings {
            barrier_mu: self.barrier_mu,
            gap_tol: self.kkt_tol.min(0.1 * self.q_tol),
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub q: f64,
    /// `max_x E[L](x) - q E_tot(x)` as achieved by the inner solve, bits.
    pub v: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub policy: Policy,
    /// Converged ratio under the approximate outage, bits/J.
    pub q_star: f64,
    /// Energy efficiency of `policy` with exact outage, bits/J.
    pub ee_exact: f64,
    pub total_energy: f64,
    pub outage: OutageReport,
    pub trace: Vec<TraceEntry>,
    pub feasibility: FeasibilityReport,
    pub status: SolveStatus,
    pub network: NetworkKind,
    /// Threshold actually imposed on the approximate outage.
    pub pr_out_0_used: f64,
    /// Largest `min(incoming, outgoing)` transfer of any user and period, J.
    pub max_simultaneous_transfer: f64,
}

/// Policy with powers replaced by their natural logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedPolicy {
    pub x_u: Matrix,
    pub x_r: Matrix,
    pub transfers: Vec<Matrix>,
}

pub fn transform_policy(policy: &Policy) -> Result<TransformedPolicy> {
    let log = |m: &Matrix, what: &str| -> Result<Matrix> {
        if let Some(p) = m.iter().find(|p| !(**p >= P_MIN)) {
            return Err(Error::InvalidArgument(format!(
                "{what} power {p} below the floor {P_MIN}"
            )));
        }
        Ok(m.map(f64::ln))
    };
    Ok(TransformedPolicy {
        x_u: log(&policy.p_u, "user")?,
        x_r: log(&policy.p_r, "relay")?,
        transfers: policy.transfers.clone(),
    })
}

pub fn inverse_transform(x: &TransformedPolicy) -> Policy {
    Policy {
        p_u: x.x_u.map(f64::exp),
        p_r: x.x_r.map(f64::exp),
        transfers: x.transfers.clone(),
    }
}

/// `V'(q)` at `z` with gradient and Hessian, unnormalized (bits).
pub fn evaluate_v_prime(
    problem: &EeProblem,
    q: f64,
    z: &[f64],
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    if !(q >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "q must be nonnegative, got {q}"
        )));
    }
    problem
        .v_prime(q, z)
        .ok_or_else(|| Error::InvalidArgument("point outside the power domain".into()))
}

/// A strictly feasible point of `problem`, or the infeasibility verdict
/// with the binding constraint class.
pub fn find_feasible_point(problem: &EeProblem, options: &SolverOptions) -> Result<Vec<f64>> {
    let start = problem.initial_point();
    Ok(barrier::phase1(&problem.cp, &start, 1e-3, &options.barrier())?.0)
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub z: Vec<f64>,
    /// `V'(q)` at `z`, bits.
    pub v_prime: f64,
    pub newton_iterations: usize,
}

/// Minimizes `V'(q)` over the feasible set. A strictly feasible
/// `warm_start` skips phase 1.
pub fn inner_solve(
    problem: &EeProblem,
    q: f64,
    warm_start: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<InnerSolution> {
    let settings = options.barrier();
    let (mut z, mut iterations) = match warm_start {
        Some(w) if problem.max_violation(w).is_some_and(|v| v < 0.0) => (w.to_vec(), 0),
        _ => {
            let start = problem.initial_point();
            barrier::phase1(&problem.cp, &start, 1e-3, &settings)?
        }
    };
    iterations += barrier::barrier_minimize(&problem.cp, &mut z, q, &settings)?;
    let (v, _, _) = evaluate_v_prime(problem, q, &z)?;
    Ok(InnerSolution {
        z,
        v_prime: v,
        newton_iterations: iterations,
    })
}

struct Outer {
    z: Vec<f64>,
    q: f64,
    trace: Vec<TraceEntry>,
    converged: bool,
}

fn dinkelbach(problem: &EeProblem, options: &SolverOptions) -> Result<Outer> {
    let tol = options.q_tol * problem.total_bits();
    let mut z = find_feasible_point(problem, options)?;
    let ratio = |z: &[f64]| -> Result<(f64, f64)> {
        let n = problem
            .numerator(z)
            .ok_or_else(|| Error::Numerical("iterate outside domain".into()))?;
        let d = problem
            .denominator(z)
            .ok_or_else(|| Error::Numerical("iterate outside domain".into()))?;
        if !(d > 0.0) {
            return Err(Error::UndefinedRatio);
        }
        Ok((n, d))
    };
    let (n0, d0) = ratio(&z)?;
    let mut q = (n0 / d0).max(0.0);
    let mut trace = Vec::new();
    for _ in 0..options.max_outer {
        let inner = inner_solve(problem, q, Some(&z), options)?;
        let (n, d) = ratio(&inner.z)?;
        let v = n - q * d;
        trace.push(TraceEntry {
            q,
            v,
            inner_iterations: inner.newton_iterations,
        });
        z = inner.z;
        if v.abs() <= tol {
            return Ok(Outer {
                z,
                q,
                trace,
                converged: true,
            });
        }
        let next = n / d;
        if next <= q {
            // inexact inner solves cannot raise the ratio any further
            return Ok(Outer {
                z,
                q,
                trace,
                converged: v.abs() <= 10.0 * tol,
            });
        }
        q = next;
    }
    Ok(Outer {
        z,
        q,
        trace,
        converged: false,
    })
}

/// Exact per-constraint outages of a policy for the given network model,
/// the report used for energy efficiency, and the audit item list.
pub(crate) fn exact_outages(
    config: &ScenarioConfig,
    network: NetworkKind,
    policy: &Policy,
) -> Result<(OutageReport, Vec<OutageItem>)> {
    let coeffs = compute_link_coefficients(config);
    match network {
        NetworkKind::NetworkCoded => {
            let tables = SubsetTables::new(config.users, config.relays)?;
            let report = outage::outage_report_with(&coeffs, &tables, policy, OutageMode::Exact)?;
            let items = report
                .pr_out
                .iter()
                .enumerate()
                .map(|(k, &p)| (vec![k], p))
                .collect();
            Ok((report, items))
        }
        NetworkKind::PerUserDf => {
            let mut report = OutageReport {
                pr_out: vec![],
                pr_a: vec![],
                pr_b: vec![],
                mode: OutageMode::Exact,
            };
            let mut items = Vec::new();
            for k in 0..config.periods {
                let links =
                    LinkOutages::new(&coeffs, &policy.user_powers(k), &policy.relay_powers(k));
                let (mut a, mut b) = (0.0, 0.0);
                for i in 0..config.users {
                    let per_user = crate::baselines::df_user_outage(&links, i);
                    items.push((vec![i, k], per_user.pr_out));
                    a += per_user.pr_a;
                    b += per_user.pr_b;
                }
                let mu = config.users as f64;
                report.pr_a.push(a / mu);
                report.pr_b.push(b / mu);
                report.pr_out.push((a + b) / mu);
            }
            Ok((report, items))
        }
    }
}

/// Assembles a result from a final policy: exact outage, audit, energy and
/// efficiency.
pub(crate) fn finish(
    config: &ScenarioConfig,
    network: NetworkKind,
    policy: Policy,
    q_star: f64,
    trace: Vec<TraceEntry>,
    status: SolveStatus,
    pr_out_0_used: f64,
    check_outage: bool,
) -> Result<SolveResult> {
    let (report, items) = exact_outages(config, network, &policy)?;
    let feasibility = audit_policy(
        config,
        &policy,
        check_outage.then_some(&items[..]),
        OutageMode::Exact,
    )?;
    let relay_slots = match network {
        NetworkKind::NetworkCoded => 1.0,
        NetworkKind::PerUserDf => config.users as f64,
    };
    let energy = total_energy_unchecked(config, &policy, relay_slots);
    let bits: f64 = report
        .pr_out
        .iter()
        .map(|p| config.bits_per_period() * (1.0 - p))
        .sum();
    let ee_exact = if energy > 0.0 { bits / energy } else { 0.0 };
    let max_simultaneous_transfer = max_simultaneous_transfer(&policy);
    Ok(SolveResult {
        policy,
        q_star,
        ee_exact,
        total_energy: energy,
        outage: report,
        trace,
        feasibility,
        status,
        network,
        pr_out_0_used,
        max_simultaneous_transfer,
    })
}

fn max_simultaneous_transfer(policy: &Policy) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..policy.periods() {
        for i in 0..policy.users() {
            worst = worst.max(policy.sent(i, k).min(policy.received_raw(i, k)));
        }
    }
    worst
}

/// Optimizes one problem variant; shared by the proposed scheme and the
/// optimized baselines.
pub fn solve_variant(
    config: &ScenarioConfig,
    variant: ProblemVariant,
    options: &SolverOptions,
) -> Result<SolveResult> {
    options.validate()?;
    config.validate()?;
    let mut threshold = config.pr_out_0;
    let mut attempt = 0;
    loop {
        let problem = EeProblem::new(config, variant, threshold)?;
        let outer = dinkelbach(&problem, options)?;
        let mut policy = problem
            .policy(&outer.z)
            .expect("solver iterate inside domain");
        if config.eta == 1.0 {
            policy.net_opposing_transfers();
        }
        let status = if outer.converged {
            SolveStatus::Converged
        } else {
            SolveStatus::MaxIter
        };
        let mut result = finish(
            config,
            variant.network,
            policy,
            outer.q,
            outer.trace,
            status,
            threshold,
            true,
        )?;
        if result.feasibility.feasible {
            snap_idle_relays(config, variant.network, &mut result)?;
            trim_transfers(config, variant.network, &mut result)?;
            return Ok(result);
        }
        if attempt == options.max_audit_retries {
            result.status = SolveStatus::Infeasible;
            return Ok(result);
        }
        attempt += 1;
        threshold *= 0.9;
    }
}

/// Relays left at the power floor are switched off when the exact audit
/// still passes without them.
fn snap_idle_relays(
    config: &ScenarioConfig,
    network: NetworkKind,
    result: &mut SolveResult,
) -> Result<()> {
    let mut policy = result.policy.clone();
    let mut changed = false;
    for p in policy.p_r.iter_mut() {
        if *p < 10.0 * P_MIN {
            *p = 0.0;
            changed = true;
        }
    }
    if !changed {
        return Ok(());
    }
    let candidate = finish(
        config,
        network,
        policy,
        result.q_star,
        result.trace.clone(),
        result.status,
        result.pr_out_0_used,
        true,
    )?;
    if candidate.feasibility.feasible {
        *result = candidate;
    }
    Ok(())
}

/// Scales all transfers down to the smallest common fraction that keeps
/// every causality constraint satisfied. The slack is affine in the scale,
/// so the fraction is found in closed form. Removes interior residue the
/// barrier leaves on transfers that buy nothing, which matters most at
/// lossless efficiency where such flows cost nothing and are not unique.
fn trim_transfers(
    config: &ScenarioConfig,
    network: NetworkKind,
    result: &mut SolveResult,
) -> Result<()> {
    if result.policy.total_transferred() == 0.0 {
        return Ok(());
    }
    let full = energy_ledger(config, &result.policy)?.slack();
    let mut bare = result.policy.clone();
    for t in bare.transfers.iter_mut() {
        *t = t.map(|_| 0.0);
    }
    let none = energy_ledger(config, &bare)?.slack();
    let mut scale: f64 = 0.0;
    for (a, b) in none.iter().zip(full.iter()) {
        if *a < -1e-12 {
            if *b <= *a {
                return Ok(());
            }
            scale = scale.max(a / (a - b));
        }
    }
    let scale = if scale > 0.0 {
        (scale * (1.0 + 1e-9)).min(1.0)
    } else {
        0.0
    };
    if scale > 1.0 - 1e-6 {
        return Ok(());
    }
    let mut policy = result.policy.clone();
    for t in policy.transfers.iter_mut() {
        *t = t.map(|v| v * scale);
    }
    let candidate = finish(
        config,
        network,
        policy,
        result.q_star,
        result.trace.clone(),
        result.status,
        result.pr_out_0_used,
        true,
    )?;
    if candidate.feasibility.feasible && candidate.ee_exact >= result.ee_exact * (1.0 - 1e-9) {
        *result = candidate;
    }
    Ok(())
}

/// Maximizes energy efficiency of the network-coded scheme with energy
/// transfers allowed.
pub fn dinkelbach_optimize(
    config: &ScenarioConfig,
    options: &SolverOptions,
) -> Result<SolveResult> {
    solve_variant(config, ProblemVariant::default(), options)
}
