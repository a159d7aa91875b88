//! Damped Newton centering and the log-barrier path.

use nalgebra::{DMatrix, DVector};

use crate::error::{ConstraintClass, Error, Result};

use super::problem::ConvexProblem;

const ARMIJO: f64 = 0.01;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierSettings {
    pub barrier_mu: f64,
    pub gap_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

/// Solves `H d = -g`, regularizing `H` when it is not numerically positive
/// definite.
fn newton_direction(grad: &DVector<f64>, hess: DMatrix<f64>) -> Result<DVector<f64>> {
    let n = grad.len();
    let max_diag = (0..n)
        .map(|i| hess[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..30 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        if let Some(chol) = h.cholesky() {
            let d = chol.solve(&(-grad));
            if d.iter().all(|v| v.is_finite()) {
                return Ok(d);
            }
        }
        ridge = if ridge == 0.0 {
            1e-14 * max_diag
        } else {
            ridge * 100.0
        };
    }
    Err(Error::Numerical(
        "Newton system could not be factorized".into(),
    ))
}

/// Minimizes the barrier function at fixed `t` from a strictly feasible
/// `z`. Returns the number of Newton steps. `stop` is checked after every
/// step and ends centering early when it returns true.
pub(crate) fn center(
    problem: &ConvexProblem,
    z: &mut Vec<f64>,
    t: f64,
    q: f64,
    phase1: bool,
    settings: &BarrierSettings,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<usize> {
    let mut stalled = 0;
    for iter in 0..settings.max_newton {
        let (phi, d) = problem
            .barrier(z, t, q, phase1, true)
            .ok_or_else(|| Error::Numerical("iterate left the barrier domain".into()))?;
        let d = d.expect("derivatives requested");
        let dir = newton_direction(&d.grad, d.hess)?;
        let slope = d.grad.dot(&dir);
        let decrement = -slope;
        if !(decrement > 0.0) || decrement / 2.0 <= settings.newton_tol {
            return Ok(iter);
        }
        let mut step = 1.0;
        let mut trial = z.clone();
        loop {
            for (k, v) in trial.iter_mut().enumerate() {
                *v = z[k] + step * dir[k];
            }
            if let Some((phi_new, _)) = problem.barrier(&trial, t, q, phase1, false) {
                if phi_new <= phi + ARMIJO * step * slope {
                    break;
                }
            }
            step *= BACKTRACK;
            if step < MIN_STEP {
                // no further progress at this precision
                return Ok(iter);
            }
        }
        let (phi_new, _) = problem
            .barrier(&trial, t, q, phase1, false)
            .expect("accepted step is feasible");
        stalled = if phi - phi_new <= 1e-15 * phi.abs().max(1.0) {
            stalled + 1
        } else {
            0
        };
        *z = trial;
        if stalled >= 3 {
            return Ok(iter + 1);
        }
        if stop(z) {
            return Ok(iter + 1);
        }
    }
    Err(Error::MaxIterations {
        stage: "newton centering".into(),
        iterations: settings.max_newton,
    })
}

/// Follows the central path of the main problem from a strictly feasible
/// point until the duality-gap bound `m / t` falls below `gap_tol`.
pub(crate) fn barrier_minimize(
    problem: &ConvexProblem,
    z: &mut Vec<f64>,
    q: f64,
    settings: &BarrierSettings,
) -> Result<usize> {
    let m = problem.constraints.len().max(1) as f64;
    let mut t = m;
    let mut total = 0;
    loop {
        total += center(problem, z, t, q, false, settings, &|_| false)?;
        if m / t <= settings.gap_tol {
            return Ok(total);
        }
        t *= settings.barrier_mu;
    }
}

/// Worst normalized constraint value per class at `z`.
pub(crate) fn violations_by_class(
    problem: &ConvexProblem,
    z: &[f64],
) -> Option<Vec<(ConstraintClass, f64)>> {
    let point = problem.point(z)?;
    let mut out: Vec<(ConstraintClass, f64)> = Vec::new();
    for (i, c) in problem.constraints.iter().enumerate() {
        let v = problem.constraint_value(i, z, &point) / c.scale;
        if c.hard {
            if !(v < 0.0) {
                return None;
            }
            continue;
        }
        match out.iter_mut().find(|(cls, _)| *cls == c.class) {
            Some(entry) => entry.1 = entry.1.max(v),
            None => out.push((c.class, v)),
        }
    }
    Some(out)
}

/// Finds a strictly feasible point by minimizing the largest normalized
/// constraint value `s`. `margin` is the target `s <= -margin` at which the
/// search stops early. An infeasible verdict names the first constraint
/// class (outage, causality, power bounds) whose removal makes the rest
/// feasible.
pub(crate) fn phase1(
    problem: &ConvexProblem,
    start: &[f64],
    margin: f64,
    settings: &BarrierSettings,
) -> Result<(Vec<f64>, usize)> {
    if let (Some(z), iters) = phase1_search(problem, start, margin, settings)? {
        return Ok((z, iters));
    }
    let priority = [
        ConstraintClass::Outage,
        ConstraintClass::Causality,
        ConstraintClass::PowerBounds,
    ];
    let mut class = ConstraintClass::TransferSign;
    for candidate in priority {
        let mut relaxed = problem.clone();
        relaxed.constraints.retain(|c| c.class != candidate);
        if relaxed.constraints.len() == problem.constraints.len() {
            continue;
        }
        if phase1_search(&relaxed, start, margin, settings)?
            .0
            .is_some()
        {
            class = candidate;
            break;
        }
    }
    Err(Error::Infeasible {
        class,
        detail: format!("no policy satisfies all {class} constraints together with the others"),
    })
}

fn phase1_search(
    problem: &ConvexProblem,
    start: &[f64],
    margin: f64,
    settings: &BarrierSettings,
) -> Result<(Option<Vec<f64>>, usize)> {
    let Some(by_class) = violations_by_class(problem, start) else {
        return Ok((None, 0));
    };
    let worst = by_class
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = start.to_vec();
    if worst < -margin {
        return Ok((Some(z), 0));
    }
    z.push(worst.max(0.0) + 1.0);
    let n = problem.n_vars;
    let m = problem.constraints.len().max(1) as f64;
    let mut t = 1.0;
    let mut total = 0;
    let done = move |z: &[f64]| z[n] < -margin;
    loop {
        total += center(problem, &mut z, t, 0.0, true, settings, &done)?;
        // s(t) - m/t bounds the optimal slack from below
        if done(&z) || z[n] - m / t > 0.0 || m / t <= 1e-12 {
            break;
        }
        t *= settings.barrier_mu;
    }
    let s = z.pop().expect("slack present");
    Ok((if s < 0.0 { Some(z) } else { None }, total))
}
