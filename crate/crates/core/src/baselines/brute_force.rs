//! Exhaustive grid search used as ground truth for the optimizer on toy
//! instances.
//!
//! Outage in a period depends only on that period's powers, so for every
//! grid point of user powers the relay grid is reduced once to its Pareto
//! frontier of (relay energy, outage). The joint search then runs over user
//! power grids of all periods, with the cheapest causal transfer schedule
//! computed in closed form, and maximizes the ratio by discrete Dinkelbach
//! iterations. The best point is refined on successively finer grids
//! centred on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConstraintClass, Error, Result};
use crate::matrix::Matrix;
use crate::model::{compute_link_coefficients, LinkCoefficients, Policy, ScenarioConfig, P_MIN};
use crate::solver::{finish, NetworkKind, SolveResult, SolveStatus, TraceEntry};
use crate::special::{regularized_lower_gamma, regularized_upper_gamma};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Log-spaced points per power axis.
    pub points: usize,
    /// Refinement rounds after the coarse search.
    pub zoom_rounds: usize,
    /// Half-width of each refined axis, in steps of the previous axis.
    pub zoom_span: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 64,
            zoom_rounds: 3,
            zoom_span: 2.0,
        }
    }
}

/// Largest number of power axes searched jointly: the user and relay axes
/// of one period, or the user axes of all periods.
pub const MAX_JOINT_AXES: usize = 4;

#[derive(Debug, Clone)]
struct Axis {
    values: Vec<f64>,
    /// Ratio between neighbouring positive values.
    step: f64,
}

fn log_axis(lo: f64, hi: f64, points: usize, include: &[f64]) -> Axis {
    let step = if points > 1 && hi > lo {
        (hi / lo).powf(1.0 / (points - 1) as f64)
    } else {
        1.0
    };
    let mut values: Vec<f64> = (0..points).map(|n| lo * step.powi(n as i32)).collect();
    if let Some(last) = values.last_mut() {
        *last = hi;
    }
    values.extend_from_slice(include);
    values.sort_by(f64::total_cmp);
    values.dedup();
    Axis { values, step }
}

fn zoom(axis: &Axis, centre: f64, spec: &GridSpec, p_max: f64, relay: bool) -> Axis {
    let width = axis.step.powf(spec.zoom_span);
    let base = if centre > 0.0 { centre } else { P_MIN };
    let lo = (base / width).max(P_MIN);
    let hi = (base * width).min(p_max);
    let mut include = vec![];
    if centre > 0.0 {
        include.push(centre);
    }
    if relay {
        include.push(0.0);
    }
    log_axis(lo, hi, spec.points + 1, &include)
}

fn product(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn link(m: f64, scale: f64, p: f64) -> (f64, f64) {
    if p > 0.0 {
        (
            regularized_lower_gamma(m, scale / p),
            regularized_upper_gamma(m, scale / p),
        )
    } else {
        (1.0, 0.0)
    }
}

/// Probability of every decoded-relay set for the given user powers.
fn decoded_set_probs(coeffs: &LinkCoefficients, p_u: &[f64]) -> Vec<f64> {
    let n = coeffs.relays();
    let (rho, not_rho): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|j| {
            let ln_rho: f64 = p_u
                .iter()
                .enumerate()
                .map(|(i, &p)| link(coeffs.m, coeffs.scale_u[(i, j)], p).1.ln())
                .sum();
            if ln_rho == f64::NEG_INFINITY {
                (0.0, 1.0)
            } else {
                (ln_rho.exp(), -ln_rho.exp_m1())
            }
        })
        .unzip();
    (0..1usize << n)
        .map(|mask| {
            (0..n)
                .map(|j| {
                    if mask >> j & 1 == 1 {
                        rho[j]
                    } else {
                        not_rho[j]
                    }
                })
                .product()
        })
        .collect()
}

/// For every decoded-relay set, the probability that fewer than `users`
/// of its relays get through to the destination.
fn forward_failure_probs(coeffs: &LinkCoefficients, p_r: &[f64]) -> Vec<f64> {
    let n = coeffs.relays();
    let links: Vec<(f64, f64)> = (0..n)
        .map(|j| link(coeffs.m, coeffs.scale_r[j], p_r[j]))
        .collect();
    (0..1usize << n)
        .map(|mask| {
            let mut total = 0.0;
            let mut sub = mask;
            loop {
                if (sub.count_ones() as usize) < coeffs.users() {
                    total += (0..n)
                        .filter(|j| mask >> j & 1 == 1)
                        .map(|j| {
                            if sub >> j & 1 == 1 {
                                links[j].1
                            } else {
                                links[j].0
                            }
                        })
                        .product::<f64>();
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
            total
        })
        .collect()
}

/// Non-dominated relay choices for one user point, by increasing relay
/// power sum and strictly decreasing outage.
#[derive(Clone)]
struct Frontier {
    entries: Vec<(f64, f64, usize)>,
}

#[derive(Clone)]
struct PeriodGrid {
    users: Vec<Vec<f64>>,
    relays: Vec<Vec<f64>>,
    frontiers: Vec<Frontier>,
}

impl PeriodGrid {
    fn new(coeffs: &LinkCoefficients, user_axes: &[Axis], relay_axes: &[Axis]) -> Self {
        let users = product(user_axes);
        let mut relays = product(relay_axes);
        relays.sort_by(|a, b| a.iter().sum::<f64>().total_cmp(&b.iter().sum::<f64>()));
        let failures: Vec<Vec<f64>> = relays
            .iter()
            .map(|r| forward_failure_probs(coeffs, r))
            .collect();
        let sums: Vec<f64> = relays.iter().map(|r| r.iter().sum()).collect();
        let frontiers = users
            .par_iter()
            .map(|u| {
                let probs = decoded_set_probs(coeffs, u);
                let mut entries = Vec::new();
                let mut best = f64::INFINITY;
                for (idx, fail) in failures.iter().enumerate() {
                    let outage: f64 = probs.iter().zip(fail).map(|(a, b)| a * b).sum();
                    if outage < best {
                        best = outage;
                        entries.push((sums[idx], outage, idx));
                    }
                }
                Frontier { entries }
            })
            .collect();
        PeriodGrid {
            users,
            relays,
            frontiers,
        }
    }

    /// Best relay choice per user point for ratio `q`: value of
    /// `bits (1 - outage) - q T (user + relay power)` and the relay index.
    fn best(&self, q: f64, bits: f64, slot: f64, threshold: f64) -> Vec<Option<(f64, usize)>> {
        self.users
            .par_iter()
            .zip(&self.frontiers)
            .map(|(u, f)| {
                let user: f64 = u.iter().sum();
                f.entries
                    .iter()
                    .filter(|e| e.1 <= threshold)
                    .map(|&(relay, outage, idx)| {
                        (bits * (1.0 - outage) - q * slot * (user + relay), idx)
                    })
                    .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
            })
            .collect()
    }
}

/// Periods a joint search can span.
const MAX_PERIODS: usize = MAX_JOINT_AXES;

/// Cumulative amounts sent from user 0 to user 1 (`s`) and back (`r`).
struct Schedule {
    s: [f64; MAX_PERIODS],
    r: [f64; MAX_PERIODS],
    periods: usize,
}

impl Schedule {
    fn total(&self) -> f64 {
        match self.periods {
            0 => 0.0,
            k => self.s[k - 1] + self.r[k - 1],
        }
    }

    fn matrices(&self, users: usize) -> Vec<Matrix> {
        let mut mats = vec![Matrix::zeros(users, users); self.periods];
        if users == 2 {
            for k in 0..self.periods {
                let (ps, pr) = if k > 0 {
                    (self.s[k - 1], self.r[k - 1])
                } else {
                    (0.0, 0.0)
                };
                mats[k][(0, 1)] = self.s[k] - ps;
                mats[k][(1, 0)] = self.r[k] - pr;
            }
        }
        mats
    }
}

/// Cheapest transfers making per-period user powers `powers[k][i]` causal,
/// for at most two users, or `None` when no transfers can help.
fn cheapest_schedule(config: &ScenarioConfig, powers: &[&[f64]]) -> Option<Schedule> {
    let (m, k_periods, eta) = (config.users, powers.len(), config.eta);
    debug_assert!(m <= 2 && k_periods <= MAX_PERIODS);
    let mut headroom = [[0.0f64; MAX_PERIODS]; 2];
    for (i, row) in headroom.iter_mut().enumerate().take(m) {
        let mut acc = config.eu_0[i];
        for (k, h) in row.iter_mut().enumerate().take(k_periods) {
            acc += config.arrivals[(i, k)] - powers[k][i] * config.slot;
            *h = acc;
        }
    }
    let mut out = Schedule {
        s: [0.0; MAX_PERIODS],
        r: [0.0; MAX_PERIODS],
        periods: k_periods,
    };
    let tol = crate::model::TOL_FEAS;
    if m == 1 {
        return headroom[0][..k_periods]
            .iter()
            .all(|h| *h >= -tol)
            .then_some(out);
    }
    // the least solution of these monotone lower bounds is the cheapest
    // schedule; without one the bounds grow without limit
    let bound = (config.arrivals.sum() + config.eu_0.iter().sum::<f64>()) / eta + 1.0;
    let (s, r) = (&mut out.s, &mut out.r);
    for _ in 0..(8 * k_periods + 64) {
        let mut changed = false;
        for k in 0..k_periods {
            let (prev_s, prev_r) = if k > 0 {
                (s[k - 1], r[k - 1])
            } else {
                (0.0, 0.0)
            };
            let new_r = r[k].max(prev_r).max((s[k] - headroom[0][k]) / eta);
            let new_s = s[k].max(prev_s).max((new_r - headroom[1][k]) / eta);
            changed |= new_r > r[k] || new_s > s[k];
            r[k] = new_r;
            s[k] = new_s;
        }
        if r.iter().chain(s.iter()).any(|v| *v > bound) {
            return None;
        }
        if !changed {
            return Some(out);
        }
    }
    None
}

struct Best {
    value: f64,
    combo: Vec<usize>,
    relays: Vec<usize>,
    transfers: Vec<Matrix>,
}

/// One discrete Dinkelbach step: the combination maximizing
/// `bits - q energy` over the joint grid.
fn maximize(config: &ScenarioConfig, grids: &[PeriodGrid], q: f64) -> Option<Best> {
    let bits = config.bits_per_period();
    let best: Vec<Vec<Option<(f64, usize)>>> = grids
        .iter()
        .map(|g| g.best(q, bits, config.slot, config.pr_out_0))
        .collect();
    let sizes: Vec<usize> = grids.iter().map(|g| g.users.len()).collect();
    let total: usize = sizes.iter().product();
    let loss = 1.0 - config.eta;
    let decode = |mut idx: usize| -> Vec<usize> {
        sizes
            .iter()
            .map(|&n| {
                let d = idx % n;
                idx /= n;
                d
            })
            .collect()
    };
    let winner = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let mut rest = idx;
            let mut value = 0.0;
            let mut powers: [&[f64]; MAX_PERIODS] = [&[]; MAX_PERIODS];
            for (k, &n) in sizes.iter().enumerate() {
                let u = rest % n;
                rest /= n;
                value += best[k][u]?.0;
                powers[k] = &grids[k].users[u];
            }
            let sent = cheapest_schedule(config, &powers[..sizes.len()])?.total();
            Some((value - q * loss * sent, idx))
        })
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))?;
    let combo = decode(winner.1);
    let powers: Vec<&[f64]> = combo
        .iter()
        .enumerate()
        .map(|(k, &u)| &grids[k].users[u][..])
        .collect();
    let transfers = cheapest_schedule(config, &powers)?.matrices(config.users);
    let relays = combo
        .iter()
        .enumerate()
        .map(|(k, &u)| best[k][u].unwrap().1)
        .collect();
    Some(Best {
        value: winner.0,
        combo,
        relays,
        transfers,
    })
}

fn assemble(config: &ScenarioConfig, grids: &[PeriodGrid], best: &Best) -> Policy {
    let mut policy = Policy::for_config(config);
    for k in 0..config.periods {
        let u = &grids[k].users[best.combo[k]];
        let r = &grids[k].relays[best.relays[k]];
        for i in 0..config.users {
            policy.p_u[(i, k)] = u[i];
        }
        for j in 0..config.relays {
            policy.p_r[(j, k)] = r[j];
        }
    }
    policy.transfers = best.transfers.clone();
    policy
}

/// Ratio terms of a policy: expected bits and energy, both exact.
fn ratio_terms(config: &ScenarioConfig, policy: &Policy) -> Result<(f64, f64)> {
    let report = crate::outage::outage_report(config, policy, crate::model::OutageMode::Exact)?;
    let bits = crate::model::expected_bits(config, &report);
    Ok((bits, crate::model::total_energy(config, policy)?))
}

/// Maximizes energy efficiency by exhaustive search with exact outage.
/// Supports at most two users and [`MAX_JOINT_AXES`] jointly searched axes.
pub fn brute_force_optimize(config: &ScenarioConfig, grid: &GridSpec) -> Result<SolveResult> {
    config.validate()?;
    if grid.points < 2 || !(grid.zoom_span > 0.0) {
        return Err(Error::InvalidArgument(
            "grid needs at least two points and a positive zoom span".into(),
        ));
    }
    if config.users > 2 {
        return Err(Error::InvalidArgument(
            "brute force supports at most two users".into(),
        ));
    }
    let (m, n, k_periods) = (config.users, config.relays, config.periods);
    let dims = (m + n).max(m * k_periods);
    if dims > MAX_JOINT_AXES {
        return Err(Error::GridTooLarge {
            dims,
            limit: MAX_JOINT_AXES,
        });
    }
    let coeffs = compute_link_coefficients(config);
    let coarse = log_axis(P_MIN, config.p_max, grid.points, &[]);
    let coarse_relay = log_axis(P_MIN, config.p_max, grid.points, &[0.0]);
    let mut user_axes: Vec<Vec<Axis>> = vec![vec![coarse.clone(); m]; k_periods];
    let mut relay_axes: Vec<Vec<Axis>> = vec![vec![coarse_relay.clone(); n]; k_periods];

    let mut q = 0.0;
    let mut trace = Vec::new();
    let mut policy = None;
    for round in 0..=grid.zoom_rounds {
        let grids: Vec<PeriodGrid> = if round == 0 {
            // periods share channels, so the coarse grid is built once
            vec![PeriodGrid::new(&coeffs, &user_axes[0], &relay_axes[0]); k_periods]
        } else {
            (0..k_periods)
                .map(|k| PeriodGrid::new(&coeffs, &user_axes[k], &relay_axes[k]))
                .collect()
        };
        let mut current = None;
        for _ in 0..100 {
            let Some(best) = maximize(config, &grids, q) else {
                break;
            };
            let candidate = assemble(config, &grids, &best);
            let (bits, energy) = ratio_terms(config, &candidate)?;
            trace.push(TraceEntry {
                q,
                v: best.value,
                inner_iterations: 0,
            });
            current = Some(candidate);
            if !(energy > 0.0) || bits / energy <= q * (1.0 + 1e-12) {
                break;
            }
            q = bits / energy;
        }
        let Some(found) = current else {
            break;
        };
        for k in 0..k_periods {
            for i in 0..m {
                user_axes[k][i] = zoom(
                    &user_axes[k][i],
                    found.p_u[(i, k)],
                    grid,
                    config.p_max,
                    false,
                );
            }
            for j in 0..n {
                relay_axes[k][j] = zoom(
                    &relay_axes[k][j],
                    found.p_r[(j, k)],
                    grid,
                    config.p_max,
                    true,
                );
            }
        }
        policy = Some(found);
    }
    let policy = policy.ok_or_else(|| Error::Infeasible {
        class: ConstraintClass::Outage,
        detail: "no grid point meets the outage threshold causally".into(),
    })?;
    let threshold = config.pr_out_0;
    let mut result = finish(
        config,
        NetworkKind::NetworkCoded,
        policy,
        q,
        trace,
        SolveStatus::Converged,
        threshold,
        true,
    )?;
    if !result.feasibility.feasible {
        result.status = SolveStatus::Infeasible;
    }
    Ok(result)
}
