//! Builds the convex program for a scenario and maps between its variable
//! vector and [`Policy`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ConstraintClass, Error, Result};
use crate::model::{compute_link_coefficients, LinkCoefficients, Policy, ScenarioConfig, P_MIN};
use crate::outage::{PeriodPosynomial, SubsetTables, SumExp};

use super::problem::{Constraint, ConstraintKind, ConvexProblem, Linear, Posy, PosyTerm, Slot};

/// How the destination recovers the user messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Relays forward one coded combination each; any `M` successes decode.
    #[default]
    NetworkCoded,
    /// Decode-and-forward without coding: each relay forwards every decoded
    /// message in its own slot and a user's message survives if any relay
    /// delivers it.
    PerUserDf,
}

/// Which variant of the scheduling problem to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemVariant {
    pub network: NetworkKind,
    /// Whether inter-user energy transfers are decision variables.
    pub transfers: bool,
    /// Whether every user spends exactly its period's energy in that period.
    pub depleted: bool,
}

impl Default for ProblemVariant {
    fn default() -> Self {
        ProblemVariant {
            network: NetworkKind::NetworkCoded,
            transfers: true,
            depleted: false,
        }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    user_slot: Vec<Vec<usize>>,
    relay_slot: Vec<Vec<usize>>,
    /// `transfer_var[k][a][b]`
    transfer_var: Vec<Vec<Vec<Option<usize>>>>,
}

/// The energy-efficiency problem for one scenario, threshold and variant,
/// in transformed variables: log user powers (unless depleted), log relay
/// powers and raw transfer amounts.
#[derive(Debug, Clone)]
pub struct EeProblem {
    pub config: ScenarioConfig,
    pub coeffs: LinkCoefficients,
    pub variant: ProblemVariant,
    pub pr_out_0: f64,
    pub(crate) cp: ConvexProblem,
    layout: Layout,
    total_bits: f64,
    /// Forwarding slots per relay and period.
    relay_slots: f64,
}

fn log_bounds() -> (f64, f64) {
    (P_MIN.ln(), 0.0)
}

impl EeProblem {
    pub fn new(config: &ScenarioConfig, variant: ProblemVariant, pr_out_0: f64) -> Result<Self> {
        config.validate()?;
        if !(pr_out_0 > 0.0 && pr_out_0 <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "outage threshold must be in (0, 1], got {pr_out_0}"
            )));
        }
        let coeffs = compute_link_coefficients(config);
        let (m_users, n_relays, k_periods) = (config.users, config.relays, config.periods);
        let t_slot = config.slot;
        let eta = config.eta;
        let (ln_min, _) = log_bounds();
        let ln_max = config.p_max.ln();
        let energy_scale = energy_scale(config);

        let mut n_vars = 0;
        let mut next = || {
            n_vars += 1;
            n_vars - 1
        };
        let mut transfer_var = vec![vec![vec![None; m_users]; m_users]; k_periods];
        if variant.transfers && m_users > 1 {
            for per in transfer_var.iter_mut() {
                for (a, row) in per.iter_mut().enumerate() {
                    for (b, v) in row.iter_mut().enumerate() {
                        if a != b {
                            *v = Some(next());
                        }
                    }
                }
            }
        }

        let mut slots = Vec::new();
        let mut constraints = Vec::new();
        let mut user_slot = vec![vec![0; k_periods]; m_users];
        for i in 0..m_users {
            for k in 0..k_periods {
                user_slot[i][k] = slots.len();
                if variant.depleted {
                    let mut constant = config.arrivals[(i, k)] / t_slot;
                    if k == 0 {
                        constant += config.eu_0[i] / t_slot;
                    }
                    let mut coefs = Vec::new();
                    for other in 0..m_users {
                        if let Some(v) = transfer_var[k][i][other] {
                            coefs.push((v, -1.0 / t_slot));
                        }
                        if let Some(v) = transfer_var[k][other][i] {
                            coefs.push((v, eta / t_slot));
                        }
                    }
                    if coefs.is_empty() {
                        if constant < P_MIN * (1.0 - 1e-9) || constant > config.p_max {
                            return Err(Error::Infeasible {
                                class: ConstraintClass::PowerBounds,
                                detail: format!(
                                    "user {} must spend {constant:.4e} W in period {} to deplete its energy",
                                    i + 1,
                                    k + 1
                                ),
                            });
                        }
                        slots.push(Slot::Fixed(constant.max(P_MIN)));
                    } else {
                        slots.push(Slot::Affine { constant, coefs });
                        let s = slots.len() - 1;
                        constraints.push(Constraint {
                            kind: ConstraintKind::Linear(Linear {
                                constant: 0.0,
                                vars: vec![],
                                slots: vec![(s, -1.0)],
                            }),
                            class: ConstraintClass::PowerBounds,
                            scale: config.p_max,
                            hard: true,
                        });
                        constraints.push(Constraint {
                            kind: ConstraintKind::Linear(Linear {
                                constant: P_MIN,
                                vars: vec![],
                                slots: vec![(s, -1.0)],
                            }),
                            class: ConstraintClass::PowerBounds,
                            scale: config.p_max,
                            hard: false,
                        });
                        constraints.push(Constraint {
                            kind: ConstraintKind::Linear(Linear {
                                constant: -config.p_max,
                                vars: vec![],
                                slots: vec![(s, 1.0)],
                            }),
                            class: ConstraintClass::PowerBounds,
                            scale: config.p_max,
                            hard: false,
                        });
                    }
                } else {
                    let v = next();
                    slots.push(Slot::Log(v));
                    push_log_bounds(&mut constraints, v, ln_min, ln_max);
                }
            }
        }
        let mut relay_slot = vec![vec![0; k_periods]; n_relays];
        for j in 0..n_relays {
            for k in 0..k_periods {
                let v = next();
                relay_slot[j][k] = slots.len();
                slots.push(Slot::Log(v));
                push_log_bounds(&mut constraints, v, ln_min, ln_max);
            }
        }

        // causality in cumulative form
        if !variant.depleted {
            for i in 0..m_users {
                let mut lin = Linear::default();
                for k in 0..k_periods {
                    lin.slots.push((user_slot[i][k], t_slot));
                    for other in 0..m_users {
                        if let Some(v) = transfer_var[k][i][other] {
                            lin.vars.push((v, 1.0));
                        }
                        if let Some(v) = transfer_var[k][other][i] {
                            lin.vars.push((v, -eta));
                        }
                    }
                    let mut c = lin.clone();
                    c.constant = -config.cumulative_arrivals(i, k);
                    constraints.push(Constraint {
                        kind: ConstraintKind::Linear(c),
                        class: ConstraintClass::Causality,
                        scale: energy_scale,
                        hard: false,
                    });
                }
            }
        }

        // transfers: nonnegative and bounded by the total energy in the system
        let cap = (0..m_users)
            .map(|i| config.cumulative_arrivals(i, k_periods - 1))
            .sum::<f64>()
            .max(energy_scale);
        for per in &transfer_var {
            for v in per.iter().flatten().flatten() {
                constraints.push(Constraint {
                    kind: ConstraintKind::Linear(Linear {
                        constant: 0.0,
                        vars: vec![(*v, -1.0)],
                        slots: vec![],
                    }),
                    class: ConstraintClass::TransferSign,
                    scale: energy_scale,
                    hard: false,
                });
                constraints.push(Constraint {
                    kind: ConstraintKind::Linear(Linear {
                        constant: -cap,
                        vars: vec![(*v, 1.0)],
                        slots: vec![],
                    }),
                    class: ConstraintClass::TransferSign,
                    scale: cap,
                    hard: false,
                });
            }
        }

        // outage forms: local variable l < M is user l, l >= M relay l - M
        let local_slot = |k: usize, l: usize| {
            if l < m_users {
                user_slot[l][k]
            } else {
                relay_slot[l - m_users][k]
            }
        };
        let to_posy = |form: &SumExp, k: usize| Posy {
            terms: form
                .terms
                .iter()
                .map(|t| PosyTerm {
                    ln_coef: t.coef.ln(),
                    exps: t.exps.iter().map(|&(l, e)| (local_slot(k, l), e)).collect(),
                })
                .collect(),
        };
        let mut posys = Vec::new();
        let mut objective_posys = Vec::new();
        let ln_bound = pr_out_0.ln();
        let (forms, weight, relay_slots): (Vec<SumExp>, f64, f64) = match variant.network {
            NetworkKind::NetworkCoded => {
                let tables = SubsetTables::new(m_users, n_relays)?;
                let form = PeriodPosynomial::network_coded(&coeffs, &tables)?.total();
                (vec![form], config.bits_per_period(), 1.0)
            }
            NetworkKind::PerUserDf => {
                let forms = (0..m_users)
                    .map(|i| PeriodPosynomial::per_user_df(&coeffs, i))
                    .collect::<Result<Vec<_>>>()?;
                (forms, config.alpha0 * t_slot, m_users as f64)
            }
        };
        for k in 0..k_periods {
            for form in &forms {
                posys.push(to_posy(form, k));
                let p = posys.len() - 1;
                objective_posys.push((p, weight));
                constraints.push(Constraint {
                    kind: ConstraintKind::LogPosy { posy: p, ln_bound },
                    class: ConstraintClass::Outage,
                    scale: 1.0,
                    hard: false,
                });
            }
        }

        let mut energy = Linear::default();
        for k in 0..k_periods {
            for i in 0..m_users {
                energy.slots.push((user_slot[i][k], t_slot));
            }
            for j in 0..n_relays {
                energy.slots.push((relay_slot[j][k], relay_slots * t_slot));
            }
            for v in transfer_var[k].iter().flatten().flatten() {
                energy.vars.push((*v, 1.0 - eta));
            }
        }

        let total_bits = config.bits_per_period() * k_periods as f64;
        let cp = ConvexProblem {
            n_vars,
            slots,
            posys,
            objective_posys,
            energy,
            constraints,
            obj_scale: 1.0 / total_bits,
        };
        Ok(EeProblem {
            config: config.clone(),
            coeffs,
            variant,
            pr_out_0,
            cp,
            layout: Layout {
                user_slot,
                relay_slot,
                transfer_var,
            },
            total_bits,
            relay_slots,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.cp.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.cp.constraints.len()
    }

    /// Delivered bits if nothing were in outage, `M K α0 T`.
    pub fn total_bits(&self) -> f64 {
        self.total_bits
    }

    pub fn relay_slots(&self) -> f64 {
        self.relay_slots
    }

    /// Policy encoded by `z`; `None` if `z` violates an affine power's sign.
    pub fn policy(&self, z: &[f64]) -> Option<Policy> {
        let point = self.cp.point(z)?;
        let cfg = &self.config;
        let mut policy = Policy::for_config(cfg);
        for i in 0..cfg.users {
            for k in 0..cfg.periods {
                policy.p_u[(i, k)] = self.cp.slot_power(&point, self.layout.user_slot[i][k]);
            }
        }
        for j in 0..cfg.relays {
            for k in 0..cfg.periods {
                policy.p_r[(j, k)] = self.cp.slot_power(&point, self.layout.relay_slot[j][k]);
            }
        }
        for (k, per) in self.layout.transfer_var.iter().enumerate() {
            for (a, row) in per.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    if let Some(v) = v {
                        policy.transfers[k][(a, b)] = z[*v];
                    }
                }
            }
        }
        Some(policy)
    }

    /// Variable vector for `policy`. Log-parametrized powers below the
    /// power floor are rejected.
    pub fn variables(&self, policy: &Policy) -> Result<Vec<f64>> {
        policy.check_dims(&self.config)?;
        let mut z = vec![0.0; self.n_vars()];
        for (k, per) in self.layout.transfer_var.iter().enumerate() {
            for (a, row) in per.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    if let Some(v) = v {
                        z[*v] = policy.transfers[k][(a, b)];
                    }
                }
            }
        }
        let mut set_log = |slot: usize, p: f64| -> Result<()> {
            if let Slot::Log(v) = self.cp.slots[slot] {
                if !(p >= P_MIN) {
                    return Err(Error::InvalidArgument(format!(
                        "power {p} below the floor {P_MIN}"
                    )));
                }
                z[v] = p.ln();
            }
            Ok(())
        };
        for i in 0..self.config.users {
            for k in 0..self.config.periods {
                set_log(self.layout.user_slot[i][k], policy.p_u[(i, k)])?;
            }
        }
        for j in 0..self.config.relays {
            for k in 0..self.config.periods {
                set_log(self.layout.relay_slot[j][k], policy.p_r[(j, k)])?;
            }
        }
        Ok(z)
    }

    /// Expected delivered bits under the approximate outage.
    pub fn numerator(&self, z: &[f64]) -> Option<f64> {
        let point = self.cp.point(z)?;
        Some(self.total_bits - self.cp.loss(&point))
    }

    /// Consumed energy, J.
    pub fn denominator(&self, z: &[f64]) -> Option<f64> {
        let point = self.cp.point(z)?;
        Some(self.cp.energy(z, &point))
    }

    /// Approximate outage of every outage form (per period, or per user
    /// and period in user-major order within each period).
    pub fn approx_outages(&self, z: &[f64]) -> Option<Vec<f64>> {
        let point = self.cp.point(z)?;
        Some(
            (0..self.cp.posys.len())
                .map(|p| self.cp.posy_value(p, &point))
                .collect(),
        )
    }

    /// `V'(q) = Σ weight * outage + q E_tot` with its gradient and Hessian.
    pub fn v_prime(&self, q: f64, z: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let point = self.cp.point(z)?;
        let (loss, d) = self.cp.objective_derivs(q, &point);
        Some((loss + q * self.cp.energy(z, &point), d.grad, d.hess))
    }

    /// Largest constraint value at `z`, normalized per constraint.
    pub fn max_violation(&self, z: &[f64]) -> Option<f64> {
        let point = self.cp.point(z)?;
        Some(
            self.cp
                .constraint_values(z, &point)
                .iter()
                .zip(&self.cp.constraints)
                .map(|(v, c)| v / c.scale)
                .fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// Phase-1 starting point: every user spends its period's arrivals
    /// (pulled 10% toward the centre of the power box in log space), relays
    /// start near full power, and transfers, when present, move a little
    /// energy from each period's richest user to the others.
    pub fn initial_point(&self) -> Vec<f64> {
        let cfg = &self.config;
        let (ln_min, _) = log_bounds();
        let ln_max = cfg.p_max.ln();
        let centre = 0.5 * (ln_min + ln_max);
        let shrink = |x: f64| x + 0.1 * (centre - x);
        let scale = energy_scale(cfg);
        let mut policy = Policy::for_config(cfg);
        for k in 0..cfg.periods {
            let budget: Vec<f64> = (0..cfg.users)
                .map(|i| cfg.arrivals[(i, k)] + if k == 0 { cfg.eu_0[i] } else { 0.0 })
                .collect();
            let richest = (0..cfg.users)
                .max_by(|&a, &b| budget[a].total_cmp(&budget[b]))
                .expect("at least one user");
            let mut spend = budget.clone();
            if self.layout.transfer_var[k][richest]
                .iter()
                .any(Option::is_some)
            {
                let share = budget[richest] / (2.0 * cfg.users as f64);
                for i in 0..cfg.users {
                    if i == richest {
                        continue;
                    }
                    // every pair gets a small positive flow so the start is interior
                    let small = 1e-4 * scale;
                    let gift = if budget[i] < share {
                        share - budget[i]
                    } else {
                        0.0
                    } + small;
                    policy.transfers[k][(richest, i)] = gift;
                    spend[richest] -= gift;
                    spend[i] += cfg.eta * gift;
                    for other in 0..cfg.users {
                        if other != i && other != richest {
                            policy.transfers[k][(i, other)] = small;
                            spend[i] -= small;
                            spend[other] += cfg.eta * small;
                        }
                    }
                    policy.transfers[k][(i, richest)] = small;
                    spend[i] -= small;
                    spend[richest] += cfg.eta * small;
                }
            }
            for i in 0..cfg.users {
                let p = (spend[i] / cfg.slot).clamp(P_MIN, cfg.p_max);
                policy.p_u[(i, k)] = shrink(p.ln()).exp();
            }
            for j in 0..cfg.relays {
                policy.p_r[(j, k)] = shrink(ln_max).exp();
            }
        }
        self.variables(&policy).expect("powers inside the box")
    }
}

fn push_log_bounds(constraints: &mut Vec<Constraint>, v: usize, ln_min: f64, ln_max: f64) {
    constraints.push(Constraint {
        kind: ConstraintKind::Linear(Linear {
            constant: ln_min,
            vars: vec![(v, -1.0)],
            slots: vec![],
        }),
        class: ConstraintClass::PowerBounds,
        scale: 1.0,
        hard: false,
    });
    constraints.push(Constraint {
        kind: ConstraintKind::Linear(Linear {
            constant: -ln_max,
            vars: vec![(v, 1.0)],
            slots: vec![],
        }),
        class: ConstraintClass::PowerBounds,
        scale: 1.0,
        hard: false,
    });
}

/// Typical per-period energy, used to normalize energy constraints.
pub(crate) fn energy_scale(config: &ScenarioConfig) -> f64 {
    let total: f64 = config.arrivals.sum() + config.eu_0.iter().sum::<f64>();
    (total / (config.users * config.periods) as f64).max(1e-6)
}
