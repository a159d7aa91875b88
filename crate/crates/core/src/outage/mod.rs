//! Per-link and network outage probabilities, exact and in the
//! small-outage posynomial approximation.

mod posynomial;
mod subsets;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{
    compute_link_coefficients, LinkCoefficients, LinkParams, OutageMode, OutageReport, Policy,
    ScenarioConfig,
};
use crate::numeric::CompensatedSum;
use crate::special;

pub use posynomial::{outage_value_grad_hess, ExpTerm, PeriodPosynomial, SumExp};
pub(crate) use subsets::members;
pub use subsets::SubsetTables;

/// Exact evaluation enumerates relay subsets; beyond this the tables no
/// longer fit comfortably in memory.
pub const MAX_EXACT_RELAYS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageBreakdown {
    pub pr_out: f64,
    pub pr_a: f64,
    pub pr_b: f64,
}

/// `Pr{|h|^2 d^-β p < (2^{α0/B} - 1) N0 B}`, the regularized lower incomplete
/// gamma `P(m, scale / p)`.
pub fn per_link_outage_exact(p: f64, link: &LinkParams) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "link power must be positive, got {p}"
        )));
    }
    Ok(special::regularized_lower_gamma(link.m, link.scale() / p))
}

/// `c p^{-m}`. Not clamped: exceeds 1 when the power is small.
pub fn per_link_outage_approx(p: f64, c: f64, m: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "link power must be positive, got {p}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "link coefficient must be positive, got {c}"
        )));
    }
    Ok(c * p.powf(-m))
}

/// Probability that a relay decodes every user message.
pub fn relay_decode_prob(per_link_outages: &[f64]) -> f64 {
    per_link_outages.iter().map(|e| 1.0 - e).product()
}

/// Network outage from relay decode probabilities `rho` and relay→destination
/// outages `pr_e_relay`: the destination needs at least `users` successful
/// forwards from relays that decoded.
pub fn network_outage_exact(
    rho: &[f64],
    pr_e_relay: &[f64],
    users: usize,
) -> Result<OutageBreakdown> {
    if rho.len() != pr_e_relay.len() {
        return Err(Error::dims(
            "relay outage vector",
            rho.len(),
            pr_e_relay.len(),
        ));
    }
    for &v in rho.iter().chain(pr_e_relay) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "probability outside [0, 1]: {v}"
            )));
        }
    }
    let tables = SubsetTables::new(users, rho.len())?;
    let not_rho: Vec<f64> = rho.iter().map(|r| 1.0 - r).collect();
    let ok: Vec<f64> = pr_e_relay.iter().map(|e| 1.0 - e).collect();
    Ok(exact_from_parts(&tables, rho, &not_rho, pr_e_relay, &ok))
}

/// Per-link outages of one period, each stored with its complement so that
/// tiny probabilities and values close to one are both kept accurate.
#[derive(Debug, Clone)]
pub struct LinkOutages {
    pub e_u: Matrix,
    pub ok_u: Matrix,
    pub e_r: Vec<f64>,
    pub ok_r: Vec<f64>,
}

impl LinkOutages {
    /// Zero power means a silent link, which always fails.
    pub fn new(coeffs: &LinkCoefficients, p_u: &[f64], p_r: &[f64]) -> Self {
        let m = coeffs.m;
        let link = |scale: f64, p: f64| {
            if p > 0.0 {
                let x = scale / p;
                (
                    special::regularized_lower_gamma(m, x),
                    special::regularized_upper_gamma(m, x),
                )
            } else {
                (1.0, 0.0)
            }
        };
        let (rows, cols) = coeffs.scale_u.shape();
        let mut e_u = Matrix::zeros(rows, cols);
        let mut ok_u = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let (e, ok) = link(coeffs.scale_u[(i, j)], p_u[i]);
                e_u[(i, j)] = e;
                ok_u[(i, j)] = ok;
            }
        }
        let (e_r, ok_r) = coeffs
            .scale_r
            .iter()
            .zip(p_r)
            .map(|(&s, &p)| link(s, p))
            .unzip();
        LinkOutages {
            e_u,
            ok_u,
            e_r,
            ok_r,
        }
    }

    /// `(rho_j, 1 - rho_j)` for every relay.
    pub fn decode_probs(&self) -> (Vec<f64>, Vec<f64>) {
        (0..self.e_u.cols())
            .map(|j| {
                // log from the small side so tiny outages are not rounded away
                let ln_rho: f64 = (0..self.e_u.rows())
                    .map(|i| {
                        let e = self.e_u[(i, j)];
                        if e < 0.5 {
                            (-e).ln_1p()
                        } else {
                            self.ok_u[(i, j)].ln()
                        }
                    })
                    .sum();
                if ln_rho == f64::NEG_INFINITY {
                    (0.0, 1.0)
                } else {
                    (ln_rho.exp(), -ln_rho.exp_m1())
                }
            })
            .unzip()
    }
}

fn exact_from_parts(
    tables: &SubsetTables,
    rho: &[f64],
    not_rho: &[f64],
    e: &[f64],
    ok: &[f64],
) -> OutageBreakdown {
    let (m, n_relays) = (tables.users(), tables.relays());
    let first_hop = |phi: u32| -> f64 {
        (0..n_relays)
            .map(|j| {
                if phi >> j & 1 == 1 {
                    rho[j]
                } else {
                    not_rho[j]
                }
            })
            .product()
    };
    let mut a = CompensatedSum::new();
    for n in 0..m {
        for &phi in tables.subsets_of_size(n) {
            a.add(first_hop(phi));
        }
    }
    let mut b = CompensatedSum::new();
    for n in m..=n_relays {
        for &phi in tables.subsets_of_size(n) {
            let decoded: Vec<usize> = members(phi).collect();
            let mut second = CompensatedSum::new();
            for tau in 0..m {
                for &psi in tables.positional_subsets(n, tau) {
                    let term: f64 = decoded
                        .iter()
                        .enumerate()
                        .map(|(pos, &j)| if psi >> pos & 1 == 1 { ok[j] } else { e[j] })
                        .product();
                    second.add(term);
                }
            }
            b.add(first_hop(phi) * second.value());
        }
    }
    let (pr_a, pr_b) = (a.value(), b.value());
    OutageBreakdown {
        pr_out: pr_a + pr_b,
        pr_a,
        pr_b,
    }
}

/// Exact network outage of one period for the given powers.
pub fn period_outage_exact(
    coeffs: &LinkCoefficients,
    tables: &SubsetTables,
    p_u: &[f64],
    p_r: &[f64],
) -> OutageBreakdown {
    let links = LinkOutages::new(coeffs, p_u, p_r);
    let (rho, not_rho) = links.decode_probs();
    exact_from_parts(tables, &rho, &not_rho, &links.e_r, &links.ok_r)
}

/// Small-outage approximation of one period's network outage: every
/// `1 - rho_j` becomes `Σ_i c_ij p_i^{-m}`, every relay outage `c_j p_j^{-m}`,
/// and every success probability 1.
pub fn period_outage_approx(
    coeffs: &LinkCoefficients,
    tables: &SubsetTables,
    p_u: &[f64],
    p_r: &[f64],
) -> Result<OutageBreakdown> {
    if let Some(p) = p_u.iter().chain(p_r).find(|p| !(**p > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "approximate outage needs positive powers, got {p}"
        )));
    }
    let m = coeffs.m;
    let (m_users, n_relays) = (tables.users(), tables.relays());
    let u: Vec<f64> = (0..n_relays)
        .map(|j| {
            (0..m_users)
                .map(|i| coeffs.c_u[(i, j)] * p_u[i].powf(-m))
                .sum()
        })
        .collect();
    let v: Vec<f64> = (0..n_relays)
        .map(|j| coeffs.c_r[j] * p_r[j].powf(-m))
        .collect();
    let missing = |phi: u32| -> f64 {
        (0..n_relays)
            .filter(|j| phi >> j & 1 == 0)
            .map(|j| u[j])
            .product()
    };
    let mut a = CompensatedSum::new();
    for n in 0..m_users {
        for &phi in tables.subsets_of_size(n) {
            a.add(missing(phi));
        }
    }
    let mut b = CompensatedSum::new();
    for n in m_users..=n_relays {
        for &phi in tables.subsets_of_size(n) {
            let decoded: Vec<usize> = members(phi).collect();
            let mut second = CompensatedSum::new();
            for tau in 0..m_users {
                for &psi in tables.positional_subsets(n, tau) {
                    let term: f64 = decoded
                        .iter()
                        .enumerate()
                        .filter(|(pos, _)| psi >> pos & 1 == 0)
                        .map(|(_, &j)| v[j])
                        .product();
                    second.add(term);
                }
            }
            b.add(missing(phi) * second.value());
        }
    }
    let (pr_a, pr_b) = (a.value(), b.value());
    Ok(OutageBreakdown {
        pr_out: pr_a + pr_b,
        pr_a,
        pr_b,
    })
}

/// Convenience wrapper building the subset tables on the fly.
pub fn network_outage_approx(
    p_u: &[f64],
    p_r: &[f64],
    coeffs: &LinkCoefficients,
) -> Result<OutageBreakdown> {
    if p_u.len() != coeffs.users() {
        return Err(Error::dims("user power vector", coeffs.users(), p_u.len()));
    }
    if p_r.len() != coeffs.relays() {
        return Err(Error::dims(
            "relay power vector",
            coeffs.relays(),
            p_r.len(),
        ));
    }
    let tables = SubsetTables::new(coeffs.users(), coeffs.relays())?;
    period_outage_approx(coeffs, &tables, p_u, p_r)
}

/// Network-coded outage of every period of a policy.
pub fn outage_report(
    config: &ScenarioConfig,
    policy: &Policy,
    mode: OutageMode,
) -> Result<OutageReport> {
    policy.check_dims(config)?;
    let coeffs = compute_link_coefficients(config);
    let tables = SubsetTables::new(config.users, config.relays)?;
    outage_report_with(&coeffs, &tables, policy, mode)
}

pub(crate) fn outage_report_with(
    coeffs: &LinkCoefficients,
    tables: &SubsetTables,
    policy: &Policy,
    mode: OutageMode,
) -> Result<OutageReport> {
    let mut report = OutageReport {
        pr_out: Vec::with_capacity(policy.periods()),
        pr_a: Vec::with_capacity(policy.periods()),
        pr_b: Vec::with_capacity(policy.periods()),
        mode,
    };
    for k in 0..policy.periods() {
        let (p_u, p_r) = (policy.user_powers(k), policy.relay_powers(k));
        let b = match mode {
            OutageMode::Exact => period_outage_exact(coeffs, tables, &p_u, &p_r),
            OutageMode::Approximate => period_outage_approx(coeffs, tables, &p_u, &p_r)?,
        };
        report.pr_out.push(b.pr_out);
        report.pr_a.push(b.pr_a);
        report.pr_b.push(b.pr_b);
    }
    Ok(report)
}
