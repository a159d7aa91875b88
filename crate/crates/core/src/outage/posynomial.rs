//! Sum-of-exponentials form of the approximate outage.
//!
//! With `x = ln p` every approximate outage is `Σ_t a_t exp(e_t · x)` with
//! `a_t > 0`, which is convex in `x`. Terms are expanded once per channel
//! realization of the coefficients and then evaluated cheaply.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::LinkCoefficients;

use super::{members, OutageBreakdown, SubsetTables};

#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub coef: f64,
    /// Sparse `(variable, exponent)` pairs.
    pub exps: Vec<(usize, f64)>,
}

impl ExpTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coef * self.exps.iter().map(|&(v, e)| e * x[v]).sum::<f64>().exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumExp {
    pub vars: usize,
    pub terms: Vec<ExpTerm>,
}

impl SumExp {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.vars];
        let mut f = 0.0;
        for t in &self.terms {
            let w = t.eval(x);
            f += w;
            for &(v, e) in &t.exps {
                g[v] += w * e;
            }
        }
        (f, g)
    }

    pub fn value_grad_hess(&self, x: &[f64]) -> (f64, Vec<f64>, Matrix) {
        let mut h = Matrix::zeros(self.vars, self.vars);
        let mut g = vec![0.0; self.vars];
        let mut f = 0.0;
        for t in &self.terms {
            let w = t.eval(x);
            f += w;
            for &(a, ea) in &t.exps {
                g[a] += w * ea;
                for &(b, eb) in &t.exps {
                    h[(a, b)] += w * ea * eb;
                }
            }
        }
        (f, g, h)
    }

    pub fn hess_vec(&self, x: &[f64], dir: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.vars];
        for t in &self.terms {
            let w = t.eval(x);
            let proj: f64 = t.exps.iter().map(|&(v, e)| e * dir[v]).sum();
            for &(v, e) in &t.exps {
                out[v] += w * e * proj;
            }
        }
        out
    }

    fn from_poly(poly: Poly, m: f64) -> Result<SumExp> {
        let vars = poly.keys().next().map_or(0, Vec::len);
        let terms = poly
            .into_iter()
            .map(|(counts, coef)| {
                if !(coef > 0.0 && coef.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "posynomial coefficient {coef} is not positive"
                    )));
                }
                let exps = counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(v, &c)| (v, -m * c as f64))
                    .collect();
                Ok(ExpTerm { coef, exps })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SumExp { vars, terms })
    }
}

/// Value, gradient and Hessian-vector product of a sum-exponential outage
/// form at `x`.
pub fn outage_value_grad_hess(x: &[f64], form: &SumExp, dir: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (f, g) = form.value_grad(x);
    (f, g, form.hess_vec(x, dir))
}

/// Polynomial in `p^{-m}` monomials keyed by per-variable degree.
type Poly = BTreeMap<Vec<u16>, f64>;

fn monomial(vars: usize, var: usize, coef: f64) -> Poly {
    let mut key = vec![0u16; vars];
    key[var] = 1;
    Poly::from([(key, coef)])
}

fn one(vars: usize) -> Poly {
    Poly::from([(vec![0u16; vars], 1.0)])
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ka, ca) in a {
        for (kb, cb) in b {
            let key: Vec<u16> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *out.entry(key).or_insert(0.0) += ca * cb;
        }
    }
    out
}

fn add_into(acc: &mut Poly, p: Poly) {
    for (k, c) in p {
        *acc.entry(k).or_insert(0.0) += c;
    }
}

/// Approximate network-coded outage of one period as two sum-exponential
/// forms over `x = (ln p_1..ln p_M, ln p'_1..ln p'_N)`.
#[derive(Debug, Clone)]
pub struct PeriodPosynomial {
    pub users: usize,
    pub relays: usize,
    pub a: SumExp,
    pub b: SumExp,
}

impl PeriodPosynomial {
    pub fn network_coded(coeffs: &LinkCoefficients, tables: &SubsetTables) -> Result<Self> {
        let (m_users, n_relays) = (tables.users(), tables.relays());
        if coeffs.users() != m_users || coeffs.relays() != n_relays {
            return Err(Error::dims(
                "link coefficients",
                format!("{m_users}x{n_relays}"),
                format!("{}x{}", coeffs.users(), coeffs.relays()),
            ));
        }
        let vars = m_users + n_relays;
        let u: Vec<Poly> = (0..n_relays)
            .map(|j| {
                let mut p = Poly::new();
                for i in 0..m_users {
                    add_into(&mut p, monomial(vars, i, coeffs.c_u[(i, j)]));
                }
                p
            })
            .collect();
        let v: Vec<Poly> = (0..n_relays)
            .map(|j| monomial(vars, m_users + j, coeffs.c_r[j]))
            .collect();
        let missing = |phi: u32| -> Poly {
            (0..n_relays)
                .filter(|j| phi >> j & 1 == 0)
                .fold(one(vars), |acc, j| mul(&acc, &u[j]))
        };

        let mut a = Poly::new();
        for n in 0..m_users {
            for &phi in tables.subsets_of_size(n) {
                add_into(&mut a, missing(phi));
            }
        }
        let mut b = Poly::new();
        for n in m_users..=n_relays {
            for &phi in tables.subsets_of_size(n) {
                let decoded: Vec<usize> = members(phi).collect();
                let mut second = Poly::new();
                for tau in 0..m_users {
                    for &psi in tables.positional_subsets(n, tau) {
                        let failed = decoded
                            .iter()
                            .enumerate()
                            .filter(|(pos, _)| psi >> pos & 1 == 0)
                            .fold(one(vars), |acc, (_, &j)| mul(&acc, &v[j]));
                        add_into(&mut second, failed);
                    }
                }
                add_into(&mut b, mul(&missing(phi), &second));
            }
        }
        Ok(PeriodPosynomial {
            users: m_users,
            relays: n_relays,
            a: SumExp::from_poly(a, coeffs.m)?,
            b: SumExp::from_poly(b, coeffs.m)?,
        })
    }

    /// `Π_j (c_ij p_i^{-m} + c_j p'_j^{-m})`: the small-outage form of user
    /// `i`'s outage when every relay forwards each decoded message on its own.
    pub fn per_user_df(coeffs: &LinkCoefficients, user: usize) -> Result<SumExp> {
        let (m_users, n_relays) = (coeffs.users(), coeffs.relays());
        let vars = m_users + n_relays;
        let mut poly = one(vars);
        for j in 0..n_relays {
            let mut factor = monomial(vars, user, coeffs.c_u[(user, j)]);
            add_into(&mut factor, monomial(vars, m_users + j, coeffs.c_r[j]));
            poly = mul(&poly, &factor);
        }
        SumExp::from_poly(poly, coeffs.m)
    }

    pub fn vars(&self) -> usize {
        self.users + self.relays
    }

    /// Both parts merged into one form.
    pub fn total(&self) -> SumExp {
        let mut terms = self.a.terms.clone();
        terms.extend(self.b.terms.iter().cloned());
        SumExp {
            vars: self.vars(),
            terms,
        }
    }

    pub fn breakdown(&self, x: &[f64]) -> OutageBreakdown {
        let (pr_a, pr_b) = (self.a.value(x), self.b.value(x));
        OutageBreakdown {
            pr_out: pr_a + pr_b,
            pr_a,
            pr_b,
        }
    }
}
