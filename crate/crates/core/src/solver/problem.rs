//! A small convex program in the variables `z` with power "slots" that are
//! either `exp(z_v)`, affine in `z`, or fixed.
//!
//! Posynomials are written over slot powers; with log-parametrized slots
//! they become sums of exponentials, and with affine slots each monomial is
//! still log-convex because every exponent is negative.

use nalgebra::{DMatrix, DVector};

use crate::error::ConstraintClass;

#[derive(Debug, Clone)]
pub(crate) enum Slot {
    Log(usize),
    Affine {
        constant: f64,
        coefs: Vec<(usize, f64)>,
    },
    Fixed(f64),
}

#[derive(Debug, Clone)]
struct SlotValue {
    p: f64,
    grad: Vec<(usize, f64)>,
    /// Diagonal second derivative, present for log slots.
    curv: Option<(usize, f64)>,
    affine: bool,
}

/// `constant + Σ c_v z_v + Σ c_s p_s`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Linear {
    pub constant: f64,
    pub vars: Vec<(usize, f64)>,
    pub slots: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct PosyTerm {
    pub ln_coef: f64,
    /// `(slot, exponent)`, exponents negative.
    pub exps: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Posy {
    pub terms: Vec<PosyTerm>,
}

#[derive(Debug, Clone)]
pub(crate) enum ConstraintKind {
    /// `Linear <= 0`.
    Linear(Linear),
    /// `ln(posy) - ln_bound <= 0`.
    LogPosy { posy: usize, ln_bound: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub kind: ConstraintKind,
    pub class: ConstraintClass,
    /// Typical magnitude, used to normalize violations in phase 1.
    pub scale: f64,
    /// Domain constraints are never relaxed in phase 1.
    pub hard: bool,
}

/// Objective `obj_scale * (Σ weight * posy + q * energy)` subject to
/// `constraints`.
#[derive(Debug, Clone)]
pub(crate) struct ConvexProblem {
    pub n_vars: usize,
    pub slots: Vec<Slot>,
    pub posys: Vec<Posy>,
    pub objective_posys: Vec<(usize, f64)>,
    pub energy: Linear,
    pub constraints: Vec<Constraint>,
    pub obj_scale: f64,
}

/// Sparse first and second derivatives of a scalar function.
#[derive(Debug, Clone, Default)]
pub(crate) struct Derivs {
    pub grad: Vec<(usize, f64)>,
    /// Entries `(a, b, value)`; duplicates add up.
    pub hess: Vec<(usize, usize, f64)>,
}

/// Dense derivatives for functions whose Hessian couples many variables.
#[derive(Debug, Clone)]
pub(crate) struct DenseDerivs {
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

pub(crate) struct Point {
    slots: Vec<SlotValue>,
}

impl ConvexProblem {
    /// Slot powers at `z`; `None` if an affine slot leaves `p > 0`.
    pub fn point(&self, z: &[f64]) -> Option<Point> {
        let mut out = Vec::with_capacity(self.slots.len());
        for slot in &self.slots {
            let v = match slot {
                Slot::Log(v) => {
                    let p = z[*v].exp();
                    SlotValue {
                        p,
                        grad: vec![(*v, p)],
                        curv: Some((*v, p)),
                        affine: false,
                    }
                }
                Slot::Affine { constant, coefs } => SlotValue {
                    p: constant + coefs.iter().map(|&(v, c)| c * z[v]).sum::<f64>(),
                    grad: coefs.clone(),
                    curv: None,
                    affine: true,
                },
                Slot::Fixed(p) => SlotValue {
                    p: *p,
                    grad: Vec::new(),
                    curv: None,
                    affine: false,
                },
            };
            if !(v.p > 0.0) || !v.p.is_finite() {
                return None;
            }
            out.push(v);
        }
        Some(Point { slots: out })
    }

    pub fn slot_power(&self, point: &Point, slot: usize) -> f64 {
        point.slots[slot].p
    }

    pub fn linear_value(&self, lin: &Linear, z: &[f64], point: &Point) -> f64 {
        lin.constant
            + lin.vars.iter().map(|&(v, c)| c * z[v]).sum::<f64>()
            + lin
                .slots
                .iter()
                .map(|&(s, c)| c * point.slots[s].p)
                .sum::<f64>()
    }

    pub fn linear_derivs(&self, lin: &Linear, point: &Point) -> Derivs {
        let mut d = Derivs::default();
        d.grad.extend(lin.vars.iter().copied());
        for &(s, c) in &lin.slots {
            let sv = &point.slots[s];
            d.grad.extend(sv.grad.iter().map(|&(v, g)| (v, c * g)));
            if let Some((v, h)) = sv.curv {
                d.hess.push((v, v, c * h));
            }
        }
        d
    }

    pub fn posy_value(&self, posy: usize, point: &Point) -> f64 {
        self.posys[posy]
            .terms
            .iter()
            .map(|t| {
                let ln_w = t.ln_coef
                    + t.exps
                        .iter()
                        .map(|&(s, e)| e * point.slots[s].p.ln())
                        .sum::<f64>();
                ln_w.exp()
            })
            .sum()
    }

    /// Value, gradient and Hessian of a posynomial.
    pub fn posy_derivs(&self, posy: usize, point: &Point) -> (f64, DenseDerivs) {
        let n = self.n_vars;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut value = 0.0;
        let mut dl: Vec<(usize, f64)> = Vec::new();
        for t in &self.posys[posy].terms {
            dl.clear();
            let mut ln_w = t.ln_coef;
            for &(s, e) in &t.exps {
                let sv = &point.slots[s];
                ln_w += e * sv.p.ln();
                dl.extend(sv.grad.iter().map(|&(v, g)| (v, e * g / sv.p)));
            }
            let w = ln_w.exp();
            value += w;
            for &(a, ga) in &dl {
                grad[a] += w * ga;
                for &(b, gb) in &dl {
                    hess[(a, b)] += w * ga * gb;
                }
            }
            // affine slots: d² ln p = -b bᵀ / p²
            for &(s, e) in &t.exps {
                let sv = &point.slots[s];
                if sv.affine {
                    let k = -e * w / (sv.p * sv.p);
                    for &(a, ba) in &sv.grad {
                        for &(b, bb) in &sv.grad {
                            hess[(a, b)] += k * ba * bb;
                        }
                    }
                }
            }
        }
        (value, DenseDerivs { grad, hess })
    }

    /// Value of constraint `i` at `z`.
    pub fn constraint_value(&self, i: usize, z: &[f64], point: &Point) -> f64 {
        match &self.constraints[i].kind {
            ConstraintKind::Linear(lin) => self.linear_value(lin, z, point),
            ConstraintKind::LogPosy { posy, ln_bound } => {
                self.posy_value(*posy, point).ln() - ln_bound
            }
        }
    }

    pub fn constraint_values(&self, z: &[f64], point: &Point) -> Vec<f64> {
        (0..self.constraints.len())
            .map(|i| self.constraint_value(i, z, point))
            .collect()
    }

    /// Weighted posynomial part of the objective, unscaled.
    pub fn loss(&self, point: &Point) -> f64 {
        self.objective_posys
            .iter()
            .map(|&(p, w)| w * self.posy_value(p, point))
            .sum()
    }

    pub fn energy(&self, z: &[f64], point: &Point) -> f64 {
        self.linear_value(&self.energy, z, point)
    }

    /// Log-barrier function `t * f - Σ ln(-h_i)`.
    ///
    /// In the main problem `f` is the scaled objective and `h_i = g_i`. In
    /// phase 1 the last entry of `z` is a slack `s`, `f = s` and
    /// `h_i = g_i / scale_i - s`. Returns `None` outside the domain.
    pub fn barrier(
        &self,
        z: &[f64],
        t: f64,
        q: f64,
        phase1: bool,
        derivs: bool,
    ) -> Option<(f64, Option<DenseDerivs>)> {
        let point = self.point(z)?;
        let nz = self.n_vars + usize::from(phase1);
        let s = if phase1 { z[self.n_vars] } else { 0.0 };

        let posy: Vec<(f64, Option<DenseDerivs>)> = (0..self.posys.len())
            .map(|p| {
                if derivs {
                    let (v, d) = self.posy_derivs(p, &point);
                    (v, Some(d))
                } else {
                    (self.posy_value(p, &point), None)
                }
            })
            .collect();

        let mut phi;
        let mut grad = DVector::zeros(if derivs { nz } else { 0 });
        let mut hess = DMatrix::zeros(if derivs { nz } else { 0 }, if derivs { nz } else { 0 });
        if phase1 {
            phi = t * s;
            if derivs {
                grad[self.n_vars] = t;
            }
        } else {
            let loss: f64 = self
                .objective_posys
                .iter()
                .map(|&(p, w)| w * posy[p].0)
                .sum();
            let energy = self.linear_value(&self.energy, z, &point);
            phi = t * self.obj_scale * (loss + q * energy);
            if derivs {
                let k = t * self.obj_scale;
                for &(p, w) in &self.objective_posys {
                    let d = posy[p].1.as_ref().expect("derivatives requested");
                    for a in 0..self.n_vars {
                        grad[a] += k * w * d.grad[a];
                    }
                    for a in 0..self.n_vars {
                        for b in 0..self.n_vars {
                            hess[(a, b)] += k * w * d.hess[(a, b)];
                        }
                    }
                }
                let e = self.linear_derivs(&self.energy, &point);
                for (v, g) in e.grad {
                    grad[v] += k * q * g;
                }
                for (a, b, h) in e.hess {
                    hess[(a, b)] += k * q * h;
                }
            }
        }

        for c in &self.constraints {
            let relaxed = phase1 && !c.hard;
            let (inv_scale, shift) = if relaxed {
                (1.0 / c.scale, s)
            } else {
                (1.0, 0.0)
            };
            match &c.kind {
                ConstraintKind::Linear(lin) => {
                    let h = self.linear_value(lin, z, &point) * inv_scale - shift;
                    if !(h < 0.0) {
                        return None;
                    }
                    phi -= (-h).ln();
                    if derivs {
                        let mut d = self.linear_derivs(lin, &point);
                        for g in &mut d.grad {
                            g.1 *= inv_scale;
                        }
                        if relaxed {
                            d.grad.push((self.n_vars, -1.0));
                        }
                        let inv = 1.0 / -h;
                        for &(a, ga) in &d.grad {
                            grad[a] += ga * inv;
                            for &(b, gb) in &d.grad {
                                hess[(a, b)] += ga * gb * inv * inv;
                            }
                        }
                        for (a, b, hv) in d.hess {
                            hess[(a, b)] += hv * inv_scale * inv;
                        }
                    }
                }
                ConstraintKind::LogPosy { posy: p, ln_bound } => {
                    let f = posy[*p].0;
                    let h = (f.ln() - ln_bound) * inv_scale - shift;
                    if !(h < 0.0) {
                        return None;
                    }
                    phi -= (-h).ln();
                    if derivs {
                        let d = posy[*p].1.as_ref().expect("derivatives requested");
                        let inv = 1.0 / -h;
                        let mut gh: Vec<(usize, f64)> = (0..self.n_vars)
                            .filter(|&a| d.grad[a] != 0.0)
                            .map(|a| (a, d.grad[a] / f * inv_scale))
                            .collect();
                        // Hessian of ln f: hess / f - (grad / f)(grad / f)ᵀ
                        for a in 0..self.n_vars {
                            for b in 0..self.n_vars {
                                let hv = d.hess[(a, b)];
                                if hv != 0.0 {
                                    hess[(a, b)] += hv / f * inv_scale * inv;
                                }
                            }
                        }
                        for &(a, ga) in &gh {
                            for &(b, gb) in &gh {
                                hess[(a, b)] -= ga * gb / inv_scale * inv;
                            }
                        }
                        if relaxed {
                            gh.push((self.n_vars, -1.0));
                        }
                        for &(a, ga) in &gh {
                            grad[a] += ga * inv;
                            for &(b, gb) in &gh {
                                hess[(a, b)] += ga * gb * inv * inv;
                            }
                        }
                    }
                }
            }
        }
        if !phi.is_finite() {
            return None;
        }
        Some((phi, derivs.then_some(DenseDerivs { grad, hess })))
    }

    /// Unscaled objective `loss + q energy` with dense derivatives.
    pub fn objective_derivs(&self, q: f64, point: &Point) -> (f64, DenseDerivs) {
        let n = self.n_vars;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut value = 0.0;
        for &(p, w) in &self.objective_posys {
            let (v, d) = self.posy_derivs(p, point);
            value += w * v;
            grad.axpy(w, &d.grad, 1.0);
            hess += d.hess * w;
        }
        let e = self.linear_derivs(&self.energy, point);
        for &(v, g) in &e.grad {
            grad[v] += q * g;
        }
        for &(a, b, h) in &e.hess {
            hess[(a, b)] += q * h;
        }
        (value, DenseDerivs { grad, hess })
    }
}
