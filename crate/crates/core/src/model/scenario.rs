use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::special;

/// Lowest admissible transmit power. Enforces strict positivity of user
/// powers and keeps log-powers on a compact domain.
pub const P_MIN: f64 = 1e-9;

/// Absolute feasibility tolerance for energy (J) and power (W) constraints.
pub const TOL_FEAS: f64 = 1e-9;

/// Relative slack allowed on the outage threshold by the feasibility audit.
pub const OUTAGE_REL_TOL: f64 = 1e-6;

/// Complete problem instance. Field names in scenario files match the
/// serde names below; matrices are row-major arrays of rows, all values SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "M")]
    pub users: usize,
    #[serde(rename = "N")]
    pub relays: usize,
    #[serde(rename = "K")]
    pub periods: usize,
    /// Bandwidth, Hz.
    #[serde(rename = "B")]
    pub bandwidth: f64,
    /// Fixed transmission rate, bits/s.
    pub alpha0: f64,
    /// Slot duration, s.
    #[serde(rename = "T")]
    pub slot: f64,
    pub p_max: f64,
    pub eta: f64,
    /// Nakagami fading parameter.
    pub m: f64,
    pub omega_h: Matrix,
    pub d_h: Matrix,
    pub beta_h: Matrix,
    #[serde(rename = "N0_h")]
    pub n0_h: Matrix,
    pub omega_g: Vec<f64>,
    pub d_g: Vec<f64>,
    pub beta_g: Vec<f64>,
    #[serde(rename = "N0_g")]
    pub n0_g: Vec<f64>,
    /// Harvested energy `Eu[i][k]`, J, usable from period k on.
    pub arrivals: Matrix,
    pub pr_out_0: f64,
    /// Initial battery content per user, J.
    #[serde(rename = "Eu_0", default)]
    pub eu_0: Vec<f64>,
}

/// Parameters of a single Nakagami link as they enter the outage formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub m: f64,
    pub alpha0: f64,
    pub bandwidth: f64,
    pub n0: f64,
    pub distance: f64,
    pub exponent: f64,
    pub omega: f64,
}

impl LinkParams {
    /// `m (2^{α0/B} - 1) N0 B / (d^{-β} Ω)`, in watts. The per-link outage at
    /// power `p` is `P(m, scale / p)`.
    pub fn scale(&self) -> f64 {
        let snr_threshold = (self.alpha0 / self.bandwidth * std::f64::consts::LN_2).exp_m1();
        let path_gain = self.distance.powf(-self.exponent);
        self.m * snr_threshold * self.n0 * self.bandwidth / (path_gain * self.omega)
    }

    /// Coefficient of the small-outage approximation `c p^{-m}`.
    pub fn coefficient(&self) -> f64 {
        self.scale().powf(self.m) / special::gamma(self.m + 1.0)
    }
}

/// Channel sufficient statistics: `c_u[i][j]` for user→relay links and
/// `c_r[j]` for relay→destination links, plus the per-link threshold scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCoefficients {
    pub m: f64,
    pub c_u: Matrix,
    pub c_r: Vec<f64>,
    pub scale_u: Matrix,
    pub scale_r: Vec<f64>,
}

impl LinkCoefficients {
    pub fn users(&self) -> usize {
        self.c_u.rows()
    }

    pub fn relays(&self) -> usize {
        self.c_r.len()
    }
}

pub fn compute_link_coefficients(config: &ScenarioConfig) -> LinkCoefficients {
    let scale_u = Matrix::from_fn(config.users, config.relays, |i, j| {
        config.user_link(i, j).scale()
    });
    let scale_r: Vec<f64> = (0..config.relays)
        .map(|j| config.relay_link(j).scale())
        .collect();
    let norm = special::gamma(config.m + 1.0);
    let m = config.m;
    LinkCoefficients {
        m,
        c_u: scale_u.map(|s| s.powf(m) / norm),
        c_r: scale_r.iter().map(|s| s.powf(m) / norm).collect(),
        scale_u,
        scale_r,
    }
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut config: ScenarioConfig = serde_json::from_str(s)?;
        config.fill_defaults();
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let mut config: ScenarioConfig = serde_json::from_value(value)?;
        config.fill_defaults();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// The bundled scenario with the published channel matrices and a
    /// representative arrival sequence.
    pub fn bundled() -> Self {
        Self::from_json_str(include_str!(
            "../../../../scenarios/two_user_four_relay.json"
        ))
        .expect("bundled scenario is valid")
    }

    fn fill_defaults(&mut self) {
        if self.eu_0.is_empty() {
            self.eu_0 = vec![0.0; self.users];
        }
    }

    pub fn user_link(&self, i: usize, j: usize) -> LinkParams {
        LinkParams {
            m: self.m,
            alpha0: self.alpha0,
            bandwidth: self.bandwidth,
            n0: self.n0_h[(i, j)],
            distance: self.d_h[(i, j)],
            exponent: self.beta_h[(i, j)],
            omega: self.omega_h[(i, j)],
        }
    }

    pub fn relay_link(&self, j: usize) -> LinkParams {
        LinkParams {
            m: self.m,
            alpha0: self.alpha0,
            bandwidth: self.bandwidth,
            n0: self.n0_g[j],
            distance: self.d_g[j],
            exponent: self.beta_g[j],
            omega: self.omega_g[j],
        }
    }

    /// The sub-network formed by the listed users and relays, with their
    /// links, arrivals and initial storage.
    pub fn restrict(&self, users: &[usize], relays: &[usize]) -> Result<Self> {
        if let Some(&i) = users.iter().find(|&&i| i >= self.users) {
            return Err(Error::InvalidArgument(format!("user {i} does not exist")));
        }
        if let Some(&j) = relays.iter().find(|&&j| j >= self.relays) {
            return Err(Error::InvalidArgument(format!("relay {j} does not exist")));
        }
        let pick = |m: &Matrix| {
            Matrix::from_fn(users.len(), relays.len(), |a, b| m[(users[a], relays[b])])
        };
        let pick_r = |v: &[f64]| relays.iter().map(|&j| v[j]).collect::<Vec<_>>();
        let mut c = self.clone();
        c.users = users.len();
        c.relays = relays.len();
        c.omega_h = pick(&self.omega_h);
        c.d_h = pick(&self.d_h);
        c.beta_h = pick(&self.beta_h);
        c.n0_h = pick(&self.n0_h);
        c.omega_g = pick_r(&self.omega_g);
        c.d_g = pick_r(&self.d_g);
        c.beta_g = pick_r(&self.beta_g);
        c.n0_g = pick_r(&self.n0_g);
        c.arrivals = Matrix::from_fn(users.len(), self.periods, |a, k| {
            self.arrivals[(users[a], k)]
        });
        c.eu_0 = users.iter().map(|&i| self.eu_0[i]).collect();
        c.validate()?;
        Ok(c)
    }

    /// Same scenario with a new arrival table, which also sets the number
    /// of periods.
    pub fn with_arrivals(&self, arrivals: Matrix) -> Result<Self> {
        let mut c = self.clone();
        c.periods = arrivals.cols();
        c.arrivals = arrivals;
        c.validate()?;
        Ok(c)
    }

    /// Cumulative arrivals `Σ_{l≤k} Eu[i][l] + Eu_0[i]`.
    pub fn cumulative_arrivals(&self, i: usize, k: usize) -> f64 {
        self.eu_0[i] + (0..=k).map(|l| self.arrivals[(i, l)]).sum::<f64>()
    }

    /// Expected bits per period when nothing is in outage: `M α0 T`.
    pub fn bits_per_period(&self) -> f64 {
        self.users as f64 * self.alpha0 * self.slot
    }

    pub fn validate(&self) -> Result<()> {
        let (m_users, n_relays, k_periods) = (self.users, self.relays, self.periods);
        if m_users < 1 {
            return Err(Error::config("M", "need at least one user"));
        }
        if n_relays < m_users {
            return Err(Error::config(
                "N",
                format!("need N >= M, got N={n_relays}, M={m_users}"),
            ));
        }
        if k_periods < 1 {
            return Err(Error::config("K", "need at least one period"));
        }
        positive("B", self.bandwidth)?;
        positive("alpha0", self.alpha0)?;
        positive("T", self.slot)?;
        positive("p_max", self.p_max)?;
        if self.p_max <= P_MIN {
            return Err(Error::config(
                "p_max",
                format!("must exceed p_min = {P_MIN:e} W"),
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(
                "eta",
                format!("must lie in (0, 1], got {}", self.eta),
            ));
        }
        if !(self.m >= 0.5 && self.m.is_finite()) {
            return Err(Error::config(
                "m",
                format!("must be >= 0.5, got {}", self.m),
            ));
        }
        if !(self.pr_out_0 > 0.0 && self.pr_out_0 <= 1.0) {
            return Err(Error::config(
                "pr_out_0",
                format!("must lie in (0, 1], got {}", self.pr_out_0),
            ));
        }
        for (name, mat) in [
            ("omega_h", &self.omega_h),
            ("d_h", &self.d_h),
            ("beta_h", &self.beta_h),
            ("N0_h", &self.n0_h),
        ] {
            mat.expect_shape(name, m_users, n_relays)
                .map_err(|e| Error::config(name, e.to_string()))?;
            for (i, j, v) in mat.indexed() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(
                        format!("{name}[{i}][{j}]"),
                        format!("must be > 0, got {v}"),
                    ));
                }
            }
        }
        for (name, vec) in [
            ("omega_g", &self.omega_g),
            ("d_g", &self.d_g),
            ("beta_g", &self.beta_g),
            ("N0_g", &self.n0_g),
        ] {
            if vec.len() != n_relays {
                return Err(Error::config(
                    name,
                    format!("expected length {n_relays}, got {}", vec.len()),
                ));
            }
            for (j, &v) in vec.iter().enumerate() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(
                        format!("{name}[{j}]"),
                        format!("must be > 0, got {v}"),
                    ));
                }
            }
        }
        self.arrivals
            .expect_shape("arrivals", m_users, k_periods)
            .map_err(|e| Error::config("arrivals", e.to_string()))?;
        for (i, k, v) in self.arrivals.indexed() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("arrivals[{i}][{k}]"),
                    format!("must be >= 0, got {v}"),
                ));
            }
        }
        if self.eu_0.len() != m_users {
            return Err(Error::config(
                "Eu_0",
                format!("expected length {m_users}, got {}", self.eu_0.len()),
            ));
        }
        for (i, &v) in self.eu_0.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("Eu_0[{i}]"),
                    format!("must be >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be > 0, got {v}")))
    }
}
