use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::ScenarioConfig;

/// Decision variables: user powers `p_u[i][k]` (W), relay powers
/// `p_r[j][k]` (W) and one transfer matrix per period, `transfers[k][i][i']`
/// joules sent from user i to user i'.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub p_u: Matrix,
    pub p_r: Matrix,
    pub transfers: Vec<Matrix>,
}

impl Policy {
    pub fn zeros(users: usize, relays: usize, periods: usize) -> Self {
        Policy {
            p_u: Matrix::zeros(users, periods),
            p_r: Matrix::zeros(relays, periods),
            transfers: vec![Matrix::zeros(users, users); periods],
        }
    }

    pub fn for_config(config: &ScenarioConfig) -> Self {
        Self::zeros(config.users, config.relays, config.periods)
    }

    pub fn users(&self) -> usize {
        self.p_u.rows()
    }

    pub fn relays(&self) -> usize {
        self.p_r.rows()
    }

    pub fn periods(&self) -> usize {
        self.p_u.cols()
    }

    pub fn check_dims(&self, config: &ScenarioConfig) -> Result<()> {
        let (m, n, k) = (config.users, config.relays, config.periods);
        self.p_u.expect_shape("policy p_u", m, k)?;
        self.p_r.expect_shape("policy p_r", n, k)?;
        if self.transfers.len() != k {
            return Err(Error::dims(
                "policy transfers (periods)",
                k,
                self.transfers.len(),
            ));
        }
        for (kk, t) in self.transfers.iter().enumerate() {
            t.expect_shape(&format!("policy transfers[{kk}]"), m, m)?;
        }
        Ok(())
    }

    /// Joules sent by user `i` during period `k`.
    pub fn sent(&self, i: usize, k: usize) -> f64 {
        self.transfers[k].row(i).iter().sum()
    }

    /// Joules sent to user `i` during period `k`, before the efficiency loss.
    pub fn received_raw(&self, i: usize, k: usize) -> f64 {
        let t = &self.transfers[k];
        (0..t.rows()).map(|src| t[(src, i)]).sum()
    }

    pub fn user_powers(&self, k: usize) -> Vec<f64> {
        self.p_u.column(k)
    }

    pub fn relay_powers(&self, k: usize) -> Vec<f64> {
        self.p_r.column(k)
    }

    pub fn total_transferred(&self) -> f64 {
        self.transfers.iter().map(Matrix::sum).sum()
    }

    /// Componentwise sum, for linearity checks.
    pub fn add(&self, other: &Policy) -> Policy {
        let add = |a: &Matrix, b: &Matrix| {
            Matrix::from_fn(a.rows(), a.cols(), |r, c| a[(r, c)] + b[(r, c)])
        };
        Policy {
            p_u: add(&self.p_u, &other.p_u),
            p_r: add(&self.p_r, &other.p_r),
            transfers: self
                .transfers
                .iter()
                .zip(&other.transfers)
                .map(|(a, b)| add(a, b))
                .collect(),
        }
    }

    /// Replaces opposing transfers between each user pair in a period with
    /// their net. Only loss-free when `eta == 1`.
    pub fn net_opposing_transfers(&mut self) {
        for t in &mut self.transfers {
            let m = t.rows();
            for a in 0..m {
                for b in (a + 1)..m {
                    let net = t[(a, b)] - t[(b, a)];
                    t[(a, b)] = net.max(0.0);
                    t[(b, a)] = (-net).max(0.0);
                }
            }
        }
    }
}
