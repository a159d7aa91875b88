use std::fmt;

use serde::{Deserialize, Serialize};

/// Constraint families checked by the solver and the feasibility audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintClass {
    Causality,
    PowerBounds,
    Outage,
    TransferSign,
    Geometry,
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintClass::Causality => "causality",
            ConstraintClass::PowerBounds => "power_bounds",
            ConstraintClass::Outage => "outage",
            ConstraintClass::TransferSign => "transfer_sign",
            ConstraintClass::Geometry => "geometry",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config field `{field}`: {detail}")]
    InvalidConfig { field: String, detail: String },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("energy efficiency undefined: total consumed energy is zero")]
    UndefinedRatio,

    #[error("problem infeasible (binding constraint class: {class}): {detail}")]
    Infeasible {
        class: ConstraintClass,
        detail: String,
    },

    #[error("iteration limit reached in {stage} after {iterations} iterations")]
    MaxIterations { stage: String, iterations: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("brute-force grid has {dims} dimensions, limit is {limit}")]
    GridTooLarge { dims: usize, limit: usize },

    #[error("exact outage evaluation supports at most {limit} relays, got {relays}")]
    TooManyRelays { relays: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn dims(
        what: impl Into<String>,
        expected: impl fmt::Display,
        found: impl fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
