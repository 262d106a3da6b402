use qmz_core::poles::HyperplaneId;
use qmz_core::Error;
use serde_json::{json, Value};

use crate::complex_arg::ParseError;

/// Process exit codes. Stable: scripts depend on them.
pub mod exit {
    pub const OK: i32 = 0;
    pub const SUITE_FAILED: i32 = 1;
    pub const DOMAIN: i32 = 2;
    pub const BUDGET: i32 = 3;
    pub const POLE: i32 = 4;
}

/// A failure that ends the command, rendered as `{"error": ...}`.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("series did not converge after {terms} terms (error estimate {err_est:e})")]
    Unconverged { terms: usize, err_est: f64 },
    #[error("cache: {0}")]
    Cache(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) | CliError::Cache(_) => exit::DOMAIN,
            CliError::Unconverged { .. } => exit::BUDGET,
            CliError::Core(e) => match e {
                Error::Budget { .. } => exit::BUDGET,
                Error::NearPole(_) | Error::Singular { .. } => exit::POLE,
                Error::InvalidQ(_)
                | Error::NonFinite
                | Error::Domain(_)
                | Error::DepthMismatch { .. }
                | Error::TooLarge { .. } => exit::DOMAIN,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse(_) => "parse",
            CliError::Unconverged { .. } => "budget",
            CliError::Cache(_) => "cache",
            CliError::Core(e) => match e {
                Error::InvalidQ(_) => "invalid_q",
                Error::NonFinite => "non_finite",
                Error::Domain(_) => "domain",
                Error::DepthMismatch { .. } => "depth_mismatch",
                Error::Singular { .. } => "singular",
                Error::NearPole(_) => "near_pole",
                Error::Budget { .. } => "budget",
                Error::TooLarge { .. } => "too_large",
            },
        }
    }

    pub fn to_json(&self) -> Value {
        let mut body = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        let extra = match self {
            CliError::Parse(p) => Some(("position", json!(p.pos))),
            CliError::Core(Error::NearPole(hp)) => Some(("hyperplane", hyperplane_json(hp))),
            CliError::Core(Error::Singular { index }) => Some(("index", json!(index))),
            _ => None,
        };
        if let Some((k, v)) = extra {
            body[k] = v;
        }
        json!({ "error": body })
    }
}

pub fn hyperplane_json(hp: &HyperplaneId) -> Value {
    json!({ "j": hp.j, "k": hp.k, "m": hp.m })
}
