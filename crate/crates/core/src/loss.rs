//! Smooth convex losses. Both solvers majorize the loss curvature by the
//! smoothness constant `mu`, so only the value and first derivative are needed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("{loss} loss requires labels in {{-1, +1}}, got {label}")]
    InvalidLabel { loss: Loss, label: f64 },
    #[error("unknown loss {0:?} (expected squared, squared-hinge or logistic)")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// `(yhat - y)^2 / 2`, mu = 1.
    Squared,
    /// `max(1 - y yhat, 0)^2`, mu = 2.
    SquaredHinge,
    /// `log(1 + exp(-y yhat))`, mu = 1/4.
    Logistic,
}

impl Loss {
    pub fn value(self, y: f64, yhat: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (yhat - y) * (yhat - y),
            Loss::SquaredHinge => {
                let m = (1.0 - y * yhat).max(0.0);
                m * m
            }
            Loss::Logistic => softplus(-y * yhat),
        }
    }

    pub fn deriv(self, y: f64, yhat: f64) -> f64 {
        match self {
            Loss::Squared => yhat - y,
            Loss::SquaredHinge => -2.0 * y * (1.0 - y * yhat).max(0.0),
            // y (tau - 1) with tau = sigmoid(y yhat)
            Loss::Logistic => -y * sigmoid(-y * yhat),
        }
    }

    /// Upper bound on the second derivative.
    pub fn mu(self) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::SquaredHinge => 2.0,
            Loss::Logistic => 0.25,
        }
    }

    pub fn check_label(self, y: f64) -> Result<(), LossError> {
        match self {
            Loss::Squared => Ok(()),
            _ if y == 1.0 || y == -1.0 => Ok(()),
            _ => Err(LossError::InvalidLabel { loss: self, label: y }),
        }
    }

    pub fn check_labels(self, ys: &[f64]) -> Result<(), LossError> {
        ys.iter().try_for_each(|&y| self.check_label(y))
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Squared => "squared",
            Loss::SquaredHinge => "squared-hinge",
            Loss::Logistic => "logistic",
        })
    }
}

impl FromStr for Loss {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared" => Ok(Loss::Squared),
            "squared-hinge" => Ok(Loss::SquaredHinge),
            "logistic" => Ok(Loss::Logistic),
            other => Err(LossError::Unknown(other.to_string())),
        }
    }
}
