use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::kernels::KernelError;
use crate::loss::LossError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("model has {model} features but dataset has {data}")]
    DimensionMismatch { model: usize, data: usize },
    #[error("conversion failed: {0}")]
    Conversion(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// How the direct solver treats the basis weights `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaPolicy {
    /// `lambda = 1`, the factorization-machine setting.
    #[default]
    FixedOnes,
    /// Alternate an l1-regularized fit of `lambda` with the sweeps over `P`.
    Fit,
    /// `lambda_s = +-1` with probability 1/2 each, then fixed.
    RandomSigns,
}

impl fmt::Display for LambdaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LambdaPolicy::FixedOnes => "ones",
            LambdaPolicy::Fit => "fit",
            LambdaPolicy::RandomSigns => "signs",
        })
    }
}

impl FromStr for LambdaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ones" => Ok(LambdaPolicy::FixedOnes),
            "fit" => Ok(LambdaPolicy::Fit),
            "signs" => Ok(LambdaPolicy::RandomSigns),
            other => Err(format!("unknown lambda policy {other:?} (expected ones, fit or signs)")),
        }
    }
}

/// Where the lifted solver keeps the per-sample inner products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CacheMode {
    /// Recompute `xi` from scratch for every `(t, s)` block: O(m n) memory.
    #[default]
    PerBlock,
    /// Keep `<u^t_s, x_i>` for every `t, s, i` in sync: O(m r n) memory.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Regularization strength.
    pub beta: f64,
    /// Number of bases `k` (direct) or rank `r` (lifted).
    pub rank: usize,
    pub degree: u32,
    pub epochs: usize,
    /// Stop once the summed absolute parameter change of an epoch is `<= tol`.
    pub tol: f64,
    pub seed: u64,
    pub lambda_policy: LambdaPolicy,
    /// Standard deviation of the Gaussian initialization.
    pub init_std: f64,
    /// Recompute prediction caches from scratch every this many epochs.
    pub refresh_every: usize,
    pub cache_mode: CacheMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 0.0,
            rank: 10,
            degree: 2,
            epochs: 100,
            tol: 1e-6,
            seed: 0,
            lambda_policy: LambdaPolicy::FixedOnes,
            init_std: 0.01,
            refresh_every: 10,
            cache_mode: CacheMode::PerBlock,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate_common(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(SolverError::InvalidConfig(format!("tol must be >= 0, got {}", self.tol)));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "init_std must be >= 0, got {}",
                self.init_std
            )));
        }
        if self.rank == 0 {
            return Err(SolverError::InvalidConfig("rank must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Regularized objective after the epoch.
    pub objective: f64,
    /// Summed absolute parameter change during the epoch.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub initial_objective: f64,
    pub epochs: Vec<EpochRecord>,
    pub converged: bool,
}

impl TrainReport {
    pub fn final_objective(&self) -> f64 {
        self.epochs.last().map_or(self.initial_objective, |e| e.objective)
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }
}
