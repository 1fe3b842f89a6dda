//! Low-rank polynomial models — factorization machines (ANOVA kernels) and
//! polynomial networks (homogeneous polynomial kernels) — trained by
//! coordinate descent, either directly on the kernel expansion
//! `sum_s lambda_s K(p_s, x)` or on a lifted low-rank tensor.
//!
//! ```
//! use polyfm::prelude::*;
//!
//! let ds = polyfm::synth::sparse_regression(100, 10, 0.3, 0.1, 0).unwrap();
//! let config = TrainConfig { rank: 4, beta: 0.1, epochs: 20, ..TrainConfig::default() };
//! let (model, report) = train_direct(&ds, &config, Loss::Squared).unwrap();
//! assert!(report.final_objective() <= report.initial_objective);
//! let pred = model.predict(ds.row(0)).unwrap();
//! assert!(pred.is_finite());
//! ```

pub mod cli;
pub mod config;
pub mod cv;
pub mod data;
pub mod direct;
pub mod kernels;
pub mod lifted;
pub mod loss;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod pipeline;
pub mod store;
pub mod synth;
#[cfg(feature = "oracle")]
pub mod verify;

pub mod prelude {
    pub use crate::config::{CacheMode, LambdaPolicy, SolverError, TrainConfig, TrainReport};
    pub use crate::data::{augment, load_svmlight, Sample, SampleView, SparseDataset};
    pub use crate::direct::{objective_direct, train_direct, DirectModel};
    pub use crate::kernels::KernelKind;
    pub use crate::lifted::{lifted_to_direct, objective_lifted, train_lifted, LiftedKernel, LiftedModel};
    pub use crate::loss::Loss;
    pub use crate::pipeline::{KernelFamily, Pipeline, Scaling, Solver};
    pub use crate::store::{r2, rmse, Model, StoredModel};
}
