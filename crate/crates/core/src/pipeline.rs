//! Solver selection plus the preprocessing (scaling, dummy features) that is
//! stored alongside a trained model.

use std::fmt;
use std::str::FromStr;

use crate::config::{Result, SolverError, TrainConfig, TrainReport};
use crate::data::{augment, SparseDataset};
use crate::direct::{init_direct, train_direct_from};
use crate::lifted::{init_lifted, train_lifted_from, LiftedKernel};
use crate::loss::Loss;
use crate::store::{Model, StoredModel, TrainingMetadata};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Direct,
    Lifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Anova,
    /// Homogeneous polynomial kernel.
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    #[default]
    None,
    /// Divide every feature by its largest absolute training value.
    MaxAbs,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown value {other:?} (expected one of: {})",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

text_enum!(Solver { Direct => "direct", Lifted => "lifted" });
text_enum!(KernelFamily { Anova => "anova", Poly => "poly" });
text_enum!(Scaling { None => "none", MaxAbs => "max-abs" });

/// Everything needed to turn a raw dataset into a [`StoredModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub solver: Solver,
    pub family: KernelFamily,
    pub config: TrainConfig,
    pub loss: Loss,
    /// Number of constant-one features to prepend.
    pub augment: usize,
    pub scaling: Scaling,
}

impl Pipeline {
    pub fn new(solver: Solver, family: KernelFamily, config: TrainConfig) -> Self {
        Pipeline {
            solver,
            family,
            config,
            loss: Loss::Squared,
            augment: 0,
            scaling: Scaling::None,
        }
    }

    /// Rejects solver/kernel combinations that have no coordinate-descent
    /// algorithm here.
    pub fn check_supported(&self) -> Result<()> {
        let m = self.config.degree;
        match (self.solver, self.family) {
            (Solver::Direct, KernelFamily::Poly) => Err(SolverError::InvalidConfig(
                "the direct solver does not support the homogeneous polynomial kernel: its \
                 objective is not convex in a single coordinate; use --solver lifted"
                    .into(),
            )),
            (Solver::Direct, KernelFamily::Anova) if !(2..=3).contains(&m) => Err(
                SolverError::InvalidConfig(format!(
                    "the direct solver supports ANOVA degrees 2 and 3, got {m}"
                )),
            ),
            (Solver::Lifted, KernelFamily::Anova) if m != 2 => Err(SolverError::InvalidConfig(format!(
                "the lifted solver supports the ANOVA kernel only for degree 2, got {m}; \
                 higher degrees have no multi-convex lifted form"
            ))),
            (Solver::Lifted, KernelFamily::Poly) if m < 2 => Err(SolverError::InvalidConfig(format!(
                "the lifted solver needs degree >= 2, got {m}"
            ))),
            _ => Ok(()),
        }
    }

    /// Scales and augments a raw training set; also returns the scale factors.
    fn preprocess(&self, raw: &SparseDataset) -> Result<(SparseDataset, Option<Vec<f64>>)> {
        let scale = match self.scaling {
            Scaling::None => None,
            Scaling::MaxAbs => Some(raw.max_abs_scale()),
        };
        let scaled = match &scale {
            Some(s) => raw.scale_features(s)?,
            None => raw.clone(),
        };
        Ok((augment(&scaled, self.augment), scale))
    }

    /// The model `fit` would start from, without training.
    pub fn initial_model(&self, raw: &SparseDataset) -> Result<StoredModel> {
        self.check_supported()?;
        let (_, scale) = self.preprocess(raw)?;
        let d = raw.n_features() + self.augment;
        Ok(self.wrap(self.init(d)?, scale, 0))
    }

    fn init(&self, d: usize) -> Result<Model> {
        Ok(match (self.solver, self.family) {
            (Solver::Direct, _) => Model::Direct(init_direct(d, &self.config)?),
            (Solver::Lifted, KernelFamily::Poly) => {
                Model::Lifted(init_lifted(LiftedKernel::Homogeneous, d, &self.config)?)
            }
            (Solver::Lifted, KernelFamily::Anova) => {
                Model::Lifted(init_lifted(LiftedKernel::Anova2, d, &self.config)?)
            }
        })
    }

    fn wrap(&self, model: Model, scale: Option<Vec<f64>>, epochs_run: usize) -> StoredModel {
        StoredModel {
            model,
            augmented_count: self.augment,
            feature_scale: scale,
            metadata: TrainingMetadata {
                beta: self.config.beta,
                loss: self.loss,
                seed: self.config.seed,
                epochs_run,
            },
        }
    }

    /// Trains on a raw dataset; the returned model applies the same
    /// preprocessing when predicting raw samples.
    pub fn fit(&self, raw: &SparseDataset) -> Result<(StoredModel, TrainReport)> {
        self.check_supported()?;
        self.loss.check_labels(raw.targets())?;
        let (ds, scale) = self.preprocess(raw)?;
        let (model, report) = match self.init(ds.n_features())? {
            Model::Direct(m) => {
                let (m, r) = train_direct_from(m, &ds, &self.config, self.loss)?;
                (Model::Direct(m), r)
            }
            Model::Lifted(m) => {
                let (m, r) = train_lifted_from(m, &ds, &self.config, self.loss)?;
                (Model::Lifted(m), r)
            }
        };
        let epochs = report.epochs_run();
        Ok((self.wrap(model, scale, epochs), report))
    }
}
