//! `.fmjson` model files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "kind": "direct",
//!   "kernel": {"family": "anova", "degree": 2},
//!   "n_features": 4,
//!   "rank": 2,
//!   "augmented_count": 1,
//!   "feature_scale": null,
//!   "lambda": [1.0, -0.5],
//!   "p": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
//!   "metadata": {"beta": 0.1, "loss": "squared", "seed": 0, "epochs_run": 12}
//! }
//! ```
//!
//! `n_features` is the model dimension, i.e. after `augmented_count` dummy
//! features have been prepended. `p` is the `n_features x rank` basis matrix
//! flattened row-major. Lifted models carry `"kind": "lifted"` and a
//! `factors` array holding one row-major `n_features x rank` matrix per mode
//! instead of `lambda` and `p`; their kernel is `homogeneous` of any degree or
//! `anova` of degree 2. Numbers are written in shortest round-trip form, so a
//! saved model reloads bit-identically.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SolverError;
use crate::data::{augment, Sample, SampleView, SparseDataset};
use crate::direct::DirectModel;
use crate::kernels::KernelKind;
use crate::lifted::{LiftedKernel, LiftedModel};
use crate::loss::Loss;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed model file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported model format version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("model contains non-finite parameters")]
    NonFinite,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T> = std::result::Result<T, StoreError>;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Direct(DirectModel),
    Lifted(LiftedModel),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Direct(m) => m.n_features(),
            Model::Lifted(m) => m.n_features(),
        }
    }

    pub fn predict(&self, x: SampleView<'_>) -> std::result::Result<f64, SolverError> {
        match self {
            Model::Direct(m) => m.predict(x),
            Model::Lifted(m) => m.predict(x),
        }
    }

    pub fn predict_dataset(&self, ds: &SparseDataset) -> std::result::Result<Vec<f64>, SolverError> {
        match self {
            Model::Direct(m) => m.predict_dataset(ds),
            Model::Lifted(m) => m.predict_dataset(ds),
        }
    }

    /// Regularized training objective of this model on `ds`.
    pub fn objective(&self, ds: &SparseDataset, loss: Loss, beta: f64) -> std::result::Result<f64, SolverError> {
        match self {
            Model::Direct(m) => crate::direct::objective_direct(m, ds, loss, beta),
            Model::Lifted(m) => crate::lifted::objective_lifted(m, ds, loss, beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub beta: f64,
    pub loss: Loss,
    pub seed: u64,
    pub epochs_run: usize,
}

impl Default for TrainingMetadata {
    fn default() -> Self {
        TrainingMetadata {
            beta: 0.0,
            loss: Loss::Squared,
            seed: 0,
            epochs_run: 0,
        }
    }
}

/// A trained model together with the preprocessing needed to apply it to raw
/// samples.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredModel {
    pub model: Model,
    /// Number of constant-one features prepended before training.
    pub augmented_count: usize,
    /// Per-feature factors applied to raw features before augmentation.
    pub feature_scale: Option<Vec<f64>>,
    pub metadata: TrainingMetadata,
}

impl StoredModel {
    pub fn new(model: Model) -> Self {
        StoredModel {
            model,
            augmented_count: 0,
            feature_scale: None,
            metadata: TrainingMetadata::default(),
        }
    }

    /// Dimension of raw (unaugmented) samples.
    pub fn raw_features(&self) -> usize {
        self.model.n_features().saturating_sub(self.augmented_count)
    }

    /// Applies scaling and augmentation to a raw dataset.
    pub fn prepare(&self, raw: &SparseDataset) -> std::result::Result<SparseDataset, SolverError> {
        let expected = self.raw_features();
        if raw.n_features() > expected {
            return Err(SolverError::DimensionMismatch {
                model: expected,
                data: raw.n_features(),
            });
        }
        let mut ds = raw.with_n_features(expected)?;
        if let Some(scale) = &self.feature_scale {
            ds = ds.scale_features(scale)?;
        }
        Ok(augment(&ds, self.augmented_count))
    }

    pub fn predict_raw(&self, raw: &SparseDataset) -> std::result::Result<Vec<f64>, SolverError> {
        self.model.predict_dataset(&self.prepare(raw)?)
    }

    pub fn predict_raw_sample(&self, x: SampleView<'_>) -> std::result::Result<f64, SolverError> {
        let expected = self.raw_features();
        if x.dim != expected {
            return Err(SolverError::DimensionMismatch {
                model: expected,
                data: x.dim,
            });
        }
        let scaled = match &self.feature_scale {
            Some(scale) => Sample {
                indices: x.indices.to_vec(),
                values: x.iter().map(|(j, v)| v * scale[j]).collect(),
                dim: x.dim,
            },
            None => x.to_owned(),
        };
        let aug = crate::data::augment_sample(scaled.view(), self.augmented_count);
        self.model.predict(aug.view())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_stored(self)?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_stored()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Direct,
    Lifted,
}

/// Serialized form of a [`StoredModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: ModelKind,
    pub kernel: KernelKind,
    pub n_features: usize,
    pub rank: usize,
    pub augmented_count: usize,
    #[serde(default)]
    pub feature_scale: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<Vec<f64>>>,
    pub metadata: TrainingMetadata,
}

fn col_to_row_major(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for c in 0..cols {
        for r in 0..rows {
            out[r * cols + c] = data[c * rows + r];
        }
    }
    out
}

fn row_to_col_major(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

impl ModelFile {
    pub fn from_stored(stored: &StoredModel) -> Result<Self> {
        let finite = match &stored.model {
            Model::Direct(m) => m.is_finite(),
            Model::Lifted(m) => m.is_finite(),
        };
        if !finite {
            return Err(StoreError::NonFinite);
        }
        let base = ModelFile {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Direct,
            kernel: KernelKind::Anova(2),
            n_features: stored.model.n_features(),
            rank: 0,
            augmented_count: stored.augmented_count,
            feature_scale: stored.feature_scale.clone(),
            lambda: None,
            p: None,
            factors: None,
            metadata: stored.metadata.clone(),
        };
        Ok(match &stored.model {
            Model::Direct(m) => ModelFile {
                kernel: m.kernel(),
                rank: m.rank(),
                lambda: Some(m.lambda().to_vec()),
                p: Some(col_to_row_major(m.basis_matrix(), m.n_features(), m.rank())),
                ..base
            },
            Model::Lifted(m) => ModelFile {
                kind: ModelKind::Lifted,
                kernel: match m.kernel() {
                    LiftedKernel::Homogeneous => KernelKind::Homogeneous(m.degree()),
                    LiftedKernel::Anova2 => KernelKind::Anova(2),
                },
                rank: m.rank(),
                factors: Some(
                    (0..m.degree() as usize)
                        .map(|t| col_to_row_major(m.factor(t), m.n_features(), m.rank()))
                        .collect(),
                ),
                ..base
            },
        })
    }

    pub fn into_stored(self) -> Result<StoredModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(StoreError::Version {
                found: self.format_version,
            });
        }
        let (d, r) = (self.n_features, self.rank);
        let shape = |what: &str, len: usize| -> Result<()> {
            if len == d * r {
                Ok(())
            } else {
                Err(StoreError::Shape(format!(
                    "{what} has {len} entries, expected {d} x {r}"
                )))
            }
        };
        let model = match self.kind {
            ModelKind::Direct => {
                let lambda = self
                    .lambda
                    .ok_or_else(|| StoreError::Shape("direct model without lambda".into()))?;
                let p = self
                    .p
                    .ok_or_else(|| StoreError::Shape("direct model without p".into()))?;
                if lambda.len() != r {
                    return Err(StoreError::Shape(format!(
                        "lambda has {} entries, expected {r}",
                        lambda.len()
                    )));
                }
                shape("p", p.len())?;
                Model::Direct(DirectModel::new(self.kernel, d, lambda, row_to_col_major(&p, d, r))?)
            }
            ModelKind::Lifted => {
                let factors = self
                    .factors
                    .ok_or_else(|| StoreError::Shape("lifted model without factors".into()))?;
                for f in &factors {
                    shape("factor", f.len())?;
                }
                let kernel = match self.kernel {
                    KernelKind::Homogeneous(_) => LiftedKernel::Homogeneous,
                    KernelKind::Anova(2) => LiftedKernel::Anova2,
                    KernelKind::Anova(m) => {
                        return Err(StoreError::Shape(format!(
                            "lifted ANOVA models have degree 2, got {m}"
                        )))
                    }
                };
                if factors.len() != self.kernel.degree() as usize {
                    return Err(StoreError::Shape(format!(
                        "{} factors for a degree-{} kernel",
                        factors.len(),
                        self.kernel.degree()
                    )));
                }
                let factors = factors.iter().map(|f| row_to_col_major(f, d, r)).collect();
                Model::Lifted(LiftedModel::new(kernel, d, r, factors)?)
            }
        };
        if self.augmented_count > d {
            return Err(StoreError::Shape(format!(
                "augmented_count {} exceeds dimension {d}",
                self.augmented_count
            )));
        }
        if let Some(scale) = &self.feature_scale {
            if scale.len() != d - self.augmented_count {
                return Err(StoreError::Shape(format!(
                    "feature_scale has {} entries, expected {}",
                    scale.len(),
                    d - self.augmented_count
                )));
            }
        }
        Ok(StoredModel {
            model,
            augmented_count: self.augmented_count,
            feature_scale: self.feature_scale,
            metadata: self.metadata,
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("predictions ({pred}) and targets ({target}) differ in length")]
    LengthMismatch { pred: usize, target: usize },
    #[error("metric needs at least one sample")]
    Empty,
    #[error("R^2 is undefined for constant targets")]
    ConstantTargets,
}

fn check_lengths(pred: &[f64], y: &[f64]) -> std::result::Result<(), MetricError> {
    if pred.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            target: y.len(),
        });
    }
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], y: &[f64]) -> std::result::Result<f64, MetricError> {
    check_lengths(pred, y)?;
    let sse: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Coefficient of determination `1 - SSE / SST`.
pub fn r2(pred: &[f64], y: &[f64]) -> std::result::Result<f64, MetricError> {
    check_lengths(pred, y)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|t| (t - mean) * (t - mean)).sum();
    if sst == 0.0 {
        return Err(MetricError::ConstantTargets);
    }
    let sse: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - sse / sst)
}
