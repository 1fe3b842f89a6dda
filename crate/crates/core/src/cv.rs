//! K-fold cross-validation over a log-spaced grid of regularization strengths.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::SolverError;
use crate::data::SparseDataset;
use crate::pipeline::Pipeline;
use crate::store::{r2, rmse, MetricError, StoredModel};

#[derive(Debug, Error)]
pub enum CvError {
    #[error("invalid beta grid {0:?}: expected lo:hi:count with 0 < lo <= hi and count >= 1")]
    Grid(String),
    #[error("need at least as many samples as folds ({samples} < {folds})")]
    TooFewSamples { samples: usize, folds: usize },
    #[error("need at least 2 folds, got {0}")]
    Folds(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Rmse,
    R2,
}

impl Metric {
    pub fn compute(self, pred: &[f64], y: &[f64]) -> Result<f64, MetricError> {
        match self {
            Metric::Rmse => rmse(pred, y),
            Metric::R2 => r2(pred, y),
        }
    }

    /// True if `a` is a better score than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Metric::Rmse => a < b,
            Metric::R2 => a > b,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Rmse => "rmse",
            Metric::R2 => "r2",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rmse" => Ok(Metric::Rmse),
            "r2" => Ok(Metric::R2),
            other => Err(format!("unknown metric {other:?} (expected rmse or r2)")),
        }
    }
}

/// `count` values spaced evenly in log scale from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl BetaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    self.lo
                } else if i + 1 == self.count {
                    self.hi
                } else {
                    (a + (b - a) * i as f64 / (self.count - 1) as f64).exp()
                }
            })
            .collect()
    }
}

impl FromStr for BetaGrid {
    type Err = CvError;

    fn from_str(s: &str) -> Result<Self, CvError> {
        let bad = || CvError::Grid(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts[..] else { return Err(bad()) };
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && hi.is_finite() && count >= 1) {
            return Err(bad());
        }
        Ok(BetaGrid { lo, hi, count })
    }
}

/// Seeded assignment of `n` samples to `folds` folds of near-equal size.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>, CvError> {
    if folds < 2 {
        return Err(CvError::Folds(folds));
    }
    if n < folds {
        return Err(CvError::TooFewSamples { samples: n, folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub beta: f64,
    pub mean: f64,
    pub std: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub rows: Vec<CvRow>,
    pub best_beta: f64,
    /// Model retrained on all samples at `best_beta`.
    pub model: StoredModel,
}

/// Runs `folds`-fold cross-validation of `pipeline` for every beta in `grid`,
/// then retrains on the full data at the best beta. Folds of one beta are
/// trained concurrently.
pub fn cross_validate(
    raw: &SparseDataset,
    pipeline: &Pipeline,
    grid: &[f64],
    folds: usize,
    metric: Metric,
    seed: u64,
) -> Result<CvResult, CvError> {
    pipeline.check_supported()?;
    if grid.is_empty() {
        return Err(CvError::Grid(String::new()));
    }
    let assignment = fold_assignment(raw.n_samples(), folds, seed)?;
    let splits: Vec<(SparseDataset, SparseDataset)> = (0..folds)
        .map(|f| {
            let (train, test): (Vec<usize>, Vec<usize>) =
                (0..raw.n_samples()).partition(|&i| assignment[i] != f);
            (raw.subset(&train), raw.subset(&test))
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    for &beta in grid {
        let mut pipe = pipeline.clone();
        pipe.config.beta = beta;
        let scores: Vec<Result<f64, CvError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = splits
                .iter()
                .map(|(train, test)| {
                    let pipe = &pipe;
                    scope.spawn(move || -> Result<f64, CvError> {
                        let (model, _) = pipe.fit(train)?;
                        let pred = model.predict_raw(test)?;
                        Ok(fold_score(metric, &pred, test.targets())?)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fold thread panicked")).collect()
        });
        let fold_scores = scores.into_iter().collect::<Result<Vec<f64>, _>>()?;
        let n = fold_scores.len() as f64;
        let mean = fold_scores.iter().sum::<f64>() / n;
        let std = (fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        rows.push(CvRow {
            beta,
            mean,
            std,
            fold_scores,
        });
    }

    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if metric.better(row.mean, rows[best].mean) || rows[best].mean.is_nan() {
            best = i;
        }
    }
    let best_beta = rows[best].beta;
    let mut pipe = pipeline.clone();
    pipe.config.beta = best_beta;
    let (model, _) = pipe.fit(raw)?;
    Ok(CvResult {
        rows,
        best_beta,
        model,
    })
}

/// R² is undefined on single-sample or constant-target folds (leave-one-out);
/// such folds score 0 (no better than the fold mean).
fn fold_score(metric: Metric, pred: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    match metric.compute(pred, y) {
        Err(MetricError::ConstantTargets) if metric == Metric::R2 => Ok(0.0),
        other => other,
    }
}
