//! Lifted optimization: learn a rank-`r` tensor
//! `M = sum_s u^1_s (x) ... (x) u^m_s` whose symmetrization holds every
//! interaction weight. Predictions never materialize the tensor:
//!
//! * homogeneous: `yhat(x) = sum_s prod_t <u^t_s, x>`;
//! * ANOVA, `m = 2`: `yhat(x) = 1/2 [<U'x, V'x> - sum_s <u_s o x, v_s o x>]`.
//!
//! The model is linear in each factor matrix, so cyclic coordinate descent
//! over `(t, s, j)` with a Frobenius penalty `beta/2 sum_t ||U^t||^2` decreases
//! the objective monotonically.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{CacheMode, EpochRecord, Result, SolverError, TrainConfig, TrainReport};
use crate::data::{SampleView, SparseDataset};
use crate::direct::{max_rel_diff, CoordinateStep, DirectModel};
use crate::kernels::{sparse_dot, KernelKind};
use crate::loss::Loss;

/// Eigenvalues below this fraction of the largest one are dropped when
/// converting to a direct model.
pub const EIGEN_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftedKernel {
    Homogeneous,
    /// Degree-2 ANOVA; the two factors are usually called `U` and `V`.
    Anova2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedModel {
    kernel: LiftedKernel,
    n_features: usize,
    rank: usize,
    /// One `d x r` column-major matrix per tensor mode.
    factors: Vec<Vec<f64>>,
}

impl LiftedModel {
    pub fn new(kernel: LiftedKernel, n_features: usize, rank: usize, factors: Vec<Vec<f64>>) -> Result<Self> {
        let m = factors.len();
        match kernel {
            LiftedKernel::Homogeneous if m < 1 => {
                return Err(SolverError::InvalidConfig("need at least one factor".into()))
            }
            LiftedKernel::Anova2 if m != 2 => {
                return Err(SolverError::InvalidConfig(format!(
                    "lifted ANOVA needs exactly two factors, got {m}"
                )))
            }
            _ => {}
        }
        if let Some(f) = factors.iter().find(|f| f.len() != n_features * rank) {
            return Err(SolverError::InvalidConfig(format!(
                "factor has {} entries, expected {} x {}",
                f.len(),
                n_features,
                rank
            )));
        }
        Ok(LiftedModel {
            kernel,
            n_features,
            rank,
            factors,
        })
    }

    pub fn zeros(kernel: LiftedKernel, degree: u32, n_features: usize, rank: usize) -> Result<Self> {
        Self::new(
            kernel,
            n_features,
            rank,
            vec![vec![0.0; n_features * rank]; degree as usize],
        )
    }

    pub fn kernel(&self) -> LiftedKernel {
        self.kernel
    }

    pub fn degree(&self) -> u32 {
        self.factors.len() as u32
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Column-major `d x r` matrix of mode `t`.
    pub fn factor(&self, t: usize) -> &[f64] {
        &self.factors[t]
    }

    pub fn factor_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.factors[t]
    }

    /// Column `u^t_s`.
    pub fn column(&self, t: usize, s: usize) -> &[f64] {
        &self.factors[t][s * self.n_features..(s + 1) * self.n_features]
    }

    pub fn get(&self, t: usize, j: usize, s: usize) -> f64 {
        self.factors[t][s * self.n_features + j]
    }

    pub fn set(&mut self, t: usize, j: usize, s: usize, v: f64) {
        self.factors[t][s * self.n_features + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.factors.iter().flatten().all(|v| v.is_finite())
    }

    pub fn predict(&self, x: SampleView<'_>) -> Result<f64> {
        if x.dim != self.n_features {
            return Err(SolverError::DimensionMismatch {
                model: self.n_features,
                data: x.dim,
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: SampleView<'_>) -> f64 {
        match self.kernel {
            LiftedKernel::Homogeneous => (0..self.rank)
                .map(|s| {
                    (0..self.factors.len())
                        .map(|t| sparse_dot(self.column(t, s), x))
                        .product::<f64>()
                })
                .sum(),
            LiftedKernel::Anova2 => {
                let mut cross = 0.0;
                let mut diag = 0.0;
                for s in 0..self.rank {
                    let u = self.column(0, s);
                    let v = self.column(1, s);
                    cross += sparse_dot(u, x) * sparse_dot(v, x);
                    diag += x.iter().map(|(j, xj)| u[j] * v[j] * xj * xj).sum::<f64>();
                }
                0.5 * (cross - diag)
            }
        }
    }

    pub fn predict_dataset(&self, ds: &SparseDataset) -> Result<Vec<f64>> {
        self.check_dataset(ds)?;
        Ok(ds.rows().map(|x| self.predict_unchecked(x)).collect())
    }

    fn check_dataset(&self, ds: &SparseDataset) -> Result<()> {
        if ds.n_features() != self.n_features {
            return Err(SolverError::DimensionMismatch {
                model: self.n_features,
                data: ds.n_features(),
            });
        }
        Ok(())
    }

    /// `beta/2 * sum_t ||U^t||_F^2`
    pub fn penalty(&self, beta: f64) -> f64 {
        0.5 * beta * self.factors.iter().flatten().map(|v| v * v).sum::<f64>()
    }
}

/// `<sym(M), x^(x)m> = sum_s prod_t <u^t_s, x>`.
pub fn predict_lifted_h(model: &LiftedModel, x: SampleView<'_>) -> Result<f64> {
    if model.kernel != LiftedKernel::Homogeneous {
        return Err(SolverError::InvalidConfig("model is not homogeneous".into()));
    }
    model.predict(x)
}

/// `<sym(U V'), x x'>` restricted to pairs `j < j'`.
pub fn predict_lifted_a2(model: &LiftedModel, x: SampleView<'_>) -> Result<f64> {
    if model.kernel != LiftedKernel::Anova2 {
        return Err(SolverError::InvalidConfig("model is not lifted ANOVA".into()));
    }
    model.predict(x)
}

pub fn objective_lifted(model: &LiftedModel, ds: &SparseDataset, loss: Loss, beta: f64) -> Result<f64> {
    let pred = model.predict_dataset(ds)?;
    let data: f64 = pred
        .iter()
        .zip(ds.targets())
        .map(|(&yhat, &y)| loss.value(y, yhat))
        .sum();
    Ok(data + model.penalty(beta))
}

#[derive(Debug, Clone)]
pub struct LiftedCaches {
    yhat: Vec<f64>,
    /// Per-sample multiplier of the current `(t, s)` block: `xi_i` for the
    /// homogeneous kernel, `<other_s, x_i> / 2` for ANOVA.
    coef: Vec<f64>,
    block: Option<(usize, usize)>,
    /// `dots[(t * r + s) * n + i] = <u^t_s, x_i>` in full-cache mode.
    dots: Option<Vec<f64>>,
}

impl LiftedCaches {
    pub fn new(model: &LiftedModel, ds: &SparseDataset, mode: CacheMode) -> Result<Self> {
        let yhat = model.predict_dataset(ds)?;
        let dots = match mode {
            CacheMode::PerBlock => None,
            CacheMode::Full => Some(all_dots(model, ds)),
        };
        Ok(LiftedCaches {
            yhat,
            coef: Vec::new(),
            block: None,
            dots,
        })
    }

    pub fn yhat(&self) -> &[f64] {
        &self.yhat
    }

    pub fn refresh(&mut self, model: &LiftedModel, ds: &SparseDataset) -> Result<()> {
        self.yhat = model.predict_dataset(ds)?;
        if self.dots.is_some() {
            self.dots = Some(all_dots(model, ds));
        }
        if let Some((t, s)) = self.block {
            self.prepare_block(model, ds, t, s);
        }
        Ok(())
    }

    pub fn drift(&self, model: &LiftedModel, ds: &SparseDataset) -> Result<f64> {
        Ok(max_rel_diff(&model.predict_dataset(ds)?, &self.yhat))
    }

    pub fn prepare_block(&mut self, model: &LiftedModel, ds: &SparseDataset, t: usize, s: usize) {
        let n = ds.n_samples();
        let m = model.factors.len();
        let r = model.rank;
        self.coef.clear();
        match (model.kernel, &self.dots) {
            (LiftedKernel::Homogeneous, Some(dots)) => {
                self.coef.extend((0..n).map(|i| {
                    (0..m)
                        .filter(|&tt| tt != t)
                        .map(|tt| dots[(tt * r + s) * n + i])
                        .product::<f64>()
                }));
            }
            (LiftedKernel::Homogeneous, None) => {
                self.coef.extend(ds.rows().map(|x| {
                    (0..m)
                        .filter(|&tt| tt != t)
                        .map(|tt| sparse_dot(model.column(tt, s), x))
                        .product::<f64>()
                }));
            }
            (LiftedKernel::Anova2, Some(dots)) => {
                let other = 1 - t;
                self.coef
                    .extend((0..n).map(|i| 0.5 * dots[(other * r + s) * n + i]));
            }
            (LiftedKernel::Anova2, None) => {
                let other = model.column(1 - t, s);
                self.coef.extend(ds.rows().map(|x| 0.5 * sparse_dot(other, x)));
            }
        }
        self.block = Some((t, s));
    }
}

fn all_dots(model: &LiftedModel, ds: &SparseDataset) -> Vec<f64> {
    let n = ds.n_samples();
    let mut dots = Vec::with_capacity(model.factors.len() * model.rank * n);
    for t in 0..model.factors.len() {
        for s in 0..model.rank {
            let u = model.column(t, s);
            dots.extend(ds.rows().map(|x| sparse_dot(u, x)));
        }
    }
    dots
}

/// `d yhat_i / d u^t_js` given the block multiplier.
#[inline]
fn partial(kernel: LiftedKernel, model: &LiftedModel, coef: f64, t: usize, j: usize, s: usize, x: f64) -> f64 {
    match kernel {
        LiftedKernel::Homogeneous => coef * x,
        LiftedKernel::Anova2 => coef * x - 0.5 * model.get(1 - t, j, s) * x * x,
    }
}

#[allow(clippy::too_many_arguments)]
fn coordinate_step(
    model: &LiftedModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &LiftedCaches,
    t: usize,
    s: usize,
    j: usize,
) -> CoordinateStep {
    let (rows, vals) = ds.column(j);
    let y = ds.targets();
    let mut sum_sq = 0.0;
    let mut grad = 0.0;
    for (&i, &x) in rows.iter().zip(vals) {
        let g = partial(model.kernel, model, caches.coef[i], t, j, s, x);
        sum_sq += g * g;
        grad += loss.deriv(y[i], caches.yhat[i]) * g;
    }
    CoordinateStep {
        grad: grad + beta * model.get(t, j, s),
        eta: loss.mu() * sum_sq + beta,
    }
}

/// Objective gradient and curvature bound for `u^t_js`, from scratch.
pub fn coordinate_gradient_lifted(
    model: &LiftedModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    t: usize,
    s: usize,
    j: usize,
) -> Result<CoordinateStep> {
    let mut caches = LiftedCaches::new(model, ds, CacheMode::PerBlock)?;
    caches.prepare_block(model, ds, t, s);
    Ok(coordinate_step(model, ds, loss, beta, &caches, t, s, j))
}

/// One majorized Newton step on `u^t_js`; returns `|delta|`.
#[allow(clippy::too_many_arguments)]
pub fn update_coordinate_lifted(
    model: &mut LiftedModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &mut LiftedCaches,
    t: usize,
    s: usize,
    j: usize,
) -> Result<f64> {
    model.check_dataset(ds)?;
    if caches.block != Some((t, s)) {
        caches.prepare_block(model, ds, t, s);
    }
    Ok(update_unchecked(model, ds, loss, beta, caches, t, s, j))
}

#[allow(clippy::too_many_arguments)]
fn update_unchecked(
    model: &mut LiftedModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &mut LiftedCaches,
    t: usize,
    s: usize,
    j: usize,
) -> f64 {
    let step = coordinate_step(model, ds, loss, beta, caches, t, s, j);
    if step.eta <= 0.0 {
        return 0.0;
    }
    let delta = step.grad / step.eta;
    let old = model.get(t, j, s);
    let new = old - delta;
    model.set(t, j, s, new);
    let change = new - old;
    if change == 0.0 {
        return delta.abs();
    }
    let n = ds.n_samples();
    let r = model.rank;
    let kernel = model.kernel;
    let (rows, vals) = ds.column(j);
    for (&i, &x) in rows.iter().zip(vals) {
        let g = partial(kernel, model, caches.coef[i], t, j, s, x);
        caches.yhat[i] += change * g;
        if let Some(dots) = caches.dots.as_mut() {
            dots[(t * r + s) * n + i] += change * x;
        }
    }
    delta.abs()
}

/// One cyclic sweep over all `(t, s, j)`; for the ANOVA kernel this is a
/// block sweep over `U` and then `V`. Returns the summed absolute step.
pub fn epoch_update_lifted(
    model: &mut LiftedModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &mut LiftedCaches,
) -> Result<f64> {
    model.check_dataset(ds)?;
    let mut total = 0.0;
    for t in 0..model.factors.len() {
        for s in 0..model.rank {
            caches.prepare_block(model, ds, t, s);
            for j in 0..model.n_features {
                total += update_unchecked(model, ds, loss, beta, caches, t, s, j);
            }
        }
    }
    caches.block = None;
    #[cfg(debug_assertions)]
    {
        let drift = caches.drift(model, ds)?;
        debug_assert!(drift <= 1e-8, "prediction cache drifted by {drift:e}");
    }
    Ok(total)
}

/// Same sweep as [`epoch_update_lifted`], restricted to the ANOVA kernel.
pub fn epoch_update_lifted_a2(
    model: &mut LiftedModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &mut LiftedCaches,
) -> Result<f64> {
    if model.kernel != LiftedKernel::Anova2 {
        return Err(SolverError::InvalidConfig("model is not lifted ANOVA".into()));
    }
    epoch_update_lifted(model, ds, loss, beta, caches)
}

pub fn init_lifted(kernel: LiftedKernel, n_features: usize, config: &TrainConfig) -> Result<LiftedModel> {
    validate_lifted(kernel, config)?;
    let normal = Normal::new(0.0, config.init_std)
        .map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let factors = (0..config.degree)
        .map(|_| {
            (0..n_features * config.rank)
                .map(|_| normal.sample(&mut rng))
                .collect()
        })
        .collect();
    LiftedModel::new(kernel, n_features, config.rank, factors)
}

fn validate_lifted(kernel: LiftedKernel, config: &TrainConfig) -> Result<()> {
    config.validate_common()?;
    match kernel {
        LiftedKernel::Homogeneous if config.degree < 2 => Err(SolverError::InvalidConfig(format!(
            "lifted homogeneous kernel needs degree >= 2, got {}",
            config.degree
        ))),
        LiftedKernel::Anova2 if config.degree != 2 => Err(SolverError::InvalidConfig(format!(
            "lifted ANOVA is only available for degree 2, got {}",
            config.degree
        ))),
        _ => Ok(()),
    }
}

pub fn train_lifted(
    ds: &SparseDataset,
    config: &TrainConfig,
    loss: Loss,
    kernel: LiftedKernel,
) -> Result<(LiftedModel, TrainReport)> {
    let model = init_lifted(kernel, ds.n_features(), config)?;
    train_lifted_from(model, ds, config, loss)
}

pub fn train_lifted_from(
    mut model: LiftedModel,
    ds: &SparseDataset,
    config: &TrainConfig,
    loss: Loss,
) -> Result<(LiftedModel, TrainReport)> {
    config.validate_common()?;
    loss.check_labels(ds.targets())?;
    let beta = config.beta;
    let mut report = TrainReport {
        initial_objective: objective_lifted(&model, ds, loss, beta)?,
        ..TrainReport::default()
    };
    let mut caches = LiftedCaches::new(&model, ds, config.cache_mode)?;
    let refresh_every = config.refresh_every.max(1);
    for epoch in 1..=config.epochs {
        if epoch > 1 && (epoch - 1) % refresh_every == 0 {
            caches.refresh(&model, ds)?;
        }
        let delta = epoch_update_lifted(&mut model, ds, loss, beta, &mut caches)?;
        report.epochs.push(EpochRecord {
            epoch,
            objective: objective_lifted(&model, ds, loss, beta)?,
            delta,
        });
        if delta <= config.tol {
            report.converged = true;
            break;
        }
    }
    Ok((model, report))
}

/// Reduced eigendecomposition of `sym(U V') = P diag(lambda) P'` as a direct
/// model with the matching degree-2 kernel. Predictions are preserved and
/// `k <= 2r`.
pub fn lifted_to_direct(model: &LiftedModel) -> Result<DirectModel> {
    if model.degree() != 2 {
        return Err(SolverError::Conversion(format!(
            "only degree-2 models can be converted, got degree {}",
            model.degree()
        )));
    }
    let d = model.n_features;
    let u = DMatrix::from_column_slice(d, model.rank, model.factor(0));
    let v = DMatrix::from_column_slice(d, model.rank, model.factor(1));
    let uv = &u * v.transpose();
    let w = (&uv + uv.transpose()) * 0.5;
    let kernel = match model.kernel {
        LiftedKernel::Homogeneous => KernelKind::Homogeneous(2),
        LiftedKernel::Anova2 => KernelKind::Anova(2),
    };
    if d == 0 {
        return DirectModel::new(kernel, 0, Vec::new(), Vec::new());
    }
    let eig = SymmetricEigen::try_new(w, f64::EPSILON, 10_000)
        .ok_or_else(|| SolverError::Conversion("symmetric eigensolver did not converge".into()))?;
    let largest = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut lambda = Vec::new();
    let mut basis = Vec::new();
    if largest > 0.0 {
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
        for idx in order {
            let ev = eig.eigenvalues[idx];
            if ev.abs() <= EIGEN_CUTOFF * largest {
                continue;
            }
            lambda.push(ev);
            basis.extend(eig.eigenvectors.column(idx).iter());
        }
    }
    DirectModel::new(kernel, d, lambda, basis)
}
