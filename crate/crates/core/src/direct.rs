//! Direct optimization of kernel expansions
//! `yhat(x) = sum_s lambda_s K(p_s, x)`.
//!
//! With `K = A^m` the objective is convex in `lambda` and in every row of `P`,
//! so it is minimized by cyclic coordinate descent: an l1-regularized pass over
//! `lambda` followed by a sweep over all `p_js`, `s`-major. Each coordinate
//! step is a Newton step on a curvature majorant (exact for squared loss),
//! and the per-sample statistics `<p_s, x_i>`, `A^2(p_s, x_i)` and `yhat_i` are
//! kept in sync so that one sweep costs `O(m k nnz(X))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{LambdaPolicy, Result, SolverError, TrainConfig, TrainReport, EpochRecord};
use crate::data::{SampleView, SparseDataset};
use crate::kernels::{anova_partial, KernelKind, PerSampleCache};
use crate::loss::Loss;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectModel {
    kernel: KernelKind,
    n_features: usize,
    lambda: Vec<f64>,
    /// `d x k`, column `s` (the basis `p_s`) stored contiguously.
    basis: Vec<f64>,
}

impl DirectModel {
    /// `basis` is column-major: `basis[s * n_features + j] = p_js`.
    pub fn new(kernel: KernelKind, n_features: usize, lambda: Vec<f64>, basis: Vec<f64>) -> Result<Self> {
        if basis.len() != n_features * lambda.len() {
            return Err(SolverError::InvalidConfig(format!(
                "basis has {} entries, expected {} x {}",
                basis.len(),
                n_features,
                lambda.len()
            )));
        }
        if kernel.degree() == 0 {
            return Err(SolverError::InvalidConfig("kernel degree must be >= 1".into()));
        }
        Ok(DirectModel {
            kernel,
            n_features,
            lambda,
            basis,
        })
    }

    pub fn zeros(kernel: KernelKind, n_features: usize, rank: usize) -> Self {
        DirectModel {
            kernel,
            n_features,
            lambda: vec![0.0; rank],
            basis: vec![0.0; n_features * rank],
        }
    }

    pub fn kernel(&self) -> KernelKind {
        self.kernel
    }

    pub fn degree(&self) -> u32 {
        self.kernel.degree()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of bases `k`.
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_mut(&mut self) -> &mut [f64] {
        &mut self.lambda
    }

    pub fn basis(&self, s: usize) -> &[f64] {
        &self.basis[s * self.n_features..(s + 1) * self.n_features]
    }

    pub fn basis_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.basis[s * self.n_features..(s + 1) * self.n_features]
    }

    /// Column-major `d x k` parameter block.
    pub fn basis_matrix(&self) -> &[f64] {
        &self.basis
    }

    pub fn get(&self, j: usize, s: usize) -> f64 {
        self.basis[s * self.n_features + j]
    }

    pub fn set(&mut self, j: usize, s: usize, value: f64) {
        self.basis[s * self.n_features + j] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.iter().chain(&self.basis).all(|v| v.is_finite())
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
        (0..self.rank())
            .filter(|&s| self.lambda[s] != 0.0)
            .map(|s| self.lambda[s] * self.kernel.eval_unchecked(self.basis(s), x))
            .sum()
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

    /// `beta * sum_s |lambda_s| ||p_s||^2`
    pub fn penalty(&self, beta: f64) -> f64 {
        (0..self.rank())
            .map(|s| self.lambda[s].abs() * sq_norm(self.basis(s)))
            .sum::<f64>()
            * beta
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// `sum_i loss(y_i, yhat_i) + beta * sum_s |lambda_s| ||p_s||^2`.
pub fn objective_direct(model: &DirectModel, ds: &SparseDataset, loss: Loss, beta: f64) -> Result<f64> {
    let pred = model.predict_dataset(ds)?;
    let data: f64 = pred
        .iter()
        .zip(ds.targets())
        .map(|(&yhat, &y)| loss.value(y, yhat))
        .sum();
    Ok(data + model.penalty(beta))
}

/// Predictions plus the statistics of the basis currently being swept.
#[derive(Debug, Clone)]
pub struct DirectCaches {
    yhat: Vec<f64>,
    block: Option<usize>,
    stats: Vec<PerSampleCache>,
}

impl DirectCaches {
    pub fn new(model: &DirectModel, ds: &SparseDataset) -> Result<Self> {
        Ok(DirectCaches {
            yhat: model.predict_dataset(ds)?,
            block: None,
            stats: Vec::new(),
        })
    }

    pub fn yhat(&self) -> &[f64] {
        &self.yhat
    }

    /// Recomputes everything from scratch.
    pub fn refresh(&mut self, model: &DirectModel, ds: &SparseDataset) -> Result<()> {
        self.yhat = model.predict_dataset(ds)?;
        if let Some(s) = self.block {
            self.prepare_block(model, ds, s);
        }
        Ok(())
    }

    /// Loads `<p_s, x_i>` and `A^2(p_s, x_i)` for all samples.
    pub fn prepare_block(&mut self, model: &DirectModel, ds: &SparseDataset, s: usize) {
        let p = model.basis(s);
        self.stats.clear();
        self.stats.extend(ds.rows().map(|x| PerSampleCache::compute(p, x)));
        self.block = Some(s);
    }

    /// Largest relative deviation of the cached predictions from a fresh
    /// computation.
    pub fn drift(&self, model: &DirectModel, ds: &SparseDataset) -> Result<f64> {
        let fresh = model.predict_dataset(ds)?;
        Ok(max_rel_diff(&fresh, &self.yhat))
    }
}

pub(crate) fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

fn check_direct_kernel(model: &DirectModel) -> Result<u32> {
    match model.kernel() {
        KernelKind::Anova(m @ (2 | 3)) => Ok(m),
        other => Err(SolverError::InvalidConfig(format!(
            "coordinate descent on the direct objective needs an ANOVA kernel of degree 2 or 3, got {other:?}"
        ))),
    }
}

/// Gradient of the objective w.r.t. `p_js` and its curvature bound `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateStep {
    pub grad: f64,
    pub eta: f64,
}

#[allow(clippy::too_many_arguments)]
fn coordinate_step(
    model: &DirectModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &DirectCaches,
    s: usize,
    j: usize,
    m: u32,
) -> CoordinateStep {
    let lam = model.lambda[s];
    let p_js = model.get(j, s);
    let (rows, vals) = ds.column(j);
    let y = ds.targets();
    let mut sum_sq = 0.0;
    let mut grad = 0.0;
    for (&i, &x) in rows.iter().zip(vals) {
        let g = lam * anova_partial(m, p_js, x, &caches.stats[i]);
        sum_sq += g * g;
        grad += loss.deriv(y[i], caches.yhat[i]) * g;
    }
    let reg = 2.0 * beta * lam.abs();
    CoordinateStep {
        grad: grad + reg * p_js,
        eta: loss.mu() * sum_sq + reg,
    }
}

/// Objective gradient and curvature bound for coordinate `p_js`, computed
/// from scratch.
pub fn coordinate_gradient(
    model: &DirectModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    s: usize,
    j: usize,
) -> Result<CoordinateStep> {
    let m = check_direct_kernel(model)?;
    let mut caches = DirectCaches::new(model, ds)?;
    caches.prepare_block(model, ds, s);
    Ok(coordinate_step(model, ds, loss, beta, &caches, s, j, m))
}

/// Minimizes the majorized coordinate objective in `p_js` and synchronizes
/// the caches. Returns `|delta|` (0 when the coordinate has zero curvature).
pub fn update_coordinate(
    model: &mut DirectModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &mut DirectCaches,
    s: usize,
    j: usize,
) -> Result<f64> {
    let m = check_direct_kernel(model)?;
    model.check_dataset(ds)?;
    if caches.block != Some(s) {
        caches.prepare_block(model, ds, s);
    }
    Ok(update_coordinate_unchecked(model, ds, loss, beta, caches, s, j, m))
}

#[allow(clippy::too_many_arguments)]
fn update_coordinate_unchecked(
    model: &mut DirectModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &mut DirectCaches,
    s: usize,
    j: usize,
    m: u32,
) -> f64 {
    let step = coordinate_step(model, ds, loss, beta, caches, s, j, m);
    if step.eta <= 0.0 {
        return 0.0;
    }
    let delta = step.grad / step.eta;
    let old = model.get(j, s);
    let new = old - delta;
    model.set(j, s, new);
    let change = new - old;
    if change == 0.0 {
        return delta.abs();
    }
    // A^m is affine in p_js, so every statistic moves by change * slope,
    // with slopes evaluated at the old point.
    let lam = model.lambda[s];
    let (rows, vals) = ds.column(j);
    for (&i, &x) in rows.iter().zip(vals) {
        let st = &mut caches.stats[i];
        let g = anova_partial(m, old, x, st);
        caches.yhat[i] += change * lam * g;
        if m == 3 {
            st.a2 += change * (st.dot - old * x) * x;
        }
        st.dot += change * x;
    }
    delta.abs()
}

/// One cyclic sweep over every `p_js`, `s`-major. Returns the summed absolute
/// step length.
pub fn epoch_update_p(
    model: &mut DirectModel,
    ds: &SparseDataset,
    loss: Loss,
    beta: f64,
    caches: &mut DirectCaches,
) -> Result<f64> {
    let m = check_direct_kernel(model)?;
    model.check_dataset(ds)?;
    let mut total = 0.0;
    for s in 0..model.rank() {
        caches.prepare_block(model, ds, s);
        for j in 0..model.n_features() {
            total += update_coordinate_unchecked(model, ds, loss, beta, caches, s, j, m);
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

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Minimizes the objective over `lambda` with `P` fixed. With `w_s = ||p_s||^2`
/// this is `sum_i loss(y_i, <lambda, z_i>) + beta sum_s w_s |lambda_s|` with
/// `z_is = K(p_s, x_i)`, solved by cyclic proximal coordinate steps (exact for
/// squared loss). Returns the number of passes.
pub fn fit_lambda(model: &mut DirectModel, ds: &SparseDataset, loss: Loss, beta: f64, tol: f64) -> Result<usize> {
    const MAX_PASSES: usize = 1000;
    model.check_dataset(ds)?;
    let n = ds.n_samples();
    let k = model.rank();
    let mut z = vec![0.0; n * k];
    for s in 0..k {
        let p = model.basis(s);
        for (i, x) in ds.rows().enumerate() {
            z[s * n + i] = model.kernel.eval_unchecked(p, x);
        }
    }
    let weights: Vec<f64> = (0..k).map(|s| beta * sq_norm(model.basis(s))).collect();
    let curvature: Vec<f64> = (0..k)
        .map(|s| loss.mu() * sq_norm(&z[s * n..(s + 1) * n]))
        .collect();
    let mut yhat = vec![0.0; n];
    for s in 0..k {
        let lam = model.lambda[s];
        if lam != 0.0 {
            for (yh, zi) in yhat.iter_mut().zip(&z[s * n..(s + 1) * n]) {
                *yh += lam * zi;
            }
        }
    }
    let y = ds.targets();
    let tol = tol.max(1e-12);
    let mut passes = 0;
    while passes < MAX_PASSES {
        passes += 1;
        let mut change = 0.0;
        for s in 0..k {
            let zs = &z[s * n..(s + 1) * n];
            let old = model.lambda[s];
            let h = curvature[s];
            let new = if h > 0.0 {
                let g: f64 = zs
                    .iter()
                    .zip(&yhat)
                    .zip(y)
                    .map(|((&zi, &yh), &yi)| loss.deriv(yi, yh) * zi)
                    .sum();
                soft_threshold(old - g / h, weights[s] / h)
            } else if weights[s] > 0.0 {
                0.0
            } else {
                old
            };
            if new != old {
                let diff = new - old;
                for (yh, zi) in yhat.iter_mut().zip(zs) {
                    *yh += diff * zi;
                }
                model.lambda[s] = new;
                change += diff.abs();
            }
        }
        if change <= tol {
            break;
        }
    }
    Ok(passes)
}

/// Random initialization: `p_js ~ N(0, init_std^2)`, then `lambda` per policy.
pub fn init_direct(n_features: usize, config: &TrainConfig) -> Result<DirectModel> {
    let normal = Normal::new(0.0, config.init_std)
        .map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let basis: Vec<f64> = (0..n_features * config.rank)
        .map(|_| normal.sample(&mut rng))
        .collect();
    let lambda = match config.lambda_policy {
        LambdaPolicy::FixedOnes | LambdaPolicy::Fit => vec![1.0; config.rank],
        LambdaPolicy::RandomSigns => (0..config.rank)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect(),
    };
    DirectModel::new(KernelKind::Anova(config.degree), n_features, lambda, basis)
}

fn validate_direct(ds: &SparseDataset, config: &TrainConfig, loss: Loss) -> Result<()> {
    config.validate_common()?;
    if !(2..=3).contains(&config.degree) {
        return Err(SolverError::InvalidConfig(format!(
            "direct coordinate descent supports ANOVA degree 2 or 3, got {}",
            config.degree
        )));
    }
    loss.check_labels(ds.targets())?;
    Ok(())
}

/// Trains `sum_s lambda_s A^m(p_s, x)` from a seeded random start.
pub fn train_direct(ds: &SparseDataset, config: &TrainConfig, loss: Loss) -> Result<(DirectModel, TrainReport)> {
    validate_direct(ds, config, loss)?;
    let model = init_direct(ds.n_features(), config)?;
    train_direct_from(model, ds, config, loss)
}

/// Continues training from an existing model.
pub fn train_direct_from(
    mut model: DirectModel,
    ds: &SparseDataset,
    config: &TrainConfig,
    loss: Loss,
) -> Result<(DirectModel, TrainReport)> {
    validate_direct(ds, config, loss)?;
    check_direct_kernel(&model)?;
    let beta = config.beta;
    let mut report = TrainReport {
        initial_objective: objective_direct(&model, ds, loss, beta)?,
        ..TrainReport::default()
    };
    let mut caches = DirectCaches::new(&model, ds)?;
    let refresh_every = config.refresh_every.max(1);
    for epoch in 1..=config.epochs {
        if config.lambda_policy == LambdaPolicy::Fit {
            fit_lambda(&mut model, ds, loss, beta, config.tol)?;
            caches.refresh(&model, ds)?;
        } else if epoch > 1 && (epoch - 1) % refresh_every == 0 {
            caches.refresh(&model, ds)?;
        }
        let delta = epoch_update_p(&mut model, ds, loss, beta, &mut caches)?;
        report.epochs.push(EpochRecord {
            epoch,
            objective: objective_direct(&model, ds, loss, beta)?,
            delta,
        });
        if delta <= config.tol {
            report.converged = true;
            break;
        }
    }
    Ok((model, report))
}
