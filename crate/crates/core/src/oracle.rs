//! Slow reference implementations: explicit enumeration of kernel monomials,
//! dense tensors with explicit symmetrization, central differences, and a
//! convex reference fit for positive semidefinite quadratic models.
//!
//! Nothing here is fast. Every routine enforces a work budget so that a
//! careless call fails instead of running for hours.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::data::SparseDataset;

/// Largest number of terms or tensor entries an oracle will touch.
pub const BUDGET: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle budget exceeded: {needed} > {BUDGET}")]
    Budget { needed: u128 },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
}

pub type Result<T> = std::result::Result<T, OracleError>;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_budget(needed: u128) -> Result<()> {
    if needed > BUDGET as u128 {
        Err(OracleError::Budget { needed })
    } else {
        Ok(())
    }
}

fn same_len(p: &[f64], x: &[f64]) -> Result<()> {
    if p.len() != x.len() {
        Err(OracleError::Dimension(p.len(), x.len()))
    } else {
        Ok(())
    }
}

/// Calls `f` with every strictly increasing `m`-tuple of `0..d`.
fn for_each_increasing(d: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m > d {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        f(&idx);
        // advance the rightmost index that still has room
        let mut pos = m;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] < d - m + pos {
                break;
            }
            if pos == 0 {
                return;
            }
        }
        idx[pos] += 1;
        for q in pos + 1..m {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Calls `f` with every `m`-tuple of `0..d` (with replacement, all orders).
fn for_each_tuple(d: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m == 0 {
        f(&[]);
        return;
    }
    if d == 0 {
        return;
    }
    let mut idx = vec![0usize; m];
    loop {
        f(&idx);
        let mut pos = m;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < d {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// ANOVA kernel by enumerating every strictly increasing index tuple.
pub fn brute_anova(p: &[f64], x: &[f64], m: u32) -> Result<f64> {
    same_len(p, x)?;
    let (d, m) = (p.len(), m as usize);
    check_budget(binomial(d, m))?;
    if m == 0 {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for_each_increasing(d, m, |idx| {
        total += idx.iter().map(|&j| p[j] * x[j]).product::<f64>();
    });
    Ok(total)
}

/// Homogeneous polynomial kernel by enumerating all `d^m` index tuples.
pub fn brute_homogeneous(p: &[f64], x: &[f64], m: u32) -> Result<f64> {
    same_len(p, x)?;
    let (d, m) = (p.len(), m as usize);
    check_budget((d as u128).saturating_pow(m as u32))?;
    let mut total = 0.0;
    for_each_tuple(d, m, |idx| {
        total += idx.iter().map(|&j| p[j] * x[j]).product::<f64>();
    });
    Ok(total)
}

/// Which index tuples a contraction sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractMode {
    /// All `d^m` tuples.
    Full,
    /// Strictly increasing tuples only.
    StrictUpper,
}

/// Cubical tensor of order `m` over `d` dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        let len = (dim as u128).saturating_pow(order as u32);
        check_budget(len)?;
        Ok(DenseTensor {
            order,
            dim,
            data: vec![0.0; len as usize],
        })
    }

    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(order, dim)?;
        let mut pos = 0;
        for_each_tuple(dim, order, |idx| {
            t.data[pos] = f(idx);
            pos += 1;
        });
        Ok(t)
    }

    /// `x (x) x (x) ... (x) x`, `order` times.
    pub fn outer_power(x: &[f64], order: usize) -> Result<Self> {
        Self::from_fn(order, x.len(), |idx| idx.iter().map(|&j| x[j]).product())
    }

    /// `u^1 (x) ... (x) u^m`.
    pub fn outer(vectors: &[&[f64]]) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.len());
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(OracleError::Dimension(v.len(), dim));
        }
        Self::from_fn(vectors.len(), dim, |idx| {
            idx.iter().zip(vectors).map(|(&j, v)| v[j]).product()
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.dim + j)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn add_scaled(&mut self, other: &DenseTensor, weight: f64) -> Result<()> {
        if (self.order, self.dim) != (other.order, other.dim) {
            return Err(OracleError::Dimension(self.data.len(), other.data.len()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += weight * b;
        }
        Ok(())
    }

    /// Copy with axes permuted: `out[j_1..j_m] = self[j_sigma(1)..j_sigma(m)]`.
    pub fn permuted(&self, sigma: &[usize]) -> Result<Self> {
        let mut perm_idx = vec![0; self.order];
        Self::from_fn(self.order, self.dim, |idx| {
            for (slot, &s) in perm_idx.iter_mut().zip(sigma) {
                *slot = idx[s];
            }
            self.get(&perm_idx)
        })
    }

    /// Average over all `m!` axis permutations.
    pub fn symmetrize(&self) -> Result<Self> {
        let perms = permutations(self.order);
        check_budget(perms.len() as u128 * self.data.len() as u128)?;
        let mut out = Self::zeros(self.order, self.dim)?;
        let weight = 1.0 / perms.len() as f64;
        for sigma in &perms {
            out.add_scaled(&self.permuted(sigma)?, weight)?;
        }
        Ok(out)
    }

    /// Largest deviation between the tensor and any of its axis permutations.
    pub fn asymmetry(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for sigma in permutations(self.order) {
            let p = self.permuted(&sigma)?;
            for (a, b) in self.data.iter().zip(&p.data) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        if (self.order, self.dim) != (other.order, other.dim) {
            return Err(OracleError::Dimension(self.data.len(), other.data.len()));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// `<W, x^(x)m>` over all tuples or over strictly increasing ones.
    pub fn contract(&self, x: &[f64], mode: ContractMode) -> Result<f64> {
        if x.len() != self.dim {
            return Err(OracleError::Dimension(x.len(), self.dim));
        }
        let mut total = 0.0;
        let mut term = |idx: &[usize]| {
            total += self.get(idx) * idx.iter().map(|&j| x[j]).product::<f64>();
        };
        match mode {
            ContractMode::Full => for_each_tuple(self.dim, self.order, &mut term),
            ContractMode::StrictUpper => for_each_increasing(self.dim, self.order, &mut term),
        }
        Ok(total)
    }
}

/// All permutations of `0..m` (Heap's algorithm).
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..m).collect();
    let mut c = vec![0usize; m];
    out.push(a.clone());
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Central difference `(f(a + h) - f(a - h)) / 2h`.
pub fn finite_diff(f: impl Fn(f64) -> f64, at: f64, h: f64) -> f64 {
    (f(at + h) - f(at - h)) / (2.0 * h)
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    if fa < fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Result of [`psd_quadratic_fit`].
#[derive(Debug, Clone)]
pub struct PsdFit {
    pub w: DMatrix<f64>,
    /// Objective at `w`: an upper bound on the minimum.
    pub objective: f64,
    /// Certified lower bound on the minimum, from the first-order optimality
    /// gap at `w` over the region `tr(W) <= f(0) / beta` that must contain
    /// every minimizer.
    pub lower_bound: f64,
}

/// Reference solution of
/// `min_{W psd} 1/2 sum_i (x_i' W x_i - y_i)^2 + beta tr(W)`
/// by accelerated projected gradient. Any model `sum_s <p_s, x>^2` with
/// unit weights has a PSD interaction matrix and penalty
/// `beta sum_s ||p_s||^2 = beta tr(W)`, so `lower_bound` bounds the
/// squared-loss objective of every such model from below.
pub fn psd_quadratic_fit(ds: &SparseDataset, beta: f64, max_iters: usize) -> Result<PsdFit> {
    let d = ds.n_features();
    check_budget((d * d) as u128 * ds.n_samples() as u128)?;
    let xs: Vec<Vec<f64>> = ds.rows().map(|r| r.to_dense()).collect();
    let y = ds.targets();
    let quad = |w: &DMatrix<f64>, x: &[f64]| -> f64 {
        let mut acc = 0.0;
        for a in 0..d {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                acc += x[a] * w[(a, b)] * x[b];
            }
        }
        acc
    };
    let objective = |w: &DMatrix<f64>| -> f64 {
        let loss: f64 = xs
            .iter()
            .zip(y)
            .map(|(x, &t)| 0.5 * (quad(w, x) - t).powi(2))
            .sum();
        loss + beta * w.trace()
    };
    let gradient = |w: &DMatrix<f64>| -> DMatrix<f64> {
        let mut g = DMatrix::identity(d, d) * beta;
        for (x, &t) in xs.iter().zip(y) {
            let r = quad(w, x) - t;
            for a in 0..d {
                for b in 0..d {
                    g[(a, b)] += r * x[a] * x[b];
                }
            }
        }
        g
    };
    // Lipschitz constant of the gradient: top eigenvalue of W -> sum <xx', W> xx'
    let mut v = DMatrix::from_element(d, d, 1.0 / d.max(1) as f64);
    let mut lip = 0.0;
    for _ in 0..100 {
        let mut next = DMatrix::zeros(d, d);
        for x in &xs {
            let s = quad(&v, x);
            for a in 0..d {
                for b in 0..d {
                    next[(a, b)] += s * x[a] * x[b];
                }
            }
        }
        lip = next.norm();
        if lip == 0.0 {
            break;
        }
        v = next / lip;
    }
    let lip = lip * 1.01 + 1e-12;
    let project = |m: DMatrix<f64>| -> DMatrix<f64> {
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let vals = eig.eigenvalues.map(|e| e.max(0.0));
        &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
    };
    let mut w = DMatrix::zeros(d, d);
    let mut z = w.clone();
    let mut t = 1.0f64;
    let mut best = objective(&w);
    let mut best_w = w.clone();
    for _ in 0..max_iters {
        let next = project(&z - gradient(&z) / lip);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + (&next - &w) * ((t - 1.0) / t_next);
        w = next;
        t = t_next;
        let f = objective(&w);
        if f < best {
            best = f;
            best_w = w.clone();
        }
    }
    // f convex: f(W) >= f(W~) + <G, W - W~>, and min_{W psd, tr W <= T} <G, W>
    // is T * min(0, lambda_min(G)).
    let g = gradient(&best_w);
    let g_sym = (&g + g.transpose()) * 0.5;
    let lambda_min = SymmetricEigen::new(g_sym.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let lambda_min = if d == 0 { 0.0 } else { lambda_min };
    let radius = if beta > 0.0 { objective(&DMatrix::zeros(d, d)) / beta } else { f64::INFINITY };
    let slack = if lambda_min >= 0.0 { 0.0 } else { radius * lambda_min };
    let lower_bound = (best - g_sym.dot(&best_w) + slack).max(0.0);
    Ok(PsdFit {
        w: best_w,
        objective: best,
        lower_bound,
    })
}
