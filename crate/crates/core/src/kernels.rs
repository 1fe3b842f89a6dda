//! Homogeneous polynomial and ANOVA kernels between a dense parameter vector
//! `p` and a sparse sample `x`.
//!
//! * `H^m(p, x) = <p, x>^m` uses every degree-m monomial (with replacement).
//! * `A^m(p, x) = sum_{j1 < ... < jm} p_j1 x_j1 ... p_jm x_jm` uses only
//!   monomials of distinct features.
//!
//! Only the nonzero coordinates of `x` ever contribute, so every kernel here
//! costs `O(m * nnz(x))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SampleView;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("parameter vector has dimension {params}, sample has dimension {sample}")]
    DimensionMismatch { params: usize, sample: usize },
    #[error("degree {0} is not supported here")]
    UnsupportedDegree(u32),
    #[error("feature index {index} out of range for dimension {dim}")]
    FeatureOutOfRange { index: usize, dim: usize },
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Kernel family and degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", content = "degree", rename_all = "lowercase")]
pub enum KernelKind {
    Homogeneous(u32),
    Anova(u32),
}

impl KernelKind {
    pub fn degree(self) -> u32 {
        match self {
            KernelKind::Homogeneous(m) | KernelKind::Anova(m) => m,
        }
    }

    pub fn is_anova(self) -> bool {
        matches!(self, KernelKind::Anova(_))
    }

    /// `K(p, x)`, using the closed forms for ANOVA degrees 2 and 3 and the
    /// recursion otherwise.
    pub fn eval(self, p: &[f64], x: SampleView<'_>) -> Result<f64> {
        check_dims(p, x)?;
        Ok(self.eval_unchecked(p, x))
    }

    pub(crate) fn eval_unchecked(self, p: &[f64], x: SampleView<'_>) -> f64 {
        match self {
            KernelKind::Homogeneous(m) => homogeneous_unchecked(p, x, m),
            KernelKind::Anova(m @ (2 | 3)) => anova_fast_unchecked(p, x, m),
            KernelKind::Anova(m) => anova_recursive_unchecked(p, x, m),
        }
    }
}

fn check_dims(p: &[f64], x: SampleView<'_>) -> Result<()> {
    if p.len() != x.dim {
        return Err(KernelError::DimensionMismatch {
            params: p.len(),
            sample: x.dim,
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn sparse_dot(p: &[f64], x: SampleView<'_>) -> f64 {
    x.iter().map(|(j, v)| p[j] * v).sum()
}

/// `<p, x>^m`.
pub fn homogeneous(p: &[f64], x: SampleView<'_>, m: u32) -> Result<f64> {
    check_dims(p, x)?;
    Ok(homogeneous_unchecked(p, x, m))
}

#[inline]
fn homogeneous_unchecked(p: &[f64], x: SampleView<'_>, m: u32) -> f64 {
    powi(sparse_dot(p, x), m)
}

#[inline]
fn powi(v: f64, m: u32) -> f64 {
    match i32::try_from(m) {
        Ok(m) => v.powi(m),
        Err(_) => v.powf(m as f64),
    }
}

/// Power sums `D^t = sum_j (p_j x_j)^t` for `t = 1, 2, 3`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerSums {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl PowerSums {
    pub fn compute(p: &[f64], x: SampleView<'_>) -> Self {
        let mut s = PowerSums::default();
        for (j, v) in x.iter() {
            let rho = p[j] * v;
            let rho2 = rho * rho;
            s.d1 += rho;
            s.d2 += rho2;
            s.d3 += rho2 * rho;
        }
        s
    }

    /// `A^2 = (H^2 - D^2) / 2`.
    pub fn anova2(&self) -> f64 {
        0.5 * (self.d1 * self.d1 - self.d2)
    }

    /// `A^3 = (H^3 - 3 D^2 D^1 + 2 D^3) / 6`.
    pub fn anova3(&self) -> f64 {
        (self.d1 * self.d1 * self.d1 - 3.0 * self.d2 * self.d1 + 2.0 * self.d3) / 6.0
    }
}

/// ANOVA kernel of degree 2 or 3 from power sums.
pub fn anova_fast(p: &[f64], x: SampleView<'_>, m: u32) -> Result<f64> {
    check_dims(p, x)?;
    if !(2..=3).contains(&m) {
        return Err(KernelError::UnsupportedDegree(m));
    }
    Ok(anova_fast_unchecked(p, x, m))
}

#[inline]
fn anova_fast_unchecked(p: &[f64], x: SampleView<'_>, m: u32) -> f64 {
    let s = PowerSums::compute(p, x);
    if m == 2 {
        s.anova2()
    } else {
        s.anova3()
    }
}

/// ANOVA kernel of any degree by dynamic programming over the nonzero
/// features of `x`: adding feature `j` maps `A^t <- A^t + p_j x_j A^(t-1)`.
/// `A^0 = 1`; the result is exactly 0 when `m > nnz(x)`.
pub fn anova_recursive(p: &[f64], x: SampleView<'_>, m: u32) -> Result<f64> {
    check_dims(p, x)?;
    Ok(anova_recursive_unchecked(p, x, m))
}

fn anova_recursive_unchecked(p: &[f64], x: SampleView<'_>, m: u32) -> f64 {
    let m = m as usize;
    if m > x.nnz() {
        return 0.0;
    }
    let mut table = vec![0.0; m + 1];
    table[0] = 1.0;
    for (seen, (j, v)) in x.iter().enumerate() {
        let rho = p[j] * v;
        // only degrees reachable with `seen + 1` features can change
        let top = m.min(seen + 1);
        for t in (1..=top).rev() {
            table[t] += rho * table[t - 1];
        }
    }
    table[m]
}

/// Per-sample statistics needed to differentiate `A^2` and `A^3` in O(1):
/// `<p, x>` and, for degree 3, `A^2(p, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerSampleCache {
    pub dot: f64,
    pub a2: f64,
}

impl PerSampleCache {
    pub fn compute(p: &[f64], x: SampleView<'_>) -> Self {
        let s = PowerSums::compute(p, x);
        PerSampleCache {
            dot: s.d1,
            a2: s.anova2(),
        }
    }
}

/// `dA^m(p, x)/dp_j` for `m` in {2, 3} given the coordinate values and a
/// synchronized cache.
#[inline]
pub fn anova_partial(m: u32, p_j: f64, x_j: f64, cache: &PerSampleCache) -> f64 {
    let px = p_j * x_j;
    if m == 2 {
        (cache.dot - px) * x_j
    } else {
        // A^2 x_j - p_j x_j^2 <p,x> + p_j^2 x_j^3
        x_j * (cache.a2 - px * cache.dot + px * px)
    }
}

/// `dA^m(p, x)/dp_j` for `m` in {2, 3}. Debug builds recompute the cache and
/// panic if the supplied one is stale.
pub fn anova_grad_coord(p: &[f64], x: SampleView<'_>, j: usize, m: u32, cache: &PerSampleCache) -> Result<f64> {
    check_dims(p, x)?;
    if !(2..=3).contains(&m) {
        return Err(KernelError::UnsupportedDegree(m));
    }
    if j >= p.len() {
        return Err(KernelError::FeatureOutOfRange {
            index: j,
            dim: p.len(),
        });
    }
    #[cfg(debug_assertions)]
    {
        let fresh = PerSampleCache::compute(p, x);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * (1.0 + a.abs().max(b.abs()));
        assert!(
            close(fresh.dot, cache.dot) && (m == 2 || close(fresh.a2, cache.a2)),
            "stale kernel cache: {cache:?} vs recomputed {fresh:?}"
        );
    }
    let x_j = x.get(j);
    if x_j == 0.0 {
        return Ok(0.0);
    }
    Ok(anova_partial(m, p[j], x_j, cache))
}

/// Both sides of `K(c p, x) = c^m K(p, x)`: returns `(K(c p, x), c^m K(p, x))`.
pub fn homogeneity_check(kind: KernelKind, p: &[f64], x: SampleView<'_>, c: f64) -> Result<(f64, f64)> {
    let scaled: Vec<f64> = p.iter().map(|v| c * v).collect();
    let lhs = kind.eval(&scaled, x)?;
    let rhs = powi(c, kind.degree()) * kind.eval(p, x)?;
    Ok((lhs, rhs))
}
