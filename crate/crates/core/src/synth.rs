//! Seeded synthetic problems used by the examples, the tests and the
//! benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{DataError, SparseDataset};

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("finite non-negative std")
}

/// Sparse regression: each row has about `density * d` nonzeros drawn from
/// N(0, 1); the target is a random rank-2 ANOVA-2 model plus a linear term
/// plus N(0, noise^2).
pub fn sparse_regression(
    n: usize,
    d: usize,
    density: f64,
    noise: f64,
    seed: u64,
) -> Result<SparseDataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = normal(1.0);
    let w: Vec<f64> = (0..d).map(|_| unit.sample(&mut rng)).collect();
    let p: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..d).map(|_| unit.sample(&mut rng) / (d as f64).sqrt()).collect())
        .collect();
    let eps = normal(noise);
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::new();
        for j in 0..d {
            if rng.random_bool(density.clamp(0.0, 1.0)) {
                row.push((j, unit.sample(&mut rng)));
            }
        }
        if row.is_empty() && d > 0 {
            row.push((rng.random_range(0..d), unit.sample(&mut rng)));
        }
        let mut y: f64 = row.iter().map(|&(j, v)| w[j] * v).sum();
        for ps in &p {
            let (mut d1, mut d2) = (0.0, 0.0);
            for &(j, v) in &row {
                d1 += ps[j] * v;
                d2 += (ps[j] * v).powi(2);
            }
            y += 0.5 * (d1 * d1 - d2);
        }
        targets.push(y + eps.sample(&mut rng));
        rows.push(row);
    }
    SparseDataset::from_rows(&rows, targets, d)
}

/// Dense Gaussian inputs with a target that is an indefinite quadratic form
/// `x' Q x` where `Q` has both positive and negative eigenvalues.
pub fn indefinite_quadratic(n: usize, d: usize, noise: f64, seed: u64) -> Result<SparseDataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = normal(1.0);
    // Q = a a' - 2 b b' + c c'
    let dirs: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..d).map(|_| unit.sample(&mut rng) / (d as f64).sqrt()).collect())
        .collect();
    let weights = [1.0, -2.0, 0.5];
    let eps = normal(noise);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| unit.sample(&mut rng)).collect();
        let y: f64 = dirs
            .iter()
            .zip(weights)
            .map(|(v, w)| w * v.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().powi(2))
            .sum();
        ys.push(y + eps.sample(&mut rng));
        xs.push(x);
    }
    SparseDataset::from_dense(&xs, ys)
}

/// Synthetic ratings: `n_ratings` distinct (user, item) pairs encoded as
/// one-hot user ⊕ one-hot item, target `mean + b_u + b_i + <U_u, V_i> + noise`.
#[derive(Debug, Clone)]
pub struct Ratings {
    pub dataset: SparseDataset,
    pub pairs: Vec<(usize, usize)>,
    pub n_users: usize,
    pub n_items: usize,
}

pub fn recommender(
    n_users: usize,
    n_items: usize,
    rank: usize,
    n_ratings: usize,
    noise: f64,
    seed: u64,
) -> Result<Ratings, DataError> {
    if n_ratings > n_users * n_items {
        return Err(DataError::Invalid(format!(
            "cannot draw {n_ratings} distinct ratings from {n_users}x{n_items} pairs"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = normal(1.0);
    let factor = normal(1.0 / (rank as f64).sqrt().max(1.0));
    let user_f: Vec<Vec<f64>> = (0..n_users).map(|_| (0..rank).map(|_| factor.sample(&mut rng)).collect()).collect();
    let item_f: Vec<Vec<f64>> = (0..n_items).map(|_| (0..rank).map(|_| factor.sample(&mut rng)).collect()).collect();
    let user_b: Vec<f64> = (0..n_users).map(|_| 0.3 * unit.sample(&mut rng)).collect();
    let item_b: Vec<f64> = (0..n_items).map(|_| 0.3 * unit.sample(&mut rng)).collect();
    let eps = normal(noise);

    let mut all: Vec<(usize, usize)> = (0..n_users).flat_map(|u| (0..n_items).map(move |i| (u, i))).collect();
    // partial Fisher-Yates
    for t in 0..n_ratings {
        let k = rng.random_range(t..all.len());
        all.swap(t, k);
    }
    all.truncate(n_ratings);

    let d = n_users + n_items;
    let mut rows = Vec::with_capacity(n_ratings);
    let mut targets = Vec::with_capacity(n_ratings);
    for &(u, i) in &all {
        let dot: f64 = user_f[u].iter().zip(&item_f[i]).map(|(a, b)| a * b).sum();
        targets.push(3.0 + user_b[u] + item_b[i] + dot + eps.sample(&mut rng));
        rows.push(vec![(u, 1.0), (n_users + i, 1.0)]);
    }
    Ok(Ratings {
        dataset: SparseDataset::from_rows(&rows, targets, d)?,
        pairs: all,
        n_users,
        n_items,
    })
}
