//! Randomized identity checks between the fast kernels, the lifted predictors
//! and the brute-force oracles. Backs the `polyfm verify` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{augment_sample, Sample};
use crate::kernels::{anova_fast, anova_recursive, homogeneity_check, homogeneous, KernelKind};
use crate::lifted::{LiftedKernel, LiftedModel};
use crate::oracle::{brute_anova, brute_homogeneous, ContractMode, DenseTensor};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random inputs per property.
    pub trials: usize,
    /// Largest vector dimension for kernel properties.
    pub max_dim: usize,
    /// Largest dimension and order of explicit tensors.
    pub max_tensor_dim: usize,
    pub max_tensor_order: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            trials: 200,
            max_dim: 10,
            max_tensor_dim: 4,
            max_tensor_order: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: &'static str,
    pub checks: usize,
    /// Worst observed error divided by the allowed error.
    pub worst_ratio: f64,
    pub passed: bool,
}

struct Tracker {
    name: &'static str,
    checks: usize,
    worst: f64,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Tracker {
            name,
            checks: 0,
            worst: 0.0,
        }
    }

    /// Records `|a - b| <= tol * scale`.
    fn check(&mut self, a: f64, b: f64, tol: f64, scale: f64) {
        self.checks += 1;
        let allowed = tol * scale.max(f64::MIN_POSITIVE);
        let ratio = if a == b { 0.0 } else { (a - b).abs() / allowed };
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        self.worst = self.worst.max(ratio);
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            name: self.name,
            checks: self.checks,
            worst_ratio: self.worst,
            passed: self.worst <= 1.0,
        }
    }
}

/// Random sparse vector pair: `p` dense, `x` with roughly a quarter zeros.
pub fn random_pair(rng: &mut impl Rng, d: usize) -> (Vec<f64>, Vec<f64>) {
    let p = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = (0..d)
        .map(|_| {
            if rng.random_bool(0.25) {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    (p, x)
}

/// Sum of the absolute values of all monomials of `A^m(p, x)`; the natural
/// scale for relative errors of anything that evaluates `A^m`.
pub fn anova_magnitude(p: &[f64], x: &[f64], m: u32) -> f64 {
    let abs_p: Vec<f64> = p.iter().map(|v| v.abs()).collect();
    let abs_x = Sample::from_dense(&x.iter().map(|v| v.abs()).collect::<Vec<_>>());
    anova_recursive(&abs_p, abs_x.view(), m).unwrap_or(f64::INFINITY)
}

/// `(sum_j |p_j x_j|)^m`, the size of the power sums behind the closed-form
/// ANOVA expressions.
pub fn homogeneous_magnitude(p: &[f64], x: &[f64], m: u32) -> f64 {
    let s: f64 = p.iter().zip(x).map(|(a, b)| (a * b).abs()).sum();
    s.powi(m as i32)
}

fn drop_coord(v: &[f64], j: usize) -> Vec<f64> {
    v.iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, &a)| a)
        .collect()
}

fn kernel_properties(opts: &VerifyOptions, rng: &mut ChaCha8Rng, out: &mut Vec<PropertyResult>) {
    let mut fast = Tracker::new("anova-closed-forms-match-enumeration");
    let mut rec = Tracker::new("anova-recursion-matches-enumeration");
    let mut empty = Tracker::new("anova-vanishes-above-nnz");
    let mut hom = Tracker::new("homogeneous-matches-enumeration");
    let mut scale = Tracker::new("kernels-are-homogeneous-functions");
    let mut split = Tracker::new("anova-splits-on-one-coordinate");
    let mut affine = Tracker::new("anova-is-affine-in-each-coordinate");
    let mut inhom = Tracker::new("dummy-feature-gives-inhomogeneous-polynomial");
    let mut dummy = Tracker::new("dummy-feature-adds-lower-degree-anova");
    let mut dummies = Tracker::new("dummy-features-sum-anova-degrees");

    for _ in 0..opts.trials {
        let d = rng.random_range(1..=opts.max_dim.max(1));
        let (p, x) = random_pair(rng, d);
        let xs = Sample::from_dense(&x);
        let xv = xs.view();

        for m in 0..=5u32 {
            let Ok(brute) = brute_anova(&p, &x, m) else { continue };
            let mag = anova_magnitude(&p, &x, m);
            let r = anova_recursive(&p, xv, m).unwrap();
            rec.check(r, brute, 1e-12, mag);
            if m as usize > xv.nnz() {
                empty.check(r, 0.0, 0.0, 1.0);
            }
            if (2..=3).contains(&m) {
                // the closed forms cancel power sums of size (sum |p_j x_j|)^m
                let scale = mag.max(homogeneous_magnitude(&p, &x, m));
                fast.check(anova_fast(&p, xv, m).unwrap(), brute, 1e-12, scale);
            }
        }
        for m in 1..=4u32 {
            let Ok(brute) = brute_homogeneous(&p, &x, m) else { continue };
            hom.check(
                homogeneous(&p, xv, m).unwrap(),
                brute,
                1e-12,
                homogeneous_magnitude(&p, &x, m),
            );
        }

        let cs = [-2.0, -1.0, 0.5, 3.0, rng.random_range(-3.0..3.0)];
        for m in 1..=4u32 {
            for kind in [KernelKind::Homogeneous(m), KernelKind::Anova(m)] {
                for &c in &cs {
                    let (lhs, rhs) = homogeity_sides(kind, &p, &xs, c);
                    let mag = match kind {
                        KernelKind::Anova(_) => anova_magnitude(&p, &x, m)
                            .max(homogeneous_magnitude(&p, &x, m)),
                        KernelKind::Homogeneous(_) => homogeneous_magnitude(&p, &x, m),
                    } * c.abs().powi(m as i32);
                    scale.check(lhs, rhs, 1e-12, mag);
                }
            }
        }

        // A^m(p, x) = A^m(p_-j, x_-j) + p_j x_j A^(m-1)(p_-j, x_-j)
        let j = rng.random_range(0..d);
        let (pj, xj) = (drop_coord(&p, j), Sample::from_dense(&drop_coord(&x, j)));
        for m in 1..=d.min(5) as u32 {
            let whole = anova_recursive(&p, xv, m).unwrap();
            let parts = anova_recursive(&pj, xj.view(), m).unwrap()
                + p[j] * x[j] * anova_recursive(&pj, xj.view(), m - 1).unwrap();
            split.check(whole, parts, 1e-12, anova_magnitude(&p, &x, m));

            // second central difference along p_j vanishes
            let h = 0.5;
            let at = |delta: f64| {
                let mut q = p.clone();
                q[j] += delta;
                anova_recursive(&q, xv, m).unwrap()
            };
            let second = at(h) - 2.0 * at(0.0) + at(-h);
            affine.check(second, 0.0, 1e-8, 1.0);
        }

        // augmentation identities
        let gamma = rng.random_range(-2.0..2.0);
        let mut pt = vec![gamma];
        pt.extend_from_slice(&p);
        let xt = augment_sample(xv, 1);
        let dot: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
        for m in 1..=4u32 {
            let lhs = homogeneous(&pt, xt.view(), m).unwrap();
            let rhs = (gamma + dot).powi(m as i32);
            let mag = (gamma.abs() + homogeneous_magnitude(&p, &x, 1)).powi(m as i32);
            inhom.check(lhs, rhs, 1e-12, mag);
        }
        for m in 1..=(d + 1).min(5) as u32 {
            let lhs = anova_recursive(&pt, xt.view(), m).unwrap();
            let rhs = anova_recursive(&p, xv, m).unwrap() + gamma * anova_recursive(&p, xv, m - 1).unwrap();
            let mag = anova_magnitude(&pt, &xt.view().to_dense(), m);
            dummy.check(lhs, rhs, 1e-12, mag);
        }
        // m - 1 dummy features: A^m(p~, x~) = sum_{t=1..m} e_(m-t)(gammas) A^t(p, x)
        for m in 2..=4u32 {
            let gammas: Vec<f64> = (0..m - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut pt = gammas.clone();
            pt.extend_from_slice(&p);
            let xt = augment_sample(xv, (m - 1) as usize);
            let lhs = anova_recursive(&pt, xt.view(), m).unwrap();
            let ones = Sample::from_dense(&vec![1.0; gammas.len()]);
            let rhs: f64 = (1..=m)
                .map(|t| {
                    anova_recursive(&gammas, ones.view(), m - t).unwrap()
                        * anova_recursive(&p, xv, t).unwrap()
                })
                .sum();
            let mag = anova_magnitude(&pt, &xt.view().to_dense(), m);
            dummies.check(lhs, rhs, 1e-12, mag);
        }
    }
    out.extend(
        [fast, rec, empty, hom, scale, split, affine, inhom, dummy, dummies]
            .into_iter()
            .map(Tracker::finish),
    );
}

fn homogeity_sides(kind: KernelKind, p: &[f64], x: &Sample, c: f64) -> (f64, f64) {
    homogeneity_check(kind, p, x.view(), c).expect("dimensions agree")
}

fn random_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn tensor_properties(opts: &VerifyOptions, rng: &mut ChaCha8Rng, out: &mut Vec<PropertyResult>) {
    let mut sym = Tracker::new("symmetrization-preserves-symmetric-contractions");
    let mut sym_fixed = Tracker::new("symmetrized-tensor-is-symmetric");
    let mut expand_full = Tracker::new("rank-one-expansion-gives-homogeneous-kernels");
    let mut expand_upper = Tracker::new("rank-one-expansion-gives-anova-kernels");
    let mut lifted_h = Tracker::new("lifted-prediction-matches-tensor-contraction");
    let mut lifted_a2 = Tracker::new("lifted-anova-matches-strict-upper-contraction");

    let trials = (opts.trials / 4).max(1);
    for _ in 0..trials {
        let d = rng.random_range(1..=opts.max_tensor_dim.max(1));
        let m = rng.random_range(1..=opts.max_tensor_order.max(1));
        let x = random_vec(rng, d);
        let Ok(tensor) = DenseTensor::from_fn(m, d, |_| rng.random_range(-1.0..1.0)) else {
            continue;
        };
        let Ok(symmetric) = tensor.symmetrize() else { continue };
        let xm = DenseTensor::outer_power(&x, m).unwrap();
        let scale: f64 = tensor.data().iter().map(|v| v.abs()).sum::<f64>()
            * x.iter().fold(1.0f64, |a, v| a.max(v.abs())).powi(m as i32);
        sym.check(
            symmetric.inner(&xm).unwrap(),
            tensor.inner(&xm).unwrap(),
            1e-12,
            scale,
        );
        sym_fixed.check(symmetric.asymmetry().unwrap(), 0.0, 1e-12, scale.max(1.0));

        // W = sum_s lambda_s p_s^(x)m
        let k = rng.random_range(1..=3);
        let mut w = DenseTensor::zeros(m, d).unwrap();
        let mut sum_h = 0.0;
        let mut sum_a = 0.0;
        let mut mag = 0.0;
        let xs = Sample::from_dense(&x);
        for _ in 0..k {
            let lambda = rng.random_range(-2.0..2.0);
            let p = random_vec(rng, d);
            w.add_scaled(&DenseTensor::outer_power(&p, m).unwrap(), lambda).unwrap();
            sum_h += lambda * homogeneous(&p, xs.view(), m as u32).unwrap();
            sum_a += lambda * anova_recursive(&p, xs.view(), m as u32).unwrap();
            mag += lambda.abs() * homogeneous_magnitude(&p, &x, m as u32);
        }
        expand_full.check(w.contract(&x, ContractMode::Full).unwrap(), sum_h, 1e-10, mag.max(1.0));
        expand_upper.check(
            w.contract(&x, ContractMode::StrictUpper).unwrap(),
            sum_a,
            1e-10,
            mag.max(1.0),
        );

        // lifted model against explicit sym(M)
        let r = rng.random_range(1..=3);
        let factors: Vec<Vec<f64>> = (0..m).map(|_| random_vec(rng, d * r)).collect();
        let model = LiftedModel::new(LiftedKernel::Homogeneous, d, r, factors.clone()).unwrap();
        let mut big = DenseTensor::zeros(m, d).unwrap();
        let mut mag = 0.0;
        for s in 0..r {
            let cols: Vec<&[f64]> = factors.iter().map(|f| &f[s * d..(s + 1) * d]).collect();
            big.add_scaled(&DenseTensor::outer(&cols).unwrap(), 1.0).unwrap();
            mag += cols
                .iter()
                .map(|c| c.iter().zip(&x).map(|(a, b)| (a * b).abs()).sum::<f64>())
                .product::<f64>();
        }
        let contraction = big.symmetrize().unwrap().contract(&x, ContractMode::Full).unwrap();
        lifted_h.check(model.predict(xs.view()).unwrap(), contraction, 1e-10, mag.max(1.0));

        if m == 2 {
            let a2 = LiftedModel::new(LiftedKernel::Anova2, d, r, factors).unwrap();
            let upper = big.symmetrize().unwrap().contract(&x, ContractMode::StrictUpper).unwrap();
            lifted_a2.check(a2.predict(xs.view()).unwrap(), upper, 1e-10, mag.max(1.0));
        }
    }
    out.extend(
        [sym, sym_fixed, expand_full, expand_upper, lifted_h, lifted_a2]
            .into_iter()
            .map(Tracker::finish),
    );
}

/// Runs every property on seeded random inputs.
pub fn run_all(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    kernel_properties(opts, &mut rng, &mut out);
    tensor_properties(opts, &mut rng, &mut out);
    out
}
