//! Acceptance checks, one per criterion. Runs without the libtest harness so
//! every criterion prints exactly one `[acceptance NN] ... PASS|FAIL` line;
//! the process fails if any gating criterion fails. The epoch-cost probe is
//! informational and never fails the run.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polyfm::config::{CacheMode, LambdaPolicy, TrainConfig};
use polyfm::data::{augment, augment_sample, train_test_split, Sample, SparseDataset};
use polyfm::direct::{
    coordinate_gradient, epoch_update_p, fit_lambda, objective_direct, train_direct, update_coordinate, DirectCaches,
    DirectModel,
};
use polyfm::kernels::{anova_fast, anova_recursive, homogeneity_check, homogeneous, KernelKind};
use polyfm::lifted::{
    coordinate_gradient_lifted, lifted_to_direct, objective_lifted, train_lifted, update_coordinate_lifted,
    LiftedCaches, LiftedKernel, LiftedModel,
};
use polyfm::loss::Loss;
use polyfm::oracle::{
    brute_anova, brute_homogeneous, finite_diff, golden_section, psd_quadratic_fit, ContractMode, DenseTensor,
};
use polyfm::store::rmse;
use polyfm::synth::{indefinite_quadratic, recommender, sparse_regression};

struct Outcome {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn report(id: u32, title: &'static str, passed: bool, detail: &str) -> Outcome {
    Outcome {
        id,
        title,
        passed,
        detail: detail.to_string(),
    }
}

/// Worst ratio of observed error to allowed error.
#[derive(Default)]
struct Worst(f64);

impl Worst {
    fn check(&mut self, a: f64, b: f64, tol: f64, scale: f64) {
        let allowed = tol * scale.max(f64::MIN_POSITIVE);
        let r = if a == b { 0.0 } else { (a - b).abs() / allowed };
        self.0 = if r.is_nan() { f64::INFINITY } else { self.0.max(r) };
    }

    fn ok(&self) -> bool {
        self.0 <= 1.0
    }
}

fn rand_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Dense vector with about a quarter of the entries zero.
fn rand_sparse(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect()
}

/// `(sum_j |p_j x_j|)^m`
fn power_scale(p: &[f64], x: &[f64], m: u32) -> f64 {
    p.iter().zip(x).map(|(a, b)| (a * b).abs()).sum::<f64>().powi(m as i32)
}

/// Sum of absolute values of the monomials of `A^m(p, x)`.
fn monomial_mass(p: &[f64], x: &[f64], m: u32) -> f64 {
    let ap: Vec<f64> = p.iter().map(|v| v.abs()).collect();
    let ax: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    brute_anova(&ap, &ax, m).unwrap()
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn kernel_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut fast, mut rec, mut hom) = (Worst::default(), Worst::default(), Worst::default());
    let trials = 1500;
    for _ in 0..trials {
        let d = rng.random_range(1..=10);
        let p = rand_vec(&mut rng, d);
        let x = rand_sparse(&mut rng, d);
        let xs = Sample::from_dense(&x);
        for m in 0..=5u32 {
            let brute = brute_anova(&p, &x, m).unwrap();
            let mass = monomial_mass(&p, &x, m);
            rec.check(anova_recursive(&p, xs.view(), m).unwrap(), brute, 1e-12, mass);
            if (2..=3).contains(&m) {
                // closed forms combine power sums of size (sum |p_j x_j|)^m
                let scale = mass.max(power_scale(&p, &x, m));
                fast.check(anova_fast(&p, xs.view(), m).unwrap(), brute, 1e-12, scale);
            }
            let hb = brute_homogeneous(&p, &x, m).unwrap();
            hom.check(homogeneous(&p, xs.view(), m).unwrap(), hb, 1e-12, power_scale(&p, &x, m));
        }
    }
    let elapsed = start.elapsed();
    let passed = fast.ok() && rec.ok() && hom.ok() && elapsed < Duration::from_secs(10);
    report(
        1,
        "kernel oracle equivalence",
        passed,
        &format!(
            "{trials} inputs, err/tol: fast {:.1e} recursive {:.1e} homogeneous {:.1e}, {}",
            fast.0,
            rec.0,
            hom.0,
            secs(elapsed)
        ),
    )
}

fn multilinearity_and_homogeneity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut split, mut scale) = (Worst::default(), Worst::default());
    for _ in 0..1000 {
        let d = rng.random_range(1..=10);
        let p = rand_vec(&mut rng, d);
        let x = rand_sparse(&mut rng, d);
        let xs = Sample::from_dense(&x);
        let j = rng.random_range(0..d);
        let drop = |v: &[f64]| -> Vec<f64> {
            v.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &a)| a).collect()
        };
        let (pj, xj) = (drop(&p), Sample::from_dense(&drop(&x)));
        for m in 1..=5u32 {
            let whole = anova_recursive(&p, xs.view(), m).unwrap();
            let parts = anova_recursive(&pj, xj.view(), m).unwrap()
                + p[j] * x[j] * anova_recursive(&pj, xj.view(), m - 1).unwrap();
            split.check(whole, parts, 1e-12, monomial_mass(&p, &x, m));
        }
        for m in 1..=5u32 {
            for c in [-2.0, -1.0, 0.5, 3.0] {
                for kind in [KernelKind::Anova(m), KernelKind::Homogeneous(m)] {
                    let (lhs, rhs) = homogeneity_check(kind, &p, xs.view(), c).unwrap();
                    let size = match kind {
                        KernelKind::Anova(_) => monomial_mass(&p, &x, m).max(power_scale(&p, &x, m)),
                        KernelKind::Homogeneous(_) => power_scale(&p, &x, m),
                    };
                    scale.check(lhs, rhs, 1e-12, size * f64::abs(c).powi(m as i32));
                }
            }
        }
    }
    let passed = split.ok() && scale.ok();
    report(
        2,
        "multilinearity and homogeneity",
        passed,
        &format!("err/tol: recursion {:.1e} homogeneity {:.1e}", split.0, scale.0),
    )
}

fn symmetrization_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut sym, mut full, mut upper, mut lifted) =
        (Worst::default(), Worst::default(), Worst::default(), Worst::default());
    for _ in 0..300 {
        let d = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let x = rand_vec(&mut rng, d);
        let xs = Sample::from_dense(&x);
        let xmax = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));

        let t = DenseTensor::from_fn(m, d, |_| rng.random_range(-1.0..1.0)).unwrap();
        let mass: f64 = t.data().iter().map(|v| v.abs()).sum::<f64>() * xmax.powi(m as i32);
        sym.check(
            t.symmetrize().unwrap().contract(&x, ContractMode::Full).unwrap(),
            t.contract(&x, ContractMode::Full).unwrap(),
            1e-12,
            mass,
        );

        let k = rng.random_range(1..=3);
        let mut w = DenseTensor::zeros(m, d).unwrap();
        let (mut sh, mut sa, mut size) = (0.0, 0.0, 0.0);
        for _ in 0..k {
            let lam = rng.random_range(-2.0..2.0);
            let p = rand_vec(&mut rng, d);
            w.add_scaled(&DenseTensor::outer_power(&p, m).unwrap(), lam).unwrap();
            sh += lam * homogeneous(&p, xs.view(), m as u32).unwrap();
            sa += lam * anova_recursive(&p, xs.view(), m as u32).unwrap();
            size += lam.abs() * power_scale(&p, &x, m as u32);
        }
        full.check(w.contract(&x, ContractMode::Full).unwrap(), sh, 1e-10, size);
        upper.check(w.contract(&x, ContractMode::StrictUpper).unwrap(), sa, 1e-10, size);

        // lifted models are the symmetrized sum of rank-one outer products
        let r = rng.random_range(1..=3);
        let factors: Vec<Vec<f64>> = (0..m).map(|_| rand_vec(&mut rng, d * r)).collect();
        let mut big = DenseTensor::zeros(m, d).unwrap();
        let mut size = 0.0;
        for s in 0..r {
            let cols: Vec<&[f64]> = factors.iter().map(|f| &f[s * d..(s + 1) * d]).collect();
            big.add_scaled(&DenseTensor::outer(&cols).unwrap(), 1.0).unwrap();
            size += cols.iter().map(|c| power_scale(c, &x, 1)).product::<f64>();
        }
        let sym_big = big.symmetrize().unwrap();
        let model = LiftedModel::new(LiftedKernel::Homogeneous, d, r, factors.clone()).unwrap();
        lifted.check(
            model.predict(xs.view()).unwrap(),
            sym_big.contract(&x, ContractMode::Full).unwrap(),
            1e-10,
            size,
        );
        if m == 2 {
            let model = LiftedModel::new(LiftedKernel::Anova2, d, r, factors).unwrap();
            lifted.check(
                model.predict(xs.view()).unwrap(),
                sym_big.contract(&x, ContractMode::StrictUpper).unwrap(),
                1e-10,
                size,
            );
        }
    }
    let passed = sym.ok() && full.ok() && upper.ok() && lifted.ok();
    report(
        3,
        "symmetrization identities",
        passed,
        &format!(
            "err/tol: sym {:.1e} expansion {:.1e}/{:.1e} lifted {:.1e}",
            sym.0, full.0, upper.0, lifted.0
        ),
    )
}

fn gradient_dataset(seed: u64) -> SparseDataset {
    sparse_regression(30, 8, 0.5, 0.1, seed).unwrap()
}

/// `|analytic - numeric| <= 1e-5 max(|analytic|, |numeric|, 1)`
fn grad_ratio(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (1e-5 * analytic.abs().max(numeric.abs()).max(1.0))
}

fn coordinate_gradients_match_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let beta = 0.3;
    let h = 1e-5;
    let mut details = Vec::new();
    let mut passed = true;

    for m in [2u32, 3] {
        let ds = gradient_dataset(m as u64);
        let d = ds.n_features();
        let k = 3;
        let basis: Vec<f64> = (0..d * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = vec![1.0, -0.7, 1.8];
        let model = DirectModel::new(KernelKind::Anova(m), d, lambda, basis).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let (s, j) = (rng.random_range(0..k), rng.random_range(0..d));
            let analytic = coordinate_gradient(&model, &ds, Loss::Squared, beta, s, j).unwrap().grad;
            let numeric = finite_diff(
                |v| {
                    let mut mm = model.clone();
                    mm.set(j, s, v);
                    objective_direct(&mm, &ds, Loss::Squared, beta).unwrap()
                },
                model.get(j, s),
                h,
            );
            worst = worst.max(grad_ratio(analytic, numeric));
        }
        passed &= worst <= 1.0;
        details.push(format!("direct A{m} {worst:.1e}"));
    }

    let lifted_cases = [
        (LiftedKernel::Homogeneous, 2u32),
        (LiftedKernel::Homogeneous, 3),
        (LiftedKernel::Homogeneous, 4),
        (LiftedKernel::Anova2, 2),
    ];
    for (kernel, m) in lifted_cases {
        let ds = gradient_dataset(10 + m as u64);
        let d = ds.n_features();
        let r = 3;
        let factors: Vec<Vec<f64>> = (0..m).map(|_| rand_vec(&mut rng, d * r)).collect();
        let model = LiftedModel::new(kernel, d, r, factors).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let (t, s, j) = (rng.random_range(0..m as usize), rng.random_range(0..r), rng.random_range(0..d));
            let analytic = coordinate_gradient_lifted(&model, &ds, Loss::Squared, beta, t, s, j).unwrap().grad;
            let numeric = finite_diff(
                |v| {
                    let mut mm = model.clone();
                    mm.set(t, j, s, v);
                    objective_lifted(&mm, &ds, Loss::Squared, beta).unwrap()
                },
                model.get(t, j, s),
                h,
            );
            worst = worst.max(grad_ratio(analytic, numeric));
        }
        passed &= worst <= 1.0;
        let name = match kernel {
            LiftedKernel::Homogeneous => format!("lifted H{m}"),
            LiftedKernel::Anova2 => "lifted A2".to_string(),
        };
        details.push(format!("{name} {worst:.1e}"));
    }
    report(4, "coordinate gradients vs finite differences", passed, &format!("err/tol: {}", details.join(", ")))
}

fn descent_config(degree: u32) -> TrainConfig {
    TrainConfig {
        beta: 0.1,
        rank: 4,
        degree,
        epochs: 60,
        tol: 0.0,
        seed: 5,
        init_std: 0.1,
        ..TrainConfig::default()
    }
}

/// Largest increase between consecutive logged objectives, and epochs run.
fn worst_increase(initial: f64, objectives: &[f64]) -> (f64, usize) {
    let mut prev = initial;
    let mut worst = f64::NEG_INFINITY;
    for &o in objectives {
        worst = worst.max(o - prev);
        prev = o;
    }
    (worst, objectives.len())
}

fn monotone_descent() -> Outcome {
    let start = Instant::now();
    let ds = sparse_regression(200, 50, 0.1, 0.1, 7).unwrap();
    let mut passed = true;
    let mut details = Vec::new();
    let mut record = |name: &str, initial: f64, objs: Vec<f64>, converged: bool| {
        let (inc, epochs) = worst_increase(initial, &objs);
        let ok = inc <= 1e-10 && (epochs >= 50 || converged);
        passed &= ok;
        details.push(format!("{name} {epochs}ep max-rise {inc:.1e}"));
    };
    for m in [2u32, 3] {
        let (_, rep) = train_direct(&ds, &descent_config(m), Loss::Squared).unwrap();
        record(&format!("direct-A{m}"), rep.initial_objective, rep.epochs.iter().map(|e| e.objective).collect(), rep.converged);
    }
    let mut fit = descent_config(2);
    fit.lambda_policy = LambdaPolicy::Fit;
    let (_, rep) = train_direct(&ds, &fit, Loss::Squared).unwrap();
    record("direct-A2-fit", rep.initial_objective, rep.epochs.iter().map(|e| e.objective).collect(), rep.converged);
    for m in [2u32, 3] {
        let (_, rep) = train_lifted(&ds, &descent_config(m), Loss::Squared, LiftedKernel::Homogeneous).unwrap();
        record(&format!("lifted-H{m}"), rep.initial_objective, rep.epochs.iter().map(|e| e.objective).collect(), rep.converged);
    }
    let mut full = descent_config(2);
    full.cache_mode = CacheMode::Full;
    let (_, rep) = train_lifted(&ds, &full, Loss::Squared, LiftedKernel::Anova2).unwrap();
    record("lifted-A2", rep.initial_objective, rep.epochs.iter().map(|e| e.objective).collect(), rep.converged);
    let elapsed = start.elapsed();
    passed &= elapsed < Duration::from_secs(60);
    report(5, "monotone descent", passed, &format!("{}, {}", details.join(", "), secs(elapsed)))
}

fn coordinate_updates_are_exact_minimizers() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let ds = sparse_regression(40, 10, 0.4, 0.1, 6).unwrap();
    let d = ds.n_features();
    let beta = 0.2;
    let mut worst_gain = f64::NEG_INFINITY;
    let mut updates = 0;

    let scan = |f: &dyn Fn(f64) -> f64, new: f64, step: f64| -> f64 {
        let width = 10.0 * step.max(1e-6);
        let (_, fmin) = golden_section(f, new - width, new + width, 200);
        f(new) - fmin
    };

    for m in [2u32, 3] {
        let basis = (0..d * 3).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut model = DirectModel::new(KernelKind::Anova(m), d, vec![1.0, -1.0, 0.5], basis).unwrap();
        let mut caches = DirectCaches::new(&model, &ds).unwrap();
        for _ in 0..30 {
            let (s, j) = (rng.random_range(0..3), rng.random_range(0..d));
            let old = model.get(j, s);
            update_coordinate(&mut model, &ds, Loss::Squared, beta, &mut caches, s, j).unwrap();
            let new = model.get(j, s);
            let f = |v: f64| {
                let mut mm = model.clone();
                mm.set(j, s, v);
                objective_direct(&mm, &ds, Loss::Squared, beta).unwrap()
            };
            worst_gain = worst_gain.max(scan(&f, new, (new - old).abs()));
            updates += 1;
        }
    }
    for (kernel, m) in [(LiftedKernel::Homogeneous, 2u32), (LiftedKernel::Homogeneous, 3), (LiftedKernel::Anova2, 2)] {
        let factors = (0..m).map(|_| (0..d * 3).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
        let mut model = LiftedModel::new(kernel, d, 3, factors).unwrap();
        let mut caches = LiftedCaches::new(&model, &ds, CacheMode::PerBlock).unwrap();
        for _ in 0..30 {
            let (t, s, j) = (rng.random_range(0..m as usize), rng.random_range(0..3), rng.random_range(0..d));
            let old = model.get(t, j, s);
            update_coordinate_lifted(&mut model, &ds, Loss::Squared, beta, &mut caches, t, s, j).unwrap();
            let new = model.get(t, j, s);
            let f = |v: f64| {
                let mut mm = model.clone();
                mm.set(t, j, s, v);
                objective_lifted(&mm, &ds, Loss::Squared, beta).unwrap()
            };
            worst_gain = worst_gain.max(scan(&f, new, (new - old).abs()));
            updates += 1;
        }
    }
    let passed = worst_gain <= 1e-9;
    report(
        6,
        "coordinate updates are exact minimizers",
        passed,
        &format!("{updates} updates, best scan improvement {worst_gain:.1e}"),
    )
}

fn fitted_weights_beat_unit_weights() -> Outcome {
    let beta = 0.1;
    let ds = indefinite_quadratic(300, 10, 0.1, 8).unwrap();

    // Unit weights: every model sum_s <p_s, x>^2 has a PSD interaction matrix,
    // so the convex PSD fit bounds all of them from below.
    let psd = psd_quadratic_fit(&ds, beta, 4000).unwrap();

    // Fitted weights: lifted H2, reduced eigendecomposition, then lambda refit.
    let config = TrainConfig {
        beta,
        rank: 10,
        degree: 2,
        epochs: 2000,
        tol: 1e-9,
        seed: 8,
        init_std: 0.1,
        ..TrainConfig::default()
    };
    let (lifted, _) = train_lifted(&ds, &config, Loss::Squared, LiftedKernel::Homogeneous).unwrap();
    let mut direct = lifted_to_direct(&lifted).unwrap();
    let before = objective_direct(&direct, &ds, Loss::Squared, beta).unwrap();
    fit_lambda(&mut direct, &ds, Loss::Squared, beta, 1e-12).unwrap();
    let fitted = objective_direct(&direct, &ds, Loss::Squared, beta).unwrap();
    let negative = direct.lambda().iter().filter(|&&l| l < 0.0).count();

    // lambda absorption for odd degree
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut absorb = Worst::default();
    for _ in 0..1000 {
        let d = rng.random_range(1..=10);
        let p = rand_vec(&mut rng, d);
        let x = rand_sparse(&mut rng, d);
        let xs = Sample::from_dense(&x);
        let lam: f64 = rng.random_range(-3.0..3.0);
        let scaled: Vec<f64> = p.iter().map(|v| v * lam.cbrt()).collect();
        let lhs = lam * anova_fast(&p, xs.view(), 3).unwrap();
        let rhs = anova_fast(&scaled, xs.view(), 3).unwrap();
        let size = lam.abs() * monomial_mass(&p, &x, 3).max(power_scale(&p, &x, 3));
        absorb.check(lhs, rhs, 1e-10, size);
    }

    let passed = fitted <= before + 1e-12 && fitted <= 0.99 * psd.lower_bound && absorb.ok();
    report(
        7,
        "fitted weights beat unit weights",
        passed,
        &format!(
            "fit {fitted:.4} ({negative} negative weights) vs unit-weight bound {:.4} (PSD fit {:.4}), absorption err/tol {:.1e}",
            psd.lower_bound, psd.objective, absorb.0
        ),
    )
}

fn lifted_to_direct_conversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = Worst::default();
    let mut rank_ok = true;
    let mut max_k = 0;
    for trial in 0..200 {
        let d = rng.random_range(1..=20);
        let r = rng.random_range(1..=5);
        let kernel = if trial % 2 == 0 { LiftedKernel::Homogeneous } else { LiftedKernel::Anova2 };
        let u = rand_vec(&mut rng, d * r);
        // every fourth model has tied factors, i.e. a rank-deficient sym(UV')
        let v = if trial % 4 == 1 { u.clone() } else { rand_vec(&mut rng, d * r) };
        let model = LiftedModel::new(kernel, d, r, vec![u.clone(), v.clone()]).unwrap();
        let direct = lifted_to_direct(&model).unwrap();
        rank_ok &= direct.rank() <= 2 * r;
        max_k = max_k.max(direct.rank());
        for _ in 0..10 {
            let x = rand_sparse(&mut rng, d);
            let xs = Sample::from_dense(&x);
            let size: f64 = (0..r)
                .map(|s| power_scale(&u[s * d..(s + 1) * d], &x, 1) * power_scale(&v[s * d..(s + 1) * d], &x, 1))
                .sum();
            worst.check(
                direct.predict(xs.view()).unwrap(),
                model.predict(xs.view()).unwrap(),
                1e-8,
                size.max(1.0),
            );
        }
    }
    let passed = worst.ok() && rank_ok;
    report(
        8,
        "lifted to direct conversion",
        passed,
        &format!("err/tol {:.1e}, k <= 2r: {rank_ok}", worst.0),
    )
}

/// Elementary symmetric polynomial `e_k(gammas)` by enumeration.
fn elementary(gammas: &[f64], k: u32) -> f64 {
    brute_anova(gammas, &vec![1.0; gammas.len()], k).unwrap()
}

fn augmentation_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut inhom, mut one, mut many, mut ones, mut dataset) =
        (Worst::default(), Worst::default(), Worst::default(), Worst::default(), Worst::default());
    for _ in 0..1000 {
        let d = rng.random_range(1..=8);
        let p = rand_vec(&mut rng, d);
        let x = rand_sparse(&mut rng, d);
        let xs = Sample::from_dense(&x);
        let dot: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();

        // one dummy feature with weight gamma
        let gamma: f64 = rng.random_range(-2.0..2.0);
        let pt: Vec<f64> = std::iter::once(gamma).chain(p.iter().copied()).collect();
        let xt = augment_sample(xs.view(), 1);
        let xt_dense = xt.view().to_dense();
        for m in 1..=4u32 {
            let want = (gamma + dot).powi(m as i32);
            let size = (gamma.abs() + power_scale(&p, &x, 1)).powi(m as i32);
            inhom.check(homogeneous(&pt, xt.view(), m).unwrap(), want, 1e-12, size);
            inhom.check(brute_homogeneous(&pt, &xt_dense, m).unwrap(), want, 1e-12, size);

            let want = anova_recursive(&p, xs.view(), m).unwrap() + gamma * anova_recursive(&p, xs.view(), m - 1).unwrap();
            let size = monomial_mass(&pt, &xt_dense, m).max(power_scale(&pt, &xt_dense, m));
            one.check(anova_recursive(&pt, xt.view(), m).unwrap(), want, 1e-12, size);
            one.check(brute_anova(&pt, &xt_dense, m).unwrap(), want, 1e-12, size);
            if (2..=3).contains(&m) {
                one.check(anova_fast(&pt, xt.view(), m).unwrap(), want, 1e-12, size);
            }
        }

        // m - 1 dummy features: A^m sums all lower degrees down to A^1
        for m in 2..=5u32 {
            let gammas = rand_vec(&mut rng, (m - 1) as usize);
            let pt: Vec<f64> = gammas.iter().chain(&p).copied().collect();
            let xt = augment_sample(xs.view(), (m - 1) as usize);
            let xt_dense = xt.view().to_dense();
            let want: f64 = (1..=m)
                .map(|t| elementary(&gammas, m - t) * anova_recursive(&p, xs.view(), t).unwrap())
                .sum();
            let size = monomial_mass(&pt, &xt_dense, m);
            many.check(anova_recursive(&pt, xt.view(), m).unwrap(), want, 1e-12, size);
            many.check(brute_anova(&pt, &xt_dense, m).unwrap(), want, 1e-12, size);

            // unit dummy weights give binomial coefficients
            let pu: Vec<f64> = std::iter::repeat_n(1.0, (m - 1) as usize).chain(p.iter().copied()).collect();
            let want: f64 = (1..=m)
                .map(|t| binomial(m - 1, m - t) * anova_recursive(&p, xs.view(), t).unwrap())
                .sum();
            let size = monomial_mass(&pu, &xt_dense, m);
            ones.check(anova_recursive(&pu, xt.view(), m).unwrap(), want, 1e-12, size);
        }
    }

    // dataset-level augmentation feeds the same identity through a model
    let ds = sparse_regression(50, 6, 0.5, 0.1, 9).unwrap();
    let aug = augment(&ds, 1);
    let p = rand_vec(&mut rng, 6);
    let gamma = 0.7;
    let pt: Vec<f64> = std::iter::once(gamma).chain(p.iter().copied()).collect();
    let model = DirectModel::new(KernelKind::Homogeneous(3), 7, vec![1.0], pt).unwrap();
    for (row, arow) in ds.rows().zip(aug.rows()) {
        let dot: f64 = row.iter().map(|(j, v)| p[j] * v).sum();
        let size = (gamma + row.iter().map(|(j, v)| (p[j] * v).abs()).sum::<f64>()).powi(3);
        dataset.check(model.predict(arow).unwrap(), (gamma + dot).powi(3), 1e-12, size);
    }

    let passed = inhom.ok() && one.ok() && many.ok() && ones.ok() && dataset.ok();
    report(
        9,
        "augmentation identities",
        passed,
        &format!(
            "err/tol: inhomogeneous {:.1e} one-dummy {:.1e} m-1 dummies {:.1e} unit {:.1e} dataset {:.1e}",
            inhom.0, one.0, many.0, ones.0, dataset.0
        ),
    )
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn recommender_beats_mean_baseline() -> Outcome {
    let start = Instant::now();
    let ratings = recommender(50, 40, 3, 2000, 0.3, 10).unwrap();
    let (train, test) = train_test_split(&ratings.dataset, 0.75, 10).unwrap();
    let mean = train.targets().iter().sum::<f64>() / train.n_samples() as f64;
    let baseline = rmse(&vec![mean; test.n_samples()], test.targets()).unwrap();

    let config = TrainConfig {
        beta: 1.0,
        rank: 5,
        degree: 2,
        epochs: 300,
        tol: 1e-6,
        seed: 10,
        init_std: 0.1,
        ..TrainConfig::default()
    };
    let (model, report_) = train_direct(&augment(&train, 1), &config, Loss::Squared).unwrap();
    let pred = model.predict_dataset(&augment(&test, 1)).unwrap();
    let score = rmse(&pred, test.targets()).unwrap();
    let elapsed = start.elapsed();
    let improvement = 1.0 - score / baseline;
    let passed = improvement >= 0.20 && elapsed < Duration::from_secs(30);
    report(
        10,
        "recommender beats mean baseline",
        passed,
        &format!(
            "test rmse {score:.4} vs mean {baseline:.4} ({:.1}% better), {} epochs, {}",
            100.0 * improvement,
            report_.epochs_run(),
            secs(elapsed)
        ),
    )
}

fn regularizers_agree() -> Outcome {
    let beta = 1.0;
    let ds = sparse_regression(40, 6, 0.6, 0.1, 11).unwrap();
    let config = TrainConfig {
        beta,
        rank: 6,
        degree: 2,
        epochs: 20000,
        tol: 1e-10,
        seed: 11,
        init_std: 0.1,
        lambda_policy: LambdaPolicy::Fit,
        ..TrainConfig::default()
    };
    let (direct, drep) = train_direct(&ds, &config, Loss::Squared).unwrap();
    let direct_obj = objective_direct(&direct, &ds, Loss::Squared, beta).unwrap();

    let (lifted, lrep) = train_lifted(&ds, &config, Loss::Squared, LiftedKernel::Anova2).unwrap();
    let lifted_obj = objective_lifted(&lifted, &ds, Loss::Squared, beta).unwrap();
    let converted = lifted_to_direct(&lifted).unwrap();
    let rescored = objective_direct(&converted, &ds, Loss::Squared, beta).unwrap();

    let rel = (direct_obj - rescored).abs() / direct_obj.min(rescored);
    let passed = rel <= 0.05;
    report(
        11,
        "direct and lifted regularizers agree",
        passed,
        &format!(
            "direct {direct_obj:.5} ({} ep), lifted {lifted_obj:.5} ({} ep) rescored {rescored:.5}, rel diff {:.2}%",
            drep.epochs_run(),
            lrep.epochs_run(),
            100.0 * rel
        ),
    )
}

fn median_epoch_time(ds: &SparseDataset, config: &TrainConfig) -> f64 {
    let mut times: Vec<f64> = (0..5)
        .map(|run| {
            let mut cfg = config.clone();
            cfg.seed = run;
            let mut model = polyfm::direct::init_direct(ds.n_features(), &cfg).unwrap();
            let mut caches = DirectCaches::new(&model, ds).unwrap();
            let start = Instant::now();
            epoch_update_p(&mut model, ds, Loss::Squared, cfg.beta, &mut caches).unwrap();
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[2]
}

fn epoch_cost_scaling() -> Outcome {
    let config = TrainConfig {
        beta: 0.1,
        rank: 8,
        degree: 2,
        ..TrainConfig::default()
    };
    let small = sparse_regression(4000, 200, 0.02, 0.1, 12).unwrap();
    let large = sparse_regression(4000, 200, 0.04, 0.1, 12).unwrap();
    let (t_small, t_large) = (median_epoch_time(&small, &config), median_epoch_time(&large, &config));
    let ratio = t_large / t_small;
    report(
        12,
        "epoch cost scaling (informational)",
        ratio <= 2.5,
        &format!(
            "nnz {} -> {} ({:.2}x), epoch {:.2}ms -> {:.2}ms ({ratio:.2}x, limit 2.5x)",
            small.nnz(),
            large.nnz(),
            large.nnz() as f64 / small.nnz() as f64,
            1e3 * t_small,
            1e3 * t_large
        ),
    )
}

const INFORMATIONAL: &[u32] = &[12];

fn main() {
    let criteria: [fn() -> Outcome; 12] = [
        kernel_oracle_equivalence,
        multilinearity_and_homogeneity,
        symmetrization_identities,
        coordinate_gradients_match_finite_differences,
        monotone_descent,
        coordinate_updates_are_exact_minimizers,
        fitted_weights_beat_unit_weights,
        lifted_to_direct_conversion,
        augmentation_identities,
        recommender_beats_mean_baseline,
        regularizers_agree,
        epoch_cost_scaling,
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = Vec::new();
    for (i, run) in criteria.iter().enumerate() {
        let id = i as u32 + 1;
        let outcome = match std::panic::catch_unwind(run) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome {
                    id,
                    title: "(panicked)",
                    passed: false,
                    detail: msg,
                }
            }
        };
        if let Some(f) = &filter {
            if !outcome.title.contains(f.as_str()) {
                continue;
            }
        }
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!("[acceptance {:02}] {:<44} {verdict}  {}", outcome.id, outcome.title, outcome.detail);
        if !outcome.passed && !INFORMATIONAL.contains(&outcome.id) {
            failed.push(outcome.id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
