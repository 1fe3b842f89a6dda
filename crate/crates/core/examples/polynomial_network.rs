//! Inhomogeneous cubic polynomial network trained with the lifted solver:
//! a dummy feature turns <p, x>^3 into (gamma + <p, x>)^3.

use polyfm::prelude::*;
use polyfm::synth::sparse_regression;

fn main() {
    let ds = sparse_regression(400, 20, 0.2, 0.1, 3).unwrap();
    let (train, test) = polyfm::data::train_test_split(&ds, 0.75, 3).unwrap();

    let mut pipeline = Pipeline::new(
        Solver::Lifted,
        KernelFamily::Poly,
        TrainConfig {
            beta: 1.0,
            rank: 6,
            degree: 3,
            epochs: 60,
            init_std: 0.3,
            ..TrainConfig::default()
        },
    );
    pipeline.augment = 1;
    pipeline.scaling = Scaling::MaxAbs;
    let (stored, report) = pipeline.fit(&train).unwrap();
    let pred = stored.predict_raw(&test).unwrap();
    println!(
        "{} epochs, objective {:.3}, test rmse {:.4}",
        report.epochs_run(),
        report.final_objective(),
        rmse(&pred, test.targets()).unwrap()
    );
}
