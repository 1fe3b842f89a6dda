//! A second-order factorization machine trained with the direct solver, once
//! with unit basis weights and once with fitted weights.

use polyfm::prelude::*;
use polyfm::synth::sparse_regression;

fn main() {
    let ds = sparse_regression(500, 40, 0.1, 0.1, 1).unwrap();
    let (train, test) = polyfm::data::train_test_split(&ds, 0.75, 1).unwrap();
    // one dummy feature adds the linear term of a classic FM
    let (train, test) = (augment(&train, 1), augment(&test, 1));

    for policy in [LambdaPolicy::FixedOnes, LambdaPolicy::Fit] {
        let config = TrainConfig {
            beta: 0.5,
            rank: 5,
            degree: 2,
            epochs: 100,
            init_std: 0.1,
            lambda_policy: policy,
            ..TrainConfig::default()
        };
        let (model, report) = train_direct(&train, &config, Loss::Squared).unwrap();
        let pred = model.predict_dataset(&test).unwrap();
        println!(
            "lambda {policy}: objective {:.3} -> {:.3} in {} epochs, test rmse {:.4}, lambda = {:.3?}",
            report.initial_objective,
            report.final_objective(),
            report.epochs_run(),
            rmse(&pred, test.targets()).unwrap(),
            model.lambda()
        );
    }
}
