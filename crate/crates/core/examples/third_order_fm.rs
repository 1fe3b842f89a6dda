//! Third-order ANOVA model: interactions among triples of distinct features.

use polyfm::prelude::*;
use polyfm::synth::sparse_regression;

fn main() {
    let ds = sparse_regression(400, 30, 0.15, 0.1, 2).unwrap();
    let (train, test) = polyfm::data::train_test_split(&ds, 0.75, 2).unwrap();
    // two dummy features: A^3 on the augmented input sums degrees 3, 2 and 1
    let (train, test) = (augment(&train, 2), augment(&test, 2));
    let config = TrainConfig {
        beta: 0.5,
        rank: 4,
        degree: 3,
        epochs: 80,
        init_std: 0.2,
        ..TrainConfig::default()
    };
    let (model, report) = train_direct(&train, &config, Loss::Squared).unwrap();
    for e in report.epochs.iter().step_by(10) {
        println!("epoch {:3}  objective {:.4}  change {:.3e}", e.epoch, e.objective, e.delta);
    }
    let pred = model.predict_dataset(&test).unwrap();
    println!("test rmse {:.4}, r2 {:.3}", rmse(&pred, test.targets()).unwrap(), r2(&pred, test.targets()).unwrap());
}
