//! Binary classification with the logistic and squared hinge losses.

use polyfm::prelude::*;
use polyfm::synth::sparse_regression;

fn main() {
    let ds = sparse_regression(400, 20, 0.2, 0.1, 7).unwrap();
    let labels: Vec<f64> = ds.targets().iter().map(|&y| if y > 0.0 { 1.0 } else { -1.0 }).collect();
    let ds = augment(&ds.with_targets(labels).unwrap(), 1);
    let (train, test) = polyfm::data::train_test_split(&ds, 0.75, 7).unwrap();

    for loss in [Loss::Logistic, Loss::SquaredHinge] {
        let config = TrainConfig { beta: 0.1, rank: 4, epochs: 100, init_std: 0.1, ..TrainConfig::default() };
        let (model, _) = train_direct(&train, &config, loss).unwrap();
        let pred = model.predict_dataset(&test).unwrap();
        let correct = pred.iter().zip(test.targets()).filter(|(p, y)| p.signum() == **y).count();
        println!("{loss}: test accuracy {:.1}%", 100.0 * correct as f64 / test.n_samples() as f64);
    }
}
