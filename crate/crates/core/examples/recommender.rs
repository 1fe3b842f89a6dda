//! Rating prediction from one-hot (user, item) pairs, where a degree-2 ANOVA
//! model reduces to matrix factorization with biases.

use polyfm::data::{augment, one_hot_pair, train_test_split};
use polyfm::prelude::*;
use polyfm::synth::recommender;

fn main() {
    let ratings = recommender(50, 40, 3, 2000, 0.3, 10).unwrap();
    let (train, test) = train_test_split(&ratings.dataset, 0.75, 10).unwrap();
    let mean = train.targets().iter().sum::<f64>() / train.n_samples() as f64;
    let baseline = rmse(&vec![mean; test.n_samples()], test.targets()).unwrap();

    let config = TrainConfig {
        beta: 1.0,
        rank: 5,
        degree: 2,
        epochs: 300,
        init_std: 0.1,
        ..TrainConfig::default()
    };
    let (model, report) = train_direct(&augment(&train, 1), &config, Loss::Squared).unwrap();
    let pred = model.predict_dataset(&augment(&test, 1)).unwrap();
    println!("global mean rmse {baseline:.4}");
    println!("A2 + dummy rmse  {:.4} ({} epochs)", rmse(&pred, test.targets()).unwrap(), report.epochs_run());

    let x = one_hot_pair(7, 11, 50, 40).unwrap();
    let x = polyfm::data::augment_sample(x.view(), 1);
    println!("predicted rating of user 7 for item 11: {:.3}", model.predict(x.view()).unwrap());
}
