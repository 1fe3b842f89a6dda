//! Choosing the regularization strength by 5-fold cross-validation.

use polyfm::cv::{cross_validate, BetaGrid, Metric};
use polyfm::prelude::*;
use polyfm::synth::sparse_regression;

fn main() {
    let ds = sparse_regression(200, 20, 0.2, 0.3, 5).unwrap();
    let grid: BetaGrid = "1e-3:1e3:10".parse().unwrap();
    let mut pipeline = Pipeline::new(
        Solver::Direct,
        KernelFamily::Anova,
        TrainConfig {
            rank: 3,
            epochs: 40,
            init_std: 0.1,
            ..TrainConfig::default()
        },
    );
    pipeline.augment = 1;
    let result = cross_validate(&ds, &pipeline, &grid.values(), 5, Metric::Rmse, 0).unwrap();
    for row in &result.rows {
        println!("beta {:>10.4}  rmse {:.4} +- {:.4}", row.beta, row.mean, row.std);
    }
    println!("selected beta {}", result.best_beta);
}
