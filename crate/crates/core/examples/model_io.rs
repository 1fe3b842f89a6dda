//! svmlight input and `.fmjson` model files.

use polyfm::data::{load_svmlight, save_svmlight};
use polyfm::prelude::*;
use polyfm::synth::sparse_regression;

fn main() {
    let dir = std::env::temp_dir().join(format!("polyfm-model-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let data_path = dir.join("train.svm");
    save_svmlight(&sparse_regression(100, 10, 0.3, 0.1, 6).unwrap(), &data_path).unwrap();

    let ds = load_svmlight(&data_path, None).unwrap();
    println!("{}: {} samples, {} features, {} nonzeros", data_path.display(), ds.n_samples(), ds.n_features(), ds.nnz());

    let mut pipeline = Pipeline::new(Solver::Direct, KernelFamily::Anova, TrainConfig { rank: 3, epochs: 20, ..TrainConfig::default() });
    pipeline.augment = 1;
    let (stored, _) = pipeline.fit(&ds).unwrap();
    let model_path = dir.join("model.fmjson");
    stored.save(&model_path).unwrap();

    let loaded = StoredModel::load(&model_path).unwrap();
    assert_eq!(loaded, stored);
    println!("reloaded {} identically; first prediction {}", model_path.display(), loaded.predict_raw(&ds).unwrap()[0]);
    std::fs::remove_dir_all(&dir).unwrap();
}
