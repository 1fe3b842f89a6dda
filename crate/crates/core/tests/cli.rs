use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyfm::data::save_svmlight;
use polyfm::store::StoredModel;
use polyfm::synth::sparse_regression;
use tempfile::TempDir;

fn polyfm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyfm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixture {
    dir: TempDir,
    train: PathBuf,
    test: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let train = dir.path().join("train.svm");
        let test = dir.path().join("test.svm");
        save_svmlight(&sparse_regression(80, 12, 0.3, 0.1, 1).unwrap(), &train).unwrap();
        save_svmlight(&sparse_regression(30, 12, 0.3, 0.1, 2).unwrap(), &test).unwrap();
        Fixture { dir, train, test }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn parse_log(text: &str) -> Vec<(usize, f64, Option<f64>)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch\tobjective\tdelta"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 3, "{l}");
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().ok())
        })
        .collect()
}

#[test]
fn train_predict_evaluate_round_trip() {
    let fx = Fixture::new();
    let model = fx.path("fm.fmjson");
    let out = polyfm(&[
        "train", "--data", s(&fx.train), "--model", s(&model), "--solver", "direct", "--kernel", "anova",
        "--degree", "2", "--rank", "4", "--beta", "0.1", "--epochs", "30", "--fit-lambda", "ones", "--augment", "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let log = parse_log(&stdout(&out));
    assert_eq!(log[0].0, 0);
    assert_eq!(log[0].2, None);
    assert!(log.len() > 1);
    for w in log.windows(2) {
        assert_eq!(w[1].0, w[0].0 + 1);
        assert!(w[1].1 <= w[0].1 + 1e-10);
    }

    let stored = StoredModel::load(&model).unwrap();
    assert_eq!(stored.augmented_count, 1);
    assert_eq!(stored.model.n_features(), 13);

    let preds = polyfm(&["predict", "--data", s(&fx.test), "--model", s(&model)]);
    assert!(preds.status.success(), "{}", stderr(&preds));
    let values: Vec<f64> = stdout(&preds).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 30);

    let file = fx.path("preds.txt");
    let again = polyfm(&["predict", "--data", s(&fx.test), "--model", s(&model), "--output", s(&file)]);
    assert!(again.status.success());
    assert_eq!(std::fs::read_to_string(&file).unwrap(), stdout(&preds));

    for metric in ["rmse", "r2"] {
        let ev = polyfm(&["evaluate", "--data", s(&fx.test), "--model", s(&model), "--metric", metric]);
        assert!(ev.status.success(), "{}", stderr(&ev));
        let v: f64 = stdout(&ev).trim().parse().unwrap();
        assert!(v.is_finite());
    }
}

#[test]
fn training_is_deterministic() {
    let fx = Fixture::new();
    let run = |name: &str| {
        let path = fx.path(name);
        let out = polyfm(&[
            "train", "--data", s(&fx.train), "--model", s(&path), "--solver", "lifted", "--kernel", "poly",
            "--degree", "3", "--rank", "3", "--augment", "1", "--epochs", "10", "--seed", "4", "--init-std", "0.2",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        (stdout(&out), std::fs::read_to_string(path).unwrap())
    };
    let (log_a, model_a) = run("a.fmjson");
    let (log_b, model_b) = run("b.fmjson");
    assert_eq!(log_a, log_b);
    assert_eq!(model_a, model_b);
    assert!(model_a.contains("\"kind\": \"lifted\""));
}

#[test]
fn zero_epochs_writes_initial_model() {
    let fx = Fixture::new();
    let model = fx.path("init.fmjson");
    let out = polyfm(&["train", "--data", s(&fx.train), "--model", s(&model), "--epochs", "0", "--rank", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(parse_log(&stdout(&out)).len(), 1);
    let stored = StoredModel::load(&model).unwrap();
    assert_eq!(stored.metadata.epochs_run, 0);
}

#[test]
fn usage_errors_exit_2() {
    let fx = Fixture::new();
    let model = fx.path("m.fmjson");
    let missing = polyfm(&["train", "--model", s(&model)]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("--data"));

    let poly = polyfm(&["train", "--data", s(&fx.train), "--model", s(&model), "--solver", "direct", "--kernel", "poly"]);
    assert_eq!(poly.status.code(), Some(2));
    assert!(stderr(&poly).contains("homogeneous polynomial kernel"), "{}", stderr(&poly));

    let anova3 = polyfm(&[
        "train", "--data", s(&fx.train), "--model", s(&model), "--solver", "lifted", "--kernel", "anova", "--degree", "3",
    ]);
    assert_eq!(anova3.status.code(), Some(2));
    assert!(stderr(&anova3).contains("only for degree 2"), "{}", stderr(&anova3));

    let bad_value = polyfm(&["train", "--data", s(&fx.train), "--model", s(&model), "--fit-lambda", "maybe"]);
    assert_eq!(bad_value.status.code(), Some(2));
    assert!(!model.exists());
}

#[test]
fn dimension_mismatch_is_reported() {
    let fx = Fixture::new();
    let model = fx.path("m.fmjson");
    let out = polyfm(&["train", "--data", s(&fx.train), "--model", s(&model), "--epochs", "2", "--rank", "2"]);
    assert!(out.status.success());

    // fewer features than the model: padded
    let narrow = fx.path("narrow.svm");
    std::fs::write(&narrow, "1.0 1:0.5 3:2\n-1 2:1\n").unwrap();
    let ok = polyfm(&["predict", "--data", s(&narrow), "--model", s(&model)]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert_eq!(stdout(&ok).lines().count(), 2);

    let wide = fx.path("wide.svm");
    std::fs::write(&wide, "1.0 40:1\n").unwrap();
    let bad = polyfm(&["predict", "--data", s(&wide), "--model", s(&model)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("features"), "{}", stderr(&bad));
}

#[test]
fn malformed_inputs_are_runtime_errors() {
    let fx = Fixture::new();
    let bad = fx.path("bad.svm");
    std::fs::write(&bad, "1.0 3:1 2:1\n").unwrap();
    let out = polyfm(&["train", "--data", s(&bad), "--model", s(&fx.path("m"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));

    let junk = fx.path("junk.fmjson");
    std::fs::write(&junk, "{\"format_version\": 1").unwrap();
    let out = polyfm(&["predict", "--data", s(&fx.test), "--model", s(&junk)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cross_validation_selects_and_retrains() {
    let fx = Fixture::new();
    let model = fx.path("cv.fmjson");
    let args = [
        "cv", "--data", s(&fx.train), "--rank", "2", "--epochs", "5", "--beta-grid", "1e-3:1e3:10", "--folds", "3",
        "--model", s(&model),
    ];
    let out = polyfm(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "beta\tmean_rmse\tsd_rmse");
    assert_eq!(lines.len(), 12);
    let betas: Vec<f64> = lines[1..11].iter().map(|l| l.split('\t').next().unwrap().parse().unwrap()).collect();
    assert_eq!(betas[0], 1e-3);
    assert_eq!(betas[9], 1e3);
    let best: f64 = lines[11].strip_prefix("best_beta\t").unwrap().parse().unwrap();
    assert_eq!(StoredModel::load(&model).unwrap().metadata.beta, best);

    let again = polyfm(&args);
    assert_eq!(stdout(&again), text);
}

#[test]
fn cross_validation_boundaries() {
    let fx = Fixture::new();
    let tiny = fx.path("tiny.svm");
    std::fs::write(&tiny, "1 1:1 2:0.5\n2 1:0.2\n0.5 2:1\n1.5 1:1 2:1\n").unwrap();
    let loo = polyfm(&["cv", "--data", s(&tiny), "--folds", "4", "--beta-grid", "0.1:1:2", "--rank", "1", "--epochs", "3"]);
    assert!(loo.status.success(), "{}", stderr(&loo));

    let too_many = polyfm(&["cv", "--data", s(&tiny), "--folds", "5"]);
    assert_eq!(too_many.status.code(), Some(1));
    assert!(stderr(&too_many).contains("folds"), "{}", stderr(&too_many));

    let bad_grid = polyfm(&["cv", "--data", s(&tiny), "--beta-grid", "1:0.1:3"]);
    assert_eq!(bad_grid.status.code(), Some(2));
}

#[test]
fn verify_reports_every_property() {
    let out = polyfm(&["verify", "--trials", "30", "--seed", "3"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert!(rows.len() >= 10);
    assert!(rows.iter().all(|l| l.starts_with("PASS")));
    assert!(text.contains("lifted-prediction-matches-tensor-contraction"));
}

#[test]
fn split_writes_both_parts() {
    let fx = Fixture::new();
    let (a, b) = (fx.path("a.svm"), fx.path("b.svm"));
    let out = polyfm(&["split", "--data", s(&fx.train), "--train-out", s(&a), "--test-out", s(&b), "--seed", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "train\t60\ntest\t20\n");
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 60);
    assert_eq!(std::fs::read_to_string(&b).unwrap().lines().count(), 20);
}
