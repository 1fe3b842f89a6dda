//! Command-line front end. [`run`] takes the argument list and output streams
//! explicitly so the binary stays a one-liner and tests can drive it in
//! process.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::config::{CacheMode, LambdaPolicy, TrainConfig, TrainReport};
use crate::cv::{cross_validate, BetaGrid, Metric};
use crate::data::{load_svmlight, save_svmlight, train_test_split, SparseDataset};
use crate::loss::Loss;
use crate::pipeline::{KernelFamily, Pipeline, Scaling, Solver};
use crate::store::StoredModel;

#[derive(Debug, Parser)]
#[command(name = "polyfm", version, about = "Factorization machines and polynomial networks trained by coordinate descent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it as .fmjson; logs epoch, objective and change per line.
    Train(TrainCmd),
    /// Write one prediction per line.
    Predict(PredictCmd),
    /// Print a test metric.
    Evaluate(EvaluateCmd),
    /// Choose beta by k-fold cross-validation, then retrain on all data.
    Cv(CvCmd),
    /// Check the kernel and tensor identities on random inputs.
    Verify(VerifyCmd),
    /// Seeded train/test split of an svmlight file.
    Split(SplitCmd),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// svmlight input file.
    #[arg(long)]
    pub data: PathBuf,
    /// Feature dimension; defaults to the largest index in the file.
    #[arg(long)]
    pub n_features: Option<usize>,
}

impl DataArgs {
    fn load(&self) -> Result<SparseDataset, Failure> {
        load_svmlight(&self.data, self.n_features)
            .map_err(|e| Failure::Run(format!("{}: {e}", self.data.display())))
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "direct")]
    pub solver: Solver,
    #[arg(long, default_value = "anova")]
    pub kernel: KernelFamily,
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Number of bases (direct) or rank (lifted).
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value = "squared")]
    pub loss: Loss,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prepend this many constant-one features.
    #[arg(long, default_value_t = 0)]
    pub augment: usize,
    /// Basis weights of the direct solver: fixed ones, fitted, or random fixed signs.
    #[arg(long, default_value = "ones")]
    pub fit_lambda: LambdaPolicy,
    #[arg(long, default_value = "none")]
    pub scale: Scaling,
    #[arg(long, default_value_t = 0.01)]
    pub init_std: f64,
    /// Recompute prediction caches from scratch every this many epochs.
    #[arg(long, default_value_t = 10)]
    pub refresh_every: usize,
    /// Lifted solver: cache all inner products instead of one block at a time.
    #[arg(long)]
    pub full_cache: bool,
}

impl ModelArgs {
    fn pipeline(&self, beta: f64) -> Pipeline {
        let config = TrainConfig {
            beta,
            rank: self.rank,
            degree: self.degree,
            epochs: self.epochs,
            tol: self.tol,
            seed: self.seed,
            lambda_policy: self.fit_lambda,
            init_std: self.init_std,
            refresh_every: self.refresh_every,
            cache_mode: if self.full_cache { CacheMode::Full } else { CacheMode::PerBlock },
        };
        Pipeline {
            solver: self.solver,
            family: self.kernel,
            config,
            loss: self.loss,
            augment: self.augment,
            scaling: self.scale,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output model path.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Write predictions here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "rmse")]
    pub metric: Metric,
}

#[derive(Debug, Args)]
pub struct CvCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Log-spaced grid lo:hi:count.
    #[arg(long, default_value = "1e-3:1e3:10")]
    pub beta_grid: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "rmse")]
    pub metric: Metric,
    /// Where to write the model retrained at the chosen beta.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyCmd {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random inputs per property.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Largest vector dimension for kernel checks.
    #[arg(long, default_value_t = 10)]
    pub max_dim: usize,
    /// Largest dimension of explicit tensors.
    #[arg(long, default_value_t = 4)]
    pub max_tensor_dim: usize,
    /// Largest order of explicit tensors.
    #[arg(long, default_value_t = 4)]
    pub max_tensor_order: usize,
}

#[derive(Debug, Args)]
pub struct SplitCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

enum Failure {
    /// Bad flags or flag combinations: exit 2.
    Usage(ErrorKind, String),
    /// Anything that went wrong while doing the work: exit 1.
    Run(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 on success, 1 on runtime errors, 2 on
/// usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Train(c) => cmd_train(c, out),
        Command::Predict(c) => cmd_predict(c, out),
        Command::Evaluate(c) => cmd_evaluate(c, out),
        Command::Cv(c) => cmd_cv(c, out),
        Command::Verify(c) => cmd_verify(c, out),
        Command::Split(c) => cmd_split(c, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(kind, msg)) => {
            let e = Cli::command().error(kind, msg);
            let _ = write!(err, "{}", e.render());
            2
        }
        Err(Failure::Run(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn checked_pipeline(args: &ModelArgs, beta: f64) -> Result<Pipeline, Failure> {
    let pipe = args.pipeline(beta);
    pipe.check_supported()
        .map_err(|e| Failure::Usage(ErrorKind::ArgumentConflict, e.to_string()))?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Failure::Usage(ErrorKind::ValueValidation, format!("--beta must be >= 0, got {beta}")));
    }
    Ok(pipe)
}

fn write_report(report: &TrainReport, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "epoch\tobjective\tdelta")?;
    writeln!(out, "0\t{}\t-", report.initial_objective)?;
    for e in &report.epochs {
        writeln!(out, "{}\t{}\t{}", e.epoch, e.objective, e.delta)?;
    }
    Ok(())
}

fn cmd_train(c: TrainCmd, out: &mut dyn Write) -> Result<i32, Failure> {
    let pipe = checked_pipeline(&c.model_args, c.beta)?;
    let ds = c.data.load()?;
    let (model, report) = pipe.fit(&ds).map_err(run_err)?;
    write_report(&report, out)?;
    model.save(&c.model).map_err(|e| Failure::Run(format!("{}: {e}", c.model.display())))?;
    Ok(0)
}

fn load_model(path: &PathBuf) -> Result<StoredModel, Failure> {
    StoredModel::load(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

fn cmd_predict(c: PredictCmd, out: &mut dyn Write) -> Result<i32, Failure> {
    let model = load_model(&c.model)?;
    let ds = c.data.load()?;
    let preds = model.predict_raw(&ds).map_err(run_err)?;
    let mut file;
    let sink: &mut dyn Write = match &c.output {
        Some(path) => {
            file = BufWriter::new(File::create(path)?);
            &mut file
        }
        None => out,
    };
    for p in preds {
        writeln!(sink, "{p}")?;
    }
    sink.flush()?;
    Ok(0)
}

fn cmd_evaluate(c: EvaluateCmd, out: &mut dyn Write) -> Result<i32, Failure> {
    let model = load_model(&c.model)?;
    let ds = c.data.load()?;
    let preds = model.predict_raw(&ds).map_err(run_err)?;
    let value = c.metric.compute(&preds, ds.targets()).map_err(run_err)?;
    writeln!(out, "{value}")?;
    Ok(0)
}

fn cmd_cv(c: CvCmd, out: &mut dyn Write) -> Result<i32, Failure> {
    let grid: BetaGrid = c
        .beta_grid
        .parse()
        .map_err(|e: crate::cv::CvError| Failure::Usage(ErrorKind::ValueValidation, e.to_string()))?;
    let pipe = checked_pipeline(&c.model_args, grid.lo)?;
    if c.folds < 2 {
        return Err(Failure::Usage(ErrorKind::ValueValidation, format!("--folds must be at least 2, got {}", c.folds)));
    }
    let ds = c.data.load()?;
    let res = cross_validate(&ds, &pipe, &grid.values(), c.folds, c.metric, c.model_args.seed).map_err(run_err)?;
    writeln!(out, "beta\tmean_{0}\tsd_{0}", c.metric)?;
    for row in &res.rows {
        writeln!(out, "{}\t{}\t{}", row.beta, row.mean, row.std)?;
    }
    writeln!(out, "best_beta\t{}", res.best_beta)?;
    if let Some(path) = &c.model {
        res.model.save(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    }
    Ok(0)
}

#[cfg(feature = "oracle")]
fn cmd_verify(c: VerifyCmd, out: &mut dyn Write) -> Result<i32, Failure> {
    use crate::verify::{run_all, VerifyOptions};
    let opts = VerifyOptions {
        seed: c.seed,
        trials: c.trials,
        max_dim: c.max_dim,
        max_tensor_dim: c.max_tensor_dim,
        max_tensor_order: c.max_tensor_order,
    };
    let results = run_all(&opts);
    let mut failed = 0;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{verdict}\t{}\tchecks={}\tworst={:.3e}", r.name, r.checks, r.worst_ratio)?;
        failed += usize::from(!r.passed);
    }
    writeln!(out, "{} of {} properties passed", results.len() - failed, results.len())?;
    Ok(if failed == 0 { 0 } else { 1 })
}

#[cfg(not(feature = "oracle"))]
fn cmd_verify(_: VerifyCmd, _: &mut dyn Write) -> Result<i32, Failure> {
    Err(Failure::Run("built without the `oracle` feature".into()))
}

fn cmd_split(c: SplitCmd, out: &mut dyn Write) -> Result<i32, Failure> {
    if !(0.0..=1.0).contains(&c.fraction) {
        return Err(Failure::Usage(ErrorKind::ValueValidation, format!("--fraction must be in [0, 1], got {}", c.fraction)));
    }
    let ds = c.data.load()?;
    let (train, test) = train_test_split(&ds, c.fraction, c.seed).map_err(run_err)?;
    save_svmlight(&train, &c.train_out)?;
    save_svmlight(&test, &c.test_out)?;
    writeln!(out, "train\t{}\ntest\t{}", train.n_samples(), test.n_samples())?;
    Ok(0)
}
