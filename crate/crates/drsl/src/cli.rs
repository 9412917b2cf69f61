//! Command-line front end.
//!
//! Exit codes: `0` success, `1` validation or compute failure, `2` usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use drsl_core::baselines::{fit_baseline, fit_lrsl, BaselineKind, LassoSettings};
use drsl_core::data::{standardize_columns, AdamDenominator, Regularization, StreamPolicy, ThetaInit};
use drsl_core::eval::{between_class_correlation, cross_validate, group_fit_mse, CvOptions, Method};
use drsl_core::kernel::{Activation, InitScheme};
use drsl_core::optim::{self, GroupFit, SubjectFit};
use drsl_core::synth::{generate_dataset, Nonlinearity, SignatureStyle, SynthSpec};
use drsl_core::{Executor, FitConfig, Matrix, SignatureMatrix, Subject};
use serde::{Deserialize, Serialize};

use crate::gradcheck::{check_backprop, check_grad_b, BACKPROP_THRESHOLD, GRAD_B_THRESHOLD};
use crate::io::{io_err, read_dataset, write_dataset, Dataset, IoError};
use crate::results::{read_config, version_string, write_results, Correlation, RunResult};
use crate::threads::Threads;

#[derive(Debug, Parser)]
#[command(name = "drsl", version, about = "Deep representational similarity learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known signatures.
    Synth(SynthArgs),
    /// Fit signatures on a dataset.
    Fit(FitArgs),
    /// Recompute correlation and MSE tables from a fit output directory.
    Eval(EvalArgs),
    /// One-subject-out classification.
    Cv(CvArgs),
    /// Finite-difference checks of the analytic gradients.
    Gradcheck(GradcheckArgs),
    /// Per-method wall-clock by phase.
    Bench(BenchArgs),
    /// Group MSE as a function of the total iteration budget.
    Iters(ItersArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Drsl,
    Glm,
    Lasso,
    Lrsl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Sigmoid,
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// `N(0, 1 / fan_in)`.
    Scaled,
    /// `N(0, 1)`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NonlinearityArg {
    Identity,
    TanhWarp,
    QuadraticMix,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub subjects: usize,
    #[arg(long, default_value_t = 200)]
    pub scans: usize,
    #[arg(long, default_value_t = 50)]
    pub voxels: usize,
    #[arg(long, default_value_t = 4)]
    pub conditions: usize,
    /// Repetition time in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub tr: f64,
    /// Per-voxel std of the clean signal over the std of the added noise; `inf` for none.
    #[arg(long, default_value_t = 2.0)]
    pub snr: f64,
    #[arg(long, value_enum, default_value_t = NonlinearityArg::Identity)]
    pub nonlinearity: NonlinearityArg,
    /// Pairwise correlation of the true signatures; orthogonal when absent.
    #[arg(long)]
    pub correlation: Option<f64>,
    /// Stimulus block length in seconds.
    #[arg(long, default_value_t = 4.0)]
    pub block: f64,
    /// Rest between blocks in seconds.
    #[arg(long, default_value_t = 12.0)]
    pub rest: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            subjects: self.subjects,
            scans: self.scans,
            voxels: self.voxels,
            conditions: self.conditions,
            tr: self.tr,
            snr: self.snr,
            nonlinearity: match self.nonlinearity {
                NonlinearityArg::Identity => Nonlinearity::Identity,
                NonlinearityArg::TanhWarp => Nonlinearity::TanhWarp,
                NonlinearityArg::QuadraticMix => Nonlinearity::QuadraticMix,
            },
            signature_style: self.correlation.map_or(SignatureStyle::Orthogonal, SignatureStyle::Correlated),
            seed: self.seed,
            block_s: self.block,
            rest_s: self.rest,
        }
    }
}

/// Hyperparameters. Unset flags fall back to `--config`, then to the library defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// A `config.toml` written by an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Penalty weight, at least 1 [default: 10].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Step size for signatures and network [default: 0.001].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Outer iterations [default: 10].
    #[arg(long)]
    pub m1: Option<usize>,
    /// Inner iterations per subject [default: 100].
    #[arg(long)]
    pub m2: Option<usize>,
    /// Time points per minibatch [default: 50].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Hidden and output widths, e.g. `64,50` [default: sized from the voxel count].
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// [default: sigmoid]
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    /// [default: scaled]
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drop the signature penalty.
    #[arg(long)]
    pub no_regularization: bool,
    /// Carry network parameters across outer iterations.
    #[arg(long)]
    pub warm_start: bool,
    /// Give every subject the same random stream.
    #[arg(long)]
    pub shared_streams: bool,
    /// Use `sqrt(v) - eps` in the Adam denominator.
    #[arg(long)]
    pub adam_minus_epsilon: bool,
    /// LASSO penalty [default: 0.9].
    #[arg(long)]
    pub lasso_alpha: Option<f64>,
    /// LASSO step [default: 1 / (2 sigma_max(D)^2)].
    #[arg(long)]
    pub lasso_eta: Option<f64>,
    /// LASSO iterations [default: 1000].
    #[arg(long)]
    pub lasso_iters: Option<usize>,
}

impl HyperArgs {
    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => read_config(path)?,
            None => FitConfig::default(),
        };
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = self.m1 {
            c.m1 = v;
        }
        if let Some(v) = self.m2 {
            c.m2 = v;
        }
        if let Some(v) = self.batch {
            c.batch_size = v;
        }
        if let Some(v) = &self.layers {
            c.layers = Some(v.clone());
        }
        if let Some(v) = self.activation {
            c.activation = match v {
                ActivationArg::Sigmoid => Activation::Sigmoid,
                ActivationArg::Tanh => Activation::Tanh,
                ActivationArg::Relu => Activation::Relu,
            };
        }
        if let Some(v) = self.init {
            c.init = match v {
                InitArg::Scaled => InitScheme::ScaledNormal,
                InitArg::Unit => InitScheme::UnitNormal,
            };
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.no_regularization {
            c.regularization = Regularization::Disabled;
        }
        if self.warm_start {
            c.theta_init = ThetaInit::WarmStart;
        }
        if self.shared_streams {
            c.streams = StreamPolicy::Shared;
        }
        if self.adam_minus_epsilon {
            c.adam.denominator = AdamDenominator::MinusEpsilon;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn lasso(&self) -> LassoSettings {
        let d = LassoSettings::default();
        LassoSettings {
            alpha: self.lasso_alpha.unwrap_or(d.alpha),
            eta: self.lasso_eta.or(d.eta),
            iterations: self.lasso_iters.unwrap_or(d.iterations),
        }
    }

    pub fn method(&self, m: MethodArg) -> Method {
        match m {
            MethodArg::Drsl => Method::Drsl,
            MethodArg::Glm => Method::Baseline(BaselineKind::GlmRsa),
            MethodArg::Lasso => Method::Baseline(BaselineKind::Lasso(self.lasso())),
            MethodArg::Lrsl => Method::Baseline(BaselineKind::Lrsl),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Drsl)]
    pub method: MethodArg,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Independent fits at seeds `seed, seed+1, ...`; the model file keeps the first.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    /// Output directory [default: <dataset>/fit-<method>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub fit_output: PathBuf,
    /// Dataset to evaluate on [default: the one recorded in the model].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory [default: the fit output directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Drsl)]
    pub method: MethodArg,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Permute each test subject's labels (chance-level control).
    #[arg(long)]
    pub shuffle_labels: bool,
    /// Output directory [default: <dataset>/cv-<method>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random instances for the signature gradient.
    #[arg(long, default_value_t = 25)]
    pub instances: usize,
    /// Random networks for backpropagation.
    #[arg(long, default_value_t = 10)]
    pub networks: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "drsl,glm,lasso,lrsl")]
    pub methods: Vec<MethodArg>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Output directory [default: <dataset>/bench].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ItersArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Drsl)]
    pub method: MethodArg,
    /// Total iteration budgets `m1 * m2`; each must be a multiple of `m1`.
    #[arg(long, value_delimiter = ',', default_value = "100,500,1000")]
    pub schedule: Vec<usize>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Output directory [default: <dataset>/iters-<method>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Core(#[from] drsl_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Everything needed to re-evaluate a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub method: Method,
    pub dataset: PathBuf,
    pub config: FitConfig,
    pub fit: GroupFit,
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            eprintln!("\n{}", usage_for(&argv));
            return 2;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Usage of the subcommand named in `argv`, or of the whole program.
fn usage_for(argv: &[OsString]) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = argv.get(1).and_then(|a| a.to_str()).unwrap_or_default().to_owned();
    match cmd.find_subcommand_mut(&name) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Fit(a) => fit(&a),
        Command::Eval(a) => eval(&a),
        Command::Cv(a) => cv(&a),
        Command::Gradcheck(a) => gradcheck(&a),
        Command::Bench(a) => bench(&a),
        Command::Iters(a) => iters(&a),
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Reads a dataset and column-standardizes every subject's responses.
pub fn load_subjects(dir: &Path) -> Result<Vec<Subject>, CliError> {
    read_dataset(dir)?
        .subjects()?
        .into_iter()
        .map(|s| Ok(Subject::new(standardize_columns(&s.data)?, s.design)?))
        .collect()
}

fn mean_signatures(fits: &[SignatureMatrix]) -> Result<SignatureMatrix, CliError> {
    let first = fits.first().ok_or_else(|| CliError::Failed("no subjects".into()))?;
    let mut acc = Matrix::zeros(first.values.rows(), first.values.cols());
    for f in fits {
        acc.axpy(1.0, &f.values)?;
    }
    Ok(SignatureMatrix::new(first.conditions.clone(), acc.scale(1.0 / fits.len() as f64))?)
}

/// Fits any method into the common group shape; linear baselines carry no network.
pub fn fit_method<E: Executor>(
    method: Method,
    subjects: &[Subject],
    config: &FitConfig,
    exec: &E,
) -> Result<GroupFit, CliError> {
    Ok(match method {
        Method::Drsl => optim::fit(subjects, config, exec)?,
        Method::Baseline(BaselineKind::Lrsl) => fit_lrsl(subjects, config, exec)?,
        Method::Baseline(kind) => {
            let sigs = fit_baseline(kind, subjects, config, exec)?;
            GroupFit {
                signatures: mean_signatures(&sigs)?,
                subjects: sigs
                    .into_iter()
                    .map(|signatures| SubjectFit { signatures, params: None, loss_history: Vec::new() })
                    .collect(),
            }
        }
    })
}

/// Iteration count reported next to the MSE.
pub fn iterations(method: Method, config: &FitConfig) -> usize {
    match method {
        Method::Drsl | Method::Baseline(BaselineKind::Lrsl) => config.m1 * config.m2,
        Method::Baseline(BaselineKind::Lasso(s)) => s.iterations,
        Method::Baseline(BaselineKind::GlmRsa) => 0,
    }
}

fn out_dir(explicit: &Option<PathBuf>, dataset: &Path, name: String) -> PathBuf {
    explicit.clone().unwrap_or_else(|| dataset.join(name))
}

fn write_signatures(path: &Path, sig: &SignatureMatrix) -> Result<(), CliError> {
    let mut text = String::new();
    for (i, name) in sig.conditions.iter().enumerate() {
        text.push_str(name);
        for v in sig.values.row(i) {
            text.push_str(&format!("\t{v:.16e}"));
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))?;
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec = a.spec();
    let ds = generate_dataset(&spec)?;
    write_dataset(&a.out, &Dataset::from_synth(&ds, spec.tr))?;
    write_signatures(&a.out.join("truth.tsv"), &ds.truth)?;
    println!("wrote {} subjects to {}", spec.subjects, a.out.display());
    Ok(())
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn fit(a: &FitArgs) -> Result<(), CliError> {
    let config = a.hyper.fit_config()?;
    let method = a.hyper.method(a.method);
    if a.repeats == 0 {
        return Err(CliError::Failed("--repeats must be at least 1".into()));
    }
    let exec = Threads::from_env();
    let mut result = RunResult::new(method.label(), config.clone());

    let t = Instant::now();
    let subjects = load_subjects(&a.dataset)?;
    result.runtime_ms.push(("design-build".into(), ms_since(t)));

    let t = Instant::now();
    let mut first = None;
    let mut rhos = Vec::new();
    for r in 0..a.repeats {
        let cfg = FitConfig { seed: config.seed.wrapping_add(r), ..config.clone() };
        let group = fit_method(method, &subjects, &cfg, &exec)?;
        rhos.push(between_class_correlation(&group.signatures)?);
        first.get_or_insert(group);
    }
    let group = first.expect("at least one repeat");
    result.runtime_ms.push(("fit".into(), ms_since(t)));

    let t = Instant::now();
    result.correlation = Some(Correlation {
        rho_max: rhos.iter().sum::<f64>() / rhos.len() as f64,
        rho_std_over_seeds: sample_std(&rhos),
    });
    result.mse.push((iterations(method, &config), group_fit_mse(&subjects, &group, &config)?));
    result.runtime_ms.push(("eval".into(), ms_since(t)));

    let out = out_dir(&a.out, &a.dataset, format!("fit-{}", method.label()));
    write_results(&[result], &out)?;
    write_signatures(&out.join("signatures.tsv"), &group.signatures)?;
    let model = ModelFile { version: version_string(), method, dataset: a.dataset.clone(), config, fit: group };
    write_json(&out.join("model.json"), &model)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| IoError::Format(e.to_string()))?;
    fs::write(path, json).map_err(io_err(path))?;
    Ok(())
}

pub fn read_model(dir: &Path) -> Result<ModelFile, CliError> {
    let path = dir.join("model.json");
    if !path.is_file() {
        return Err(IoError::MissingFile(path).into());
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(serde_json::from_str(&text).map_err(|e| IoError::Format(format!("{}: {e}", path.display())))?)
}

fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let model = read_model(&a.fit_output)?;
    let dataset = a.dataset.clone().unwrap_or_else(|| model.dataset.clone());
    let mut result = RunResult::new(model.method.label(), model.config.clone());
    let t = Instant::now();
    let subjects = load_subjects(&dataset)?;
    result.runtime_ms.push(("design-build".into(), ms_since(t)));
    let t = Instant::now();
    let rho = between_class_correlation(&model.fit.signatures)?;
    result.correlation = Some(Correlation { rho_max: rho, rho_std_over_seeds: 0.0 });
    result.mse.push((iterations(model.method, &model.config), group_fit_mse(&subjects, &model.fit, &model.config)?));
    result.runtime_ms.push(("eval".into(), ms_since(t)));
    let out = a.out.clone().unwrap_or_else(|| a.fit_output.clone());
    write_results(&[result], &out)?;
    println!("rho_max {rho}");
    Ok(())
}

fn cv(a: &CvArgs) -> Result<(), CliError> {
    let config = a.hyper.fit_config()?;
    let method = a.hyper.method(a.method);
    let mut result = RunResult::new(method.label(), config.clone());
    let t = Instant::now();
    let subjects = load_subjects(&a.dataset)?;
    result.runtime_ms.push(("design-build".into(), ms_since(t)));
    let t = Instant::now();
    let options = CvOptions { shuffle_labels: a.shuffle_labels };
    let report = cross_validate(&subjects, &method, &config, options, &Threads::from_env())?;
    result.runtime_ms.push(("cv".into(), ms_since(t)));
    println!("{} mean accuracy {:.4} (std {:.4})", report.method, report.mean, report.std);
    result.cv = Some(report);
    let out = out_dir(&a.out, &a.dataset, format!("cv-{}", method.label()));
    write_results(&[result], &out)?;
    Ok(())
}

fn gradcheck(a: &GradcheckArgs) -> Result<(), CliError> {
    let b = check_grad_b(a.seed, a.instances)?;
    let t = check_backprop(a.seed, a.networks)?;
    println!(
        "grad_b: {} instances, {} coordinates, max relative error {:.3e} (threshold {GRAD_B_THRESHOLD:.0e})",
        b.instances, b.coordinates, b.max_relative_error
    );
    println!(
        "backprop: {} networks, {} parameters, max relative error {:.3e} (threshold {BACKPROP_THRESHOLD:.0e})",
        t.instances, t.coordinates, t.max_relative_error
    );
    if b.max_relative_error < GRAD_B_THRESHOLD && t.max_relative_error < BACKPROP_THRESHOLD {
        Ok(())
    } else {
        Err(CliError::Failed("gradient check above threshold".into()))
    }
}

fn bench(a: &BenchArgs) -> Result<(), CliError> {
    let config = a.hyper.fit_config()?;
    let exec = Threads::from_env();
    let mut results = Vec::new();
    for &m in &a.methods {
        let method = a.hyper.method(m);
        let mut result = RunResult::new(method.label(), config.clone());
        let t = Instant::now();
        let subjects = load_subjects(&a.dataset)?;
        result.runtime_ms.push(("design-build".into(), ms_since(t)));
        let t = Instant::now();
        let group = fit_method(method, &subjects, &config, &exec)?;
        result.runtime_ms.push(("fit".into(), ms_since(t)));
        let t = Instant::now();
        let rho = between_class_correlation(&group.signatures)?;
        result.correlation = Some(Correlation { rho_max: rho, rho_std_over_seeds: 0.0 });
        result.mse.push((iterations(method, &config), group_fit_mse(&subjects, &group, &config)?));
        result.runtime_ms.push(("eval".into(), ms_since(t)));
        for (phase, ms) in &result.runtime_ms {
            println!("{:<6} {phase:<13} {ms:>10.1} ms", method.label());
        }
        results.push(result);
    }
    write_results(&results, &out_dir(&a.out, &a.dataset, "bench".into()))?;
    Ok(())
}

fn iters(a: &ItersArgs) -> Result<(), CliError> {
    let config = a.hyper.fit_config()?;
    let method = a.hyper.method(a.method);
    if !matches!(method, Method::Drsl | Method::Baseline(BaselineKind::Lrsl)) {
        return Err(CliError::Failed(format!("`{}` has no iteration budget; use drsl or lrsl", method.label())));
    }
    if let Some(n) = a.schedule.iter().find(|&&n| config.m1 == 0 || n % config.m1 != 0 || n == 0) {
        return Err(CliError::Failed(format!("budget {n} is not a positive multiple of m1 = {}", config.m1)));
    }
    let exec = Threads::from_env();
    let subjects = load_subjects(&a.dataset)?;
    let mut result = RunResult::new(method.label(), config.clone());
    for &n in &a.schedule {
        let cfg = FitConfig { m2: n / config.m1, ..config.clone() };
        let t = Instant::now();
        let group = fit_method(method, &subjects, &cfg, &exec)?;
        let mse = group_fit_mse(&subjects, &group, &cfg)?;
        result.runtime_ms.push((format!("fit-{n}"), ms_since(t)));
        println!("{n:>8} {mse:.6e}");
        result.mse.push((n, mse));
    }
    write_results(&[result], &out_dir(&a.out, &a.dataset, format!("iters-{}", method.label())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_defaults_match_the_library() {
        let hyper = HyperArgs::default();
        assert_eq!(hyper.fit_config().unwrap(), FitConfig::default());
        assert_eq!(hyper.lasso(), LassoSettings::default());
        let cli = Cli::try_parse_from(["drsl", "fit", "--dataset", "d"]).unwrap();
        let Command::Fit(args) = cli.command else { panic!("parsed the wrong subcommand") };
        assert_eq!(args.hyper.fit_config().unwrap(), FitConfig::default());
        assert_eq!(args.method, MethodArg::Drsl);
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "drsl",
            "cv",
            "--dataset",
            "d",
            "--alpha",
            "3",
            "--layers",
            "16,8",
            "--activation",
            "tanh",
            "--shared-streams",
        ])
        .unwrap();
        let Command::Cv(args) = cli.command else { panic!("parsed the wrong subcommand") };
        let c = args.hyper.fit_config().unwrap();
        assert_eq!(
            (c.alpha, c.layers, c.activation, c.streams),
            (3.0, Some(vec![16, 8]), Activation::Tanh, StreamPolicy::Shared)
        );
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run_cli(["drsl", "fit", "--dataset", "d", "--method", "unknown"]), 2);
        assert_eq!(run_cli(["drsl", "nope"]), 2);
        assert_eq!(run_cli(["drsl", "fit", "--dataset", "/nonexistent/dir", "--method", "glm"]), 1);
        assert_eq!(run_cli(["drsl", "fit", "--dataset", "d", "--alpha", "0.5"]), 1);
    }
}
