//! Evaluation: between-class correlation, reconstruction MSE, and
//! signature-based pairwise classification decoded with an ECOC codebook
//! under one-subject-out cross-validation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::baselines::{fit_baseline, fit_lrsl, BaselineKind};
use crate::data::{validate_pair, FitConfig, NetworkParameters, SignatureMatrix};
use crate::error::{shape, Error, Result};
use crate::kernel;
use crate::matrix::{dims, dot, Matrix};
use crate::optim::{self, adam_step, sample_batch, AdamState, GroupFit, Subject};
use crate::parallel::{Executor, Sequential};
use crate::rng::{derive_seed, rng_from, TAG_ADAPT, TAG_BATCH, TAG_SHUFFLE, TAG_THETA};
use crate::stats;

/// Sample Pearson correlation.
pub fn pearson_corr(a: &[f64], b: &[f64]) -> Result<f64> {
    stats::pearson(a, b)
}

/// `max_{i<j} |corr(b_i, b_j)|` over signature rows; lower is better.
pub fn between_class_correlation(signatures: &SignatureMatrix) -> Result<f64> {
    let b = &signatures.values;
    if b.rows() < 2 {
        return Err(Error::BadParams(format!("need at least 2 signature rows, got {}", b.rows())));
    }
    for i in 0..b.rows() {
        let row = b.row(i);
        let std = stats::sample_std(row);
        if b.cols() < 2 || stats::is_degenerate_spread(std, stats::mean(row)) {
            return Err(Error::ConstantRow(i));
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..b.rows() {
        for j in i + 1..b.rows() {
            worst = worst.max(stats::pearson(b.row(i), b.row(j))?.abs());
        }
    }
    Ok(worst)
}

/// One subject's contribution to [`group_mse`].
#[derive(Debug, Clone, Copy)]
pub struct FittedSubject<'a> {
    /// Responses in the model's observable space (`f(X)` for DRSL).
    pub observed: &'a Matrix,
    pub design: &'a Matrix,
    pub signatures: &'a Matrix,
}

fn residual_of(s: &FittedSubject<'_>) -> Result<Matrix> {
    if s.design.rows() != s.observed.rows() || s.signatures.shape() != (s.design.cols(), s.observed.cols()) {
        return Err(shape("fitted subject", dims((s.design.cols(), s.observed.cols())), dims(s.signatures.shape())));
    }
    s.observed.sub(&s.design.matmul(s.signatures)?)
}

/// `(1 / Σ T_ℓ V) Σ_ℓ ‖X_ℓ − D_ℓ B_ℓ‖_F²`.
pub fn group_mse(parts: &[FittedSubject<'_>]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for p in parts {
        total += residual_of(p)?.sum_sq();
        count += p.observed.rows() * p.observed.cols();
    }
    if count == 0 {
        return Err(Error::BadParams("group_mse over no entries".into()));
    }
    Ok(total / count as f64)
}

/// Maps every subject into its observable space under `fit`.
pub fn observables(subjects: &[Subject], fit: &GroupFit, config: &FitConfig) -> Result<Vec<Matrix>> {
    if subjects.len() != fit.subjects.len() {
        return Err(Error::LengthMismatch(subjects.len(), fit.subjects.len()));
    }
    subjects
        .iter()
        .zip(&fit.subjects)
        .map(|(s, f)| optim::observable(&s.data.responses, f.params.as_ref(), config))
        .collect()
}

/// [`group_mse`] of a group fit, each subject scored with its own `B` and kernel.
pub fn group_fit_mse(subjects: &[Subject], fit: &GroupFit, config: &FitConfig) -> Result<f64> {
    let obs = observables(subjects, fit, config)?;
    let parts: Vec<FittedSubject<'_>> = subjects
        .iter()
        .zip(&fit.subjects)
        .zip(&obs)
        .map(|((s, f), o)| FittedSubject { observed: o, design: &s.design.values, signatures: &f.signatures.values })
        .collect();
    group_mse(&parts)
}

pub const SCALE_FLOOR: f64 = 1e-8;

/// Per-feature RMS residual of `observed ≈ D B`, floored at [`SCALE_FLOOR`].
pub fn residual_scale(observed: &Matrix, design: &Matrix, signatures: &Matrix) -> Result<Vec<f64>> {
    let r = residual_of(&FittedSubject { observed, design, signatures })?;
    Ok(column_rms(&r).into_iter().map(|v| v.max(SCALE_FLOOR)).collect())
}

fn column_rms(r: &Matrix) -> Vec<f64> {
    let mut acc = vec![0.0; r.cols()];
    for row in r.row_iter() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v * v;
        }
    }
    let n = r.rows().max(1) as f64;
    acc.into_iter().map(|a| libm::sqrt(a / n)).collect()
}

/// Pooled [`residual_scale`] over several subjects, weighting by time points.
pub fn pooled_residual_scale(parts: &[FittedSubject<'_>]) -> Result<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut rows = 0usize;
    for p in parts {
        let r = residual_of(p)?;
        let sums = acc.get_or_insert_with(|| vec![0.0; r.cols()]);
        if sums.len() != r.cols() {
            return Err(shape("pooled residual width", sums.len(), r.cols()));
        }
        for row in r.row_iter() {
            for (a, v) in sums.iter_mut().zip(row) {
                *a += v * v;
            }
        }
        rows += r.rows();
    }
    let sums = acc.ok_or_else(|| Error::BadParams("no subjects to pool".into()))?;
    Ok(sums.into_iter().map(|a| libm::sqrt(a / rows.max(1) as f64).max(SCALE_FLOOR)).collect())
}

/// Linear rule `a · x + z ≥ 0` separating class `i` (positive) from `j`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperplane {
    pub i: usize,
    pub j: usize,
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn decision(&self, sample: &[f64]) -> f64 {
        dot(&self.normal, sample) + self.offset
    }

    /// `+1` when the sample falls on class `i`'s side, `−1` otherwise.
    pub fn outcome(&self, sample: &[f64]) -> i8 {
        if self.decision(sample) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Labelled training samples in the model's observable space.
#[derive(Debug, Clone, Copy)]
pub struct TrainingProjections<'a> {
    pub samples: &'a Matrix,
    pub labels: &'a [usize],
}

/// Per-class means of the training samples; a class without samples uses its signature row.
pub fn class_means(signatures: &Matrix, training: &[TrainingProjections<'_>]) -> Result<Matrix> {
    let (p, v) = signatures.shape();
    let mut sums = Matrix::zeros(p, v);
    let mut counts = vec![0usize; p];
    for t in training {
        if t.samples.rows() != t.labels.len() {
            return Err(Error::LengthMismatch(t.samples.rows(), t.labels.len()));
        }
        if t.samples.cols() != v {
            return Err(shape("training projection width", v, t.samples.cols()));
        }
        for (row, &label) in t.samples.row_iter().zip(t.labels) {
            if label >= p {
                return Err(Error::BadParams(format!("label {label} out of range for {p} classes")));
            }
            counts[label] += 1;
            for (s, x) in sums.row_mut(label).iter_mut().zip(row) {
                *s += x;
            }
        }
    }
    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            sums.row_mut(k).copy_from_slice(signatures.row(k));
        } else {
            for s in sums.row_mut(k) {
                *s /= n as f64;
            }
        }
    }
    Ok(sums)
}

/// Hyperplanes for every pair `i < j` in codebook column order.
///
/// `a_ij = (b_i − b_j) / scale` elementwise and `z_ij` is minus the midpoint
/// of the two class means projected onto `a_ij`.
pub fn build_hyperplanes(signatures: &SignatureMatrix, scale: &[f64], means: &Matrix) -> Result<Vec<Hyperplane>> {
    let b = &signatures.values;
    if b.rows() < 2 {
        return Err(Error::BadParams(format!("need at least 2 classes, got {}", b.rows())));
    }
    if scale.len() != b.cols() {
        return Err(shape("hyperplane scale", b.cols(), scale.len()));
    }
    if means.shape() != b.shape() {
        return Err(shape("class means", dims(b.shape()), dims(means.shape())));
    }
    let mut planes = Vec::with_capacity(b.rows() * (b.rows() - 1) / 2);
    for i in 0..b.rows() {
        for j in i + 1..b.rows() {
            planes.push(hyperplane(b.row(i), b.row(j), i, j, scale, means.row(i), means.row(j))?);
        }
    }
    Ok(planes)
}

fn hyperplane(bi: &[f64], bj: &[f64], i: usize, j: usize, scale: &[f64], mi: &[f64], mj: &[f64]) -> Result<Hyperplane> {
    if bi == bj {
        return Err(Error::DegeneratePair(i, j));
    }
    let normal: Vec<f64> = bi.iter().zip(bj).zip(scale).map(|((x, y), s)| (x - y) / s).collect();
    let offset = -0.5 * (dot(&normal, mi) + dot(&normal, mj));
    Ok(Hyperplane { i, j, normal, offset })
}

/// Pairwise one-vs-one code matrix, `P × P(P−1)/2`, entries in `{+1, −1, 0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcocCodebook {
    classes: usize,
    pairs: Vec<(usize, usize)>,
    codes: Vec<i8>,
}

impl EcocCodebook {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn columns(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn code(&self, class: usize, column: usize) -> i8 {
        self.codes[class * self.pairs.len() + column]
    }

    pub fn row(&self, class: usize) -> &[i8] {
        let k = self.pairs.len();
        &self.codes[class * k..(class + 1) * k]
    }

    /// Nearest row by generalized Hamming distance over nonzero code entries; ties go to the lowest class.
    pub fn decode(&self, outcomes: &[i8]) -> usize {
        let mut best = (usize::MAX, 0);
        for class in 0..self.classes {
            let dist = self.row(class).iter().zip(outcomes).filter(|(&c, &o)| c != 0 && c != o).count();
            if dist < best.0 {
                best = (dist, class);
            }
        }
        best.1
    }
}

pub fn ecoc_codebook(p: usize) -> EcocCodebook {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let k = pairs.len();
    let mut codes = vec![0i8; p * k];
    for (col, &(i, j)) in pairs.iter().enumerate() {
        codes[i * k + col] = 1;
        codes[j * k + col] = -1;
    }
    EcocCodebook { classes: p, pairs, codes }
}

/// Class of `sample` from the signs of all pairwise hyperplanes.
pub fn predict(sample: &[f64], hyperplanes: &[Hyperplane], codebook: &EcocCodebook) -> usize {
    let outcomes: Vec<i8> = hyperplanes.iter().map(|h| h.outcome(sample)).collect();
    codebook.decode(&outcomes)
}

/// Rows whose design has a unique maximum above half that column's maximum, with that column as label.
pub fn dominant_rows(design: &Matrix) -> Vec<(usize, usize)> {
    let col_max: Vec<f64> =
        (0..design.cols()).map(|j| design.row_iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut out = Vec::new();
    for (t, row) in design.row_iter().enumerate() {
        let Some((k, &m)) = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
            continue;
        };
        let unique = row.iter().enumerate().all(|(j, &v)| j == k || v < m);
        if unique && col_max[k] > 0.0 && m > 0.5 * col_max[k] {
            out.push((t, k));
        }
    }
    out
}

/// A kernel fitted to a held-out subject against frozen group signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub params: NetworkParameters,
    /// Batch kernel loss before each update.
    pub loss_history: Vec<f64>,
}

/// Fits `θ` on the test subject with `B` frozen, running only the network
/// steps for `config.m2` iterations.
pub fn adapt_test_subject(
    test: &Subject,
    frozen: &SignatureMatrix,
    config: &FitConfig,
    seed: u64,
) -> Result<Adaptation> {
    config.validate()?;
    validate_pair(&test.data, &test.design)?;
    if frozen.conditions != test.design.conditions {
        return Err(Error::ConditionMismatch(format!(
            "frozen signatures {:?} vs test design {:?}",
            frozen.conditions, test.design.conditions
        )));
    }
    let sizes = config.layer_sizes(test.data.voxels())?;
    if frozen.values.cols() != *sizes.last().expect("validated") {
        return Err(shape("frozen signature width", sizes[sizes.len() - 1], frozen.values.cols()));
    }
    let t = test.data.scans();
    if config.batch_size > t {
        return Err(Error::BatchTooLarge { batch: config.batch_size, available: t });
    }
    let stream = derive_seed(seed, &[TAG_ADAPT]);
    let mut params = kernel::init_params(&sizes, config.init, derive_seed(stream, &[TAG_THETA]))?;
    let mut state = AdamState::new(&params);
    let mut rng = rng_from(derive_seed(stream, &[TAG_BATCH]));
    let mut loss_history = Vec::with_capacity(config.m2);
    for _ in 0..config.m2 {
        let batch = sample_batch(&mut rng, t, config.batch_size)?;
        let x = test.data.responses.select_rows(&batch);
        let targets = test.design.values.select_rows(&batch).matmul(&frozen.values)?;
        let (out, trace) = kernel::forward(&params, &x, config.activation)?;
        loss_history.push(out.sub(&targets)?.sum_sq());
        let grads = kernel::backprop_from_trace(&params, &trace, &targets, config.activation)?;
        adam_step(&mut state, &grads, &mut params, config.eta, &config.adam)?;
    }
    Ok(Adaptation { params, loss_history })
}

/// What a cross-validation fold learns from its training subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub signatures: SignatureMatrix,
    /// Training subjects' own signatures, in training order.
    pub subject_signatures: Vec<Matrix>,
    /// Training subjects' responses in the observable space, in training order.
    pub observables: Vec<Matrix>,
}

/// A signature estimator pluggable into [`cross_validate`].
///
/// `train` only ever receives the training subjects of a fold.
pub trait CvMethod: Sync {
    fn name(&self) -> String;

    fn train(&self, training: &[Subject], config: &FitConfig) -> Result<TrainedModel>;

    /// The held-out subject's responses in the model's observable space.
    fn project_test(&self, model: &TrainedModel, test: &Subject, config: &FitConfig, seed: u64) -> Result<Matrix>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    Drsl,
    Baseline(BaselineKind),
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Drsl => "drsl",
            Method::Baseline(k) => k.name(),
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drsl" => Ok(Method::Drsl),
            other => other.parse().map(Method::Baseline),
        }
    }
}

fn mean_of(matrices: &[&Matrix]) -> Result<Matrix> {
    let first = matrices.first().ok_or_else(|| Error::BadParams("no signatures to average".into()))?;
    let mut acc = Matrix::zeros(first.rows(), first.cols());
    for m in matrices {
        acc.axpy(1.0, m)?;
    }
    Ok(acc.scale(1.0 / matrices.len() as f64))
}

impl CvMethod for Method {
    fn name(&self) -> String {
        self.label().to_string()
    }

    fn train(&self, training: &[Subject], config: &FitConfig) -> Result<TrainedModel> {
        let group = match self {
            Method::Drsl => optim::fit(training, config, &Sequential)?,
            Method::Baseline(BaselineKind::Lrsl) => fit_lrsl(training, config, &Sequential)?,
            Method::Baseline(kind) => {
                let sigs = fit_baseline(*kind, training, config, &Sequential)?;
                let refs: Vec<&Matrix> = sigs.iter().map(|s| &s.values).collect();
                let values = mean_of(&refs)?;
                return Ok(TrainedModel {
                    signatures: SignatureMatrix { conditions: sigs[0].conditions.clone(), values },
                    subject_signatures: sigs.into_iter().map(|s| s.values).collect(),
                    observables: training.iter().map(|s| s.data.responses.clone()).collect(),
                });
            }
        };
        let observables = observables(training, &group, config)?;
        Ok(TrainedModel {
            signatures: group.signatures,
            subject_signatures: group.subjects.into_iter().map(|f| f.signatures.values).collect(),
            observables,
        })
    }

    fn project_test(&self, model: &TrainedModel, test: &Subject, config: &FitConfig, seed: u64) -> Result<Matrix> {
        match self {
            Method::Drsl => {
                let adapted = adapt_test_subject(test, &model.signatures, config, seed)?;
                kernel::transform(&adapted.params, &test.data.responses, config.activation)
            }
            Method::Baseline(_) => Ok(test.data.responses.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CvOptions {
    /// Permute the test labels of every fold (permutation null).
    pub shuffle_labels: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldReport {
    pub test_subject: String,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvReport {
    pub method: String,
    pub folds: Vec<FoldReport>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub std: f64,
}

impl CvReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }
}

fn run_fold<M: CvMethod + ?Sized>(
    subjects: &[Subject],
    held_out: usize,
    method: &M,
    config: &FitConfig,
    options: CvOptions,
) -> Result<FoldReport> {
    let training: Vec<Subject> =
        subjects.iter().enumerate().filter(|&(i, _)| i != held_out).map(|(_, s)| s.clone()).collect();
    let test = &subjects[held_out];
    let model = method.train(&training, config)?;
    if model.observables.len() != training.len() || model.subject_signatures.len() != training.len() {
        return Err(Error::LengthMismatch(training.len(), model.observables.len()));
    }

    let parts: Vec<FittedSubject<'_>> = training
        .iter()
        .zip(&model.observables)
        .zip(&model.subject_signatures)
        .map(|((s, o), b)| FittedSubject { observed: o, design: &s.design.values, signatures: b })
        .collect();
    let scale = pooled_residual_scale(&parts)?;

    let labelled: Vec<(Matrix, Vec<usize>)> = training
        .iter()
        .zip(&model.observables)
        .map(|(s, o)| {
            let (rows, labels): (Vec<usize>, Vec<usize>) = dominant_rows(&s.design.values).into_iter().unzip();
            (o.select_rows(&rows), labels)
        })
        .collect();
    let projections: Vec<TrainingProjections<'_>> =
        labelled.iter().map(|(m, l)| TrainingProjections { samples: m, labels: l }).collect();
    let means = class_means(&model.signatures.values, &projections)?;
    let planes = build_hyperplanes(&model.signatures, &scale, &means)?;
    let p = model.signatures.values.rows();
    let codebook = ecoc_codebook(p);

    let projected = method.project_test(&model, test, config, derive_seed(config.seed, &[held_out as u64]))?;
    if projected.shape() != (test.data.scans(), model.signatures.values.cols()) {
        return Err(shape(
            "projected test responses",
            dims((test.data.scans(), model.signatures.values.cols())),
            dims(projected.shape()),
        ));
    }
    let test_rows = dominant_rows(&test.design.values);
    if test_rows.is_empty() {
        return Err(Error::BadParams(format!("subject {} has no single-condition test rows", test.data.subject_id)));
    }
    let mut truth: Vec<usize> = test_rows.iter().map(|&(_, k)| k).collect();
    if options.shuffle_labels {
        truth.shuffle(&mut rng_from(derive_seed(config.seed, &[TAG_SHUFFLE, held_out as u64])));
    }
    let mut confusion = vec![vec![0usize; p]; p];
    let mut correct = 0;
    for (&(row, _), &label) in test_rows.iter().zip(&truth) {
        let guess = predict(projected.row(row), &planes, &codebook);
        confusion[label][guess] += 1;
        correct += usize::from(guess == label);
    }
    Ok(FoldReport {
        test_subject: test.data.subject_id.clone(),
        accuracy: correct as f64 / test_rows.len() as f64,
        correct,
        total: test_rows.len(),
        confusion,
    })
}

/// One-subject-out cross-validation; folds run through `exec` and report in subject order.
pub fn cross_validate<M: CvMethod, E: Executor>(
    subjects: &[Subject],
    method: &M,
    config: &FitConfig,
    options: CvOptions,
    exec: &E,
) -> Result<CvReport> {
    if subjects.len() < 2 {
        return Err(Error::TooFewSubjects(subjects.len()));
    }
    config.validate()?;
    optim::check_group(subjects)?;
    let folds = exec
        .map(subjects.len(), |i| run_fold(subjects, i, method, config, options))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    Ok(CvReport { method: method.name(), mean: stats::mean(&acc), std: stats::sample_std(&acc), folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(rows: &[&[f64]]) -> SignatureMatrix {
        let values = Matrix::from_rows(rows).unwrap();
        SignatureMatrix { conditions: (0..values.rows()).map(|i| format!("c{i}")).collect(), values }
    }

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0, 5.0];
        assert!((pearson_corr(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson_corr(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        let r = pearson_corr(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 9.0 / libm::sqrt(84.0)).abs() < 1e-12);
        assert!((r - 0.981981).abs() < 1e-5);
    }

    #[test]
    fn correlation_examples() {
        assert_eq!(between_class_correlation(&sig(&[&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]])).unwrap(), 1.0);
        let eye = sig(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!((between_class_correlation(&eye).unwrap() - 0.5).abs() < 1e-12);
        let dup = sig(&[&[1.0, 4.0, 2.0], &[0.0, 1.0, 7.0], &[1.0, 4.0, 2.0]]);
        assert!((between_class_correlation(&dup).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(between_class_correlation(&sig(&[&[1.0, 2.0], &[3.0, 3.0]])), Err(Error::ConstantRow(1)));
    }

    #[test]
    fn residual_scale_examples() {
        let d = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0, -1.0], [2.0, 0.5]]).unwrap();
        let x = d.matmul(&b).unwrap();
        assert_eq!(residual_scale(&x, &d, &b).unwrap(), vec![SCALE_FLOOR; 2]);
        let pm = Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]]).unwrap();
        let shifted = x.add(&pm).unwrap();
        for v in residual_scale(&shifted, &d, &b).unwrap() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mse_exact_fit_is_zero() {
        let d = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let x = d.matmul(&b).unwrap();
        assert_eq!(group_mse(&[FittedSubject { observed: &x, design: &d, signatures: &b }]), Ok(0.0));
    }

    #[test]
    fn hyperplane_example() {
        let s = sig(&[&[2.0, 0.0], &[0.0, 0.0]]);
        let means = Matrix::from_rows(&[[2.0, 0.0], [0.0, 0.0]]).unwrap();
        let planes = build_hyperplanes(&s, &[1.0, 1.0], &means).unwrap();
        assert_eq!(planes[0].normal, vec![2.0, 0.0]);
        assert_eq!(planes[0].offset, -2.0);
        let book = ecoc_codebook(2);
        assert_eq!(predict(&[2.0, 0.0], &planes, &book), 0);
        assert_eq!(predict(&[0.0, 0.0], &planes, &book), 1);
        let swapped = hyperplane(&[0.0, 0.0], &[2.0, 0.0], 0, 1, &[1.0, 1.0], &[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(swapped.normal, vec![-2.0, 0.0]);
        assert_eq!(swapped.offset, 2.0);
        let same = sig(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(build_hyperplanes(&same, &[1.0, 1.0], &same.values), Err(Error::DegeneratePair(0, 1)));
    }

    #[test]
    fn codebook_shapes() {
        assert_eq!(ecoc_codebook(2).row(0), &[1]);
        assert_eq!(ecoc_codebook(2).row(1), &[-1]);
        let c3 = ecoc_codebook(3);
        assert_eq!(c3.row(0), &[1, 1, 0]);
        assert_eq!(c3.pairs(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(ecoc_codebook(8).columns(), 28);
    }

    #[test]
    fn decode_tie_goes_to_lowest_class() {
        let c3 = ecoc_codebook(3);
        // Each class disagrees with exactly one of its two bits.
        assert_eq!(c3.decode(&[1, -1, 1]), 0);
    }

    #[test]
    fn dominance_rule() {
        let d = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.2], [0.4, 0.1], [0.3, 0.3], [0.1, 0.8]]).unwrap();
        assert_eq!(dominant_rows(&d), vec![(1, 0), (4, 1)]);
    }
}
