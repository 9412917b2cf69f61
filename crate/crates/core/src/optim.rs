//! The DRSL objective and its block-coordinate optimizer.
//!
//! Per subject, one iteration draws a mini-batch of time points, takes an
//! SGD step on the signatures `B` with the kernel fixed, then an Adam step
//! on the kernel parameters `θ` against the targets `d_i B`. The group loop
//! warm-starts every subject from the current group signatures and replaces
//! them with the subject mean after each pass.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{
    validate_pair, AdamConfig, AdamDenominator, DesignMatrix, FitConfig, NetworkParameters, SignatureMatrix,
    StreamPolicy, SubjectData, ThetaInit,
};
use crate::error::{shape, Error, Result};
use crate::kernel::{self, ParameterGradients};
use crate::matrix::{dims, Matrix};
use crate::parallel::Executor;
use crate::rng::{derive_seed, rng_from, TAG_BATCH, TAG_GROUP_INIT, TAG_THETA};

/// One subject's responses with its design.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub data: SubjectData,
    pub design: DesignMatrix,
}

impl Subject {
    pub fn new(data: SubjectData, design: DesignMatrix) -> Result<Self> {
        validate_pair(&data, &design)?;
        Ok(Self { data, design })
    }
}

/// `Σ_kj α|β_kj| + 10α β_kj²`.
pub fn regularizer(b: &Matrix, alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(penalty(b, alpha))
}

/// The penalty without the `α >= 1` check; `alpha = 0` disables it.
pub(crate) fn penalty(b: &Matrix, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    b.as_slice().iter().map(|&v| alpha * v.abs() + 10.0 * alpha * v * v).sum()
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_batch(b: &Matrix, design_rows: &Matrix, f_outputs: &Matrix) -> Result<()> {
    if design_rows.cols() != b.rows() {
        return Err(shape("design rows vs signatures", b.rows(), design_rows.cols()));
    }
    if f_outputs.shape() != (design_rows.rows(), b.cols()) {
        return Err(shape("kernel outputs", dims((design_rows.rows(), b.cols())), dims(f_outputs.shape())));
    }
    Ok(())
}

/// `F − D B` over the batch.
fn residual(b: &Matrix, design_rows: &Matrix, f_outputs: &Matrix) -> Result<Matrix> {
    f_outputs.sub(&design_rows.matmul(b)?)
}

fn grad_b_unchecked(b: &Matrix, design_rows: &Matrix, f_outputs: &Matrix, alpha: f64) -> Result<Matrix> {
    let r = residual(b, design_rows, f_outputs)?;
    let mut g = design_rows.t_matmul(&r)?.scale(-2.0);
    if alpha != 0.0 {
        for (gv, &bv) in g.as_mut_slice().iter_mut().zip(b.as_slice()) {
            *gv += alpha * sign(bv) + 20.0 * alpha * bv;
        }
    }
    Ok(g)
}

/// Gradient of [`objective`] with respect to `B`:
/// `α sign(B) + 20α B − 2 Σ_i d_iᵀ (f(x_i) − d_i B)`, with `sign(0) = 0`.
pub fn grad_b(b: &Matrix, design_rows: &Matrix, f_outputs: &Matrix, alpha: f64) -> Result<Matrix> {
    check_batch(b, design_rows, f_outputs)?;
    grad_b_unchecked(b, design_rows, f_outputs, alpha)
}

/// `Σ_i ‖f(x_i) − d_i B‖² + r(B)`.
pub fn objective(b: &Matrix, design_rows: &Matrix, f_outputs: &Matrix, alpha: f64) -> Result<f64> {
    check_batch(b, design_rows, f_outputs)?;
    Ok(residual(b, design_rows, f_outputs)?.sum_sq() + penalty(b, alpha))
}

/// `n` distinct time points out of `t`, uniformly without replacement.
pub fn sample_batch<R: Rng + ?Sized>(rng: &mut R, t: usize, n: usize) -> Result<Vec<usize>> {
    if n > t {
        return Err(Error::BatchTooLarge { batch: n, available: t });
    }
    if n == 0 {
        return Err(Error::BadParams("batch size must be at least 1".into()));
    }
    Ok(rand::seq::index::sample(rng, t, n).into_vec())
}

/// Adam moment accumulators, flattened in [`NetworkParameters::flat_iter`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
    layer_sizes: Vec<usize>,
}

impl AdamState {
    pub fn new(params: &NetworkParameters) -> Self {
        let n = params.parameter_count();
        Self {
            first: alloc::vec![0.0; n],
            second: alloc::vec![0.0; n],
            step: 0,
            layer_sizes: params.layer_sizes.clone(),
        }
    }
}

fn grads_match(params: &NetworkParameters, grads: &ParameterGradients) -> bool {
    params.layers.len() == grads.layers.len()
        && params
            .layers
            .iter()
            .zip(&grads.layers)
            .all(|(p, g)| p.weights.shape() == g.weights.shape() && p.bias.len() == g.bias.len())
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    state: &mut AdamState,
    grads: &ParameterGradients,
    params: &mut NetworkParameters,
    eta: f64,
    adam: &AdamConfig,
) -> Result<()> {
    if state.layer_sizes != params.layer_sizes || !grads_match(params, grads) {
        return Err(shape("adam_step", format!("{:?}", params.layer_sizes), format!("{:?}", state.layer_sizes)));
    }
    state.step += 1;
    let k = state.step as i32;
    let correction1 = 1.0 - libm::pow(adam.mu1, k as f64);
    let correction2 = 1.0 - libm::pow(adam.mu2, k as f64);
    let eps = match adam.denominator {
        AdamDenominator::PlusEpsilon => adam.epsilon,
        AdamDenominator::MinusEpsilon => -adam.epsilon,
    };
    let moments = state.first.iter_mut().zip(state.second.iter_mut());
    for ((theta, &g), (m, v)) in params.flat_iter_mut().zip(grads.flat_iter()).zip(moments) {
        *m = adam.mu1 * *m + (1.0 - adam.mu1) * g;
        *v = adam.mu2 * *v + (1.0 - adam.mu2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *theta -= eta * m_hat / (libm::sqrt(v_hat) + eps);
    }
    Ok(())
}

/// What maps responses into the space where `d B` is fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Per-subject MLP kernel.
    Deep,
    /// `f(x) = x`; the network steps are skipped.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubjectFit {
    pub signatures: SignatureMatrix,
    /// `None` for the identity transform.
    pub params: Option<NetworkParameters>,
    /// Batch objective after each signature step.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupFit {
    pub signatures: SignatureMatrix,
    pub subjects: Vec<SubjectFit>,
}

/// Maps a subject's full response matrix through its fitted kernel.
pub fn observable(responses: &Matrix, params: Option<&NetworkParameters>, config: &FitConfig) -> Result<Matrix> {
    match params {
        Some(p) => kernel::transform(p, responses, config.activation),
        None => Ok(responses.clone()),
    }
}

fn output_width(transform: Transform, data: &SubjectData, config: &FitConfig) -> Result<usize> {
    match transform {
        Transform::Identity => Ok(data.voxels()),
        Transform::Deep => Ok(*config.layer_sizes(data.voxels())?.last().expect("validated")),
    }
}

/// Runs the per-subject loop for `config.m2` iterations from `b_init`.
///
/// Random draws come from `stream_seed`; `initial_params` overrides the
/// fresh `θ` draw (warm start).
pub fn fit_subject_with(
    data: &SubjectData,
    design: &DesignMatrix,
    b_init: &SignatureMatrix,
    config: &FitConfig,
    transform: Transform,
    initial_params: Option<NetworkParameters>,
    stream_seed: u64,
) -> Result<SubjectFit> {
    config.validate()?;
    validate_pair(data, design)?;
    let t = data.scans();
    if config.batch_size > t {
        return Err(Error::BatchTooLarge { batch: config.batch_size, available: t });
    }
    if b_init.conditions != design.conditions {
        return Err(Error::ConditionMismatch(format!(
            "signatures {:?} vs design {:?}",
            b_init.conditions, design.conditions
        )));
    }
    let v = output_width(transform, data, config)?;
    if b_init.values.shape() != (design.conditions.len(), v) {
        return Err(shape("initial signatures", dims((design.conditions.len(), v)), dims(b_init.values.shape())));
    }

    let mut params = match transform {
        Transform::Identity => None,
        Transform::Deep => {
            let sizes = config.layer_sizes(data.voxels())?;
            match initial_params {
                Some(p) if p.layer_sizes == sizes => Some(p),
                Some(p) => {
                    return Err(shape("warm-start parameters", format!("{sizes:?}"), format!("{:?}", p.layer_sizes)))
                }
                None => Some(kernel::init_params(&sizes, config.init, derive_seed(stream_seed, &[TAG_THETA]))?),
            }
        }
    };
    let mut adam = params.as_ref().map(AdamState::new);
    let mut rng = rng_from(derive_seed(stream_seed, &[TAG_BATCH]));
    let alpha = config.alpha_effective();
    let mut b = b_init.values.clone();
    let mut loss_history = Vec::with_capacity(config.m2);

    for _ in 0..config.m2 {
        let batch = sample_batch(&mut rng, t, config.batch_size)?;
        let x = data.responses.select_rows(&batch);
        let d = design.values.select_rows(&batch);
        let (f, trace) = match &params {
            Some(p) => {
                let (out, trace) = kernel::forward(p, &x, config.activation)?;
                (out, Some(trace))
            }
            None => (x, None),
        };
        let g = grad_b_unchecked(&b, &d, &f, alpha)?;
        b.axpy(-config.eta, &g)?;
        let targets = d.matmul(&b)?;
        loss_history.push(f.sub(&targets)?.sum_sq() + penalty(&b, alpha));

        if let (Some(p), Some(trace), Some(state)) = (params.as_mut(), trace, adam.as_mut()) {
            let grads = kernel::backprop_from_trace(p, &trace, &targets, config.activation)?;
            adam_step(state, &grads, p, config.eta, &config.adam)?;
        }
        if !b.is_finite() {
            return Err(Error::NonFinite("signatures diverged"));
        }
    }
    Ok(SubjectFit {
        signatures: SignatureMatrix { conditions: b_init.conditions.clone(), values: b },
        params,
        loss_history,
    })
}

/// Deep fit of a single subject, seeded directly from `config.seed`.
pub fn fit_subject(
    data: &SubjectData,
    design: &DesignMatrix,
    b_init: &SignatureMatrix,
    config: &FitConfig,
) -> Result<SubjectFit> {
    fit_subject_with(data, design, b_init, config, Transform::Deep, None, config.seed)
}

pub(crate) fn check_group(subjects: &[Subject]) -> Result<()> {
    let first = subjects.first().ok_or_else(|| Error::BadParams("no subjects to fit".into()))?;
    for s in subjects {
        validate_pair(&s.data, &s.design)?;
        if s.design.conditions != first.design.conditions {
            return Err(Error::ConditionMismatch(format!(
                "subject {} has {:?}, subject {} has {:?}",
                first.data.subject_id, first.design.conditions, s.data.subject_id, s.design.conditions
            )));
        }
    }
    Ok(())
}

/// Seed of subject `index` in outer iteration `outer`.
pub fn subject_stream(config: &FitConfig, index: usize, outer: usize) -> u64 {
    match config.streams {
        StreamPolicy::PerSubject => derive_seed(config.seed, &[index as u64, outer as u64]),
        StreamPolicy::Shared => derive_seed(config.seed, &[u64::MAX, outer as u64]),
    }
}

/// Group signatures drawn from `N(0, 1)`.
pub fn initial_group_signatures(conditions: Vec<alloc::string::String>, features: usize, seed: u64) -> SignatureMatrix {
    let mut rng = rng_from(derive_seed(seed, &[TAG_GROUP_INIT]));
    let p = conditions.len();
    let values = Matrix::from_fn(p, features, |_, _| StandardNormal.sample(&mut rng));
    SignatureMatrix { conditions, values }
}

/// Element-wise mean, accumulated in subject order.
pub fn mean_signatures(fits: &[SubjectFit]) -> Result<Matrix> {
    let first = fits.first().ok_or_else(|| Error::BadParams("no subject fits to average".into()))?;
    let mut acc = Matrix::zeros(first.signatures.values.rows(), first.signatures.values.cols());
    for f in fits {
        acc.axpy(1.0, &f.signatures.values)?;
    }
    Ok(acc.scale(1.0 / fits.len() as f64))
}

pub(crate) fn fit_group<E: Executor>(
    subjects: &[Subject],
    config: &FitConfig,
    transform: Transform,
    exec: &E,
) -> Result<GroupFit> {
    config.validate()?;
    check_group(subjects)?;
    let widths: Vec<usize> =
        subjects.iter().map(|s| output_width(transform, &s.data, config)).collect::<Result<_>>()?;
    let v = widths[0];
    if let Some(w) = widths.iter().find(|&&w| w != v) {
        return Err(shape("signature width across subjects", v, *w));
    }
    let conditions = subjects[0].design.conditions.clone();
    let mut group = initial_group_signatures(conditions, v, config.seed);
    let mut fits: Vec<SubjectFit> = Vec::new();

    for outer in 0..config.m1 {
        let previous = &fits;
        let snapshot = &group;
        let results = exec.map(subjects.len(), |i| {
            let warm = match (config.theta_init, previous.get(i)) {
                (ThetaInit::WarmStart, Some(f)) => f.params.clone(),
                _ => None,
            };
            let s = &subjects[i];
            fit_subject_with(&s.data, &s.design, snapshot, config, transform, warm, subject_stream(config, i, outer))
        });
        fits = results.into_iter().collect::<Result<Vec<_>>>()?;
        group = SignatureMatrix { conditions: group.conditions.clone(), values: mean_signatures(&fits)? };
    }
    Ok(GroupFit { signatures: group, subjects: fits })
}

/// Deep fit of all subjects; `exec` decides how subjects run within an outer iteration.
pub fn fit<E: Executor>(subjects: &[Subject], config: &FitConfig, exec: &E) -> Result<GroupFit> {
    fit_group(subjects, config, Transform::Deep, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn regularizer_values() {
        assert_eq!(regularizer(&Matrix::zeros(2, 3), 10.0), Ok(0.0));
        assert_eq!(regularizer(&Matrix::filled(1, 1, 1.0), 10.0), Ok(110.0));
        let b = Matrix::from_rows(&[[0.5, -0.5]]).unwrap();
        assert_eq!(regularizer(&b, 10.0), Ok(60.0));
        assert_eq!(regularizer(&b, 0.5), Err(Error::BadAlpha(0.5)));
    }

    #[test]
    fn grad_b_examples() {
        let b = Matrix::filled(1, 1, 1.0);
        let empty_d = Matrix::zeros(0, 1);
        let empty_f = Matrix::zeros(0, 1);
        assert_eq!(grad_b(&b, &empty_d, &empty_f, 10.0).unwrap().as_slice(), &[210.0]);
        let d = Matrix::filled(1, 1, 1.0);
        let f = Matrix::filled(1, 1, 2.0);
        assert_eq!(grad_b(&b, &d, &f, 10.0).unwrap().as_slice(), &[208.0]);
        assert!(grad_b(&b, &Matrix::zeros(1, 2), &f, 10.0).is_err());
        // sign(0) = 0 and zero is a fixed point of the pure penalty
        assert_eq!(
            grad_b(&Matrix::zeros(2, 2), &Matrix::zeros(0, 2), &Matrix::zeros(0, 2), 10.0).unwrap(),
            Matrix::zeros(2, 2)
        );
    }

    #[test]
    fn objective_examples() {
        let d = Matrix::from_rows(&[[1.0, 0.0], [0.5, 2.0]]).unwrap();
        assert_eq!(objective(&Matrix::zeros(2, 3), &d, &Matrix::zeros(2, 3), 10.0), Ok(0.0));
        let b = Matrix::from_rows(&[[0.3, -0.2, 0.0], [1.0, 0.1, -0.4]]).unwrap();
        let f = d.matmul(&b).unwrap();
        let val = objective(&b, &d, &f, 10.0).unwrap();
        assert!((val - regularizer(&b, 10.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn batch_sampling() {
        let mut rng = rng_from(5);
        let mut all = sample_batch(&mut rng, 20, 20).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        let a = sample_batch(&mut rng_from(9), 100, 10).unwrap();
        let b = sample_batch(&mut rng_from(9), 100, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(sample_batch(&mut rng, 5, 6), Err(Error::BatchTooLarge { batch: 6, available: 5 }));
    }

    fn grads_like(p: &NetworkParameters, value: f64) -> ParameterGradients {
        ParameterGradients {
            layers: p
                .layers
                .iter()
                .map(|l| crate::data::Layer {
                    weights: Matrix::filled(l.weights.rows(), l.weights.cols(), value),
                    bias: vec![value; l.bias.len()],
                })
                .collect(),
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut p = kernel::init_params(&[3, 2, 2], kernel::InitScheme::UnitNormal, 1).unwrap();
        let before = p.clone();
        let mut s = AdamState::new(&p);
        adam_step(&mut s, &grads_like(&p, 0.0), &mut p, 1e-3, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_eta() {
        let mut p = NetworkParameters::zeros(&[2, 2, 1]).unwrap();
        let mut s = AdamState::new(&p);
        adam_step(&mut s, &grads_like(&p, 3.0), &mut p, 1e-3, &AdamConfig::default()).unwrap();
        for &v in p.flat_iter() {
            assert!((v + 1e-3).abs() < 1e-10, "{v}");
        }
        let mut q = NetworkParameters::zeros(&[2, 3, 1]).unwrap();
        assert!(adam_step(&mut s, &grads_like(&q.clone(), 1.0), &mut q, 1e-3, &AdamConfig::default()).is_err());
    }

    #[test]
    fn penalty_disabled_is_zero() {
        assert_eq!(penalty(&Matrix::filled(3, 3, 2.0), 0.0), 0.0);
    }
}
