//! Typed containers shared by every stage, plus shape validation and
//! column-wise standardization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape, Error, Result};
use crate::kernel::{Activation, InitScheme};
use crate::matrix::{dims, Matrix};
use crate::stats;

/// One subject's responses: `T` time points by `V_org` voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectData {
    pub subject_id: String,
    pub responses: Matrix,
}

impl SubjectData {
    pub fn new(subject_id: impl Into<String>, responses: Matrix) -> Result<Self> {
        if responses.rows() == 0 || responses.cols() == 0 {
            return Err(shape("SubjectData", "T >= 1 and V_org >= 1", dims(responses.shape())));
        }
        if !responses.is_finite() {
            return Err(Error::NonFinite("subject responses"));
        }
        Ok(Self { subject_id: subject_id.into(), responses })
    }

    pub fn scans(&self) -> usize {
        self.responses.rows()
    }

    pub fn voxels(&self) -> usize {
        self.responses.cols()
    }
}

/// `T x P` condition regressors, columns in `conditions` order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignMatrix {
    pub conditions: Vec<String>,
    pub values: Matrix,
}

impl DesignMatrix {
    pub fn new(conditions: Vec<String>, values: Matrix) -> Result<Self> {
        if conditions.len() != values.cols() {
            return Err(shape("DesignMatrix", conditions.len(), values.cols()));
        }
        if conditions.len() < 2 {
            return Err(Error::EmptyDesign(conditions.len()));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("design matrix"));
        }
        Ok(Self { conditions, values })
    }

    pub fn scans(&self) -> usize {
        self.values.rows()
    }

    pub fn conditions_len(&self) -> usize {
        self.conditions.len()
    }
}

/// `P x V` signatures, one row per condition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignatureMatrix {
    pub conditions: Vec<String>,
    pub values: Matrix,
}

impl SignatureMatrix {
    pub fn new(conditions: Vec<String>, values: Matrix) -> Result<Self> {
        if conditions.len() != values.rows() {
            return Err(shape("SignatureMatrix", conditions.len(), values.rows()));
        }
        if values.cols() == 0 {
            return Err(shape("SignatureMatrix", "V >= 1", 0));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("signatures"));
        }
        Ok(Self { conditions, values })
    }

    pub fn zeros(conditions: Vec<String>, features: usize) -> Self {
        let p = conditions.len();
        Self { conditions, values: Matrix::zeros(p, features) }
    }

    pub fn features(&self) -> usize {
        self.values.cols()
    }
}

/// One affine layer: `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Kernel MLP parameters for layers `2..=C`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkParameters {
    pub layers: Vec<Layer>,
    /// `[V_org, U2, ..., V]`, length `C`.
    pub layer_sizes: Vec<usize>,
}

impl NetworkParameters {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_architecture(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer { weights: Matrix::zeros(w[1], w[0]), bias: vec![0.0; w[1]] })
            .collect();
        Ok(Self { layers, layer_sizes: layer_sizes.to_vec() })
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("validated architecture")
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    /// All parameters in a fixed order: per layer, weights row-major then bias.
    pub fn flat_iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.as_slice().iter().chain(l.bias.iter()))
    }

    pub fn flat_iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn same_shape(&self, other: &NetworkParameters) -> bool {
        self.layer_sizes == other.layer_sizes
    }
}

pub(crate) fn check_architecture(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 3 {
        return Err(Error::BadArchitecture(format!(
            "need at least 3 layers (input, hidden, output), got {}",
            layer_sizes.len()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::BadArchitecture(format!("zero-width layer in {layer_sizes:?}")));
    }
    Ok(())
}

/// Literal or conventional sign of `ε` in the Adam denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum AdamDenominator {
    /// `sqrt(γ̃) + ε`.
    #[default]
    PlusEpsilon,
    /// `sqrt(γ̃) - ε`, kept for fidelity runs.
    MinusEpsilon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct AdamConfig {
    pub mu1: f64,
    pub mu2: f64,
    pub epsilon: f64,
    pub denominator: AdamDenominator,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { mu1: 0.9, mu2: 0.999, epsilon: 1e-8, denominator: AdamDenominator::PlusEpsilon }
    }
}

/// Whether the signature penalty is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Regularization {
    #[default]
    Enabled,
    /// Drop `r(B)` entirely; the data term alone is ordinary least squares.
    Disabled,
}

/// How `θ` is initialized at the start of each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ThetaInit {
    #[default]
    Fresh,
    /// Reuse the subject's parameters from the previous outer iteration.
    WarmStart,
}

/// How per-subject random streams are derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum StreamPolicy {
    /// `hash(seed, subject, outer_iteration)`.
    #[default]
    PerSubject,
    /// `hash(seed, outer_iteration)`: every subject draws the same stream.
    Shared,
}

/// All training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct FitConfig {
    pub alpha: f64,
    pub eta: f64,
    /// Outer (group) iterations.
    pub m1: usize,
    /// Inner (per-subject) iterations.
    pub m2: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Hidden and output widths `[U2, ..., V]`; `None` picks [`default_layers`].
    pub layers: Option<Vec<usize>>,
    pub activation: Activation,
    pub init: InitScheme,
    pub seed: u64,
    pub regularization: Regularization,
    pub theta_init: ThetaInit,
    pub streams: StreamPolicy,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            eta: 1e-3,
            m1: 10,
            m2: 100,
            batch_size: 50,
            adam: AdamConfig::default(),
            layers: None,
            activation: Activation::Sigmoid,
            init: InitScheme::ScaledNormal,
            seed: 0,
            regularization: Regularization::Enabled,
            theta_init: ThetaInit::Fresh,
            streams: StreamPolicy::PerSubject,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regularization == Regularization::Enabled && !(self.alpha >= 1.0) {
            return Err(Error::BadAlpha(self.alpha));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::BadStep(self.eta));
        }
        if self.batch_size == 0 {
            return Err(Error::BadParams("batch size must be at least 1".into()));
        }
        let a = &self.adam;
        if !(a.mu1 > 0.0 && a.mu1 < 1.0) || !(a.mu2 > 0.0 && a.mu2 < 1.0) {
            return Err(Error::BadParams(format!("Adam decay rates must lie in (0, 1): {}, {}", a.mu1, a.mu2)));
        }
        if !(a.epsilon > 0.0) {
            return Err(Error::BadParams(format!("Adam epsilon must be positive: {}", a.epsilon)));
        }
        if let Some(layers) = &self.layers {
            if layers.len() < 2 || layers.contains(&0) {
                return Err(Error::BadArchitecture(format!(
                    "need at least one hidden layer and an output layer, got {layers:?}"
                )));
            }
        }
        Ok(())
    }

    /// Full `[V_org, U2, ..., V]` for an input of `v_org` voxels.
    pub fn layer_sizes(&self, v_org: usize) -> Result<Vec<usize>> {
        let tail = match &self.layers {
            Some(l) => l.clone(),
            None => default_layers(v_org),
        };
        let mut sizes = Vec::with_capacity(tail.len() + 1);
        sizes.push(v_org);
        sizes.extend(tail);
        check_architecture(&sizes)?;
        let out = *sizes.last().unwrap_or(&0);
        if out > v_org {
            return Err(Error::BadArchitecture(format!("output width {out} exceeds the {v_org} input voxels")));
        }
        Ok(sizes)
    }

    pub(crate) fn alpha_effective(&self) -> f64 {
        match self.regularization {
            Regularization::Enabled => self.alpha,
            Regularization::Disabled => 0.0,
        }
    }
}

/// Two hidden layers: `[1000, 700, 500]` for wide inputs, `[700, 500, 200]`
/// otherwise, with the output capped at `v_org`.
pub fn default_layers(v_org: usize) -> Vec<usize> {
    let mut l = if v_org >= 1000 { vec![1000, 700, 500] } else { vec![700, 500, 200] };
    let last = l.len() - 1;
    l[last] = l[last].min(v_org.max(1));
    l
}

/// Checks that a subject's responses and design can be fit together.
pub fn validate_pair(data: &SubjectData, design: &DesignMatrix) -> Result<()> {
    if data.responses.rows() != design.values.rows() {
        return Err(shape("validate_pair (time points)", data.responses.rows(), design.values.rows()));
    }
    if data.responses.cols() == 0 {
        return Err(shape("validate_pair (voxels)", ">= 1", 0));
    }
    if design.conditions.len() < 2 || design.values.cols() < 2 {
        return Err(Error::EmptyDesign(design.values.cols()));
    }
    if design.conditions.len() != design.values.cols() {
        return Err(shape("validate_pair (conditions)", design.conditions.len(), design.values.cols()));
    }
    if !data.responses.is_finite() {
        return Err(Error::NonFinite("subject responses"));
    }
    if !design.values.is_finite() {
        return Err(Error::NonFinite("design matrix"));
    }
    Ok(())
}

/// Z-scores every column with the sample (`T - 1`) standard deviation.
/// Constant columns become zeros.
pub fn standardize_matrix(m: &Matrix) -> Result<Matrix> {
    let t = m.rows();
    if t < 2 {
        return Err(Error::TooFewRows(t));
    }
    let mut out = m.clone();
    for j in 0..m.cols() {
        let col = m.column(j);
        let mu = stats::mean(&col);
        let sd = stats::sample_std(&col);
        let z: Vec<f64> = if stats::is_degenerate_spread(sd, mu) {
            vec![0.0; t]
        } else {
            col.iter().map(|v| (v - mu) / sd).collect()
        };
        out.set_column(j, &z);
    }
    Ok(out)
}

pub fn standardize_columns(data: &SubjectData) -> Result<SubjectData> {
    Ok(SubjectData { subject_id: data.subject_id.clone(), responses: standardize_matrix(&data.responses)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conds(p: usize) -> Vec<String> {
        (0..p).map(|k| format!("c{k}")).collect()
    }

    fn subject(t: usize, v: usize) -> SubjectData {
        SubjectData::new("01", Matrix::from_fn(t, v, |i, j| (i * v + j) as f64)).unwrap()
    }

    fn design(t: usize, p: usize) -> DesignMatrix {
        DesignMatrix::new(conds(p), Matrix::from_fn(t, p, |i, j| ((i + j) % 3) as f64)).unwrap()
    }

    #[test]
    fn validate_pair_accepts_consistent_shapes() {
        assert_eq!(validate_pair(&subject(10, 4), &design(10, 2)), Ok(()));
    }

    #[test]
    fn validate_pair_rejects_row_mismatch() {
        let err = validate_pair(&subject(10, 4), &design(9, 2)).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }), "{err}");
    }

    #[test]
    fn validate_pair_rejects_nan() {
        let mut s = subject(10, 4);
        s.responses[(3, 2)] = f64::NAN;
        assert_eq!(validate_pair(&s, &design(10, 2)), Err(Error::NonFinite("subject responses")));
        assert_eq!(SubjectData::new("x", s.responses.clone()).unwrap_err(), Error::NonFinite("subject responses"));
    }

    #[test]
    fn validate_pair_rejects_single_condition() {
        let d = DesignMatrix { conditions: conds(1), values: Matrix::zeros(10, 1) };
        assert_eq!(validate_pair(&subject(10, 4), &d), Err(Error::EmptyDesign(1)));
        assert_eq!(DesignMatrix::new(conds(1), Matrix::zeros(10, 1)).unwrap_err(), Error::EmptyDesign(1));
    }

    #[test]
    fn standardize_examples() {
        let m = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = standardize_matrix(&m).unwrap();
        assert_eq!(s.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(s.column(1), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn standardize_matches_brute_force_oracle() {
        let col = [2.0, 4.0, 6.0, 8.0];
        let m = Matrix::from_vec(4, 1, col.to_vec()).unwrap();
        let s = standardize_matrix(&m).unwrap();
        // independent oracle: mean 5, sum of squares 20, sample variance 20/3
        let sd = (20.0f64 / 3.0).sqrt();
        for (i, v) in col.iter().enumerate() {
            assert!((s[(i, 0)] - (v - 5.0) / sd).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_needs_two_rows() {
        let s = SubjectData::new("a", Matrix::zeros(1, 3)).unwrap();
        assert_eq!(standardize_columns(&s).unwrap_err(), Error::TooFewRows(1));
    }

    #[test]
    fn near_constant_column_is_treated_as_constant() {
        let m = Matrix::from_vec(3, 1, vec![0.1, 0.1, 0.1]).unwrap();
        assert_eq!(standardize_matrix(&m).unwrap().column(0), vec![0.0; 3]);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = FitConfig::default();
        assert_eq!((c.alpha, c.eta, c.m1, c.m2, c.batch_size), (10.0, 1e-3, 10, 100, 50));
        assert_eq!((c.adam.mu1, c.adam.mu2, c.adam.epsilon), (0.9, 0.999, 1e-8));
        assert_eq!(c.validate(), Ok(()));
        assert_eq!(FitConfig { alpha: 0.5, ..c.clone() }.validate(), Err(Error::BadAlpha(0.5)));
        let off = FitConfig { alpha: 0.0, regularization: Regularization::Disabled, ..c.clone() };
        assert_eq!(off.validate(), Ok(()));
        let bad_mu = FitConfig { adam: AdamConfig { mu1: 1.0, ..AdamConfig::default() }, ..c.clone() };
        assert!(bad_mu.validate().is_err());
    }

    #[test]
    fn default_architecture_rule() {
        assert_eq!(default_layers(5000), vec![1000, 700, 500]);
        assert_eq!(default_layers(722), vec![700, 500, 200]);
        assert_eq!(default_layers(50), vec![700, 500, 50]);
        let c = FitConfig::default();
        assert_eq!(c.layer_sizes(722).unwrap(), vec![722, 700, 500, 200]);
        let wide = FitConfig { layers: Some(vec![8, 60]), ..c };
        assert!(matches!(wide.layer_sizes(50), Err(Error::BadArchitecture(_))));
    }

    #[test]
    fn zero_network_shapes() {
        let p = NetworkParameters::zeros(&[8, 5, 4, 3]).unwrap();
        let shapes: Vec<_> = p.layers.iter().map(|l| (l.weights.shape(), l.bias.len())).collect();
        assert_eq!(shapes, vec![((5, 8), 5), ((4, 5), 4), ((3, 4), 3)]);
        assert!(matches!(NetworkParameters::zeros(&[3, 2]), Err(Error::BadArchitecture(_))));
        assert_eq!(p.parameter_count(), 5 * 8 + 5 + 4 * 5 + 4 + 3 * 4 + 3);
    }
}
