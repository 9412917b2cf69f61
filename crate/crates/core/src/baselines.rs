//! Linear comparison methods: ordinary least squares, LASSO, and the
//! identity-kernel variant of the DRSL loop.

use alloc::string::String;

use crate::data::{validate_pair, DesignMatrix, FitConfig, SignatureMatrix, SubjectData};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::{fit_group, GroupFit, Subject, Transform};
use crate::parallel::Executor;

/// Proximal-gradient LASSO settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LassoSettings {
    pub alpha: f64,
    /// `None` uses [`lasso_safe_step`] of each subject's design.
    pub eta: Option<f64>,
    pub iterations: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        Self { alpha: 0.9, eta: None, iterations: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BaselineKind {
    GlmRsa,
    Lasso(LassoSettings),
    Lrsl,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::GlmRsa => "glm",
            BaselineKind::Lasso(_) => "lasso",
            BaselineKind::Lrsl => "lrsl",
        }
    }
}

/// Moore-Penrose pseudo-inverse; singular values below
/// `max(rows, cols) · ε · σ_max` are treated as zero.
pub fn pinv(m: &Matrix) -> Matrix {
    if m.rows() == 0 || m.cols() == 0 {
        return Matrix::zeros(m.cols(), m.rows());
    }
    let svd = m.to_nalgebra().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = m.rows().max(m.cols()) as f64 * f64::EPSILON * sigma_max;
    let inv = svd.pseudo_inverse(tol).expect("both factors were computed");
    Matrix::from_nalgebra(&inv)
}

fn largest_singular_value(m: &Matrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    m.to_nalgebra().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// `B = pinv(D) X`, the minimum-norm least-squares signatures.
pub fn fit_glm(data: &SubjectData, design: &DesignMatrix) -> Result<SignatureMatrix> {
    validate_pair(data, design)?;
    let b = pinv(&design.values).matmul(&data.responses)?;
    Ok(SignatureMatrix { conditions: design.conditions.clone(), values: b })
}

/// `1 / (2 σ_max(D)²)`, the reciprocal Lipschitz constant of the data-term gradient.
pub fn lasso_safe_step(design: &DesignMatrix) -> f64 {
    let s = largest_singular_value(&design.values);
    if s == 0.0 {
        1.0
    } else {
        1.0 / (2.0 * s * s)
    }
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Minimizes `‖X − D B‖_F² + alpha Σ|β|` by proximal gradient from `B = 0`.
pub fn fit_lasso(
    data: &SubjectData,
    design: &DesignMatrix,
    alpha_lasso: f64,
    eta: f64,
    iterations: usize,
) -> Result<SignatureMatrix> {
    validate_pair(data, design)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::BadStep(eta));
    }
    if !(alpha_lasso >= 0.0) || !alpha_lasso.is_finite() {
        return Err(Error::BadParams(alloc::format!("alpha_lasso must be >= 0, got {alpha_lasso}")));
    }
    let d = &design.values;
    let dtx = d.t_matmul(&data.responses)?;
    let dtd = d.t_matmul(d)?;
    let mut b = Matrix::zeros(d.cols(), data.voxels());
    let threshold = eta * alpha_lasso;
    for _ in 0..iterations {
        // grad = 2 (DᵀD B − DᵀX)
        let grad = dtd.matmul(&b)?.sub(&dtx)?;
        b.axpy(-2.0 * eta, &grad)?;
        b.map_inplace(|v| soft_threshold(v, threshold));
        if !b.is_finite() {
            return Err(Error::NonFinite("lasso iterate diverged"));
        }
    }
    Ok(SignatureMatrix { conditions: design.conditions.clone(), values: b })
}

/// The group loop with `f(x) = x`; network steps are skipped.
pub fn fit_lrsl<E: Executor>(subjects: &[Subject], config: &FitConfig, exec: &E) -> Result<GroupFit> {
    fit_group(subjects, config, Transform::Identity, exec)
}

/// Per-subject baseline signatures for `kind`; LRSL returns each subject's final `B`.
pub fn fit_baseline<E: Executor>(
    kind: BaselineKind,
    subjects: &[Subject],
    config: &FitConfig,
    exec: &E,
) -> Result<alloc::vec::Vec<SignatureMatrix>> {
    match kind {
        BaselineKind::GlmRsa => subjects.iter().map(|s| fit_glm(&s.data, &s.design)).collect(),
        BaselineKind::Lasso(settings) => subjects
            .iter()
            .map(|s| {
                let eta = settings.eta.unwrap_or_else(|| lasso_safe_step(&s.design));
                fit_lasso(&s.data, &s.design, settings.alpha, eta, settings.iterations)
            })
            .collect(),
        BaselineKind::Lrsl => {
            Ok(fit_lrsl(subjects, config, exec)?.subjects.into_iter().map(|f| f.signatures).collect())
        }
    }
}

impl core::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glm" => Ok(BaselineKind::GlmRsa),
            "lasso" => Ok(BaselineKind::Lasso(LassoSettings::default())),
            "lrsl" => Ok(BaselineKind::Lrsl),
            other => Err(Error::BadParams(String::from("unknown baseline ") + other)),
        }
    }
}
