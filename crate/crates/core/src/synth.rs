//! Synthetic multi-subject block-design datasets with known signatures.
//!
//! Every draw is a pure function of the spec seed, a stream tag and the
//! subject index, so subjects can be generated independently and in any order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{standardize_matrix, DesignMatrix, SignatureMatrix, SubjectData};
use crate::design::{build_design_matrix, canonical_hrf, Event, EventTable};
use crate::error::{shape, Error, Result};
use crate::matrix::{dims, Matrix};
use crate::optim::Subject;
use crate::rng::{derive_seed, rng_from, TAG_EVENTS, TAG_MIXING, TAG_NOISE, TAG_SIGNATURES};
use crate::stats;

/// Mixing strength of [`Nonlinearity::QuadraticMix`].
pub const QUADRATIC_COEFFICIENT: f64 = 0.3;

const HRF_LENGTH_S: f64 = 32.0;
const BALANCE_ROUNDS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Nonlinearity {
    #[default]
    Identity,
    /// `tanh` of the standardized noisy signal.
    TanhWarp,
    /// `z + 0.3 (R z) ⊙ z` per time point with a per-subject `R ~ N(0, 1/V)`.
    QuadraticMix,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SignatureStyle {
    /// Orthonormal, zero-mean rows (pairwise correlation 0).
    #[default]
    Orthogonal,
    /// Unit-norm, zero-mean rows with pairwise correlation exactly `rho`.
    Correlated(f64),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthSpec {
    pub subjects: usize,
    pub scans: usize,
    pub voxels: usize,
    pub conditions: usize,
    pub tr: f64,
    /// Clean-signal std over noise std, per voxel.
    pub snr: f64,
    pub nonlinearity: Nonlinearity,
    pub signature_style: SignatureStyle,
    pub seed: u64,
    pub block_s: f64,
    pub rest_s: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            subjects: 4,
            scans: 200,
            voxels: 50,
            conditions: 4,
            tr: 2.0,
            snr: 2.0,
            nonlinearity: Nonlinearity::Identity,
            signature_style: SignatureStyle::Orthogonal,
            seed: 0,
            block_s: 4.0,
            rest_s: 12.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadSpec(msg));
        if self.subjects < 2 {
            return bad(format!("need at least 2 subjects, got {}", self.subjects));
        }
        if self.conditions < 2 {
            return bad(format!("need at least 2 conditions, got {}", self.conditions));
        }
        if self.scans < 4 * self.conditions {
            return bad(format!("need at least {} scans for {} conditions", 4 * self.conditions, self.conditions));
        }
        let min_voxels = match self.signature_style {
            SignatureStyle::Orthogonal => self.conditions + 1,
            SignatureStyle::Correlated(_) => self.conditions + 2,
        };
        if self.voxels < min_voxels {
            return bad(format!("need at least {min_voxels} voxels, got {}", self.voxels));
        }
        if let SignatureStyle::Correlated(rho) = self.signature_style {
            if !(0.0..1.0).contains(&rho) {
                return bad(format!("correlation must lie in [0, 1), got {rho}"));
            }
        }
        for (name, v) in [("tr", self.tr), ("block_s", self.block_s), ("rest_s", self.rest_s)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.snr > 0.0) {
            return bad(format!("snr must be positive, got {}", self.snr));
        }
        Ok(())
    }

    /// Zero-padded names `c00, c01, ...`, already in sorted order.
    pub fn condition_names(&self) -> Vec<String> {
        let width = format!("{}", self.conditions.saturating_sub(1)).len().max(2);
        (0..self.conditions).map(|k| format!("c{k:0width$}")).collect()
    }
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_from(seed);
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn center_rows(m: &mut Matrix) {
    for i in 0..m.rows() {
        let mu = stats::mean(m.row(i));
        m.row_mut(i).iter_mut().for_each(|v| *v -= mu);
    }
}

/// Gram-Schmidt of the rows via QR of the transpose.
fn orthonormal_rows(m: &Matrix) -> Matrix {
    let q = m.transpose().to_nalgebra().qr().q();
    Matrix::from_nalgebra(&q).transpose()
}

fn equalize_columns(m: &mut Matrix, target: f64) {
    for j in 0..m.cols() {
        let col = m.column(j);
        let norm = libm::sqrt(col.iter().map(|v| v * v).sum());
        if norm > 0.0 {
            let scaled: Vec<f64> = col.iter().map(|v| v * target / norm).collect();
            m.set_column(j, &scaled);
        }
    }
}

/// `p` orthonormal zero-mean rows of length `v`, with near-equal column norms.
fn balanced_orthonormal(p: usize, v: usize, seed: u64) -> Matrix {
    let mut m = gaussian(p, v, seed);
    let target = libm::sqrt(p as f64 / v as f64);
    for _ in 0..BALANCE_ROUNDS {
        center_rows(&mut m);
        m = orthonormal_rows(&m);
        equalize_columns(&mut m, target);
    }
    center_rows(&mut m);
    orthonormal_rows(&m)
}

/// Ground-truth signatures `B_true`, `P × V_org`, with unit-norm rows.
pub fn generate_signatures(spec: &SynthSpec) -> Result<SignatureMatrix> {
    spec.validate()?;
    let (p, v) = (spec.conditions, spec.voxels);
    let seed = derive_seed(spec.seed, &[TAG_SIGNATURES]);
    let values = match spec.signature_style {
        SignatureStyle::Orthogonal => balanced_orthonormal(p, v, seed),
        SignatureStyle::Correlated(rho) => {
            // Shared direction z_0 plus private z_k: corr = rho exactly.
            let z = balanced_orthonormal(p + 1, v, seed);
            let (a, b) = (libm::sqrt(rho), libm::sqrt(1.0 - rho));
            Matrix::from_fn(p, v, |k, j| a * z[(0, j)] + b * z[(k + 1, j)])
        }
    };
    Ok(SignatureMatrix { conditions: spec.condition_names(), values })
}

/// Blocks per condition: `⌊T·tr / (P·(block_s + rest_s))⌋`.
pub fn blocks_per_condition(spec: &SynthSpec) -> usize {
    let cycle = spec.block_s + spec.rest_s;
    libm::floor(spec.scans as f64 * spec.tr / (spec.conditions as f64 * cycle)) as usize
}

/// Block schedule of one subject: each condition appears in
/// [`blocks_per_condition`] blocks of `block_s`, in a shuffled order, each
/// followed by `rest_s` of rest.
pub fn generate_events(spec: &SynthSpec, subject_index: usize) -> Result<EventTable> {
    spec.validate()?;
    let per = blocks_per_condition(spec);
    if per < 2 {
        return Err(Error::InfeasibleSchedule(format!(
            "{} scans at tr {} fit {per} block(s) of {} s + {} s rest per condition; need 2",
            spec.scans, spec.tr, spec.block_s, spec.rest_s
        )));
    }
    let names = spec.condition_names();
    let mut order: Vec<usize> = (0..spec.conditions).flat_map(|k| core::iter::repeat_n(k, per)).collect();
    order.shuffle(&mut rng_from(derive_seed(spec.seed, &[TAG_EVENTS, subject_index as u64])));
    let cycle = spec.block_s + spec.rest_s;
    let events = order
        .iter()
        .enumerate()
        .map(|(n, &k)| Event { onset: n as f64 * cycle, duration: spec.block_s, condition: names[k].clone() })
        .collect();
    EventTable::with_conditions(events, &names, spec.tr, spec.scans)
}

/// The stages of one generated subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectParts {
    /// `D B_true`.
    pub clean: Matrix,
    pub noise: Matrix,
    /// Warped, column-standardized `clean + noise`.
    pub observed: SubjectData,
}

pub fn generate_subject_parts(
    b_true: &SignatureMatrix,
    design: &DesignMatrix,
    spec: &SynthSpec,
    subject_index: usize,
) -> Result<SubjectParts> {
    if b_true.values.rows() != design.values.cols() {
        return Err(shape("ground-truth signatures", design.values.cols(), b_true.values.rows()));
    }
    if b_true.values.cols() != spec.voxels {
        return Err(shape("ground-truth width", spec.voxels, b_true.values.cols()));
    }
    let clean = design.values.matmul(&b_true.values)?;
    let (t, v) = clean.shape();
    let mut rng = rng_from(derive_seed(spec.seed, &[TAG_NOISE, subject_index as u64]));
    let mut noise = Matrix::zeros(t, v);
    for j in 0..v {
        let sd = stats::sample_std(&clean.column(j)) / spec.snr;
        if sd > 0.0 {
            let dist = Normal::new(0.0, sd).map_err(|e| Error::BadSpec(format!("noise std {sd}: {e}")))?;
            let col: Vec<f64> = (0..t).map(|_| dist.sample(&mut rng)).collect();
            noise.set_column(j, &col);
        }
    }
    let noisy = clean.add(&noise)?;
    let warped = match spec.nonlinearity {
        Nonlinearity::Identity => noisy,
        Nonlinearity::TanhWarp => standardize_matrix(&noisy)?.map(libm::tanh),
        Nonlinearity::QuadraticMix => {
            let z = standardize_matrix(&noisy)?;
            let std = 1.0 / libm::sqrt(v as f64);
            let r = gaussian(v, v, derive_seed(spec.seed, &[TAG_MIXING, subject_index as u64])).scale(std);
            let mixed = z.matmul_t(&r)?;
            z.zip_with(&mixed, |x, m| x + QUADRATIC_COEFFICIENT * m * x)?
        }
    };
    let observed = SubjectData::new(format!("{:02}", subject_index + 1), standardize_matrix(&warped)?)?;
    Ok(SubjectParts { clean, noise, observed })
}

/// Observed responses for one subject.
pub fn generate_subject(
    b_true: &SignatureMatrix,
    design: &DesignMatrix,
    spec: &SynthSpec,
    subject_index: usize,
) -> Result<SubjectData> {
    Ok(generate_subject_parts(b_true, design, spec, subject_index)?.observed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub truth: SignatureMatrix,
    pub events: Vec<EventTable>,
    pub subjects: Vec<Subject>,
}

pub fn generate_dataset(spec: &SynthSpec) -> Result<SynthDataset> {
    let truth = generate_signatures(spec)?;
    let hrf = canonical_hrf(spec.tr, HRF_LENGTH_S)?;
    let mut events = Vec::with_capacity(spec.subjects);
    let mut subjects = Vec::with_capacity(spec.subjects);
    for s in 0..spec.subjects {
        let table = generate_events(spec, s)?;
        let design = build_design_matrix(&table, &hrf)?;
        let data = generate_subject(&truth, &design, spec, s)?;
        if data.scans() != design.scans() {
            return Err(shape("generated subject", dims((design.scans(), spec.voxels)), dims(data.responses.shape())));
        }
        subjects.push(Subject::new(data, design)?);
        events.push(table);
    }
    Ok(SynthDataset { truth, events, subjects })
}
