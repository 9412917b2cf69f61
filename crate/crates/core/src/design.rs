//! Design matrices: condition onsets convolved with a hemodynamic response.
//!
//! The HRF is the canonical double gamma
//! `h(t) = Γpdf(t; 6, 1) - Γpdf(t; 16, 1) / 6`, sampled at TR resolution
//! starting at `t = 0`. Onsets become unit boxcars on the scan grid and are
//! convolved with the sampled kernel without rescaling.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    /// Seconds from the first scan.
    pub onset: f64,
    /// Seconds; zero marks an instantaneous event.
    pub duration: f64,
    pub condition: String,
}

/// Stimulus events for one run of `n_scans` volumes acquired every `tr` seconds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventTable {
    events: Vec<Event>,
    conditions: Vec<String>,
    tr: f64,
    n_scans: usize,
}

impl EventTable {
    /// Conditions are the sorted unique names appearing in `events`.
    pub fn new(events: Vec<Event>, tr: f64, n_scans: usize) -> Result<Self> {
        Self::with_conditions(events, &[], tr, n_scans)
    }

    /// Like [`EventTable::new`] but also declares conditions that may have
    /// no events (their design column is all zeros).
    pub fn with_conditions(events: Vec<Event>, declared: &[String], tr: f64, n_scans: usize) -> Result<Self> {
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::BadParams(format!("TR must be positive, got {tr}")));
        }
        if n_scans == 0 {
            return Err(Error::BadParams("run needs at least one scan".into()));
        }
        let run_length = tr * n_scans as f64;
        for (i, e) in events.iter().enumerate() {
            if !(e.onset >= 0.0) || !(e.duration >= 0.0) || !e.onset.is_finite() || !e.duration.is_finite() {
                return Err(Error::BadParams(format!(
                    "event {i}: onset and duration must be finite and non-negative ({}, {})",
                    e.onset, e.duration
                )));
            }
            if e.onset + e.duration > run_length + 1e-9 * run_length.max(1.0) {
                return Err(Error::BadParams(format!(
                    "event {i} ends at {} s, after the run ({run_length} s)",
                    e.onset + e.duration
                )));
            }
            if e.condition.is_empty() {
                return Err(Error::BadParams(format!("event {i} has an empty condition name")));
            }
        }
        let set: BTreeSet<String> =
            events.iter().map(|e| e.condition.clone()).chain(declared.iter().cloned()).collect();
        if set.is_empty() {
            return Err(Error::EmptyDesign(0));
        }
        Ok(Self { events, conditions: set.into_iter().collect(), tr, n_scans })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Sorted, unique condition names.
    pub fn conditions(&self) -> &[String] {
        &self.conditions
    }

    pub fn tr(&self) -> f64 {
        self.tr
    }

    pub fn n_scans(&self) -> usize {
        self.n_scans
    }

    /// Unit boxcar of one condition on the scan grid, before convolution.
    pub fn onset_signal(&self, condition: &str) -> Result<Vec<f64>> {
        if !self.conditions.iter().any(|c| c == condition) {
            return Err(Error::UnknownCondition(condition.into()));
        }
        let mut signal = vec![0.0; self.n_scans];
        for e in self.events.iter().filter(|e| e.condition == condition) {
            let first = libm::ceil(e.onset / self.tr) as usize;
            let end = e.onset + e.duration;
            let mut covered = false;
            let mut i = first;
            while i < self.n_scans && (i as f64) * self.tr < end {
                signal[i] += 1.0;
                covered = true;
                i += 1;
            }
            if !covered {
                let at = libm::floor(e.onset / self.tr) as usize;
                if at < self.n_scans {
                    signal[at] += 1.0;
                }
            }
        }
        Ok(signal)
    }
}

/// Double-gamma parameters in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HrfParams {
    pub peak_delay: f64,
    pub undershoot_delay: f64,
    pub peak_disp: f64,
    pub undershoot_disp: f64,
    pub undershoot_ratio: f64,
    pub length_s: f64,
}

impl Default for HrfParams {
    fn default() -> Self {
        Self {
            peak_delay: 6.0,
            undershoot_delay: 16.0,
            peak_disp: 1.0,
            undershoot_disp: 1.0,
            undershoot_ratio: 1.0 / 6.0,
            length_s: 32.0,
        }
    }
}

impl HrfParams {
    /// Continuous response at `t` seconds.
    pub fn eval(&self, t: f64) -> f64 {
        let peak = gamma_pdf(t, self.peak_delay / self.peak_disp, self.peak_disp);
        let under = gamma_pdf(t, self.undershoot_delay / self.undershoot_disp, self.undershoot_disp);
        peak - self.undershoot_ratio * under
    }
}

/// Gamma density with the given shape and scale; zero for `t <= 0`.
pub fn gamma_pdf(t: f64, shape: f64, scale: f64) -> f64 {
    if t <= 0.0 {
        return if shape == 1.0 && t == 0.0 { 1.0 / scale } else { 0.0 };
    }
    let log = (shape - 1.0) * libm::log(t) - t / scale - libm::lgamma(shape) - shape * libm::log(scale);
    libm::exp(log)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HrfKernel {
    /// `h(k * tr)` for `k = 0 .. ceil(length_s / tr)`.
    pub samples: Vec<f64>,
    pub tr: f64,
    pub params: HrfParams,
}

/// Canonical double-gamma HRF sampled every `tr` seconds over `length_s`.
pub fn canonical_hrf(tr: f64, length_s: f64) -> Result<HrfKernel> {
    hrf_with(HrfParams { length_s, ..HrfParams::default() }, tr)
}

pub fn hrf_with(params: HrfParams, tr: f64) -> Result<HrfKernel> {
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::BadParams(format!("TR must be positive, got {tr}")));
    }
    if !(params.length_s >= tr) || !params.length_s.is_finite() {
        return Err(Error::BadParams(format!("HRF length {} s is shorter than one TR", params.length_s)));
    }
    let positive = [params.peak_delay, params.undershoot_delay, params.peak_disp, params.undershoot_disp];
    if positive.iter().any(|v| !(*v > 0.0)) || !(params.undershoot_ratio >= 0.0) {
        return Err(Error::BadParams("HRF delays and dispersions must be positive".into()));
    }
    let n = libm::ceil(params.length_s / tr - 1e-9) as usize;
    let samples: Vec<f64> = (0..n).map(|k| params.eval(k as f64 * tr)).collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("HRF samples"));
    }
    Ok(HrfKernel { samples, tr, params })
}

/// Causal discrete convolution truncated to the signal length.
pub fn convolve_truncated(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let t = signal.len();
    let mut out = vec![0.0; t];
    for (i, &s) in signal.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (k, &h) in kernel.iter().enumerate().take(t - i) {
            out[i + k] += s * h;
        }
    }
    out
}

/// One design column: the condition's boxcar convolved with the HRF.
pub fn build_design_column(events: &EventTable, condition: &str, hrf: &HrfKernel) -> Result<Vec<f64>> {
    let onsets = events.onset_signal(condition)?;
    Ok(convolve_truncated(&onsets, &hrf.samples))
}

/// `T x P` design with columns in sorted condition order.
pub fn build_design_matrix(events: &EventTable, hrf: &HrfKernel) -> Result<DesignMatrix> {
    let conditions = events.conditions().to_vec();
    if conditions.len() < 2 {
        return Err(Error::EmptyDesign(conditions.len()));
    }
    let mut values = Matrix::zeros(events.n_scans(), conditions.len());
    for (k, c) in conditions.iter().enumerate() {
        values.set_column(k, &build_design_column(events, c, hrf)?);
    }
    DesignMatrix::new(conditions, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn ev(onset: f64, duration: f64, c: &str) -> Event {
        Event { onset, duration, condition: c.to_string() }
    }

    #[test]
    fn hrf_starts_at_zero_and_has_expected_length() {
        let h = canonical_hrf(2.0, 32.0).unwrap();
        assert_eq!(h.samples.len(), 16);
        assert_eq!(h.samples[0], 0.0);
        assert_eq!(canonical_hrf(0.7, 32.0).unwrap().samples.len(), 46);
    }

    #[test]
    fn hrf_rejects_bad_params() {
        assert!(matches!(canonical_hrf(0.0, 32.0), Err(Error::BadParams(_))));
        assert!(matches!(canonical_hrf(-1.0, 32.0), Err(Error::BadParams(_))));
        assert!(matches!(canonical_hrf(2.0, 1.0), Err(Error::BadParams(_))));
    }

    #[test]
    fn gamma_pdf_matches_closed_form() {
        // shape 6, scale 1: t^5 e^-t / 120
        let t = 3.7f64;
        let expect = t.powi(5) * (-t).exp() / 120.0;
        assert!((gamma_pdf(t, 6.0, 1.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_event_condition_gives_zero_column() {
        let table = EventTable::with_conditions(vec![ev(0.0, 4.0, "a")], &["b".to_string()], 2.0, 20).unwrap();
        let h = canonical_hrf(2.0, 32.0).unwrap();
        assert_eq!(build_design_column(&table, "b", &h).unwrap(), vec![0.0; 20]);
        assert_eq!(build_design_column(&table, "zzz", &h).unwrap_err(), Error::UnknownCondition("zzz".to_string()));
    }

    #[test]
    fn impulse_at_scan_zero_reproduces_hrf() {
        let table = EventTable::new(vec![ev(0.0, 0.0, "a"), ev(18.0, 0.0, "b")], 2.0, 10).unwrap();
        let h = canonical_hrf(2.0, 32.0).unwrap();
        let col = build_design_column(&table, "a", &h).unwrap();
        assert_eq!(col, h.samples[..10].to_vec());
    }

    #[test]
    fn columns_follow_sorted_condition_order() {
        let table = EventTable::new(vec![ev(0.0, 2.0, "b"), ev(10.0, 2.0, "a")], 2.0, 20).unwrap();
        let h = canonical_hrf(2.0, 32.0).unwrap();
        let d = build_design_matrix(&table, &h).unwrap();
        assert_eq!(d.conditions, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(d.values.column(0), build_design_column(&table, "a", &h).unwrap());
        assert_eq!(d.values.column(1), build_design_column(&table, "b", &h).unwrap());
    }

    #[test]
    fn single_condition_is_rejected() {
        let table = EventTable::new(vec![ev(0.0, 2.0, "a")], 2.0, 20).unwrap();
        let h = canonical_hrf(2.0, 32.0).unwrap();
        assert_eq!(build_design_matrix(&table, &h).unwrap_err(), Error::EmptyDesign(1));
    }

    #[test]
    fn event_validation() {
        assert!(EventTable::new(vec![ev(-1.0, 1.0, "a")], 2.0, 10).is_err());
        assert!(EventTable::new(vec![ev(19.0, 2.0, "a")], 2.0, 10).is_err());
        assert!(EventTable::new(vec![ev(18.0, 2.0, "a")], 2.0, 10).is_ok());
        assert!(matches!(EventTable::new(vec![], 2.0, 10), Err(Error::EmptyDesign(0))));
    }

    #[test]
    fn boxcar_covers_half_open_interval() {
        let table = EventTable::new(vec![ev(2.0, 4.0, "a")], 2.0, 6).unwrap();
        assert_eq!(table.onset_signal("a").unwrap(), vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        // shorter than one TR and between samples: one impulse at the containing scan
        let table = EventTable::new(vec![ev(2.5, 1.0, "a")], 2.0, 6).unwrap();
        assert_eq!(table.onset_signal("a").unwrap(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
