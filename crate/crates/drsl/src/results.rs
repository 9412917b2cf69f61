//! Long-format result tables.
//!
//! Every run writes the same four CSVs with fixed headers, plus `config.toml`
//! (loadable with `--config`) and `result.json`. Only `runtime.csv` carries
//! wall-clock values; the other files are deterministic for fixed inputs.

use std::fs;
use std::path::Path;

use drsl_core::eval::CvReport;
use drsl_core::FitConfig;
use serde::{Deserialize, Serialize};

use crate::io::{io_err, IoError, IoResult};

pub const CORRELATION_HEADER: &str = "method,rho_max,rho_std_over_seeds";
pub const ACCURACY_HEADER: &str = "method,fold,accuracy";
pub const MSE_HEADER: &str = "iterations,mse";
pub const RUNTIME_HEADER: &str = "method,phase,ms";

pub fn version_string() -> String {
    format!("drsl {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    /// Mean over seeds of the largest pairwise signature correlation.
    pub rho_max: f64,
    /// Sample std over seeds; zero for a single seed.
    pub rho_std_over_seeds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub config: FitConfig,
    pub correlation: Option<Correlation>,
    /// `(total iterations, group MSE)` pairs.
    pub mse: Vec<(usize, f64)>,
    pub cv: Option<CvReport>,
    /// `(phase, milliseconds)` pairs.
    pub runtime_ms: Vec<(String, f64)>,
    pub version: String,
}

impl RunResult {
    pub fn new(method: impl Into<String>, config: FitConfig) -> Self {
        Self {
            method: method.into(),
            config,
            correlation: None,
            mse: Vec::new(),
            cv: None,
            runtime_ms: Vec::new(),
            version: version_string(),
        }
    }

    fn check_finite(&self) -> IoResult<()> {
        let mut numbers: Vec<f64> = self.mse.iter().map(|m| m.1).collect();
        numbers.extend(self.runtime_ms.iter().map(|r| r.1));
        if let Some(c) = self.correlation {
            numbers.extend([c.rho_max, c.rho_std_over_seeds]);
        }
        if let Some(cv) = &self.cv {
            numbers.extend(cv.accuracies());
            numbers.push(cv.mean);
            // A single fold has no sample std.
            if cv.folds.len() > 1 {
                numbers.push(cv.std);
            }
        }
        match numbers.iter().find(|v| !v.is_finite()) {
            Some(v) => Err(IoError::Format(format!("{} reports a non-finite value {v}", self.method))),
            None => Ok(()),
        }
    }
}

fn write_table(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> IoResult<()> {
    let to_err = |e: csv::Error| IoError::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(to_err)?;
    w.write_record(header.split(',')).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes all four tables for a set of runs, one block of rows per run.
pub fn write_results(results: &[RunResult], dir: &Path) -> IoResult<()> {
    for r in results {
        r.check_finite()?;
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_table(
        &dir.join("correlation.csv"),
        CORRELATION_HEADER,
        results.iter().filter_map(|r| {
            r.correlation.map(|c| vec![r.method.clone(), c.rho_max.to_string(), c.rho_std_over_seeds.to_string()])
        }),
    )?;
    write_table(
        &dir.join("accuracy.csv"),
        ACCURACY_HEADER,
        results.iter().flat_map(|r| {
            r.cv.iter()
                .flat_map(|cv| &cv.folds)
                .map(|f| vec![r.method.clone(), f.test_subject.clone(), f.accuracy.to_string()])
        }),
    )?;
    write_table(
        &dir.join("mse.csv"),
        MSE_HEADER,
        results.iter().flat_map(|r| r.mse.iter().map(|(n, m)| vec![n.to_string(), m.to_string()])),
    )?;
    write_table(
        &dir.join("runtime.csv"),
        RUNTIME_HEADER,
        results.iter().flat_map(|r| {
            r.runtime_ms.iter().map(|(phase, ms)| vec![r.method.clone(), phase.clone(), format!("{ms:.3}")])
        }),
    )?;
    if let Some(first) = results.first() {
        write_config(&dir.join("config.toml"), &first.config)?;
    }
    let path = dir.join("result.json");
    let json = serde_json::to_string_pretty(results).map_err(|e| IoError::Format(e.to_string()))?;
    fs::write(&path, json).map_err(io_err(&path))
}

pub fn write_config(path: &Path, config: &FitConfig) -> IoResult<()> {
    let text = toml::to_string(config).map_err(|e| IoError::Format(e.to_string()))?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_config(path: &Path) -> IoResult<FitConfig> {
    if !path.is_file() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| IoError::Format(format!("{}: {e}", path.display())))
}
