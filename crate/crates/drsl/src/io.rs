//! On-disk dataset layout.
//!
//! A dataset directory holds `manifest.txt` plus, per subject, a headerless
//! `sub-<id>_bold.tsv` (scans x voxels) and a `sub-<id>_events.tsv` with header
//! `onset\tduration\tcondition`. Manifest lines are a key followed by
//! tab-separated values:
//!
//! ```text
//! tr\t2
//! n_scans\t200
//! conditions\tc00\tc01\tc02
//! subjects\t01\t02
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use drsl_core::design::{build_design_matrix, canonical_hrf, Event, EventTable};
use drsl_core::synth::SynthDataset;
use drsl_core::{Matrix, Subject, SubjectData};

/// HRF support used for every design built from disk.
pub const HRF_LENGTH_S: f64 = 32.0;

const MANIFEST: &str = "manifest.txt";
const EVENTS_HEADER: [&str; 3] = ["onset", "duration", "condition"];

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}:{line}:{column}: {message}", file.display())]
    Parse { file: PathBuf, line: u64, column: usize, message: String },
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("io error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] drsl_core::Error),
    #[error("serialization: {0}")]
    Format(String),
}

pub type IoResult<T> = Result<T, IoError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub tr: f64,
    pub n_scans: usize,
    pub conditions: Vec<String>,
    pub subjects: Vec<String>,
}

/// Raw subject data as stored: responses plus the event table they were acquired under.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub responses: Vec<Matrix>,
    pub events: Vec<EventTable>,
}

impl Dataset {
    pub fn from_synth(ds: &SynthDataset, tr: f64) -> Self {
        let manifest = Manifest {
            tr,
            n_scans: ds.subjects.first().map_or(0, |s| s.data.scans()),
            conditions: ds.truth.conditions.clone(),
            subjects: ds.subjects.iter().map(|s| s.data.subject_id.clone()).collect(),
        };
        Self {
            manifest,
            responses: ds.subjects.iter().map(|s| s.data.responses.clone()).collect(),
            events: ds.events.clone(),
        }
    }

    /// Subjects with designs built from the event tables and the canonical HRF.
    pub fn subjects(&self) -> IoResult<Vec<Subject>> {
        let hrf = canonical_hrf(self.manifest.tr, HRF_LENGTH_S)?;
        self.manifest
            .subjects
            .iter()
            .zip(&self.responses)
            .zip(&self.events)
            .map(|((id, x), events)| {
                let design = build_design_matrix(events, &hrf)?;
                Ok(Subject::new(SubjectData::new(id.clone(), x.clone())?, design)?)
            })
            .collect()
    }
}

pub fn bold_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("sub-{id}_bold.tsv"))
}

pub fn events_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("sub-{id}_events.tsv"))
}

fn require(path: PathBuf) -> IoResult<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(IoError::MissingFile(path))
    }
}

fn parse_err(file: &Path, line: u64, column: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { file: file.to_path_buf(), line, column, message: message.into() }
}

pub fn read_manifest(dir: &Path) -> IoResult<Manifest> {
    let path = require(dir.join(MANIFEST))?;
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let (mut tr, mut n_scans, mut conditions, mut subjects) = (None, None, None, None);
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.split('\t');
        let key = fields.next().unwrap_or_default();
        let values: Vec<String> = fields.map(str::to_owned).collect();
        let single = |values: &[String]| -> IoResult<String> {
            match values {
                [v] => Ok(v.clone()),
                _ => Err(parse_err(&path, line, 2, format!("`{key}` takes exactly one value"))),
            }
        };
        match key {
            "tr" => {
                let v = single(&values)?;
                let t: f64 = v.parse().map_err(|_| parse_err(&path, line, 2, format!("bad tr `{v}`")))?;
                if !(t > 0.0) || !t.is_finite() {
                    return Err(parse_err(&path, line, 2, format!("tr must be positive, got {v}")));
                }
                tr = Some(t);
            }
            "n_scans" => {
                let v = single(&values)?;
                n_scans = Some(v.parse().map_err(|_| parse_err(&path, line, 2, format!("bad n_scans `{v}`")))?);
            }
            "conditions" => conditions = Some(values),
            "subjects" => subjects = Some(values),
            other => return Err(parse_err(&path, line, 1, format!("unknown manifest key `{other}`"))),
        }
    }
    let missing = |k: &str| IoError::ManifestMismatch(format!("manifest lacks `{k}`"));
    let manifest = Manifest {
        tr: tr.ok_or_else(|| missing("tr"))?,
        n_scans: n_scans.ok_or_else(|| missing("n_scans"))?,
        conditions: conditions.ok_or_else(|| missing("conditions"))?,
        subjects: subjects.ok_or_else(|| missing("subjects"))?,
    };
    if manifest.subjects.is_empty() {
        return Err(IoError::ManifestMismatch("no subjects listed".into()));
    }
    Ok(manifest)
}

fn tsv_reader(path: &Path, headers: bool) -> IoResult<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(headers)
        .flexible(true)
        .from_path(path)
        .map_err(|e| IoError::Io { path: path.to_path_buf(), source: e.into() })
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(path, line, 0, e.to_string())
}

/// Reads a headerless `rows x cols` matrix of decimal floats.
pub fn read_bold(path: &Path, rows: usize) -> IoResult<Matrix> {
    let mut reader = tsv_reader(path, false)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut count = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(count as u64 + 1, |p| p.line());
        let width = *cols.get_or_insert(record.len());
        if record.len() != width {
            return Err(parse_err(
                path,
                line,
                record.len().min(width) + 1,
                format!("expected {width} columns, found {}", record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 =
                field.trim().parse().map_err(|_| parse_err(path, line, j + 1, format!("not a number: `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, j + 1, format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
        count += 1;
    }
    if count != rows {
        return Err(IoError::ManifestMismatch(format!("{} has {count} rows, manifest says {rows}", path.display())));
    }
    Ok(Matrix::from_vec(rows, cols.unwrap_or(0), values)?)
}

pub fn read_events(path: &Path) -> IoResult<Vec<Event>> {
    let mut reader = tsv_reader(path, true)?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != EVENTS_HEADER {
        return Err(parse_err(path, 1, 1, format!("header must be `{}`", EVENTS_HEADER.join("\\t"))));
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(parse_err(
                path,
                line,
                record.len().min(3) + 1,
                format!("expected 3 columns, found {}", record.len()),
            ));
        }
        let number = |j: usize, what: &str| -> IoResult<f64> {
            let field = &record[j];
            let v: f64 =
                field.trim().parse().map_err(|_| parse_err(path, line, j + 1, format!("bad {what} `{field}`")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(parse_err(
                    path,
                    line,
                    j + 1,
                    format!("{what} must be finite and non-negative, got {field}"),
                ));
            }
            Ok(v)
        };
        events.push(Event {
            onset: number(0, "onset")?,
            duration: number(1, "duration")?,
            condition: record[2].to_owned(),
        });
    }
    Ok(events)
}

pub fn read_dataset(dir: &Path) -> IoResult<Dataset> {
    let manifest = read_manifest(dir)?;
    let mut responses = Vec::with_capacity(manifest.subjects.len());
    let mut events = Vec::with_capacity(manifest.subjects.len());
    for id in &manifest.subjects {
        let bold = require(bold_path(dir, id))?;
        let ev = require(events_path(dir, id))?;
        let x = read_bold(&bold, manifest.n_scans)?;
        if let Some(first) = responses.first().map(Matrix::cols) {
            if x.cols() != first {
                return Err(IoError::ManifestMismatch(format!(
                    "{} has {} voxels, expected {first}",
                    bold.display(),
                    x.cols()
                )));
            }
        }
        let list = read_events(&ev)?;
        if let Some(e) = list.iter().find(|e| !manifest.conditions.contains(&e.condition)) {
            return Err(IoError::ManifestMismatch(format!(
                "{} uses unlisted condition `{}`",
                ev.display(),
                e.condition
            )));
        }
        events.push(EventTable::with_conditions(list, &manifest.conditions, manifest.tr, manifest.n_scans)?);
        responses.push(x);
    }
    Ok(Dataset { manifest, responses, events })
}

/// Writes with 17 significant digits so every `f64` round-trips.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> IoResult<()> {
    let m = &ds.manifest;
    if ds.responses.len() != m.subjects.len() || ds.events.len() != m.subjects.len() {
        return Err(IoError::ManifestMismatch(format!(
            "{} subjects listed, {} response matrices, {} event tables",
            m.subjects.len(),
            ds.responses.len(),
            ds.events.len()
        )));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = format!(
        "tr\t{}\nn_scans\t{}\nconditions\t{}\nsubjects\t{}\n",
        m.tr,
        m.n_scans,
        m.conditions.join("\t"),
        m.subjects.join("\t")
    );
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(io_err(&path))?;
    for ((id, x), events) in m.subjects.iter().zip(&ds.responses).zip(&ds.events) {
        if x.rows() != m.n_scans {
            return Err(IoError::ManifestMismatch(format!(
                "subject {id} has {} scans, manifest says {}",
                x.rows(),
                m.n_scans
            )));
        }
        let mut text = String::with_capacity(x.rows() * x.cols() * 24);
        for i in 0..x.rows() {
            let row: Vec<String> = x.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            text.push_str(&row.join("\t"));
            text.push('\n');
        }
        let path = bold_path(dir, id);
        fs::write(&path, text).map_err(io_err(&path))?;

        let mut text = EVENTS_HEADER.join("\t");
        text.push('\n');
        for e in events.events() {
            text.push_str(&format!("{}\t{}\t{}\n", e.onset, e.duration, e.condition));
        }
        let path = events_path(dir, id);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}
