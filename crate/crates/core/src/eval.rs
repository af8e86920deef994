//! Detected-vs-actual comparison, MAE/RMSE and manifest-driven batch runs.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Condition, SensorGeometry};
use crate::ingest::{check_bpm, csv_error, csv_reader, optional_bpm, read_events_file, Columns, EventFormat};
use crate::pipeline::{estimate_hr, NdReason, PipelineConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair<T = f64> {
    pub subject_id: String,
    pub condition: Condition,
    pub actual_bpm: T,
    /// `None` for a non-detection.
    pub detected_bpm: Option<T>,
}

impl<T: Real> EvalPair<T> {
    pub fn difference(&self) -> Option<T> {
        self.detected_bpm.map(|d| d - self.actual_bpm)
    }
}

fn differences<T: Real>(pairs: &[EvalPair<T>]) -> Result<Vec<T>> {
    let diffs: Vec<T> = pairs.iter().filter_map(EvalPair::difference).collect();
    if diffs.is_empty() {
        return Err(Error::NoDetections);
    }
    Ok(diffs)
}

/// Mean absolute error over detected pairs.
pub fn mae<T: Real>(pairs: &[EvalPair<T>]) -> Result<T> {
    let diffs = differences(pairs)?;
    let sum = diffs.iter().fold(T::zero(), |acc, d| acc + d.abs());
    Ok(sum / T::from_usize_lossy(diffs.len()))
}

/// Root mean squared error over detected pairs.
pub fn rmse<T: Real>(pairs: &[EvalPair<T>]) -> Result<T> {
    let diffs = differences(pairs)?;
    let sum = diffs.iter().fold(T::zero(), |acc, &d| acc + d * d);
    Ok((sum / T::from_usize_lossy(diffs.len())).sqrt())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub n_detected: usize,
    pub n_nd: usize,
    /// Rows with no usable recording at all.
    pub n_missing: usize,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOutcome {
    pub subject_id: String,
    pub condition: Condition,
    pub actual_bpm: f64,
    pub detected_bpm: Option<f64>,
    pub difference: Option<f64>,
    /// Where the detection came from: `default`, `custom` or `fixture`.
    pub source: Option<String>,
    pub nd_reason: Option<NdReason>,
    pub missing: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub resting: ConditionSummary,
    pub elevated: ConditionSummary,
    pub rows: Vec<RowOutcome>,
}

impl EvalReport {
    pub fn from_rows(mut rows: Vec<RowOutcome>) -> Self {
        rows.sort_by(|a, b| {
            a.subject_id
                .cmp(&b.subject_id)
                .then((a.condition as u8).cmp(&(b.condition as u8)))
        });
        let summarize = |cond: Condition| {
            let of_cond: Vec<&RowOutcome> = rows.iter().filter(|r| r.condition == cond).collect();
            let pairs: Vec<EvalPair> = of_cond
                .iter()
                .filter(|r| !r.missing)
                .map(|r| EvalPair {
                    subject_id: r.subject_id.clone(),
                    condition: r.condition,
                    actual_bpm: r.actual_bpm,
                    detected_bpm: r.detected_bpm,
                })
                .collect();
            let n_detected = pairs.iter().filter(|p| p.detected_bpm.is_some()).count();
            ConditionSummary {
                n_detected,
                n_nd: pairs.len() - n_detected,
                n_missing: of_cond.len() - pairs.len(),
                mae: mae(&pairs).ok(),
                rmse: rmse(&pairs).ok(),
            }
        };
        Self {
            resting: summarize(Condition::Resting),
            elevated: summarize(Condition::Elevated),
            rows,
        }
    }

    pub fn from_pairs(pairs: &[EvalPair]) -> Self {
        Self::from_rows(
            pairs
                .iter()
                .map(|p| RowOutcome {
                    subject_id: p.subject_id.clone(),
                    condition: p.condition,
                    actual_bpm: p.actual_bpm,
                    detected_bpm: p.detected_bpm,
                    difference: p.difference(),
                    source: Some("fixture".into()),
                    nd_reason: None,
                    missing: false,
                    diagnostics: Vec::new(),
                })
                .collect(),
        )
    }

    /// Aligned text table: one line per condition with MAE and RMSE.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let mut out = format!(
            "{:<12} {:>8} {:>8} {:>4} {:>4} {:>8}\n",
            "", "MAE", "RMSE", "n", "ND", "missing"
        );
        for (label, s) in [("Resting HR", &self.resting), ("Elevated HR", &self.elevated)] {
            out.push_str(&format!(
                "{:<12} {:>8} {:>8} {:>4} {:>4} {:>8}\n",
                label,
                fmt(s.mae),
                fmt(s.rmse),
                s.n_detected,
                s.n_nd,
                s.n_missing
            ));
        }
        out
    }
}

fn parse_detected(raw: &str, field: &str, line: usize) -> Result<Option<Option<f64>>> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("nd") {
        return Ok(Some(None));
    }
    Ok(optional_bpm(field, raw, line)?.map(Some))
}

/// Reads the subject table with detected columns (`resting_detected`,
/// `elevated_detected`; `ND` marks a non-detection). Subjects without an
/// actual value for a condition contribute no pair for it.
pub fn parse_subject_table<R: std::io::Read>(reader: R) -> Result<Vec<EvalPair>> {
    let mut rdr = csv_reader(reader);
    let cols = Columns::new(rdr.headers().map_err(csv_error)?);
    let id = cols.require("subject_id")?;
    let spec = [
        (Condition::Resting, cols.require("resting_hr")?, cols.require("resting_detected")?),
        (Condition::Elevated, cols.require("elevated_hr")?, cols.require("elevated_detected")?),
    ];
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let get = |i: usize| record.get(i).unwrap_or("");
        for (condition, actual_col, detected_col) in spec {
            let Some(actual) = optional_bpm("actual", get(actual_col), line)? else {
                continue;
            };
            let detected = parse_detected(get(detected_col), "detected", line)?.ok_or_else(|| {
                Error::Parse {
                    line,
                    message: format!("missing detected value for {}", condition.as_str()),
                }
            })?;
            pairs.push(EvalPair {
                subject_id: get(id).to_string(),
                condition,
                actual_bpm: actual,
                detected_bpm: detected,
            });
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Keep the detection closest to the actual rate.
    Oracle,
    /// Keep the higher-confidence detection.
    Blind,
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(SelectionMode::Oracle),
            "blind" => Ok(SelectionMode::Blind),
            other => Err(Error::Config(format!("unknown selection mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub subject_id: String,
    pub condition: Condition,
    pub actual_bpm: f64,
    pub recording_default: Option<PathBuf>,
    pub recording_custom: Option<PathBuf>,
    /// A detection bound directly in the manifest; `Some(None)` is ND.
    pub bound_detection: Option<Option<f64>>,
}

/// Parses `subject_id,condition,actual_bpm,recording_path_default,recording_path_custom`
/// with an optional `detected_bpm` column. Relative paths resolve against `base_dir`.
pub fn parse_manifest<R: std::io::Read>(reader: R, base_dir: &Path) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Manifest(e.to_string()))?;
    let cols = Columns::new(headers);
    let need = |name: &str| {
        cols.index(name)
            .ok_or_else(|| Error::Manifest(format!("missing column `{name}`")))
    };
    let id = need("subject_id")?;
    let cond = need("condition")?;
    let actual = need("actual_bpm")?;
    let default_path = need("recording_path_default")?;
    let custom_path = need("recording_path_custom")?;
    let detected = cols.index("detected_bpm");

    let resolve = |raw: &str| -> Option<PathBuf> {
        let raw = raw.trim();
        if raw.is_empty() {
            return None;
        }
        let p = PathBuf::from(raw);
        Some(if p.is_absolute() { p } else { base_dir.join(p) })
    };

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Manifest(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let get = |i: usize| record.get(i).unwrap_or("");
        let err = |m: String| Error::Manifest(format!("line {line}: {m}"));
        let actual_bpm: f64 = get(actual)
            .parse()
            .map_err(|_| err(format!("bad actual_bpm `{}`", get(actual))))?;
        check_bpm("actual_bpm", actual_bpm).map_err(|e| err(e.to_string()))?;
        let bound_detection = match detected {
            Some(i) => parse_detected(get(i), "detected_bpm", line).map_err(|e| err(e.to_string()))?,
            None => None,
        };
        rows.push(ManifestRow {
            subject_id: get(id).to_string(),
            condition: get(cond).parse().map_err(|e: Error| err(e.to_string()))?,
            actual_bpm,
            recording_default: resolve(get(default_path)),
            recording_custom: resolve(get(custom_path)),
            bound_detection,
        });
    }
    Ok(rows)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    parse_manifest(file, path.parent().unwrap_or(Path::new(".")))
}

struct Candidate {
    label: &'static str,
    bpm: Option<f64>,
    confidence: f64,
    nd_reason: Option<NdReason>,
}

fn evaluate_row(
    row: &ManifestRow,
    config: &PipelineConfig,
    mode: SelectionMode,
    geometry: SensorGeometry,
) -> RowOutcome {
    let mut out = RowOutcome {
        subject_id: row.subject_id.clone(),
        condition: row.condition,
        actual_bpm: row.actual_bpm,
        detected_bpm: None,
        difference: None,
        source: None,
        nd_reason: None,
        missing: false,
        diagnostics: Vec::new(),
    };
    if let Some(bound) = row.bound_detection {
        out.detected_bpm = bound;
        out.difference = bound.map(|d| d - row.actual_bpm);
        out.source = Some("fixture".into());
        return out;
    }

    let mut candidates = Vec::new();
    for (label, path) in [("default", &row.recording_default), ("custom", &row.recording_custom)] {
        let Some(path) = path else { continue };
        if !path.exists() {
            out.diagnostics.push(format!("{label}: missing file {}", path.display()));
            continue;
        }
        let result = read_events_file(path, EventFormat::from_path(path), geometry)
            .and_then(|stream| estimate_hr(&stream, config));
        match result {
            Ok(est) => candidates.push(Candidate {
                label,
                bpm: est.bpm,
                confidence: est.confidence,
                nd_reason: est.nd_reason,
            }),
            Err(e) => out.diagnostics.push(format!("{label}: {e}")),
        }
    }
    if candidates.is_empty() {
        out.missing = true;
        return out;
    }

    // Strict comparisons keep the default recording on ties.
    let mut chosen: Option<&Candidate> = None;
    for c in candidates.iter().filter(|c| c.bpm.is_some()) {
        let better = match (chosen, mode) {
            (None, _) => true,
            (Some(best), SelectionMode::Oracle) => {
                (c.bpm.unwrap() - row.actual_bpm).abs() < (best.bpm.unwrap() - row.actual_bpm).abs()
            }
            (Some(best), SelectionMode::Blind) => c.confidence > best.confidence,
        };
        if better {
            chosen = Some(c);
        }
    }
    match chosen {
        Some(c) => {
            out.detected_bpm = c.bpm;
            out.difference = c.bpm.map(|d| d - row.actual_bpm);
            out.source = Some(c.label.into());
        }
        None => {
            out.nd_reason = candidates[0].nd_reason;
            out.source = Some(candidates[0].label.into());
        }
    }
    out
}

/// Runs every manifest row. Unreadable or missing recordings are reported
/// in the row diagnostics and never abort the batch.
pub fn evaluate_manifest(
    rows: &[ManifestRow],
    config: &PipelineConfig,
    mode: SelectionMode,
    geometry: SensorGeometry,
) -> Result<EvalReport> {
    config.validate()?;
    let outcomes = rows
        .par_iter()
        .map(|row| evaluate_row(row, config, mode, geometry))
        .collect();
    Ok(EvalReport::from_rows(outcomes))
}
