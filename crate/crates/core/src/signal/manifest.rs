//! Dataset manifest: a JSON index of records, each pointing at a CSV file
//! with a header row of the 14 channel names and one row per sample.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Channel, EegRecord, Label, SignalError, Stage, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    pub records: Vec<ManifestEntry>,
}

fn default_rate() -> f64 {
    SAMPLE_RATE_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    /// CSV path, relative to the manifest's directory unless absolute.
    pub path: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SignalError + '_ {
    move |source| SignalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads and validates every record listed in the manifest at `path`.
pub fn load_dataset(path: &Path) -> Result<Vec<EegRecord>, SignalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| SignalError::Manifest {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest
        .records
        .iter()
        .map(|entry| {
            if manifest.sample_rate_hz != SAMPLE_RATE_HZ {
                return Err(SignalError::SampleRate {
                    record: entry.subject_id.clone(),
                    expected: SAMPLE_RATE_HZ,
                    found: manifest.sample_rate_hz,
                });
            }
            let label: Label = entry
                .label
                .parse()
                .map_err(|label| SignalError::UnknownLabel {
                    record: entry.subject_id.clone(),
                    label,
                })?;
            let csv_path = base.join(&entry.path);
            let text = fs::read_to_string(&csv_path).map_err(io_err(&csv_path))?;
            let channels = parse_channels_csv(&entry.subject_id, &text)?;
            EegRecord::new(entry.subject_id.clone(), label, entry.stage, channels)
        })
        .collect()
}

/// Parses a channel CSV into montage-ordered series. Columns may appear in
/// any order but all 14 names must be present exactly once.
pub fn parse_channels_csv(record: &str, text: &str) -> Result<Vec<Vec<f64>>, SignalError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .map(|h| h.split(',').map(str::trim).collect())
        .unwrap_or_default();

    let mut column_of = [usize::MAX; 14];
    for (col, name) in header.iter().enumerate() {
        let ch: Channel = name.parse().map_err(|_| SignalError::UnexpectedColumn {
            record: record.to_string(),
            column: name.to_string(),
        })?;
        if column_of[ch.index()] != usize::MAX {
            return Err(SignalError::UnexpectedColumn {
                record: record.to_string(),
                column: name.to_string(),
            });
        }
        column_of[ch.index()] = col;
    }
    if let Some(ch) = Channel::ALL.iter().find(|c| column_of[c.index()] == usize::MAX) {
        return Err(SignalError::MissingChannel {
            record: record.to_string(),
            channel: ch.to_string(),
        });
    }

    let mut by_column: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            // name the first channel whose cell is absent
            let col = fields.len().min(header.len() - 1);
            let ch = Channel::ALL
                .iter()
                .find(|c| column_of[c.index()] == col)
                .copied()
                .unwrap_or(Channel::AF3);
            return Err(SignalError::LengthMismatch {
                record: record.to_string(),
                channel: ch.to_string(),
                expected: header.len(),
                found: fields.len(),
            });
        }
        for (col, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| SignalError::BadSample {
                record: record.to_string(),
                channel: header[col].to_string(),
                row,
                text: field.to_string(),
            })?;
            by_column[col].push(v);
        }
    }
    Ok(Channel::ALL
        .iter()
        .map(|c| std::mem::take(&mut by_column[column_of[c.index()]]))
        .collect())
}

/// Writes one CSV per record plus `manifest.json` into `dir`; returns the
/// manifest path. Values use the shortest round-trip decimal form.
pub fn write_dataset(dir: &Path, records: &[EegRecord]) -> Result<PathBuf, SignalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(records.len());
    for rec in records {
        let file = format!("{}.csv", rec.subject_id);
        let path = dir.join(&file);
        fs::write(&path, record_csv(rec)).map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            subject_id: rec.subject_id.clone(),
            label: rec.label.to_string(),
            stage: rec.stage,
            path: PathBuf::from(file),
        });
    }
    let manifest = Manifest {
        sample_rate_hz: SAMPLE_RATE_HZ,
        records: entries,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

fn record_csv(rec: &EegRecord) -> String {
    let mut out = String::with_capacity(rec.len() * 14 * 12);
    let header: Vec<&str> = Channel::ALL.iter().map(|c| c.as_str()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..rec.len() {
        for (k, series) in rec.channels().iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{}", series[i]).unwrap();
        }
        out.push('\n');
    }
    out
}
