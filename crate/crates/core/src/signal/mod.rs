//! Multichannel EEG records: validation, band-pass filtering, segmentation,
//! amplitude artifact screening and the seeded surrogate dataset.

pub mod filter;
pub mod manifest;
pub mod surrogate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{bandpass_filter, FilterMode, FilterSpec, Sos};
pub use manifest::{load_dataset, write_dataset};
pub use surrogate::{generate_surrogate, SurrogateSpec};

/// Sampling rate of the headset recordings.
pub const SAMPLE_RATE_HZ: f64 = 128.0;
/// Number of non-overlapping segments cut from each record.
pub const SEGMENTS_PER_RECORD: usize = 5;
/// Default segment length in samples (~7.8 s at 128 Hz).
pub const DEFAULT_SEGMENT_LEN: usize = 1000;
/// Minimum record length accepted by the loader.
pub const MIN_RECORD_LEN: usize = SEGMENTS_PER_RECORD * DEFAULT_SEGMENT_LEN;
/// Smallest and largest segment lengths used anywhere in the pipeline.
pub const MIN_SEGMENT_LEN: usize = 150;
pub const MAX_SEGMENT_LEN: usize = 1000;
/// Default artifact amplitude threshold in µV.
pub const ARTIFACT_THRESHOLD_UV: f64 = 85.0;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("record {record}: missing channel {channel}")]
    MissingChannel { record: String, channel: String },
    #[error("record {record}: unexpected column {column}")]
    UnexpectedColumn { record: String, column: String },
    #[error("record {record}: channel {channel} has {found} samples, expected {expected}")]
    LengthMismatch {
        record: String,
        channel: String,
        expected: usize,
        found: usize,
    },
    #[error("record {record}: channel {channel} sample {index} is not finite")]
    NonFinite {
        record: String,
        channel: String,
        index: usize,
    },
    #[error("record {record}: channel {channel} row {row}: cannot parse {text:?}")]
    BadSample {
        record: String,
        channel: String,
        row: usize,
        text: String,
    },
    #[error("record {record}: unknown label {label:?} (expected NC or PD)")]
    UnknownLabel { record: String, label: String },
    #[error("record {record}: sample rate {found} Hz, expected {expected} Hz")]
    SampleRate {
        record: String,
        expected: f64,
        found: f64,
    },
    #[error("record {record}: {available} samples, need at least {required}")]
    TooShort {
        record: String,
        required: usize,
        available: usize,
    },
    #[error("insufficient samples: need {required}, have {available}")]
    InsufficientLength { required: usize, available: usize },
    #[error("invalid filter spec: {0}")]
    InvalidFilterSpec(String),
    #[error("filter design error: {0}")]
    FilterDesign(String),
    #[error("invalid surrogate spec: {0}")]
    InvalidSurrogateSpec(String),
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Diagnostic class of a subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "NC")]
    Nc,
    #[serde(rename = "PD")]
    Pd,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nc => "NC",
            Label::Pd => "PD",
        }
    }

    /// `-1` for controls, `+1` for patients.
    pub fn sign(self) -> f64 {
        match self {
            Label::Nc => -1.0,
            Label::Pd => 1.0,
        }
    }

    pub fn from_sign(v: f64) -> Label {
        if v >= 0.0 {
            Label::Pd
        } else {
            Label::Nc
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NC" => Ok(Label::Nc),
            "PD" => Ok(Label::Pd),
            other => Err(other.to_string()),
        }
    }
}

/// Hoehn–Yahr stage of a patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    I,
    II,
    III,
}

/// Electrode positions of the 14-channel montage, in recording order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    AF3,
    F7,
    F3,
    FC5,
    T7,
    P7,
    O1,
    O2,
    P8,
    T8,
    FC6,
    F4,
    F8,
    AF4,
}

impl Channel {
    pub const ALL: [Channel; 14] = [
        Channel::AF3,
        Channel::F7,
        Channel::F3,
        Channel::FC5,
        Channel::T7,
        Channel::P7,
        Channel::O1,
        Channel::O2,
        Channel::P8,
        Channel::T8,
        Channel::FC6,
        Channel::F4,
        Channel::F8,
        Channel::AF4,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::AF3 => "AF3",
            Channel::F7 => "F7",
            Channel::F3 => "F3",
            Channel::FC5 => "FC5",
            Channel::T7 => "T7",
            Channel::P7 => "P7",
            Channel::O1 => "O1",
            Channel::O2 => "O2",
            Channel::P8 => "P8",
            Channel::T8 => "T8",
            Channel::FC6 => "FC6",
            Channel::F4 => "F4",
            Channel::F8 => "F8",
            Channel::AF4 => "AF4",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown channel {s:?}"))
    }
}

/// One subject's 14-channel recording in µV.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecord {
    pub subject_id: String,
    pub label: Label,
    pub stage: Option<Stage>,
    pub sample_rate_hz: f64,
    /// One series per channel, indexed by [`Channel::index`].
    channels: Vec<Vec<f64>>,
}

impl EegRecord {
    /// Validates channel count, equal lengths, minimum length and finiteness.
    pub fn new(
        subject_id: impl Into<String>,
        label: Label,
        stage: Option<Stage>,
        channels: Vec<Vec<f64>>,
    ) -> Result<Self, SignalError> {
        let subject_id = subject_id.into();
        if channels.len() != Channel::ALL.len() {
            let missing = Channel::ALL
                .get(channels.len())
                .map(|c| c.as_str().to_string())
                .unwrap_or_else(|| "<extra>".to_string());
            return Err(SignalError::MissingChannel {
                record: subject_id,
                channel: missing,
            });
        }
        let expected = channels[0].len();
        for (ch, series) in Channel::ALL.iter().zip(&channels) {
            if series.len() != expected {
                return Err(SignalError::LengthMismatch {
                    record: subject_id,
                    channel: ch.to_string(),
                    expected,
                    found: series.len(),
                });
            }
            if let Some(index) = series.iter().position(|v| !v.is_finite()) {
                return Err(SignalError::NonFinite {
                    record: subject_id,
                    channel: ch.to_string(),
                    index,
                });
            }
        }
        if expected < MIN_RECORD_LEN {
            return Err(SignalError::TooShort {
                record: subject_id,
                required: MIN_RECORD_LEN,
                available: expected,
            });
        }
        Ok(EegRecord {
            subject_id,
            label,
            stage,
            sample_rate_hz: SAMPLE_RATE_HZ,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, ch: Channel) -> &[f64] {
        &self.channels[ch.index()]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    /// Applies `f` to every channel series, keeping metadata.
    pub fn map_channels<F>(&self, f: F) -> Result<EegRecord, SignalError>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>, SignalError>,
    {
        let channels = self
            .channels
            .iter()
            .map(|s| f(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EegRecord {
            channels,
            ..self.clone_meta()
        })
    }

    fn clone_meta(&self) -> EegRecord {
        EegRecord {
            subject_id: self.subject_id.clone(),
            label: self.label,
            stage: self.stage,
            sample_rate_hz: self.sample_rate_hz,
            channels: Vec::new(),
        }
    }
}

/// A contiguous window of one record, all 14 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub subject_id: String,
    pub label: Label,
    pub segment_index: usize,
    /// 14 × `len()` samples in µV, indexed by [`Channel::index`].
    pub channel_data: Vec<Vec<f64>>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.channel_data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, ch: Channel) -> &[f64] {
        &self.channel_data[ch.index()]
    }
}

/// Cuts `n_segments` consecutive windows of `len` samples from the start of
/// the record. Segment `k` covers samples `[k·len, (k+1)·len)`.
pub fn segment_record(
    rec: &EegRecord,
    len: usize,
    n_segments: usize,
) -> Result<Vec<Segment>, SignalError> {
    let required = len * n_segments;
    if len == 0 || n_segments == 0 || rec.len() < required {
        return Err(SignalError::InsufficientLength {
            required,
            available: rec.len(),
        });
    }
    Ok((0..n_segments)
        .map(|k| Segment {
            subject_id: rec.subject_id.clone(),
            label: rec.label,
            segment_index: k,
            channel_data: rec
                .channels
                .iter()
                .map(|s| s[k * len..(k + 1) * len].to_vec())
                .collect(),
        })
        .collect())
}

/// Outcome of amplitude screening.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactVerdict {
    Clean,
    Rejected { channel: Channel, sample_index: usize },
}

impl ArtifactVerdict {
    pub fn is_clean(&self) -> bool {
        matches!(self, ArtifactVerdict::Clean)
    }
}

/// Rejects a segment if any channel has `|sample| > threshold_uv`; the first
/// offending sample in montage order is reported. Values exactly at the
/// threshold pass.
pub fn reject_artifacts(seg: &Segment, threshold_uv: f64) -> ArtifactVerdict {
    for (ch, series) in Channel::ALL.iter().zip(&seg.channel_data) {
        if let Some(i) = series.iter().position(|v| v.abs() > threshold_uv) {
            return ArtifactVerdict::Rejected {
                channel: *ch,
                sample_index: i,
            };
        }
    }
    ArtifactVerdict::Clean
}

/// Filtered, segmented and screened observations of a dataset.
#[derive(Debug, Clone)]
pub struct PreparedSegments {
    pub segments: Vec<Segment>,
    /// `(subject_id, segment_index, verdict)` for every dropped segment.
    pub rejected: Vec<(String, usize, ArtifactVerdict)>,
}

/// Full preprocessing: filter each record, cut segments, drop segments that
/// fail amplitude screening. Output is sorted by subject id then segment index.
pub fn prepare_segments(
    records: &[EegRecord],
    filter: &FilterSpec,
    segment_len: usize,
    n_segments: usize,
    threshold_uv: f64,
) -> Result<PreparedSegments, SignalError> {
    let sos = Sos::butterworth_bandpass(filter, SAMPLE_RATE_HZ)?;
    let mut segments = Vec::new();
    let mut rejected = Vec::new();
    for rec in records {
        let filtered = rec.map_channels(|x| Ok(sos.apply(x, filter.mode)))?;
        for seg in segment_record(&filtered, segment_len, n_segments)? {
            match reject_artifacts(&seg, threshold_uv) {
                ArtifactVerdict::Clean => segments.push(seg),
                verdict => rejected.push((seg.subject_id.clone(), seg.segment_index, verdict)),
            }
        }
    }
    segments.sort_by(|a, b| {
        a.subject_id
            .cmp(&b.subject_id)
            .then(a.segment_index.cmp(&b.segment_index))
    });
    Ok(PreparedSegments { segments, rejected })
}

/// Population (÷N) mean and standard deviation.
pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_record(len: usize) -> EegRecord {
        let channels = (0..14)
            .map(|c| (0..len).map(|i| (c * 100_000 + i) as f64).collect())
            .collect();
        EegRecord::new("S01", Label::Nc, None, channels).unwrap()
    }

    fn flat_segment(value: f64) -> Segment {
        Segment {
            subject_id: "S".into(),
            label: Label::Nc,
            segment_index: 0,
            channel_data: vec![vec![value; 50]; 14],
        }
    }

    #[test]
    fn channel_names_round_trip() {
        for ch in Channel::ALL {
            assert_eq!(ch.as_str().parse::<Channel>().unwrap(), ch);
        }
        assert_eq!(Channel::T8.index(), 9);
    }

    #[test]
    fn five_segments_of_1000() {
        let rec = ramp_record(5000);
        let segs = segment_record(&rec, 1000, 5).unwrap();
        assert_eq!(segs.len(), 5);
        for (k, s) in segs.iter().enumerate() {
            assert_eq!(s.segment_index, k);
            assert_eq!(s.len(), 1000);
            assert_eq!(s.channel(Channel::AF3)[0], (k * 1000) as f64);
        }
        // 1000 samples at 128 Hz
        let seconds = 1000.0 / SAMPLE_RATE_HZ;
        assert_eq!(seconds, 7.8125);
        assert_eq!((seconds * 10.0).round() / 10.0, 7.8);
    }

    #[test]
    fn segmentation_partitions_prefix() {
        let rec = ramp_record(5300);
        let segs = segment_record(&rec, 700, 7).unwrap();
        for ch in Channel::ALL {
            let joined: Vec<f64> = segs.iter().flat_map(|s| s.channel(ch).to_vec()).collect();
            assert_eq!(joined.as_slice(), &rec.channel(ch)[..4900]);
        }
    }

    #[test]
    fn insufficient_length_reports_counts() {
        let rec = ramp_record(5000);
        let err = segment_record(&rec, 1000, 6).unwrap_err();
        match err {
            SignalError::InsufficientLength {
                required,
                available,
            } => {
                assert_eq!(required, 6000);
                assert_eq!(available, 5000);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(err_msg_has(&segment_record(&rec, 1000, 6), "6000"));
    }

    fn err_msg_has<T>(r: &Result<T, SignalError>, needle: &str) -> bool {
        r.as_ref().err().is_some_and(|e| e.to_string().contains(needle))
    }

    #[test]
    fn record_validation() {
        let mut chans: Vec<Vec<f64>> = vec![vec![0.0; 5000]; 14];
        chans[3][17] = f64::NAN;
        let err = EegRecord::new("X", Label::Pd, None, chans).unwrap_err();
        assert!(err.to_string().contains("FC5"), "{err}");

        let mut chans: Vec<Vec<f64>> = vec![vec![0.0; 5000]; 14];
        chans[12].pop();
        let err = EegRecord::new("X", Label::Pd, None, chans).unwrap_err();
        assert!(err.to_string().contains("F8"), "{err}");

        let chans: Vec<Vec<f64>> = vec![vec![0.0; 900]; 14];
        assert!(EegRecord::new("X", Label::Pd, None, chans).is_err());
    }

    #[test]
    fn artifact_thresholds() {
        let mut seg = flat_segment(0.0);
        for (i, v) in seg.channel_data[5].iter_mut().enumerate() {
            *v = -84.0 + (i % 169) as f64;
        }
        assert!(reject_artifacts(&seg, 85.0).is_clean());

        seg.channel_data[Channel::F7.index()][33] = 86.0;
        assert_eq!(
            reject_artifacts(&seg, 85.0),
            ArtifactVerdict::Rejected {
                channel: Channel::F7,
                sample_index: 33
            }
        );
    }

    #[test]
    fn artifact_boundary_is_strict() {
        let mut seg = flat_segment(85.0);
        seg.channel_data[0][0] = -85.0;
        assert!(reject_artifacts(&seg, 85.0).is_clean());
        seg.channel_data[2][4] = -85.000001;
        assert!(!reject_artifacts(&seg, 85.0).is_clean());
    }

    #[test]
    fn artifact_verdict_ignores_channel_order() {
        let mut seg = flat_segment(1.0);
        seg.channel_data[11][2] = 90.0;
        let mut permuted = seg.clone();
        permuted.channel_data.reverse();
        assert_eq!(
            reject_artifacts(&seg, 85.0).is_clean(),
            reject_artifacts(&permuted, 85.0).is_clean()
        );
    }
}
