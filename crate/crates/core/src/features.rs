//! Feature matrices over (channel × band × estimator) keys and the
//! estimator hyperparameter sweeps.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::entropy::{EntropyConfig, EntropyError, EntropyMethod};
use crate::signal::{Channel, Label, Segment};
use crate::svc::{two_stage, ProtocolConfig, SvcError, SvcParams};
use crate::wavelet::{dwt_db4, reconstruct_variant, SignalVariant, WaveletError, LEVELS};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no segments")]
    NoSegments,
    #[error("no feature keys")]
    NoKeys,
    #[error("segment {subject}/{index} has {found} samples, expected {expected}")]
    LengthMismatch {
        subject: String,
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate observation {subject}/{index}")]
    DuplicateRow { subject: String, index: usize },
    #[error("feature {key}: undefined on every segment ({source})")]
    ColumnUndefined {
        key: String,
        #[source]
        source: EntropyError,
    },
    #[error("invalid entropy configuration: {0}")]
    Config(#[from] EntropyError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Svc(#[from] SvcError),
    #[error("feature matrix csv: {0}")]
    Csv(String),
}

/// One feature column: an estimator applied to one band of one channel.
/// Text form: `T8|cA3|FuzzyEn(m=1,r=0.15,r2=5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureKey {
    pub channel: Channel,
    pub variant: SignalVariant,
    pub entropy: EntropyConfig,
}

impl FeatureKey {
    pub fn new(channel: Channel, variant: SignalVariant, entropy: EntropyConfig) -> Self {
        FeatureKey {
            channel,
            variant,
            entropy,
        }
    }

    /// All 126 keys for one estimator, channel-major in montage order.
    pub fn full_grid(entropy: EntropyConfig) -> Vec<FeatureKey> {
        Channel::ALL
            .iter()
            .flat_map(|&c| {
                SignalVariant::ALL
                    .iter()
                    .map(move |&v| FeatureKey::new(c, v, entropy))
            })
            .collect()
    }

    /// The 14 keys of one band.
    pub fn variant_keys(variant: SignalVariant, entropy: EntropyConfig) -> Vec<FeatureKey> {
        Channel::ALL
            .iter()
            .map(|&c| FeatureKey::new(c, variant, entropy))
            .collect()
    }

    /// The 9 keys of one channel.
    pub fn channel_keys(channel: Channel, entropy: EntropyConfig) -> Vec<FeatureKey> {
        SignalVariant::ALL
            .iter()
            .map(|&v| FeatureKey::new(channel, v, entropy))
            .collect()
    }

    fn slot(&self) -> usize {
        self.channel.index() * SignalVariant::ALL.len() + self.variant.index()
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}", self.channel, self.variant, self.entropy)
    }
}

impl FromStr for FeatureKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, '|');
        let (Some(c), Some(v), Some(e)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("feature key {s:?} is not channel|variant|entropy"));
        };
        Ok(FeatureKey {
            channel: c.parse()?,
            variant: v.parse()?,
            entropy: e.parse()?,
        })
    }
}

impl Serialize for FeatureKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A cell whose estimator failed and was replaced by the column's largest
/// finite value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub row: usize,
    pub column: usize,
    pub value: f64,
    pub reason: String,
}

/// Observations × features. Rows are sorted by subject id, then segment
/// index; each `(subject, segment)` pair appears once.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub keys: Vec<FeatureKey>,
    /// Row-major values.
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    /// Subject id of each row.
    pub groups: Vec<String>,
    pub segment_index: Vec<usize>,
    pub substitutions: Vec<Substitution>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_keys(&self) -> usize {
        self.keys.len()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[c]).collect()
    }

    pub fn column_of(&self, key: &FeatureKey) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }

    /// Matrix with the given columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> FeatureMatrix {
        let substitutions = self
            .substitutions
            .iter()
            .filter_map(|s| {
                columns.iter().position(|&c| c == s.column).map(|column| Substitution {
                    column,
                    ..s.clone()
                })
            })
            .collect();
        FeatureMatrix {
            keys: columns.iter().map(|&c| self.keys[c]).collect(),
            values: self
                .values
                .iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            groups: self.groups.clone(),
            segment_index: self.segment_index.clone(),
            substitutions,
        }
    }

    /// Matrix restricted to the keys accepted by `keep`, order preserved.
    pub fn filter_keys<F: Fn(&FeatureKey) -> bool>(&self, keep: F) -> FeatureMatrix {
        let cols: Vec<usize> = (0..self.n_keys()).filter(|&c| keep(&self.keys[c])).collect();
        self.select(&cols)
    }

    /// Copy with labels permuted by a seeded shuffle.
    pub fn with_permuted_labels(&self, seed: u64) -> FeatureMatrix {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut labels = self.labels.clone();
        labels.shuffle(&mut rng);
        FeatureMatrix {
            labels,
            ..self.clone()
        }
    }

    /// CSV with columns `subject_id,label,<key>...`; values in shortest
    /// round-trip form.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec!["subject_id".to_string(), "label".to_string()];
        header.extend(self.keys.iter().map(ToString::to_string));
        w.write_record(&header).expect("in-memory write");
        for (i, row) in self.values.iter().enumerate() {
            let mut rec = vec![self.groups[i].clone(), self.labels[i].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Inverse of [`FeatureMatrix::to_csv`]. Segment indices are the
    /// position of each row within its subject.
    pub fn from_csv(text: &str) -> Result<FeatureMatrix, FeatureError> {
        let err = |m: String| FeatureError::Csv(m);
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| err(e.to_string()))?.clone();
        if header.len() < 3 || &header[0] != "subject_id" || &header[1] != "label" {
            return Err(err("header must start with subject_id,label and name a feature".into()));
        }
        let keys = header
            .iter()
            .skip(2)
            .map(|k| k.parse::<FeatureKey>().map_err(err))
            .collect::<Result<Vec<_>, _>>()?;
        let mut fm = FeatureMatrix {
            keys,
            values: Vec::new(),
            labels: Vec::new(),
            groups: Vec::new(),
            segment_index: Vec::new(),
            substitutions: Vec::new(),
        };
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let subject = rec[0].to_string();
            let label: Label = rec[1].parse().map_err(|e: String| err(format!("row {line}: {e}")))?;
            let row = rec
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>().map_err(|e| err(format!("row {line}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let idx = fm.groups.iter().filter(|g| **g == subject).count();
            fm.groups.push(subject);
            fm.labels.push(label);
            fm.segment_index.push(idx);
            fm.values.push(row);
        }
        Ok(fm)
    }
}

/// Band reconstructions of every segment for a set of (channel, variant)
/// slots, computed once and shared by any number of estimators.
#[derive(Debug, Clone)]
pub struct VariantBank {
    subjects: Vec<String>,
    labels: Vec<Label>,
    segment_index: Vec<usize>,
    /// `rows × 126` slots, `None` where not requested.
    series: Vec<Vec<Option<Vec<f64>>>>,
}

const SLOTS: usize = 14 * 9;

/// Sorted row order of `segments` after validation.
fn row_order(segments: &[Segment]) -> Result<Vec<usize>, FeatureError> {
    let first = segments.first().ok_or(FeatureError::NoSegments)?;
    let expected = first.len();
    for s in segments {
        if s.len() != expected || s.channel_data.iter().any(|c| c.len() != expected) {
            return Err(FeatureError::LengthMismatch {
                subject: s.subject_id.clone(),
                index: s.segment_index,
                expected,
                found: s.len(),
            });
        }
    }
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (&segments[a], &segments[b]);
        a.subject_id
            .cmp(&b.subject_id)
            .then(a.segment_index.cmp(&b.segment_index))
    });
    for w in order.windows(2) {
        let (a, b) = (&segments[w[0]], &segments[w[1]]);
        if a.subject_id == b.subject_id && a.segment_index == b.segment_index {
            return Err(FeatureError::DuplicateRow {
                subject: a.subject_id.clone(),
                index: a.segment_index,
            });
        }
    }
    Ok(order)
}

/// One band of one channel, computed from scratch.
pub fn variant_series(x: &[f64], variant: SignalVariant) -> Result<Vec<f64>, WaveletError> {
    if variant == SignalVariant::O {
        return Ok(x.to_vec());
    }
    let coeffs = dwt_db4(x, LEVELS)?;
    reconstruct_variant(&coeffs, variant)
}

impl VariantBank {
    /// Computes the slots used by `keys`, one decomposition per
    /// (segment, channel).
    pub fn new(segments: &[Segment], keys: &[FeatureKey]) -> Result<VariantBank, FeatureError> {
        let order = row_order(segments)?;
        let wanted: BTreeSet<(Channel, SignalVariant)> =
            keys.iter().map(|k| (k.channel, k.variant)).collect();
        let channels: BTreeSet<Channel> = wanted.iter().map(|w| w.0).collect();
        let series = order
            .par_iter()
            .map(|&i| {
                let seg = &segments[i];
                let mut row: Vec<Option<Vec<f64>>> = vec![None; SLOTS];
                for &ch in &channels {
                    let x = seg.channel(ch);
                    let needs_bands = wanted
                        .iter()
                        .any(|&(c, v)| c == ch && v != SignalVariant::O);
                    let coeffs = if needs_bands {
                        Some(dwt_db4(x, LEVELS)?)
                    } else {
                        None
                    };
                    for &(c, v) in wanted.iter().filter(|w| w.0 == ch) {
                        let s = match &coeffs {
                            Some(co) if v != SignalVariant::O => reconstruct_variant(co, v)?,
                            _ => x.to_vec(),
                        };
                        row[FeatureKey::new(c, v, EntropyConfig::AttnEn).slot()] = Some(s);
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, WaveletError>>()?;
        Ok(VariantBank {
            subjects: order.iter().map(|&i| segments[i].subject_id.clone()).collect(),
            labels: order.iter().map(|&i| segments[i].label).collect(),
            segment_index: order.iter().map(|&i| segments[i].segment_index).collect(),
            series,
        })
    }

    /// Bank holding all 126 slots.
    pub fn full(segments: &[Segment]) -> Result<VariantBank, FeatureError> {
        VariantBank::new(segments, &FeatureKey::full_grid(EntropyConfig::AttnEn))
    }

    pub fn n_rows(&self) -> usize {
        self.series.len()
    }

    pub fn series(&self, row: usize, channel: Channel, variant: SignalVariant) -> Option<&[f64]> {
        self.series[row][FeatureKey::new(channel, variant, EntropyConfig::AttnEn).slot()].as_deref()
    }

    /// Feature matrix for `keys`; every key's slot must be in the bank.
    pub fn build(&self, keys: &[FeatureKey]) -> Result<FeatureMatrix, FeatureError> {
        if keys.is_empty() {
            return Err(FeatureError::NoKeys);
        }
        for k in keys {
            k.entropy.validate()?;
            if self.series[0][k.slot()].is_none() {
                return Err(FeatureError::Csv(format!("variant bank lacks {}|{}", k.channel, k.variant)));
            }
        }
        let cells: Vec<Vec<Result<f64, EntropyError>>> = (0..self.n_rows())
            .into_par_iter()
            .map(|r| {
                keys.iter()
                    .map(|k| {
                        let x = self.series[r][k.slot()].as_ref().expect("checked above");
                        k.entropy.compute(x)
                    })
                    .collect()
            })
            .collect();
        assemble(
            keys,
            cells,
            self.labels.clone(),
            self.subjects.clone(),
            self.segment_index.clone(),
        )
    }
}

/// Applies the substitution policy column by column.
fn assemble(
    keys: &[FeatureKey],
    cells: Vec<Vec<Result<f64, EntropyError>>>,
    labels: Vec<Label>,
    groups: Vec<String>,
    segment_index: Vec<usize>,
) -> Result<FeatureMatrix, FeatureError> {
    let n = cells.len();
    let mut values = vec![vec![0.0; keys.len()]; n];
    let mut substitutions = Vec::new();
    for (c, key) in keys.iter().enumerate() {
        let max = cells
            .iter()
            .filter_map(|row| row[c].as_ref().ok().copied())
            .filter(|v| v.is_finite())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        for r in 0..n {
            values[r][c] = match &cells[r][c] {
                Ok(v) if v.is_finite() => *v,
                other => {
                    let reason = match other {
                        Err(e) => e.to_string(),
                        Ok(v) => format!("non-finite value {v}"),
                    };
                    let Some(m) = max else {
                        let source = match other {
                            Err(e) => e.clone(),
                            Ok(v) => EntropyError::Undefined(format!("non-finite value {v}")),
                        };
                        return Err(FeatureError::ColumnUndefined {
                            key: key.to_string(),
                            source,
                        });
                    };
                    substitutions.push(Substitution {
                        row: r,
                        column: c,
                        value: m,
                        reason,
                    });
                    m
                }
            };
        }
    }
    substitutions.sort_by_key(|s| (s.row, s.column));
    Ok(FeatureMatrix {
        keys: keys.to_vec(),
        values,
        labels,
        groups,
        segment_index,
        substitutions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Share one decomposition per (segment, channel) across keys.
    pub cache_variants: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            cache_variants: true,
        }
    }
}

pub fn build_feature_matrix(
    segments: &[Segment],
    keys: &[FeatureKey],
) -> Result<FeatureMatrix, FeatureError> {
    build_feature_matrix_with(segments, keys, BuildOptions::default())
}

pub fn build_feature_matrix_with(
    segments: &[Segment],
    keys: &[FeatureKey],
    options: BuildOptions,
) -> Result<FeatureMatrix, FeatureError> {
    if keys.is_empty() {
        return Err(FeatureError::NoKeys);
    }
    if options.cache_variants {
        return VariantBank::new(segments, keys)?.build(keys);
    }
    let order = row_order(segments)?;
    for k in keys {
        k.entropy.validate()?;
    }
    let cells = order
        .par_iter()
        .map(|&i| {
            keys.iter()
                .map(|k| {
                    let x = variant_series(segments[i].channel(k.channel), k.variant)?;
                    Ok(k.entropy.compute(&x))
                })
                .collect::<Result<Vec<_>, WaveletError>>()
        })
        .collect::<Result<Vec<_>, WaveletError>>()?;
    assemble(
        keys,
        cells,
        order.iter().map(|&i| segments[i].label).collect(),
        order.iter().map(|&i| segments[i].subject_id.clone()).collect(),
        order.iter().map(|&i| segments[i].segment_index).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub params: EntropyConfig,
    pub a_rkf: f64,
    pub stddev: f64,
    pub svc: SvcParams,
    pub substituted_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub params: EntropyConfig,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub method: EntropyMethod,
    pub grid: Vec<EntropyConfig>,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<SweepFailure>,
    /// Highest-accuracy point; ties go to the earliest grid entry.
    pub best: Option<SweepPoint>,
}

#[derive(Serialize)]
struct SweepEntry<'a> {
    params: &'a EntropyConfig,
    a_rkf: f64,
    stddev: f64,
}

impl SweepReport {
    /// JSON array of `{params, a_rkf, stddev}`.
    pub fn to_json(&self) -> String {
        let entries: Vec<SweepEntry> = self
            .points
            .iter()
            .map(|p| SweepEntry {
                params: &p.params,
                a_rkf: p.a_rkf,
                stddev: p.stddev,
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("sweep serializes")
    }
}

/// Evaluates the two-stage protocol on the 126-feature matrix of every
/// configuration in `grid`. Failures are recorded and the sweep continues.
pub fn sweep_hyperparameters(
    bank: &VariantBank,
    method: EntropyMethod,
    grid: &[EntropyConfig],
    svc_grid: &[SvcParams],
    protocol: &ProtocolConfig,
) -> Result<SweepReport, FeatureError> {
    for cfg in grid {
        if cfg.method() != method {
            return Err(FeatureError::Config(EntropyError::InvalidParameter(format!(
                "{cfg} is not a {method} configuration"
            ))));
        }
        cfg.validate()?;
    }
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for &cfg in grid {
        let outcome = bank
            .build(&FeatureKey::full_grid(cfg))
            .and_then(|fm| Ok((two_stage(&fm, svc_grid, protocol)?, fm.substitutions.len())));
        match outcome {
            Ok(((_, report), substituted_cells)) => points.push(SweepPoint {
                params: cfg,
                a_rkf: report.a_rkf,
                stddev: report.std,
                svc: report.params,
                substituted_cells,
            }),
            Err(e) => failures.push(SweepFailure {
                params: cfg,
                error: e.to_string(),
            }),
        }
    }
    let mut best: Option<&SweepPoint> = None;
    for p in &points {
        if best.map_or(true, |b| p.a_rkf > b.a_rkf) {
            best = Some(p);
        }
    }
    Ok(SweepReport {
        method,
        grid: grid.to_vec(),
        best: best.cloned(),
        points,
        failures,
    })
}
