//! Result-generating studies: accuracy per band, per channel and per single
//! feature, greedy forward selection, segment length, timing, and the
//! entropy histogram and trend monitor.

mod greedy;
mod monitor;
mod timing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::EntropyConfig;
use crate::features::{FeatureError, FeatureKey, FeatureMatrix, VariantBank};
use crate::signal::{prepare_segments, Channel, EegRecord, FilterSpec, SignalError};
use crate::svc::{
    stage1_select_hyperparams, stage2_accuracy, CvReport, ProtocolConfig, SvcError, SvcParams,
};
use crate::wavelet::SignalVariant;

pub use greedy::{greedy_forward_select, SelectionTrace, StopReason, DEFAULT_PLATEAU_EPS, PLATEAU_STEPS};
pub use monitor::{
    default_dead_band, entropy_histogram, interquartile_range, monitor_trend, trend_slope,
    Histogram, TrendVerdict,
};
pub use timing::{linear_r2, timing_benchmark, TimingReport, TimingRow, TimingSetup};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Svc(#[from] SvcError),
    #[error("{0}")]
    Invalid(String),
}

/// How SVC parameters are chosen for each study cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvcTuning {
    /// Stage-1 search on every cell's own matrix.
    PerCell,
    /// The same parameters everywhere.
    Fixed(SvcParams),
}

/// One evaluated axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub axis: String,
    pub a_rkf: f64,
    pub e_rkf: f64,
    pub std: f64,
    pub n_folds: usize,
    pub failed_folds: usize,
    pub seed: u64,
    pub n_features: usize,
    pub params: SvcParams,
}

impl StudyCell {
    pub fn from_report(axis: impl Into<String>, report: &CvReport, n_features: usize) -> Self {
        StudyCell {
            axis: axis.into(),
            a_rkf: report.a_rkf,
            e_rkf: report.e_rkf,
            std: report.std,
            n_folds: report.n_folds,
            failed_folds: report.failed_folds,
            seed: report.seed,
            n_features,
            params: report.params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    /// What the axis enumerates, e.g. `variant` or `channel`.
    pub axis_kind: String,
    pub protocol: ProtocolConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyConfig>,
    pub tuning: SvcTuning,
    pub cells: Vec<StudyCell>,
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub(crate) fn write_rows<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer();
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    finish_csv(w)
}

impl StudyTable {
    /// One row per cell: `axis,a_rkf,e_rkf,std,n_folds,seed`.
    pub fn to_csv(&self) -> String {
        write_rows(
            &["axis", "a_rkf", "e_rkf", "std", "n_folds", "seed"],
            self.cells.iter().map(|c| {
                [
                    c.axis.clone(),
                    c.a_rkf.to_string(),
                    c.e_rkf.to_string(),
                    c.std.to_string(),
                    c.n_folds.to_string(),
                    c.seed.to_string(),
                ]
            }),
        )
    }

    pub fn cell(&self, axis: &str) -> Option<&StudyCell> {
        self.cells.iter().find(|c| c.axis == axis)
    }

    /// Cells sorted by accuracy, best first; ties keep table order.
    pub fn ranked(&self) -> Vec<&StudyCell> {
        let mut v: Vec<&StudyCell> = self.cells.iter().collect();
        v.sort_by(|a, b| b.a_rkf.total_cmp(&a.a_rkf));
        v
    }
}

/// Stage 2 on `fm`, with parameters picked per `tuning`.
pub fn evaluate_cell(
    fm: &FeatureMatrix,
    tuning: &SvcTuning,
    protocol: &ProtocolConfig,
) -> Result<CvReport, SvcError> {
    let params = match tuning {
        SvcTuning::PerCell => stage1_select_hyperparams(fm, &[], &protocol.stage1())?.params,
        SvcTuning::Fixed(p) => *p,
    };
    stage2_accuracy(fm, &params, &protocol.stage2())
}

fn single_entropy(fm: &FeatureMatrix) -> Option<EntropyConfig> {
    let first = fm.keys.first()?.entropy;
    fm.keys.iter().all(|k| k.entropy == first).then_some(first)
}

fn study<A: Copy>(
    fm: &FeatureMatrix,
    axis_kind: &str,
    axis: &[A],
    label: impl Fn(A) -> String,
    belongs: impl Fn(A, &FeatureKey) -> bool,
    tuning: SvcTuning,
    protocol: &ProtocolConfig,
) -> Result<StudyTable, ExperimentError> {
    let cells = axis
        .iter()
        .map(|&a| {
            let sub = fm.filter_keys(|k| belongs(a, k));
            if sub.n_keys() == 0 {
                return Err(ExperimentError::Invalid(format!(
                    "no features for {axis_kind} {}",
                    label(a)
                )));
            }
            let report = evaluate_cell(&sub, &tuning, protocol)?;
            Ok(StudyCell::from_report(label(a), &report, sub.n_keys()))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(StudyTable {
        axis_kind: axis_kind.into(),
        protocol: *protocol,
        entropy: single_entropy(fm),
        tuning,
        cells,
    })
}

/// Nine cells, each from the 14 channels of one band.
pub fn per_variant_study(
    fm: &FeatureMatrix,
    tuning: SvcTuning,
    protocol: &ProtocolConfig,
) -> Result<StudyTable, ExperimentError> {
    study(
        fm,
        "variant",
        &SignalVariant::ALL,
        |v| v.tag().to_string(),
        |v, k| k.variant == v,
        tuning,
        protocol,
    )
}

/// Fourteen cells, each from the nine bands of one channel.
pub fn per_channel_study(
    fm: &FeatureMatrix,
    tuning: SvcTuning,
    protocol: &ProtocolConfig,
) -> Result<StudyTable, ExperimentError> {
    study(
        fm,
        "channel",
        &Channel::ALL,
        |c| c.as_str().to_string(),
        |c, k| k.channel == c,
        tuning,
        protocol,
    )
}

/// Every column scored on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// All cells in column order; axis is `channel|variant`.
    pub table: StudyTable,
    /// Column indices of the best `top_n` cells, by accuracy then column.
    pub top: Vec<usize>,
}

impl FeatureRanking {
    pub fn top_table(&self) -> StudyTable {
        StudyTable {
            cells: self.top.iter().map(|&c| self.table.cells[c].clone()).collect(),
            ..self.table.clone()
        }
    }
}

pub fn per_feature_study(
    fm: &FeatureMatrix,
    tuning: SvcTuning,
    protocol: &ProtocolConfig,
    top_n: usize,
) -> Result<FeatureRanking, ExperimentError> {
    if top_n == 0 || top_n > fm.n_keys() {
        return Err(ExperimentError::Invalid(format!(
            "top_n = {top_n} must be in 1..={}",
            fm.n_keys()
        )));
    }
    let cells = (0..fm.n_keys())
        .map(|c| {
            let sub = fm.select(&[c]);
            let report = evaluate_cell(&sub, &tuning, protocol)?;
            let k = fm.keys[c];
            Ok(StudyCell::from_report(format!("{}|{}", k.channel, k.variant), &report, 1))
        })
        .collect::<Result<Vec<_>, SvcError>>()?;
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[b].a_rkf.total_cmp(&cells[a].a_rkf).then(a.cmp(&b)));
    order.truncate(top_n);
    Ok(FeatureRanking {
        table: StudyTable {
            axis_kind: "feature".into(),
            protocol: *protocol,
            entropy: single_entropy(fm),
            tuning,
            cells,
        },
        top: order,
    })
}

/// The segment lengths evaluated by default, in samples.
pub const DEFAULT_LENGTHS: [usize; 5] = [150, 300, 500, 800, 1000];

#[derive(Debug, Clone)]
pub struct LengthStudySetup<'a> {
    pub records: &'a [EegRecord],
    pub filter: FilterSpec,
    pub n_segments: usize,
    pub threshold_uv: f64,
    pub entropy: EntropyConfig,
    /// Subset evaluated next to the full grid, e.g. a greedy selection.
    pub selected: Vec<FeatureKey>,
}

/// Re-segments the records at every length and scores the full 126-key
/// grid and the selected subset. Cells are named `L=<len>|full` and
/// `L=<len>|selected-<k>`.
pub fn segment_length_study(
    setup: &LengthStudySetup,
    lengths: &[usize],
    tuning: SvcTuning,
    protocol: &ProtocolConfig,
) -> Result<StudyTable, ExperimentError> {
    if lengths.iter().any(|&l| !(crate::signal::MIN_SEGMENT_LEN..=crate::signal::MAX_SEGMENT_LEN).contains(&l)) {
        return Err(ExperimentError::Invalid(format!(
            "segment lengths must lie in [{}, {}]",
            crate::signal::MIN_SEGMENT_LEN,
            crate::signal::MAX_SEGMENT_LEN
        )));
    }
    if setup.selected.is_empty() {
        return Err(ExperimentError::Invalid("empty selected feature set".into()));
    }
    let full_keys = FeatureKey::full_grid(setup.entropy);
    let selected_cols: Vec<usize> = setup
        .selected
        .iter()
        .map(|k| {
            full_keys
                .iter()
                .position(|f| f.channel == k.channel && f.variant == k.variant)
                .expect("every key is in the full grid")
        })
        .collect();
    let mut cells = Vec::with_capacity(2 * lengths.len());
    for &len in lengths {
        let prepared = prepare_segments(
            setup.records,
            &setup.filter,
            len,
            setup.n_segments,
            setup.threshold_uv,
        )?;
        let fm = VariantBank::new(&prepared.segments, &full_keys)?.build(&full_keys)?;
        let full = evaluate_cell(&fm, &tuning, protocol)?;
        cells.push(StudyCell::from_report(format!("L={len}|full"), &full, fm.n_keys()));
        let sub = fm.select(&selected_cols);
        let sel = evaluate_cell(&sub, &tuning, protocol)?;
        cells.push(StudyCell::from_report(
            format!("L={len}|selected-{}", sub.n_keys()),
            &sel,
            sub.n_keys(),
        ));
    }
    Ok(StudyTable {
        axis_kind: "segment-length".into(),
        protocol: *protocol,
        entropy: Some(setup.entropy),
        tuning,
        cells,
    })
}
