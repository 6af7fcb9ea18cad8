//! Greedy forward selection under the stage-2 protocol.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, StudyCell, StudyTable, SvcTuning};
use crate::features::{FeatureKey, FeatureMatrix};
use crate::svc::{assign_folds, CvReport, FoldGeometry, ProtocolConfig, SvcError, SvcParams};

pub const DEFAULT_PLATEAU_EPS: f64 = 0.001;
/// Consecutive small improvements that end a trace.
pub const PLATEAU_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Budget,
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub keys: Vec<FeatureKey>,
    /// Column of each chosen key in the source matrix.
    pub columns: Vec<usize>,
    /// Stage-2 accuracy of the first `k + 1` chosen keys.
    pub a_rkf: Vec<f64>,
    pub reports: Vec<CvReport>,
    /// Running maximum of `a_rkf`.
    pub best_so_far: Vec<f64>,
    pub stop: StopReason,
    pub params: SvcParams,
    pub protocol: ProtocolConfig,
}

impl SelectionTrace {
    /// One cell per step, axis `k=<n>|<channel>|<variant>`.
    pub fn table(&self) -> StudyTable {
        StudyTable {
            axis_kind: "greedy-step".into(),
            protocol: self.protocol,
            entropy: self.keys.first().map(|k| k.entropy),
            tuning: SvcTuning::Fixed(self.params),
            cells: self
                .keys
                .iter()
                .zip(&self.reports)
                .enumerate()
                .map(|(i, (k, r))| {
                    StudyCell::from_report(format!("k={}|{}|{}", i + 1, k.channel, k.variant), r, i + 1)
                })
                .collect(),
        }
    }

    /// Smallest prefix whose accuracy is within `tolerance` of `target`.
    pub fn features_to_reach(&self, target: f64, tolerance: f64) -> Option<usize> {
        self.a_rkf.iter().position(|&a| a >= target - tolerance).map(|i| i + 1)
    }
}

/// Adds, at each step, the remaining column whose inclusion gives the best
/// stage-2 accuracy (ties to the lower column). Stops after `budget` keys or
/// once [`PLATEAU_STEPS`] consecutive steps improve the best accuracy by less
/// than `plateau_eps`; `plateau_eps = 0` disables the plateau rule.
///
/// Each step's accuracy equals `stage2_accuracy` on the chosen columns in
/// order: fold distances are extended column by column exactly as a fresh
/// evaluation would accumulate them.
pub fn greedy_forward_select(
    fm: &FeatureMatrix,
    params: &SvcParams,
    protocol: &ProtocolConfig,
    budget: usize,
    plateau_eps: f64,
) -> Result<SelectionTrace, ExperimentError> {
    if budget == 0 || budget > fm.n_keys() {
        return Err(ExperimentError::Invalid(format!(
            "budget {budget} must be in 1..={}",
            fm.n_keys()
        )));
    }
    params.validate()?;
    let stage2 = protocol.stage2();
    let folds = assign_folds(&fm.labels, &fm.groups, &stage2)?;
    let mut geometry: Vec<FoldGeometry> = folds
        .iter()
        .map(|f| FoldGeometry::empty(f, fm.n_rows()))
        .collect();
    let columns: Vec<Vec<f64>> = (0..fm.n_keys()).map(|c| fm.column(c)).collect();
    if let Some((row, column)) = fm.values.iter().enumerate().find_map(|(r, row)| {
        row.iter().position(|v| !v.is_finite()).map(|c| (r, c))
    }) {
        return Err(SvcError::NonFinite { row, column }.into());
    }

    let mut chosen: Vec<usize> = Vec::new();
    let mut a_rkf = Vec::new();
    let mut reports = Vec::new();
    let mut best_so_far: Vec<f64> = Vec::new();
    let mut small_steps = 0;
    let mut stop = StopReason::Budget;

    while chosen.len() < budget {
        let remaining: Vec<usize> = (0..fm.n_keys()).filter(|c| !chosen.contains(c)).collect();
        let scored: Vec<(usize, Result<CvReport, SvcError>)> = remaining
            .par_iter()
            .map(|&c| {
                let results = geometry
                    .iter()
                    .map(|g| {
                        let z = g.standardize(&columns[c]);
                        g.with_standardized(&z).accuracy(&fm.labels, params)
                    })
                    .collect();
                (c, CvReport::from_results(results, *params, stage2.seed))
            })
            .collect();
        let mut best: Option<(usize, CvReport)> = None;
        for (c, r) in scored {
            let r = r?;
            if best.as_ref().map_or(true, |(_, b)| r.a_rkf > b.a_rkf) {
                best = Some((c, r));
            }
        }
        let (c, report) = best.expect("at least one remaining column");
        for g in geometry.iter_mut() {
            g.add_column(&columns[c]);
        }
        let prev = best_so_far.last().copied();
        chosen.push(c);
        a_rkf.push(report.a_rkf);
        best_so_far.push(prev.map_or(report.a_rkf, |p: f64| p.max(report.a_rkf)));
        reports.push(report);
        if let Some(p) = prev {
            let gain = best_so_far.last().unwrap() - p;
            small_steps = if gain < plateau_eps { small_steps + 1 } else { 0 };
            if plateau_eps > 0.0 && small_steps >= PLATEAU_STEPS && chosen.len() < budget {
                stop = StopReason::Plateau;
                break;
            }
        }
    }
    Ok(SelectionTrace {
        keys: chosen.iter().map(|&c| fm.keys[c]).collect(),
        columns: chosen,
        a_rkf,
        reports,
        best_so_far,
        stop,
        params: *params,
        protocol: *protocol,
    })
}
