//! Repeated (stratified) K-fold evaluation. Stage 1 picks SVC parameters on
//! one set of partitions; stage 2 scores the chosen parameters on a fresh,
//! larger set drawn from a disjoint random stream.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    column_stats, default_grid, rbf, solve_dual, DualSolution, SvcError, SvcModel, SvcParams,
};
use crate::features::FeatureMatrix;
use crate::signal::Label;

/// Share of failed folds above which a report is marked invalid.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    /// Every segment is an independent observation.
    #[default]
    Segment,
    /// All segments of a subject fall in the same fold.
    Subject,
}

impl std::str::FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "segment" => Ok(Grouping::Segment),
            "subject" => Ok(Grouping::Subject),
            _ => Err(format!("unknown grouping {s:?} (expected segment or subject)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvProtocol {
    pub k: usize,
    pub n_repeats: usize,
    pub seed: u64,
    pub stratified: bool,
    pub grouping: Grouping,
    /// ChaCha stream used for the partitions; stages use different streams.
    pub stream: u64,
}

impl CvProtocol {
    pub fn validate(&self) -> Result<(), SvcError> {
        if self.k < 2 {
            return Err(SvcError::Protocol(format!("K = {} must be ≥ 2", self.k)));
        }
        if self.n_repeats < 1 {
            return Err(SvcError::Protocol("N must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Settings of the two-stage protocol. Stage 1 partitions come from stream 1
/// and stage 2 partitions from stream 2 of the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub k: usize,
    pub n_stage1: usize,
    pub n_stage2: usize,
    pub seed: u64,
    pub stratified: bool,
    pub grouping: Grouping,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            k: 10,
            n_stage1: 10,
            n_stage2: 30,
            seed: 42,
            stratified: true,
            grouping: Grouping::Segment,
        }
    }
}

impl ProtocolConfig {
    pub fn stage1(&self) -> CvProtocol {
        self.stage(self.n_stage1, 1)
    }

    pub fn stage2(&self) -> CvProtocol {
        self.stage(self.n_stage2, 2)
    }

    fn stage(&self, n_repeats: usize, stream: u64) -> CvProtocol {
        CvProtocol {
            k: self.k,
            n_repeats,
            seed: self.seed,
            stratified: self.stratified,
            grouping: self.grouping,
            stream,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub repeat: usize,
    pub fold: usize,
    /// Row indices, ascending.
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

/// Deals `units` (each a list of rows) into `k` folds round-robin after a
/// per-class shuffle; the dealing position carries over between classes so
/// fold sizes stay balanced.
fn deal(units_by_class: &mut [Vec<usize>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let total: usize = units_by_class.iter().map(Vec::len).sum();
    let mut fold_of = vec![0; total];
    let mut pos = 0;
    for units in units_by_class.iter_mut() {
        units.shuffle(rng);
        for &u in units.iter() {
            fold_of[u] = pos % k;
            pos += 1;
        }
    }
    fold_of
}

/// All `N × K` folds of a protocol, repeat-major.
pub fn assign_folds(
    labels: &[Label],
    groups: &[String],
    protocol: &CvProtocol,
) -> Result<Vec<Fold>, SvcError> {
    protocol.validate()?;
    let n = labels.len();
    // units: rows, or subjects in first-appearance order
    let (unit_of_row, unit_labels): (Vec<usize>, Vec<Label>) = match protocol.grouping {
        Grouping::Segment => ((0..n).collect(), labels.to_vec()),
        Grouping::Subject => {
            let mut index: BTreeMap<&str, usize> = BTreeMap::new();
            let mut unit_labels = Vec::new();
            let mut unit_of_row = Vec::with_capacity(n);
            for (row, g) in groups.iter().enumerate() {
                let next = index.len();
                let u = *index.entry(g.as_str()).or_insert(next);
                if u == unit_labels.len() {
                    unit_labels.push(labels[row]);
                } else if unit_labels[u] != labels[row] {
                    return Err(SvcError::Protocol(format!("subject {g} has mixed labels")));
                }
                unit_of_row.push(u);
            }
            (unit_of_row, unit_labels)
        }
    };
    let n_units = unit_labels.len();
    if n_units < protocol.k {
        return Err(SvcError::Protocol(format!(
            "{n_units} units cannot fill K = {} folds",
            protocol.k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    rng.set_stream(protocol.stream);

    let mut folds = Vec::with_capacity(protocol.k * protocol.n_repeats);
    for repeat in 0..protocol.n_repeats {
        let mut classes: Vec<Vec<usize>> = if protocol.stratified {
            [Label::Nc, Label::Pd]
                .iter()
                .map(|&l| (0..n_units).filter(|&u| unit_labels[u] == l).collect())
                .collect()
        } else {
            vec![(0..n_units).collect()]
        };
        let unit_fold = deal(&mut classes, protocol.k, &mut rng);
        for f in 0..protocol.k {
            let (valid, train): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|&r| unit_fold[unit_of_row[r]] == f);
            folds.push(Fold {
                repeat,
                fold: f,
                train,
                valid,
            });
        }
    }
    Ok(folds)
}

/// Squared standardized distances from every row to every training row of
/// one fold, with statistics taken from the training rows only. Features can
/// be added one at a time; a geometry built by adding columns in order is
/// bit-identical to one built from the matrix with those columns.
#[derive(Debug, Clone)]
pub struct FoldGeometry {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    n_rows: usize,
    /// Row-major `n_rows × train.len()`.
    d2: Vec<f64>,
}

impl FoldGeometry {
    pub fn empty(fold: &Fold, n_rows: usize) -> FoldGeometry {
        FoldGeometry {
            train: fold.train.clone(),
            valid: fold.valid.clone(),
            n_rows,
            d2: vec![0.0; n_rows * fold.train.len()],
        }
    }

    pub fn build(fm: &FeatureMatrix, columns: &[usize], fold: &Fold) -> FoldGeometry {
        let mut g = FoldGeometry::empty(fold, fm.n_rows());
        for &c in columns {
            g.add_column(&fm.column(c));
        }
        g
    }

    /// Standardized values of one column for all rows, using training stats.
    pub fn standardize(&self, column: &[f64]) -> Vec<f64> {
        let (mean, sd) = column_stats(self.train.iter().map(|&r| column[r]));
        column.iter().map(|v| (v - mean) / sd).collect()
    }

    pub fn add_column(&mut self, column: &[f64]) {
        let z = self.standardize(column);
        self.add_standardized(&z);
    }

    pub fn add_standardized(&mut self, z: &[f64]) {
        let nt = self.train.len();
        for r in 0..self.n_rows {
            let row = &mut self.d2[r * nt..(r + 1) * nt];
            for (slot, &t) in row.iter_mut().zip(&self.train) {
                let d = z[r] - z[t];
                *slot += d * d;
            }
        }
    }

    /// Geometry with one more standardized column, leaving `self` intact.
    pub fn with_standardized(&self, z: &[f64]) -> FoldGeometry {
        let mut g = self.clone();
        g.add_standardized(z);
        g
    }

    fn d2(&self, row: usize, train_pos: usize) -> f64 {
        self.d2[row * self.train.len() + train_pos]
    }

    /// Solves the dual problem on the training rows.
    pub fn fit(&self, labels: &[Label], params: &SvcParams) -> Result<DualSolution, SvcError> {
        params.validate()?;
        let nt = self.train.len();
        let y: Vec<f64> = self.train.iter().map(|&r| labels[r].sign()).collect();
        let (nc, pd) = (
            y.iter().filter(|&&v| v < 0.0).count(),
            y.iter().filter(|&&v| v > 0.0).count(),
        );
        if nc == 0 || pd == 0 {
            return Err(SvcError::SingleClass { nc, pd });
        }
        let mut kernel = vec![0.0; nt * nt];
        for (i, &ri) in self.train.iter().enumerate() {
            for j in 0..nt {
                kernel[i * nt + j] = rbf(params.gamma, self.d2(ri, j));
            }
        }
        solve_dual(&kernel, &y, params.c, params.tolerance, params.max_passes)
    }

    /// Validation accuracy of a fit with `params`.
    pub fn accuracy(&self, labels: &[Label], params: &SvcParams) -> Result<f64, SvcError> {
        let sol = self.fit(labels, params)?;
        let coef: Vec<(usize, f64)> = sol
            .alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0.0)
            .map(|(j, &a)| (j, a * labels[self.train[j]].sign()))
            .collect();
        let hits = self
            .valid
            .iter()
            .filter(|&&v| {
                let f: f64 = coef
                    .iter()
                    .map(|&(j, c)| c * rbf(params.gamma, self.d2(v, j)))
                    .sum::<f64>()
                    - sol.rho;
                Label::from_sign(f) == labels[v]
            })
            .count();
        Ok(hits as f64 / self.valid.len() as f64)
    }
}

/// Model of one fold, fitted through the public classifier on training rows.
pub fn fit_fold(fm: &FeatureMatrix, fold: &Fold, params: &SvcParams) -> Result<SvcModel, SvcError> {
    let x: Vec<&[f64]> = fold.train.iter().map(|&r| fm.values[r].as_slice()).collect();
    let y: Vec<Label> = fold.train.iter().map(|&r| fm.labels[r]).collect();
    super::fit_svc(&x, &y, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: SvcParams,
    /// Mean validation accuracy; `None` when any fold failed.
    pub accuracy: Option<f64>,
    pub failed_folds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Report {
    pub params: SvcParams,
    pub accuracy: f64,
    pub grid: Vec<GridPoint>,
    pub seed: u64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn check_matrix(fm: &FeatureMatrix) -> Result<(), SvcError> {
    if fm.n_keys() == 0 || fm.n_rows() == 0 {
        return Err(SvcError::Protocol("empty feature matrix".into()));
    }
    for (i, row) in fm.values.iter().enumerate() {
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(SvcError::NonFinite { row: i, column: c });
        }
    }
    Ok(())
}

/// Accuracy of every `(fold, grid point)` pair, fold-major.
fn evaluate_grid(
    fm: &FeatureMatrix,
    columns: &[usize],
    folds: &[Fold],
    grid: &[SvcParams],
) -> Vec<Vec<Result<f64, SvcError>>> {
    folds
        .par_iter()
        .map(|fold| {
            let g = FoldGeometry::build(fm, columns, fold);
            grid.iter().map(|p| g.accuracy(&fm.labels, p)).collect()
        })
        .collect()
}

/// Picks the grid point with the best mean validation accuracy over the
/// stage-1 partitions; ties go to the earliest point. Points failing on any
/// fold are excluded. An empty grid means [`default_grid`].
pub fn stage1_select_hyperparams(
    fm: &FeatureMatrix,
    grid: &[SvcParams],
    protocol: &CvProtocol,
) -> Result<Stage1Report, SvcError> {
    check_matrix(fm)?;
    let default;
    let grid = if grid.is_empty() {
        default = default_grid(fm.n_keys());
        &default[..]
    } else {
        grid
    };
    for p in grid {
        p.validate()?;
    }
    let folds = assign_folds(&fm.labels, &fm.groups, protocol)?;
    let columns: Vec<usize> = (0..fm.n_keys()).collect();
    let per_fold = evaluate_grid(fm, &columns, &folds, grid);

    let points: Vec<GridPoint> = grid
        .iter()
        .enumerate()
        .map(|(g, params)| {
            let results: Vec<&Result<f64, SvcError>> = per_fold.iter().map(|r| &r[g]).collect();
            let failed = results.iter().filter(|r| r.is_err()).count();
            let error = results
                .iter()
                .find_map(|r| r.as_ref().err().map(ToString::to_string));
            let accuracy = (failed == 0).then(|| {
                mean(&results.iter().map(|r| *r.as_ref().unwrap()).collect::<Vec<_>>())
            });
            GridPoint {
                params: *params,
                accuracy,
                failed_folds: failed,
                error,
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if let Some(a) = p.accuracy {
            if best.map_or(true, |(_, b)| a > b) {
                best = Some((i, a));
            }
        }
    }
    let (i, accuracy) = best.ok_or_else(|| {
        SvcError::Protocol(format!(
            "every grid point failed: {}",
            points[0].error.clone().unwrap_or_default()
        ))
    })?;
    Ok(Stage1Report {
        params: grid[i],
        accuracy,
        grid: points,
        seed: protocol.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub a_rkf: f64,
    pub e_rkf: f64,
    pub std: f64,
    pub n_folds: usize,
    pub failed_folds: usize,
    pub params: SvcParams,
    pub seed: u64,
    /// False when more than 1% of folds failed.
    pub valid: bool,
    /// Accuracy of every successful fold, repeat-major.
    pub folds: Vec<f64>,
}

impl CvReport {
    pub(crate) fn from_results(
        results: Vec<Result<f64, SvcError>>,
        params: SvcParams,
        seed: u64,
    ) -> Result<CvReport, SvcError> {
        let n_folds = results.len();
        let mut first_err = None;
        let folds: Vec<f64> = results
            .into_iter()
            .filter_map(|r| match r {
                Ok(a) => Some(a),
                Err(e) => {
                    first_err.get_or_insert(e);
                    None
                }
            })
            .collect();
        if folds.is_empty() {
            return Err(first_err.unwrap_or_else(|| SvcError::Protocol("no folds".into())));
        }
        let failed_folds = n_folds - folds.len();
        let a_rkf = mean(&folds);
        Ok(CvReport {
            a_rkf,
            e_rkf: 1.0 - a_rkf,
            std: pop_std(&folds),
            n_folds,
            failed_folds,
            params,
            seed,
            valid: failed_folds as f64 <= MAX_FAILED_FRACTION * n_folds as f64,
            folds,
        })
    }
}

/// Mean validation accuracy of fixed `params` over the stage-2 partitions.
pub fn stage2_accuracy(
    fm: &FeatureMatrix,
    params: &SvcParams,
    protocol: &CvProtocol,
) -> Result<CvReport, SvcError> {
    check_matrix(fm)?;
    params.validate()?;
    let folds = assign_folds(&fm.labels, &fm.groups, protocol)?;
    let columns: Vec<usize> = (0..fm.n_keys()).collect();
    let results = evaluate_grid(fm, &columns, &folds, std::slice::from_ref(params))
        .into_iter()
        .map(|mut r| r.remove(0))
        .collect();
    CvReport::from_results(results, *params, protocol.seed)
}

/// Stage 1 on `grid` (default grid if empty), then stage 2 with the winner.
pub fn two_stage(
    fm: &FeatureMatrix,
    grid: &[SvcParams],
    config: &ProtocolConfig,
) -> Result<(Stage1Report, CvReport), SvcError> {
    let s1 = stage1_select_hyperparams(fm, grid, &config.stage1())?;
    let s2 = stage2_accuracy(fm, &s1.params, &config.stage2())?;
    Ok((s1, s2))
}
