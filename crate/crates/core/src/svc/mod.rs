//! RBF soft-margin support vector classifier and the repeated stratified
//! K-fold evaluation protocol.

pub mod cv;
pub mod smo;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::Label;

pub use cv::{
    assign_folds, fit_fold, stage1_select_hyperparams, stage2_accuracy, two_stage, CvProtocol, CvReport,
    Fold, FoldGeometry, GridPoint, Grouping, ProtocolConfig, Stage1Report,
};
pub use smo::{solve_dual, DualSolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvcError {
    #[error("training set needs at least one sample of each class (got {nc} NC, {pd} PD)")]
    SingleClass { nc: usize, pd: usize },
    #[error("solver did not converge within {iterations} iterations (KKT gap {gap:.3e})")]
    NonConvergence { iterations: usize, gap: f64 },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite input at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid protocol: {0}")]
    Protocol(String),
}

fn default_tolerance() -> f64 {
    1e-3
}

fn default_max_passes() -> usize {
    1_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Cap on solver iterations.
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
}

impl SvcParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        SvcParams {
            c,
            gamma,
            tolerance: default_tolerance(),
            max_passes: default_max_passes(),
        }
    }

    pub fn validate(&self) -> Result<(), SvcError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvcError::InvalidParams(format!("C = {} must be > 0", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SvcError::InvalidParams(format!(
                "gamma = {} must be > 0",
                self.gamma
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(SvcError::InvalidParams("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// `C ∈ {0.1, 1, 10, 100}` × `gamma ∈ {1/d, 0.001, 0.01, 0.1, 1}`, C-major.
/// Features are standardized, so `1/d` is the variance-aware default.
pub fn default_grid(n_features: usize) -> Vec<SvcParams> {
    let scale = 1.0 / n_features.max(1) as f64;
    [0.1, 1.0, 10.0, 100.0]
        .iter()
        .flat_map(|&c| {
            [scale, 0.001, 0.01, 0.1, 1.0]
                .into_iter()
                .map(move |g| SvcParams::new(c, g))
        })
        .collect()
}

/// Per-column z-score statistics. Constant columns get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Standardizer {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let cols: Vec<(f64, f64)> = (0..d)
            .map(|c| column_stats(rows.iter().map(|r| r.as_ref()[c])))
            .collect();
        Standardizer {
            mean: cols.iter().map(|s| s.0).collect(),
            scale: cols.iter().map(|s| s.1).collect(),
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Population mean and std of one column; zero spread maps to scale 1.
pub(crate) fn column_stats<I: Iterator<Item = f64> + Clone>(values: I) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

/// Fitted classifier. Only vectors with `α > 0` are kept, in standardized
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub params: SvcParams,
    pub standardizer: Standardizer,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i` of each stored vector.
    pub alpha: Vec<f64>,
    /// `α_i · y_i` of each stored vector.
    pub dual_coef: Vec<f64>,
    /// Decision offset: `f(x) = Σ dual_coef_i K(sv_i, x) + bias`.
    pub bias: f64,
    pub kkt_gap: f64,
    pub iterations: usize,
}

pub(crate) fn rbf(gamma: f64, d2: f64) -> f64 {
    (-gamma * d2).exp()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn class_counts(labels: &[Label]) -> (usize, usize) {
    let pd = labels.iter().filter(|&&l| l == Label::Pd).count();
    (labels.len() - pd, pd)
}

/// Standardizes `x` on its own statistics and solves the dual problem.
pub fn fit_svc<R: AsRef<[f64]>>(
    x: &[R],
    y: &[Label],
    params: &SvcParams,
) -> Result<SvcModel, SvcError> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(SvcError::DimensionMismatch {
            expected: y.len(),
            found: x.len(),
        });
    }
    let (nc, pd) = class_counts(y);
    if nc == 0 || pd == 0 {
        return Err(SvcError::SingleClass { nc, pd });
    }
    let d = x[0].as_ref().len();
    for (i, row) in x.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != d {
            return Err(SvcError::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(SvcError::NonFinite { row: i, column: c });
        }
    }
    let standardizer = Standardizer::fit(x);
    let z: Vec<Vec<f64>> = x.iter().map(|r| standardizer.transform(r.as_ref())).collect();
    let n = z.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(params.gamma, sq_dist(&z[i], &z[j]));
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let sol = solve_dual(&kernel, &ys, params.c, params.tolerance, params.max_passes)?;
    Ok(SvcModel::from_solution(params, standardizer, &z, &ys, sol))
}

impl SvcModel {
    pub(crate) fn from_solution(
        params: &SvcParams,
        standardizer: Standardizer,
        z: &[Vec<f64>],
        y: &[f64],
        sol: DualSolution,
    ) -> SvcModel {
        let mut support_vectors = Vec::new();
        let mut alpha = Vec::new();
        let mut dual_coef = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(z[i].clone());
                alpha.push(a);
                dual_coef.push(a * y[i]);
            }
        }
        SvcModel {
            params: *params,
            standardizer,
            support_vectors,
            alpha,
            dual_coef,
            bias: -sol.rho,
            kkt_gap: sol.kkt_gap,
            iterations: sol.iterations,
        }
    }

    pub fn n_features(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn check_dim(&self, row: &[f64]) -> Result<(), SvcError> {
        if row.len() != self.n_features() {
            return Err(SvcError::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        Ok(())
    }

    pub fn decision_function<R: AsRef<[f64]>>(&self, x: &[R]) -> Result<Vec<f64>, SvcError> {
        x.iter()
            .map(|row| {
                let row = row.as_ref();
                self.check_dim(row)?;
                let z = self.standardizer.transform(row);
                let s: f64 = self
                    .support_vectors
                    .iter()
                    .zip(&self.dual_coef)
                    .map(|(sv, c)| c * rbf(self.params.gamma, sq_dist(sv, &z)))
                    .sum();
                Ok(s + self.bias)
            })
            .collect()
    }

    /// Non-negative decisions map to PD.
    pub fn predict<R: AsRef<[f64]>>(&self, x: &[R]) -> Result<Vec<Label>, SvcError> {
        Ok(self
            .decision_function(x)?
            .into_iter()
            .map(Label::from_sign)
            .collect())
    }

    /// `|Σ α_i y_i|`, which the solver keeps at zero.
    pub fn equality_residual(&self) -> f64 {
        self.dual_coef.iter().sum::<f64>().abs()
    }
}

pub fn accuracy(predicted: &[Label], truth: &[Label]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = if i % 2 == 0 { Label::Nc } else { Label::Pd };
            let shift = if label == Label::Pd { sep } else { 0.0 };
            x.push(
                (0..3)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        shift + e
                    })
                    .collect(),
            );
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn two_points_split_midway() {
        let x = vec![vec![0.0, 0.0], vec![2.0, 4.0]];
        let y = vec![Label::Nc, Label::Pd];
        let m = fit_svc(&x, &y, &SvcParams::new(1.0, 0.5)).unwrap();
        assert_eq!(m.support_vectors.len(), 2);
        assert_eq!(m.predict(&x).unwrap(), y);
        let mid = m.decision_function(&[vec![1.0, 2.0]]).unwrap()[0];
        assert!(mid.abs() < 1e-9);
    }

    #[test]
    fn separable_blobs_fit_exactly() {
        let (x, y) = blobs(60, 6.0, 1);
        let m = fit_svc(&x, &y, &SvcParams::new(10.0, 0.3)).unwrap();
        assert_eq!(accuracy(&m.predict(&x).unwrap(), &y), 1.0);
        assert!(m.alpha.iter().all(|&a| a > 0.0 && a <= 10.0));
        assert!(m.equality_residual() < 1e-9);
        assert!(m.kkt_gap <= 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            fit_svc(&x, &[Label::Pd, Label::Pd], &SvcParams::new(1.0, 1.0)),
            Err(SvcError::SingleClass { nc: 0, pd: 2 })
        ));
        assert!(fit_svc(&x, &[Label::Nc, Label::Pd], &SvcParams::new(0.0, 1.0)).is_err());
        let m = fit_svc(&x, &[Label::Nc, Label::Pd], &SvcParams::new(1.0, 1.0)).unwrap();
        assert!(matches!(
            m.predict(&[vec![1.0, 2.0]]),
            Err(SvcError::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn duplicated_rows_predict_identically() {
        let (x, y) = blobs(40, 1.0, 2);
        let m = fit_svc(&x, &y, &SvcParams::new(1.0, 0.5)).unwrap();
        let probe = vec![x[3].clone(), x[3].clone()];
        let d = m.decision_function(&probe).unwrap();
        assert_eq!(d[0].to_bits(), d[1].to_bits());
    }

    #[test]
    fn grid_shape() {
        let g = default_grid(126);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0].gamma, 1.0 / 126.0);
        assert_eq!(g[19].c, 100.0);
    }
}
