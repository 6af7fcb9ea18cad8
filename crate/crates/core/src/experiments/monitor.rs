//! Per-class entropy histograms and a slope-based trend monitor.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::features::{FeatureKey, FeatureMatrix};
use crate::signal::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub key: FeatureKey,
    /// `n_bins + 1` shared edges spanning the pooled range.
    pub edges: Vec<f64>,
    pub nc: Vec<usize>,
    pub pd: Vec<usize>,
    pub nc_mean: f64,
    pub pd_mean: f64,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        super::write_rows(
            &["bin_low", "bin_high", "nc", "pd"],
            (0..self.nc.len()).map(|b| {
                [
                    self.edges[b].to_string(),
                    self.edges[b + 1].to_string(),
                    self.nc[b].to_string(),
                    self.pd[b].to_string(),
                ]
            }),
        )
    }

    /// Count-weighted mean of bin centres.
    pub fn mass_center(counts: &[usize], edges: &[f64]) -> f64 {
        let total: usize = counts.iter().sum();
        counts
            .iter()
            .enumerate()
            .map(|(b, &c)| c as f64 * 0.5 * (edges[b] + edges[b + 1]))
            .sum::<f64>()
            / total as f64
    }
}

/// Equal-width bins over `[min, max]` of both classes; the top edge is
/// inclusive.
pub fn entropy_histogram(
    fm: &FeatureMatrix,
    key: &FeatureKey,
    n_bins: usize,
) -> Result<Histogram, ExperimentError> {
    if n_bins < 5 {
        return Err(ExperimentError::Invalid(format!("n_bins = {n_bins} must be ≥ 5")));
    }
    let col = fm
        .column_of(key)
        .ok_or_else(|| ExperimentError::Invalid(format!("feature {key} not in matrix")))?;
    let values = fm.column(col);
    let split = |l: Label| -> Vec<f64> {
        values
            .iter()
            .zip(&fm.labels)
            .filter(|(_, &x)| x == l)
            .map(|(v, _)| *v)
            .collect()
    };
    let (nc, pd) = (split(Label::Nc), split(Label::Pd));
    if nc.is_empty() || pd.is_empty() {
        return Err(ExperimentError::Invalid("histogram needs both classes".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins)
        .map(|b| if b == n_bins { hi } else { lo + b as f64 * width })
        .collect();
    let count = |xs: &[f64]| {
        let mut c = vec![0; n_bins];
        for &v in xs {
            let b = if width > 0.0 {
                (((v - lo) / width) as usize).min(n_bins - 1)
            } else {
                0
            };
            c[b] += 1;
        }
        c
    };
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(Histogram {
        key: *key,
        nc: count(&nc),
        pd: count(&pd),
        nc_mean: mean(&nc),
        pd_mean: mean(&pd),
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendVerdict {
    Improving,
    Stable,
    Deteriorating,
}

/// Least-squares slope of `y` against `0, 1, …`.
pub fn trend_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (v - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Rising entropy over the trailing `window` reads as deterioration,
/// falling as improvement; slopes with `|slope| ≤ dead_band` are stable.
pub fn monitor_trend(
    history: &[f64],
    window: usize,
    dead_band: f64,
) -> Result<TrendVerdict, ExperimentError> {
    if window < 3 || history.len() < window {
        return Err(ExperimentError::Invalid(format!(
            "need window ≥ 3 and at least window values (window {window}, history {})",
            history.len()
        )));
    }
    if !(dead_band >= 0.0) || history.iter().any(|v| !v.is_finite()) {
        return Err(ExperimentError::Invalid("history and dead band must be finite".into()));
    }
    let slope = trend_slope(&history[history.len() - window..]);
    Ok(if slope > dead_band {
        TrendVerdict::Deteriorating
    } else if slope < -dead_band {
        TrendVerdict::Improving
    } else {
        TrendVerdict::Stable
    })
}

/// `Q3 − Q1` with linear interpolation between order statistics.
pub fn interquartile_range(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    q(0.75) - q(0.25)
}

/// 1% of the interquartile range of the control-group values of `key`.
pub fn default_dead_band(fm: &FeatureMatrix, key: &FeatureKey) -> Result<f64, ExperimentError> {
    let col = fm
        .column_of(key)
        .ok_or_else(|| ExperimentError::Invalid(format!("feature {key} not in matrix")))?;
    let nc: Vec<f64> = fm
        .values
        .iter()
        .zip(&fm.labels)
        .filter(|(_, &l)| l == Label::Nc)
        .map(|(r, _)| r[col])
        .collect();
    if nc.is_empty() {
        return Err(ExperimentError::Invalid("no control observations".into()));
    }
    Ok(0.01 * interquartile_range(&nc))
}
