//! Wall-clock cost of scoring one segment: entropy features plus prediction
//! by a trained model. Band decomposition is timed separately.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::features::{FeatureKey, VariantBank};
use crate::signal::{prepare_segments, EegRecord, FilterSpec, Label, Segment};
use crate::svc::{fit_svc, SvcModel, SvcParams};
use crate::wavelet::{dwt_db4, reconstruct_variant, SignalVariant, LEVELS};

#[derive(Debug, Clone)]
pub struct TimingSetup<'a> {
    pub records: &'a [EegRecord],
    pub filter: FilterSpec,
    pub threshold_uv: f64,
    /// Feature sets to time, e.g. the full grid and a selected subset.
    pub feature_sets: Vec<Vec<FeatureKey>>,
    pub params: SvcParams,
    /// Training segments per class for the timed model.
    pub n_train_per_class: usize,
    /// Held-out segments scored per repetition. t_comp is the mean per
    /// segment, which keeps data-dependent estimator cost out of the L trend.
    pub n_probes: usize,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub l_eeg: usize,
    pub n_features: usize,
    /// Median seconds over the repetitions.
    pub t_comp: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Population variance of the repetitions, s².
    pub variance: f64,
    pub repetitions: usize,
    /// Median seconds of the band decomposition for the channels used.
    pub t_dwt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub threads: usize,
}

impl TimingReport {
    pub fn to_csv(&self) -> String {
        super::write_rows(
            &["l_eeg", "n_features", "t_comp", "t_min", "t_max", "variance", "repetitions", "t_dwt"],
            self.rows.iter().map(|r| {
                [
                    r.l_eeg.to_string(),
                    r.n_features.to_string(),
                    r.t_comp.to_string(),
                    r.t_min.to_string(),
                    r.t_max.to_string(),
                    r.variance.to_string(),
                    r.repetitions.to_string(),
                    r.t_dwt.to_string(),
                ]
            }),
        )
    }

    pub fn get(&self, l_eeg: usize, n_features: usize) -> Option<&TimingRow> {
        self.rows
            .iter()
            .find(|r| r.l_eeg == l_eeg && r.n_features == n_features)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summarize(l_eeg: usize, n_features: usize, mut t: Vec<f64>, t_dwt: f64) -> TimingRow {
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    let variance = t.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t.len() as f64;
    TimingRow {
        l_eeg,
        n_features,
        t_min: t.iter().copied().fold(f64::INFINITY, f64::min),
        t_max: t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        repetitions: t.len(),
        t_comp: median(&mut t),
        variance,
        t_dwt,
    }
}

/// Features of probe `seg` for `keys` followed by one prediction. Failed
/// estimators fall back to the model's training mean for that column.
fn score_segment(bank: &VariantBank, seg: usize, keys: &[FeatureKey], model: &SvcModel) -> Label {
    let row: Vec<f64> = keys
        .iter()
        .enumerate()
        .map(|(c, k)| {
            let x = bank.series(seg, k.channel, k.variant).expect("probe bank covers keys");
            k.entropy
                .compute(x)
                .ok()
                .filter(|v| v.is_finite())
                .unwrap_or(model.standardizer.mean[c])
        })
        .collect();
    model.predict(&[row]).expect("dimension matches")[0]
}

fn decompose(seg: &Segment, keys: &[FeatureKey]) {
    let mut channels: Vec<_> = keys.iter().map(|k| k.channel).collect();
    channels.sort();
    channels.dedup();
    for ch in channels {
        let coeffs = dwt_db4(seg.channel(ch), LEVELS).expect("segment long enough");
        for k in keys.iter().filter(|k| k.channel == ch && k.variant != SignalVariant::O) {
            std::hint::black_box(reconstruct_variant(&coeffs, k.variant).expect("valid level"));
        }
    }
}

/// Times every `(length, feature set)` pair on one held-out segment, one
/// warm-up run discarded, on the calling thread only.
pub fn timing_benchmark(
    setup: &TimingSetup,
    lengths: &[usize],
) -> Result<TimingReport, ExperimentError> {
    if setup.repetitions < 5 {
        return Err(ExperimentError::Invalid("timing needs at least 5 repetitions".into()));
    }
    if setup.feature_sets.iter().any(Vec::is_empty) || setup.n_train_per_class == 0 || setup.n_probes == 0 {
        return Err(ExperimentError::Invalid("empty feature set or training set".into()));
    }
    let mut union: Vec<FeatureKey> = Vec::new();
    for k in setup.feature_sets.iter().flatten() {
        if !union.contains(k) {
            union.push(*k);
        }
    }
    let mut rows = Vec::new();
    for &len in lengths {
        let prepared = prepare_segments(
            setup.records,
            &setup.filter,
            len,
            crate::signal::SEGMENTS_PER_RECORD,
            setup.threshold_uv,
        )?;
        let mut train = Vec::new();
        for label in [Label::Nc, Label::Pd] {
            train.extend(
                prepared
                    .segments
                    .iter()
                    .filter(|s| s.label == label)
                    .take(setup.n_train_per_class)
                    .cloned(),
            );
        }
        let held: Vec<&Segment> = prepared.segments.iter().filter(|s| !train.contains(s)).collect();
        if held.len() < setup.n_probes {
            return Err(ExperimentError::Invalid("not enough held-out segments".into()));
        }
        let step = held.len() / setup.n_probes;
        let probes: Vec<Segment> = (0..setup.n_probes).map(|i| held[i * step].clone()).collect();
        let fm = VariantBank::new(&train, &union)?.build(&union)?;
        let probe_bank = VariantBank::new(&probes, &union)?;
        let per = probes.len() as f64;

        for keys in &setup.feature_sets {
            let cols: Vec<usize> = keys
                .iter()
                .map(|k| fm.column_of(k).expect("union covers every set"))
                .collect();
            let sub = fm.select(&cols);
            let model = fit_svc(&sub.values, &sub.labels, &setup.params)?;

            std::hint::black_box(score_segment(&probe_bank, 0, keys, &model));
            let times: Vec<f64> = (0..setup.repetitions)
                .map(|_| {
                    let t = Instant::now();
                    for p in 0..probes.len() {
                        std::hint::black_box(score_segment(&probe_bank, p, keys, &model));
                    }
                    t.elapsed().as_secs_f64() / per
                })
                .collect();
            decompose(&probes[0], keys);
            let mut dwt: Vec<f64> = (0..setup.repetitions)
                .map(|_| {
                    let t = Instant::now();
                    probes.iter().for_each(|p| decompose(p, keys));
                    t.elapsed().as_secs_f64() / per
                })
                .collect();
            rows.push(summarize(len, keys.len(), times, median(&mut dwt)));
        }
    }
    Ok(TimingReport { rows, threads: 1 })
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn linear_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy * sxy / (sxx * syy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_summary() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        let r = summarize(1000, 11, vec![1.0, 3.0, 2.0, 2.0, 2.0], 0.5);
        assert_eq!((r.t_comp, r.t_min, r.t_max), (2.0, 1.0, 3.0));
        assert!((r.variance - 0.4).abs() < 1e-12);
    }

    #[test]
    fn r2_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        assert!((linear_r2(&x, &y) - 1.0).abs() < 1e-12);
    }
}
