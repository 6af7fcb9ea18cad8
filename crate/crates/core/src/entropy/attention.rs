use std::collections::BTreeMap;

use super::{check_series, shannon_bits, EntropyError};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Key {
    Max,
    Min,
}

fn interval_entropy(intervals: &[usize]) -> f64 {
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &t in intervals {
        *hist.entry(t).or_default() += 1;
    }
    shannon_bits(hist.into_values(), intervals.len())
}

/// Mean of the four interval entropies (bits) between strict local extrema:
/// max→max, min→min, and the alternating max→min and min→max steps of the
/// merged key-point sequence.
pub fn attention_entropy(x: &[f64]) -> Result<f64, EntropyError> {
    check_series(x, 3)?;
    let mut keys: Vec<(usize, Key)> = Vec::new();
    for i in 1..x.len() - 1 {
        if x[i] > x[i - 1] && x[i] > x[i + 1] {
            keys.push((i, Key::Max));
        } else if x[i] < x[i - 1] && x[i] < x[i + 1] {
            keys.push((i, Key::Min));
        }
    }
    let of = |kind: Key| -> Vec<usize> {
        let idx: Vec<usize> = keys.iter().filter(|k| k.1 == kind).map(|k| k.0).collect();
        idx.windows(2).map(|w| w[1] - w[0]).collect()
    };
    let max_max = of(Key::Max);
    let min_min = of(Key::Min);
    let mut max_min = Vec::new();
    let mut min_max = Vec::new();
    for w in keys.windows(2) {
        match (w[0].1, w[1].1) {
            (Key::Max, Key::Min) => max_min.push(w[1].0 - w[0].0),
            (Key::Min, Key::Max) => min_max.push(w[1].0 - w[0].0),
            _ => {}
        }
    }
    let lists = [max_max, min_min, max_min, min_max];
    if lists.iter().any(Vec::is_empty) {
        return Err(EntropyError::InsufficientKeyPatterns(format!(
            "{} local maxima, {} local minima",
            keys.iter().filter(|k| k.1 == Key::Max).count(),
            keys.iter().filter(|k| k.1 == Key::Min).count()
        )));
    }
    Ok(lists.iter().map(|l| interval_entropy(l)).sum::<f64>() / 4.0)
}
