//! Brute-force reference implementations used by the integration and
//! acceptance tests. Written for clarity, not speed, and sharing no code
//! with the library.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_series(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// AR(1) series with a mean offset: irregular but with some structure.
pub fn ar1_series(seed: u64, n: usize, phi: f64, offset: f64) -> Vec<f64> {
    let e = gaussian_series(seed, n);
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for v in e {
        prev = phi * prev + v;
        out.push(prev + offset);
    }
    out
}

fn std_pop(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn entropy_bits(counts: impl Iterator<Item = usize>, total: usize) -> f64 {
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / total as f64;
            h -= p * p.log2();
        }
    }
    h
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..a.len() {
        d = d.max((a[i] - b[i]).abs());
    }
    d
}

/// Sample entropy over the first `n - m` template starts at both lengths.
pub fn sampen(x: &[f64], m: usize, r: f64) -> Option<f64> {
    let tol = r * std_pop(x);
    let starts = x.len() - m;
    let mut b = 0u64;
    let mut a = 0u64;
    for i in 0..starts {
        for j in 0..starts {
            if i == j {
                continue;
            }
            if chebyshev(&x[i..i + m], &x[j..j + m]) <= tol {
                b += 1;
            }
            if chebyshev(&x[i..i + m + 1], &x[j..j + m + 1]) <= tol {
                a += 1;
            }
        }
    }
    (a > 0 && b > 0).then(|| -((a as f64) / (b as f64)).ln())
}

fn demeaned(w: &[f64]) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|v| v - mean).collect()
}

fn fuzzy_phi(x: &[f64], len: usize, count: usize, r2: u32, tol: f64) -> f64 {
    let t: Vec<Vec<f64>> = (0..count).map(|i| demeaned(&x[i..i + len])).collect();
    let mut sum = 0.0;
    for i in 0..count {
        for j in 0..count {
            if i != j {
                let d = chebyshev(&t[i], &t[j]);
                sum += if d == 0.0 { 1.0 } else { (-d.powi(r2 as i32) / tol).exp() };
            }
        }
    }
    sum / (count * (count - 1)) as f64
}

pub fn fuzzyen(x: &[f64], m: usize, r: f64, r2: u32) -> f64 {
    let tol = r * std_pop(x);
    let count = x.len() - m;
    (fuzzy_phi(x, m, count, r2, tol) / fuzzy_phi(x, m + 1, count, r2, tol)).ln()
}

/// Ordinal pattern as the argsort of the window (stable on ties).
pub fn permen(x: &[f64], m: usize) -> f64 {
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    let total = x.len() - m + 1;
    for i in 0..total {
        let w = &x[i..i + m];
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap());
        *counts.entry(idx).or_default() += 1;
    }
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    entropy_bits(counts.into_values(), total) / fact.log2()
}

pub fn phaseen(x: &[f64], k: usize) -> f64 {
    let mut counts = vec![0usize; k];
    for n in 0..x.len() - 2 {
        let u = x[n + 1] - x[n];
        let v = x[n + 2] - x[n + 1];
        let mut deg = v.atan2(u).to_degrees();
        if deg < 0.0 {
            deg += 360.0;
        }
        let width = 360.0 / k as f64;
        let mut s = 0;
        while s + 1 < k && deg >= (s + 1) as f64 * width {
            s += 1;
        }
        counts[s] += 1;
    }
    entropy_bits(counts.into_iter(), x.len() - 2) / (k as f64).log2()
}

pub fn cosien(x: &[f64], m: usize, r: f64) -> f64 {
    let rows = x.len() - m + 1;
    let mut hits = 0usize;
    let mut pairs = 0usize;
    for i in 0..rows {
        for j in i + 1..rows {
            let a = &x[i..i + m];
            let b = &x[j..j + m];
            let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ang = (dot / (na * nb)).clamp(-1.0, 1.0).acos() / PI;
            if ang < r {
                hits += 1;
            }
            pairs += 1;
        }
    }
    let p = hits as f64 / pairs as f64;
    let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    h(p) + h(1.0 - p)
}

fn interval_bits(intervals: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &t in intervals {
        *counts.entry(t).or_default() += 1;
    }
    entropy_bits(counts.into_values(), intervals.len())
}

pub fn attnen(x: &[f64]) -> Option<f64> {
    let n = x.len();
    let maxima: Vec<usize> = (1..n - 1).filter(|&i| x[i] > x[i - 1] && x[i] > x[i + 1]).collect();
    let minima: Vec<usize> = (1..n - 1).filter(|&i| x[i] < x[i - 1] && x[i] < x[i + 1]).collect();
    let gaps = |v: &[usize]| -> Vec<usize> { (1..v.len()).map(|i| v[i] - v[i - 1]).collect() };
    // from each extremum, the next extremum of either kind
    let mut max_min = Vec::new();
    let mut min_max = Vec::new();
    for &i in &maxima {
        let next_max = maxima.iter().find(|&&j| j > i);
        let next_min = minima.iter().find(|&&j| j > i);
        if let Some(&j) = next_min {
            if next_max.map_or(true, |&k| j < k) {
                max_min.push(j - i);
            }
        }
    }
    for &i in &minima {
        let next_min = minima.iter().find(|&&j| j > i);
        let next_max = maxima.iter().find(|&&j| j > i);
        if let Some(&j) = next_max {
            if next_min.map_or(true, |&k| j < k) {
                min_max.push(j - i);
            }
        }
    }
    let lists = [gaps(&maxima), gaps(&minima), max_min, min_max];
    if lists.iter().any(|l| l.is_empty()) {
        return None;
    }
    Some(lists.iter().map(|l| interval_bits(l)).sum::<f64>() / 4.0)
}

/// SVD entropy via a general dense SVD.
pub fn svden(x: &[f64], m: usize) -> f64 {
    let rows = x.len() - m + 1;
    let a = nalgebra::DMatrix::from_fn(rows, m, |i, j| x[i + j]);
    let s = a.singular_values();
    let total: f64 = s.iter().sum();
    let h: f64 = s
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| {
            let p = v / total;
            -p * p.log2()
        })
        .sum();
    h / (m as f64).log2()
}

/// Squared magnitude of the analog Butterworth band-pass prototype at the
/// bilinear-prewarped frequency: the zero-phase gain of the digital design.
pub fn butterworth_zero_phase_gain(order: usize, low: f64, high: f64, fs: f64, f: f64) -> f64 {
    let warp = |hz: f64| 2.0 * fs * (PI * hz / fs).tan();
    let (wl, wh, w) = (warp(low), warp(high), warp(f));
    let w0sq = wl * wh;
    let ratio = (w * w - w0sq) / ((wh - wl) * w);
    1.0 / (1.0 + ratio.powi(2 * order as i32))
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Dual objective `½ αᵀQα − Σα`, `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(kernel: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[i * n + j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Euclidean projection onto `{0 ≤ α ≤ c, yᵀα = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(a, b)| (a - mu * b).clamp(0.0, c)).collect() };
    let g = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, b)| a * b).sum() };
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // g is non-increasing in mu
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Projected gradient descent on the soft-margin dual.
pub fn qp_reference(kernel: &[f64], y: &[f64], c: f64, iterations: usize) -> Vec<f64> {
    let n = y.len();
    // step below 1/λ_max(Q); the trace bounds λ_max
    let trace: f64 = (0..n).map(|i| kernel[i * n + i]).sum();
    let step = 1.0 / trace;
    let mut alpha = vec![0.0; n];
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                (0..n).map(|j| y[i] * y[j] * kernel[i * n + j] * alpha[j]).sum::<f64>() - 1.0
            })
            .collect();
        let v: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        alpha = project(&v, y, c);
    }
    alpha
}

/// Mann-Whitney U of `a` over `b` and its normal-approximation z score.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut u = 0.0;
    for &p in a {
        for &q in b {
            if p > q {
                u += 1.0;
            } else if p == q {
                u += 0.5;
            }
        }
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mean = n1 * n2 / 2.0;
    let sd = (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt();
    (u, (u - mean) / sd)
}
