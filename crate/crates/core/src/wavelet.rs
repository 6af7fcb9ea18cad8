//! Four-level db4 decomposition with half-point symmetric extension, and
//! single-band reconstructions used as entropy inputs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Daubechies-4 decomposition low-pass taps.
pub const DB4_DEC_LO: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

/// Quadrature-mirror high-pass: `hi[k] = (-1)^(k+1) · lo[7-k]`.
pub const DB4_DEC_HI: [f64; 8] = [
    -0.2303778133088965,
    0.7148465705529157,
    -0.6308807679298589,
    -0.027983769416859854,
    0.18703481171909309,
    0.030841381835560764,
    -0.0328830116668852,
    -0.010597401785069032,
];

const TAPS: usize = 8;
pub const LEVELS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum WaveletError {
    #[error("series of {len} samples too short for {levels} levels (need ≥ {required})")]
    TooShort {
        len: usize,
        levels: usize,
        required: usize,
    },
    #[error("level {0} out of range")]
    Level(usize),
    #[error("the original signal is not a reconstruction")]
    Original,
}

/// The nine entropy inputs: the series itself and eight single-band
/// reconstructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignalVariant {
    O,
    CA1,
    CA2,
    CA3,
    CA4,
    CD1,
    CD2,
    CD3,
    CD4,
}

impl SignalVariant {
    pub const ALL: [SignalVariant; 9] = [
        SignalVariant::O,
        SignalVariant::CA1,
        SignalVariant::CA2,
        SignalVariant::CA3,
        SignalVariant::CA4,
        SignalVariant::CD1,
        SignalVariant::CD2,
        SignalVariant::CD3,
        SignalVariant::CD4,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tag(self) -> &'static str {
        match self {
            SignalVariant::O => "O",
            SignalVariant::CA1 => "cA1",
            SignalVariant::CA2 => "cA2",
            SignalVariant::CA3 => "cA3",
            SignalVariant::CA4 => "cA4",
            SignalVariant::CD1 => "cD1",
            SignalVariant::CD2 => "cD2",
            SignalVariant::CD3 => "cD3",
            SignalVariant::CD4 => "cD4",
        }
    }

    /// Nominal frequency band at 128 Hz, as labelled in the study. The
    /// label for `O` is metadata only.
    pub fn nominal_band_hz(self) -> (f64, f64) {
        match self {
            SignalVariant::O => (0.0, 64.0),
            SignalVariant::CA1 => (0.0, 32.0),
            SignalVariant::CA2 => (0.0, 16.0),
            SignalVariant::CA3 => (0.0, 8.0),
            SignalVariant::CA4 => (0.0, 4.0),
            SignalVariant::CD1 => (32.0, 64.0),
            SignalVariant::CD2 => (16.0, 32.0),
            SignalVariant::CD3 => (8.0, 16.0),
            SignalVariant::CD4 => (4.0, 8.0),
        }
    }

    /// `(is_approximation, level)`; `None` for the original.
    fn band(self) -> Option<(bool, usize)> {
        match self {
            SignalVariant::O => None,
            SignalVariant::CA1 => Some((true, 1)),
            SignalVariant::CA2 => Some((true, 2)),
            SignalVariant::CA3 => Some((true, 3)),
            SignalVariant::CA4 => Some((true, 4)),
            SignalVariant::CD1 => Some((false, 1)),
            SignalVariant::CD2 => Some((false, 2)),
            SignalVariant::CD3 => Some((false, 3)),
            SignalVariant::CD4 => Some((false, 4)),
        }
    }
}

impl fmt::Display for SignalVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SignalVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SignalVariant::ALL
            .iter()
            .copied()
            .find(|v| v.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown signal variant {s:?}"))
    }
}

/// Coefficients of a multilevel decomposition. `ca[l-1]` and `cd[l-1]` hold
/// level `l`; every intermediate approximation is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    pub ca: Vec<Vec<f64>>,
    pub cd: Vec<Vec<f64>>,
    pub original_length: usize,
}

impl WaveletCoeffs {
    pub fn levels(&self) -> usize {
        self.ca.len()
    }

    /// Input length of level `l` (level 0 is the original series).
    fn input_len(&self, level: usize) -> usize {
        if level == 0 {
            self.original_length
        } else {
            self.ca[level - 1].len()
        }
    }
}

/// Coefficient count per level for an input of `n` samples.
pub fn coeff_len(n: usize) -> usize {
    (n + TAPS - 1) / 2
}

/// Half-point symmetric extension: `x[-1] = x[0]`, `x[n] = x[n-1]`.
fn sym(x: &[f64], i: isize) -> f64 {
    let n = x.len() as isize;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    x[k as usize]
}

fn analyze(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let out = coeff_len(x.len());
    let n = x.len() as isize;
    let mut lo = Vec::with_capacity(out);
    let mut hi = Vec::with_capacity(out);
    for i in 0..out {
        let centre = 2 * i as isize + 1;
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..TAPS {
            let idx = centre - j as isize;
            let v = if (0..n).contains(&idx) {
                x[idx as usize]
            } else {
                sym(x, idx)
            };
            a += DB4_DEC_LO[j] * v;
            d += DB4_DEC_HI[j] * v;
        }
        lo.push(a);
        hi.push(d);
    }
    (lo, hi)
}

/// Inverse of one level, producing `out_len` samples. Either band may be
/// absent (treated as zeros).
fn synthesize(lo: Option<&[f64]>, hi: Option<&[f64]>, out_len: usize) -> Vec<f64> {
    let mut y = vec![0.0; out_len];
    for (m, slot) in y.iter_mut().enumerate() {
        // taps j = 2i + 1 - m within 0..8
        let i_min = m.saturating_sub(1).div_ceil(2);
        let i_max = (m + TAPS - 2) / 2;
        let mut acc = 0.0;
        for i in i_min..=i_max {
            let j = 2 * i + 1 - m;
            if let Some(a) = lo {
                acc += a[i] * DB4_DEC_LO[j];
            }
            if let Some(d) = hi {
                acc += d[i] * DB4_DEC_HI[j];
            }
        }
        *slot = acc;
    }
    y
}

/// Multilevel db4 decomposition. Requires `len ≥ 8 · 2^levels`.
pub fn dwt_db4(x: &[f64], levels: usize) -> Result<WaveletCoeffs, WaveletError> {
    let required = TAPS << levels;
    if levels == 0 || x.len() < required {
        return Err(WaveletError::TooShort {
            len: x.len(),
            levels,
            required,
        });
    }
    let mut ca = Vec::with_capacity(levels);
    let mut cd = Vec::with_capacity(levels);
    let mut current = x.to_vec();
    for _ in 0..levels {
        let (a, d) = analyze(&current);
        cd.push(d);
        current = a.clone();
        ca.push(a);
    }
    Ok(WaveletCoeffs {
        ca,
        cd,
        original_length: x.len(),
    })
}

/// Full inverse from the deepest level, using only that level's
/// approximation and every level's details.
pub fn idwt_db4(coeffs: &WaveletCoeffs) -> Vec<f64> {
    let top = coeffs.levels();
    let mut current = coeffs.ca[top - 1].clone();
    for level in (1..=top).rev() {
        current = synthesize(
            Some(&current),
            Some(&coeffs.cd[level - 1]),
            coeffs.input_len(level - 1),
        );
    }
    current
}

/// Reconstructs the series from the single coefficient set named by `v`,
/// every other set taken as zero. Output has `original_length` samples.
pub fn reconstruct_variant(
    coeffs: &WaveletCoeffs,
    v: SignalVariant,
) -> Result<Vec<f64>, WaveletError> {
    let (approx, level) = v.band().ok_or(WaveletError::Original)?;
    if level > coeffs.levels() {
        return Err(WaveletError::Level(level));
    }
    let band = if approx {
        &coeffs.ca[level - 1]
    } else {
        &coeffs.cd[level - 1]
    };
    let out_len = coeffs.input_len(level - 1);
    let mut current = if approx {
        synthesize(Some(band), None, out_len)
    } else {
        synthesize(None, Some(band), out_len)
    };
    for l in (1..level).rev() {
        current = synthesize(Some(&current), None, coeffs.input_len(l - 1));
    }
    Ok(current)
}

/// The nine entropy inputs of one series, keyed and ordered by variant.
pub type Variants = BTreeMap<SignalVariant, Vec<f64>>;

/// Minimum length accepted by [`make_variants`].
pub const MIN_VARIANT_LEN: usize = TAPS << LEVELS;

pub fn make_variants(x: &[f64]) -> Result<Variants, WaveletError> {
    let coeffs = dwt_db4(x, LEVELS)?;
    let mut out = BTreeMap::new();
    out.insert(SignalVariant::O, x.to_vec());
    for v in &SignalVariant::ALL[1..] {
        out.insert(*v, reconstruct_variant(&coeffs, *v)?);
    }
    Ok(out)
}
