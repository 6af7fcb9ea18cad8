//! Seven entropy estimators over a single real series, with the
//! hyperparameter ranges used for feature sweeps.
//!
//! Conventions shared by all estimators: delay 1; `std` is the population
//! standard deviation; histogram-type entropies use base-2 logarithms and
//! the two ratio entropies (sample, fuzzy) use natural logarithms.

mod attention;
mod cosine;
mod fuzzy;
mod permutation;
mod phase;
mod sample;
mod svd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use attention::attention_entropy;
pub use cosine::{cosine_similarity_entropy, cosine_similarity_probability};
pub use fuzzy::fuzzy_entropy;
pub use permutation::perm_entropy;
pub use phase::{phase_entropy, phase_sector_counts};
pub use sample::{sample_entropy, template_match_counts};
pub use svd::{singular_values, svd_entropy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("series of length {len} too short (need {required})")]
    TooShort { len: usize, required: usize },
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("undefined entropy: {0}")]
    Undefined(String),
    #[error("embedding vector {0} has zero norm")]
    DegenerateVector(usize),
    #[error("insufficient key patterns: {0}")]
    InsufficientKeyPatterns(String),
    #[error("fuzzy similarity underflowed to zero")]
    Underflow,
}

pub(crate) fn check_series(x: &[f64], required: usize) -> Result<(), EntropyError> {
    if x.len() < required {
        return Err(EntropyError::TooShort {
            len: x.len(),
            required,
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(EntropyError::NonFinite(i));
    }
    Ok(())
}

/// Population standard deviation.
pub(crate) fn pop_std(x: &[f64]) -> f64 {
    crate::signal::mean_std(x).1
}

/// `-Σ p log2 p` over nonzero counts.
pub(crate) fn shannon_bits<I: IntoIterator<Item = usize>>(counts: I, total: usize) -> f64 {
    let total = total as f64;
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .fold(0.0, |h, t| h + t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntropyMethod {
    SVDEn,
    PermEn,
    SampEn,
    CoSiEn,
    FuzzyEn,
    PhaseEn,
    AttnEn,
}

impl EntropyMethod {
    pub const ALL: [EntropyMethod; 7] = [
        EntropyMethod::SVDEn,
        EntropyMethod::PermEn,
        EntropyMethod::SampEn,
        EntropyMethod::CoSiEn,
        EntropyMethod::FuzzyEn,
        EntropyMethod::PhaseEn,
        EntropyMethod::AttnEn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntropyMethod::SVDEn => "SVDEn",
            EntropyMethod::PermEn => "PermEn",
            EntropyMethod::SampEn => "SampEn",
            EntropyMethod::CoSiEn => "CoSiEn",
            EntropyMethod::FuzzyEn => "FuzzyEn",
            EntropyMethod::PhaseEn => "PhaseEn",
            EntropyMethod::AttnEn => "AttnEn",
        }
    }

    /// Full parameter grid: integers step 1, tolerances step 0.05.
    pub fn grid(self) -> Vec<EntropyConfig> {
        let rs: Vec<f64> = (1..=10).map(|k| (5 * k) as f64 / 100.0).collect();
        match self {
            EntropyMethod::SVDEn => (2..=10).map(|m| EntropyConfig::SvdEn { m }).collect(),
            EntropyMethod::PermEn => (2..=10).map(|m| EntropyConfig::PermEn { m }).collect(),
            EntropyMethod::SampEn => (1..=3)
                .flat_map(|m| rs.iter().map(move |&r| EntropyConfig::SampEn { m, r }))
                .collect(),
            EntropyMethod::CoSiEn => (2..=3)
                .flat_map(|m| rs.iter().map(move |&r| EntropyConfig::CoSiEn { m, r }))
                .collect(),
            EntropyMethod::FuzzyEn => (1..=2)
                .flat_map(|m| {
                    let rs = rs.clone();
                    rs.into_iter().flat_map(move |r| {
                        (1..=5).map(move |r2| EntropyConfig::FuzzyEn { m, r, r2 })
                    })
                })
                .collect(),
            EntropyMethod::PhaseEn => (2..=10).map(|k| EntropyConfig::PhaseEn { k }).collect(),
            EntropyMethod::AttnEn => vec![EntropyConfig::AttnEn],
        }
    }
}

impl fmt::Display for EntropyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntropyMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntropyMethod::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown entropy method {s:?}"))
    }
}

/// An estimator with its hyperparameters. `r` is a fraction of the series'
/// std for SampEn and FuzzyEn, and an absolute angular tolerance for CoSiEn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum EntropyConfig {
    #[serde(rename = "SVDEn")]
    SvdEn { m: usize },
    #[serde(rename = "PermEn")]
    PermEn { m: usize },
    #[serde(rename = "SampEn")]
    SampEn { m: usize, r: f64 },
    #[serde(rename = "CoSiEn")]
    CoSiEn { m: usize, r: f64 },
    #[serde(rename = "FuzzyEn")]
    FuzzyEn { m: usize, r: f64, r2: u32 },
    #[serde(rename = "PhaseEn")]
    PhaseEn { k: usize },
    #[serde(rename = "AttnEn")]
    AttnEn,
}

impl EntropyConfig {
    /// The headline configuration: FuzzyEn(m=1, r=0.15, r2=5).
    pub const FUZZY_DEFAULT: EntropyConfig = EntropyConfig::FuzzyEn {
        m: 1,
        r: 0.15,
        r2: 5,
    };

    pub fn method(&self) -> EntropyMethod {
        match self {
            EntropyConfig::SvdEn { .. } => EntropyMethod::SVDEn,
            EntropyConfig::PermEn { .. } => EntropyMethod::PermEn,
            EntropyConfig::SampEn { .. } => EntropyMethod::SampEn,
            EntropyConfig::CoSiEn { .. } => EntropyMethod::CoSiEn,
            EntropyConfig::FuzzyEn { .. } => EntropyMethod::FuzzyEn,
            EntropyConfig::PhaseEn { .. } => EntropyMethod::PhaseEn,
            EntropyConfig::AttnEn => EntropyMethod::AttnEn,
        }
    }

    /// Checks the parameter ranges of the sweep table.
    pub fn validate(&self) -> Result<(), EntropyError> {
        let bad = |what: String| Err(EntropyError::InvalidParameter(what));
        let r_ok = |r: f64| (0.05 - 1e-12..=0.5 + 1e-12).contains(&r);
        match *self {
            EntropyConfig::SvdEn { m } | EntropyConfig::PermEn { m } if !(2..=10).contains(&m) => {
                bad(format!("{}: m={m} outside 2..10", self.method()))
            }
            EntropyConfig::SampEn { m, .. } if !(1..=3).contains(&m) => {
                bad(format!("SampEn: m={m} outside 1..3"))
            }
            EntropyConfig::SampEn { r, .. } if !r_ok(r) => {
                bad(format!("SampEn: r={r} outside [0.05, 0.5]"))
            }
            EntropyConfig::CoSiEn { m, .. } if !(2..=3).contains(&m) => {
                bad(format!("CoSiEn: m={m} outside 2..3"))
            }
            EntropyConfig::CoSiEn { r, .. } if !(r > 0.0 && r <= 0.5 + 1e-12) => {
                bad(format!("CoSiEn: r={r} outside (0, 0.5]"))
            }
            EntropyConfig::FuzzyEn { m, .. } if !(1..=2).contains(&m) => {
                bad(format!("FuzzyEn: m={m} outside 1..2"))
            }
            EntropyConfig::FuzzyEn { r, .. } if !r_ok(r) => {
                bad(format!("FuzzyEn: r={r} outside [0.05, 0.5]"))
            }
            EntropyConfig::FuzzyEn { r2, .. } if !(1..=5).contains(&r2) => {
                bad(format!("FuzzyEn: r2={r2} outside 1..5"))
            }
            EntropyConfig::PhaseEn { k } if !(2..=10).contains(&k) => {
                bad(format!("PhaseEn: K={k} outside 2..10"))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the configured estimator on `x`.
    pub fn compute(&self, x: &[f64]) -> Result<f64, EntropyError> {
        match *self {
            EntropyConfig::SvdEn { m } => svd_entropy(x, m),
            EntropyConfig::PermEn { m } => perm_entropy(x, m),
            EntropyConfig::SampEn { m, r } => sample_entropy(x, m, r),
            EntropyConfig::CoSiEn { m, r } => cosine_similarity_entropy(x, m, r),
            EntropyConfig::FuzzyEn { m, r, r2 } => fuzzy_entropy(x, m, r, r2),
            EntropyConfig::PhaseEn { k } => phase_entropy(x, k),
            EntropyConfig::AttnEn => attention_entropy(x),
        }
    }

    /// Parameter part of the display form, e.g. `m=1,r=0.15,r2=5`.
    pub fn params_string(&self) -> String {
        match *self {
            EntropyConfig::SvdEn { m } | EntropyConfig::PermEn { m } => format!("m={m}"),
            EntropyConfig::SampEn { m, r } | EntropyConfig::CoSiEn { m, r } => {
                format!("m={m},r={r}")
            }
            EntropyConfig::FuzzyEn { m, r, r2 } => format!("m={m},r={r},r2={r2}"),
            EntropyConfig::PhaseEn { k } => format!("K={k}"),
            EntropyConfig::AttnEn => String::new(),
        }
    }
}

impl fmt::Display for EntropyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntropyConfig::AttnEn => f.write_str("AttnEn"),
            other => write!(f, "{}({})", other.method(), other.params_string()),
        }
    }
}

impl FromStr for EntropyConfig {
    type Err = String;

    /// Parses `FuzzyEn(m=1,r=0.15,r2=5)`, `PhaseEn(K=6)`, `AttnEn`, ….
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .strip_suffix(')')
                    .ok_or_else(|| format!("missing ')' in {s:?}"))?;
                (&s[..open], &close[open + 1..])
            }
            None => (s, ""),
        };
        let method: EntropyMethod = name.parse()?;
        let mut m = None;
        let mut r = None;
        let mut r2 = None;
        let mut k = None;
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let int = || value.parse::<usize>().map_err(|e| format!("{key}: {e}"));
            match key.trim() {
                "m" => m = Some(int()?),
                "r" => r = Some(value.parse::<f64>().map_err(|e| format!("r: {e}"))?),
                "r2" => r2 = Some(int()? as u32),
                "K" | "k" => k = Some(int()?),
                other => return Err(format!("unknown parameter {other:?}")),
            }
        }
        let need = |v: Option<usize>, n: &str| v.ok_or_else(|| format!("{method}: missing {n}"));
        let need_r = || r.ok_or_else(|| format!("{method}: missing r"));
        let cfg = match method {
            EntropyMethod::SVDEn => EntropyConfig::SvdEn { m: need(m, "m")? },
            EntropyMethod::PermEn => EntropyConfig::PermEn { m: need(m, "m")? },
            EntropyMethod::SampEn => EntropyConfig::SampEn {
                m: need(m, "m")?,
                r: need_r()?,
            },
            EntropyMethod::CoSiEn => EntropyConfig::CoSiEn {
                m: need(m, "m")?,
                r: need_r()?,
            },
            EntropyMethod::FuzzyEn => EntropyConfig::FuzzyEn {
                m: need(m, "m")?,
                r: need_r()?,
                r2: need(r2.map(|v| v as usize), "r2")? as u32,
            },
            EntropyMethod::PhaseEn => EntropyConfig::PhaseEn { k: need(k, "K")? },
            EntropyMethod::AttnEn => EntropyConfig::AttnEn,
        };
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse() {
        let cases = [
            (EntropyConfig::FUZZY_DEFAULT, "FuzzyEn(m=1,r=0.15,r2=5)"),
            (EntropyConfig::SampEn { m: 2, r: 0.25 }, "SampEn(m=2,r=0.25)"),
            (EntropyConfig::PhaseEn { k: 6 }, "PhaseEn(K=6)"),
            (EntropyConfig::AttnEn, "AttnEn"),
        ];
        for (cfg, text) in cases {
            assert_eq!(cfg.to_string(), text);
            assert_eq!(text.parse::<EntropyConfig>().unwrap(), cfg);
        }
        assert!("FuzzyEn(m=1)".parse::<EntropyConfig>().is_err());
        assert!("Bubble(m=1)".parse::<EntropyConfig>().is_err());
    }

    #[test]
    fn grid_sizes() {
        let sizes: Vec<usize> = EntropyMethod::ALL.iter().map(|m| m.grid().len()).collect();
        assert_eq!(sizes, [9, 9, 30, 20, 100, 9, 1]);
        for m in EntropyMethod::ALL {
            assert!(m.grid().iter().all(|c| c.validate().is_ok()));
        }
        assert_eq!(EntropyMethod::FuzzyEn.grid()[14].to_string(), "FuzzyEn(m=1,r=0.15,r2=5)");
    }

    #[test]
    fn range_checks() {
        assert!(EntropyConfig::SvdEn { m: 11 }.validate().is_err());
        assert!(EntropyConfig::SampEn { m: 2, r: 0.6 }.validate().is_err());
        assert!(EntropyConfig::FuzzyEn { m: 3, r: 0.2, r2: 2 }.validate().is_err());
        assert!(EntropyConfig::FuzzyEn { m: 1, r: 0.2, r2: 6 }.validate().is_err());
        assert!(EntropyConfig::PhaseEn { k: 1 }.validate().is_err());
        assert!(EntropyConfig::CoSiEn { m: 2, r: 0.01 }.validate().is_ok());
    }

    #[test]
    fn serde_shape() {
        let json = serde_json::to_string(&EntropyConfig::FUZZY_DEFAULT).unwrap();
        assert_eq!(json, r#"{"method":"FuzzyEn","m":1,"r":0.15,"r2":5}"#);
        let back: EntropyConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, EntropyConfig::FUZZY_DEFAULT);
    }
}
