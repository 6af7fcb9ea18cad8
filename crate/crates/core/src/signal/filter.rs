//! Butterworth band-pass design (analog prototype, band-pass transform,
//! bilinear map) realised as cascaded second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Forward-backward application; squared magnitude, no phase shift.
    ZeroPhase,
    SinglePass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub mode: FilterMode,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            order: 5,
            low_hz: 0.5,
            high_hz: 32.0,
            mode: FilterMode::ZeroPhase,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, fs: f64) -> Result<(), SignalError> {
        if self.order == 0 {
            return Err(SignalError::InvalidFilterSpec("order must be ≥ 1".into()));
        }
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < fs / 2.0) {
            return Err(SignalError::InvalidFilterSpec(format!(
                "need 0 < low ({}) < high ({}) < fs/2 ({})",
                self.low_hz,
                self.high_hz,
                fs / 2.0
            )));
        }
        Ok(())
    }
}

/// One biquad in transposed direct form II, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b[0] + self.b[1] * zi + self.b[2] * zi2) / (self.a[0] + self.a[1] * zi + self.a[2] * zi2)
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
    poles: Vec<Complex64>,
}

impl Sos {
    /// Designs an `order`-pole-pair Butterworth band-pass (2·order poles).
    pub fn butterworth_bandpass(spec: &FilterSpec, fs: f64) -> Result<Sos, SignalError> {
        spec.validate(fs)?;
        let n = spec.order;
        let fs2 = 2.0 * fs;
        let w1 = fs2 * (PI * spec.low_hz / fs).tan();
        let w2 = fs2 * (PI * spec.high_hz / fs).tan();
        let bw = w2 - w1;
        let w0 = (w1 * w2).sqrt();

        let mut digital = Vec::with_capacity(2 * n);
        for k in 0..n {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let half = p * (bw / 2.0);
            let disc = (half * half - w0 * w0).sqrt();
            for s in [half + disc, half - disc] {
                digital.push((fs2 + s) / (fs2 - s));
            }
        }

        if let Some(p) = digital.iter().find(|p| p.norm() >= 1.0 || !p.is_finite()) {
            return Err(SignalError::FilterDesign(format!(
                "pole {p} on or outside the unit circle"
            )));
        }

        let poles = digital.clone();
        let eps = 1e-12;
        let mut complex: Vec<Complex64> = digital.iter().copied().filter(|p| p.im > eps).collect();
        let mut real: Vec<f64> = digital
            .iter()
            .filter(|p| p.im.abs() <= eps)
            .map(|p| p.re)
            .collect();
        complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        real.sort_by(f64::total_cmp);
        if real.len() % 2 != 0 {
            return Err(SignalError::FilterDesign("unpaired real pole".into()));
        }

        let mut sections: Vec<Biquad> = complex
            .iter()
            .map(|p| Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -2.0 * p.re, p.norm_sqr()],
            })
            .collect();
        for pair in real.chunks(2) {
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -(pair[0] + pair[1]), pair[0] * pair[1]],
            });
        }

        // unit gain at the band centre
        let center = Complex64::from_polar(1.0, 2.0 * (w0 / fs2).atan());
        let mut sos = Sos { sections, poles };
        let gain = sos.response_at(center).norm();
        let per_section = gain.powf(-1.0 / sos.sections.len() as f64);
        for s in &mut sos.sections {
            for b in &mut s.b {
                *b *= per_section;
            }
        }
        Ok(sos)
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    fn response_at(&self, z: Complex64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z))
    }

    /// Complex single-pass response at `f_hz`.
    pub fn frequency_response(&self, f_hz: f64, fs: f64) -> Complex64 {
        self.response_at(Complex64::from_polar(1.0, 2.0 * PI * f_hz / fs))
    }

    /// Magnitude response for the given application mode.
    pub fn gain(&self, f_hz: f64, fs: f64, mode: FilterMode) -> f64 {
        let g = self.frequency_response(f_hz, fs).norm();
        match mode {
            FilterMode::ZeroPhase => g * g,
            FilterMode::SinglePass => g,
        }
    }

    /// Samples until the slowest pole decays below 1e-6.
    pub fn settling_len(&self) -> usize {
        let r = self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        ((1e-6f64).ln() / r.ln()).ceil() as usize
    }

    /// Filters with zero initial state (single pass) or forward-backward with
    /// odd-reflection padding and steady-state initial conditions.
    pub fn apply(&self, x: &[f64], mode: FilterMode) -> Vec<f64> {
        match mode {
            FilterMode::SinglePass => {
                let mut y = x.to_vec();
                self.filter_in_place(&mut y, None);
                y
            }
            FilterMode::ZeroPhase => self.filtfilt(x),
        }
    }

    fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.settling_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.steady_state();
        let x0 = ext[0];
        self.filter_in_place(&mut ext, Some((&zi, x0)));
        ext.reverse();
        let y0 = ext[0];
        self.filter_in_place(&mut ext, Some((&zi, y0)));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    /// Per-section state reached after a long unit-step input.
    fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [b0, b1, b2] = s.b;
                let [_, a1, a2] = s.a;
                let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
                let y = dc * scale;
                let z2 = b2 * scale - a2 * y;
                let z1 = b1 * scale - a1 * y + z2;
                scale = y;
                [z1, z2]
            })
            .collect()
    }

    fn filter_in_place(&self, x: &mut [f64], init: Option<(&[[f64; 2]], f64)>) {
        for (k, s) in self.sections.iter().enumerate() {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            let (mut z1, mut z2) = match init {
                Some((zi, x0)) => (zi[k][0] * x0, zi[k][1] * x0),
                None => (0.0, 0.0),
            };
            for v in x.iter_mut() {
                let input = *v;
                let y = b0 * input + z1;
                z1 = b1 * input - a1 * y + z2;
                z2 = b2 * input - a2 * y;
                *v = y;
            }
        }
    }
}

/// Designs the filter for `spec` at `fs` and applies it to `x`.
pub fn bandpass_filter(x: &[f64], fs: f64, spec: &FilterSpec) -> Result<Vec<f64>, SignalError> {
    if x.len() < 3 * spec.order {
        return Err(SignalError::InsufficientLength {
            required: 3 * spec.order,
            available: x.len(),
        });
    }
    let sos = Sos::butterworth_bandpass(spec, fs)?;
    Ok(sos.apply(x, spec.mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 128.0;

    fn tone(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn design_is_stable_with_order_sections() {
        let sos = Sos::butterworth_bandpass(&FilterSpec::default(), FS).unwrap();
        assert_eq!(sos.sections.len(), 5);
        assert_eq!(sos.poles().len(), 10);
        assert!(sos.poles().iter().all(|p| p.norm() < 1.0));
    }

    #[test]
    fn response_shape() {
        let sos = Sos::butterworth_bandpass(&FilterSpec::default(), FS).unwrap();
        let center = (0.5f64 * 32.0).sqrt();
        assert!((sos.frequency_response(center, FS).norm() - 1.0).abs() < 0.01);
        // Butterworth band edges sit at -3 dB
        for f in [0.5, 32.0] {
            let g = sos.frequency_response(f, FS).norm();
            assert!((g - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "{f}: {g}");
        }
        assert!(sos.frequency_response(60.0, FS).norm() < 1e-3);
    }

    #[test]
    fn rejects_bad_specs() {
        for (lo, hi) in [(0.0, 32.0), (10.0, 5.0), (0.5, 64.0)] {
            let spec = FilterSpec {
                low_hz: lo,
                high_hz: hi,
                ..FilterSpec::default()
            };
            assert!(Sos::butterworth_bandpass(&spec, FS).is_err());
        }
        let spec = FilterSpec {
            order: 0,
            ..FilterSpec::default()
        };
        assert!(Sos::butterworth_bandpass(&spec, FS).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let y = bandpass_filter(&[0.0; 400], FS, &FilterSpec::default()).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
        assert_eq!(y.len(), 400);
    }

    #[test]
    fn too_short_input() {
        assert!(bandpass_filter(&[1.0; 14], FS, &FilterSpec::default()).is_err());
        assert!(bandpass_filter(&[1.0; 15], FS, &FilterSpec::default()).is_ok());
    }

    #[test]
    fn single_pass_matches_analytic_gain() {
        let spec = FilterSpec {
            mode: FilterMode::SinglePass,
            ..FilterSpec::default()
        };
        let sos = Sos::butterworth_bandpass(&spec, FS).unwrap();
        let x = tone(10.0, 4096);
        let y = sos.apply(&x, FilterMode::SinglePass);
        // skip start-up transient
        let ratio = rms(&y[1024..]) / rms(&x[1024..]);
        assert!((ratio - sos.gain(10.0, FS, FilterMode::SinglePass)).abs() < 5e-3);
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let x = tone(6.0, 2048);
        let y = bandpass_filter(&x, FS, &FilterSpec::default()).unwrap();
        let core = 256..1792;
        let best = (-10i64..=10)
            .max_by(|&a, &b| {
                let c = |lag: i64| -> f64 {
                    core.clone()
                        .map(|i| x[i] * y[(i as i64 + lag) as usize])
                        .sum()
                };
                c(a).total_cmp(&c(b))
            })
            .unwrap();
        assert_eq!(best, 0);
    }
}
