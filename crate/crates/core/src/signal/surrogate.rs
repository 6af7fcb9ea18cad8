//! Seeded surrogate dataset standing in for private clinical recordings.
//!
//! Every channel is a sum of band-limited Gaussian noise components (delta,
//! theta, alpha, beta) plus a white floor. Patients receive an extra flat
//! 0.5–8 Hz component on the right-hemisphere channels F8, P8, T8 and FC6,
//! which makes their low-band activity less regular. The strongest injection
//! is on T8, so the most separable single feature is the 0–8 Hz band (cA3)
//! of T8. Subjects are independent draws of their class's process; there is
//! no subject-specific signature beyond disease severity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::filter::{FilterMode, FilterSpec, Sos};
use super::{mean_std, Channel, EegRecord, Label, SignalError, Stage, MIN_RECORD_LEN, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub n_subjects_per_class: usize,
    pub seed: u64,
    /// Scale of the patient-only low-band component, relative to its
    /// nominal amplitude; 0 gives two identically distributed classes.
    pub class_effect: f64,
    /// RMS of the white noise floor in µV.
    pub noise_floor: f64,
    pub n_samples: usize,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec {
            n_subjects_per_class: 20,
            seed: 7,
            class_effect: 1.0,
            noise_floor: 1.0,
            n_samples: MIN_RECORD_LEN,
        }
    }
}

/// Channels carrying the patient effect, with relative strength.
pub const EFFECT_CHANNELS: [(Channel, f64); 4] = [
    (Channel::T8, 1.0),
    (Channel::P8, 0.8),
    (Channel::F8, 0.65),
    (Channel::FC6, 0.55),
];

/// Nominal RMS (µV) of the patient component at unit effect and weight.
pub const EFFECT_AMPLITUDE_UV: f64 = 7.5;

struct Band {
    low: f64,
    high: f64,
    rms_uv: f64,
}

const BANDS: [Band; 4] = [
    Band { low: 0.5, high: 4.0, rms_uv: 6.0 },
    Band { low: 4.0, high: 8.0, rms_uv: 2.0 },
    Band { low: 8.0, high: 13.0, rms_uv: 5.0 },
    Band { low: 13.0, high: 30.0, rms_uv: 2.0 },
];

const EFFECT_BAND: Band = Band { low: 0.5, high: 8.0, rms_uv: EFFECT_AMPLITUDE_UV };

impl SurrogateSpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.n_subjects_per_class < 2 {
            return Err(SignalError::InvalidSurrogateSpec(
                "need at least 2 subjects per class".into(),
            ));
        }
        if !(self.class_effect >= 0.0 && self.class_effect.is_finite()) {
            return Err(SignalError::InvalidSurrogateSpec("class_effect must be ≥ 0".into()));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(SignalError::InvalidSurrogateSpec("noise_floor must be ≥ 0".into()));
        }
        if self.n_samples < MIN_RECORD_LEN {
            return Err(SignalError::InvalidSurrogateSpec(format!(
                "n_samples must be ≥ {MIN_RECORD_LEN}"
            )));
        }
        Ok(())
    }
}

fn severity(stage: Stage) -> f64 {
    match stage {
        Stage::I => 0.6,
        Stage::II => 1.0,
        Stage::III => 1.4,
    }
}

/// Stage mix of the patient group: 2 × I, 11 × II, 7 × III per 20 patients.
fn stage_for(k: usize) -> Stage {
    match k % 20 {
        0 | 10 => Stage::I,
        1 | 4 | 7 | 11 | 14 | 17 | 19 => Stage::III,
        _ => Stage::II,
    }
}

/// Extra samples drawn on each side and discarded, so the zero-phase edge
/// transients never reach the record.
const MARGIN: usize = 512;

fn band_noise(rng: &mut ChaCha8Rng, sos: &Sos, n: usize, rms_uv: f64) -> Vec<f64> {
    let white: Vec<f64> = (0..n + 2 * MARGIN).map(|_| StandardNormal.sample(rng)).collect();
    let mut y = sos.apply(&white, FilterMode::ZeroPhase)[MARGIN..MARGIN + n].to_vec();
    let (_, s) = mean_std(&y);
    let scale = if s > 0.0 { rms_uv / s } else { 0.0 };
    y.iter_mut().for_each(|v| *v *= scale);
    y
}

fn band_filter(b: &Band) -> Sos {
    let spec = FilterSpec {
        order: 3,
        low_hz: b.low,
        high_hz: b.high,
        mode: FilterMode::ZeroPhase,
    };
    Sos::butterworth_bandpass(&spec, SAMPLE_RATE_HZ).expect("surrogate bands are valid")
}

/// Generates `n_subjects_per_class` controls (`NC01`, …) followed by the same
/// number of patients (`PD01`, …). Identical specs give identical output.
pub fn generate_surrogate(spec: &SurrogateSpec) -> Result<Vec<EegRecord>, SignalError> {
    spec.validate()?;
    let filters: Vec<Sos> = BANDS.iter().map(band_filter).collect();
    let effect_filter = band_filter(&EFFECT_BAND);
    let n = spec.n_samples;
    let width = spec.n_subjects_per_class.to_string().len().max(2);

    let mut records = Vec::with_capacity(2 * spec.n_subjects_per_class);
    for (class_idx, label) in [Label::Nc, Label::Pd].into_iter().enumerate() {
        for k in 0..spec.n_subjects_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream((class_idx * spec.n_subjects_per_class + k) as u64);
            let stage = (label == Label::Pd).then(|| stage_for(k));

            let channels = Channel::ALL
                .iter()
                .map(|&ch| {
                    let mut x = vec![0.0; n];
                    for (band, sos) in BANDS.iter().zip(&filters) {
                        let comp = band_noise(&mut rng, sos, n, band.rms_uv);
                        x.iter_mut().zip(&comp).for_each(|(a, b)| *a += b);
                    }
                    for v in x.iter_mut() {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        *v += spec.noise_floor * e;
                    }
                    let weight = EFFECT_CHANNELS
                        .iter()
                        .find(|(c, _)| *c == ch)
                        .map_or(0.0, |(_, w)| *w);
                    if let (Some(stage), true) = (stage, weight > 0.0) {
                        let amp = spec.class_effect * weight * severity(stage) * EFFECT_BAND.rms_uv;
                        let comp = band_noise(&mut rng, &effect_filter, n, amp);
                        x.iter_mut().zip(&comp).for_each(|(a, b)| *a += b);
                    }
                    x
                })
                .collect();
            let id = format!("{}{:0width$}", label.as_str(), k + 1);
            records.push(EegRecord::new(id, label, stage, channels)?);
        }
    }
    Ok(records)
}
