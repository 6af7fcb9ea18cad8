mod oracles;

use std::f64::consts::PI;

use eeg_entropy::signal::*;
use eeg_entropy::wavelet::*;
use eeg_entropy::{Channel, Label};
use proptest::prelude::*;

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn tone(hz: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * hz * i as f64 / SAMPLE_RATE_HZ).sin()).collect()
}

#[test]
fn designed_response_matches_analytic_butterworth() {
    let spec = FilterSpec::default();
    let sos = Sos::butterworth_bandpass(&spec, SAMPLE_RATE_HZ).unwrap();
    for f in [0.3, 0.5, 1.0, 4.0, 10.0, 20.0, 31.0, 32.0, 40.0, 50.0, 60.0] {
        let want = oracles::butterworth_zero_phase_gain(5, 0.5, 32.0, SAMPLE_RATE_HZ, f);
        let got = sos.gain(f, SAMPLE_RATE_HZ, FilterMode::ZeroPhase);
        assert!((got - want).abs() < 1e-9, "{f} Hz: {got} vs {want}");
    }
}

#[test]
fn tones_pass_and_stop() {
    let spec = FilterSpec::default();
    let n = 6000;
    let mid = 1500..4500;
    for (hz, lo, hi) in [(10.0, 0.95, 1.05), (60.0, 0.0, 0.05)] {
        let x = tone(hz, n);
        let y = bandpass_filter(&x, SAMPLE_RATE_HZ, &spec).unwrap();
        let ratio = oracles::rms(&y[mid.clone()]) / oracles::rms(&x[mid.clone()]);
        let analytic = oracles::butterworth_zero_phase_gain(5, 0.5, 32.0, SAMPLE_RATE_HZ, hz);
        assert!((lo..=hi).contains(&ratio), "{hz} Hz ratio {ratio}");
        assert!((ratio - analytic).abs() < 0.01, "{hz} Hz: {ratio} vs analytic {analytic}");
    }
}

#[test]
fn dwt_round_trip_and_band_additivity() {
    for (i, &n) in [150usize, 512, 800, 1000].iter().enumerate() {
        let x = oracles::gaussian_series(100 + i as u64, n);
        let c = dwt_db4(&x, LEVELS).unwrap();
        assert!(rel_l2(&idwt_db4(&c), &x) <= 1e-8);
        let mut sum = vec![0.0; n];
        for v in [SignalVariant::CA4, SignalVariant::CD4, SignalVariant::CD3, SignalVariant::CD2, SignalVariant::CD1] {
            let part = reconstruct_variant(&c, v).unwrap();
            assert_eq!(part.len(), n);
            sum.iter_mut().zip(&part).for_each(|(s, p)| *s += p);
        }
        assert!(rel_l2(&sum, &x) <= 1e-6, "n={n}");
    }
}

#[test]
fn low_tone_lands_in_deepest_approximation() {
    let x = tone(2.0, 1000);
    let c = dwt_db4(&x, LEVELS).unwrap();
    let ca4 = reconstruct_variant(&c, SignalVariant::CA4).unwrap();
    let energy = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    assert!(energy(&ca4) / energy(&x) >= 0.9);
}

#[test]
fn surrogate_is_deterministic_and_clean() {
    let spec = SurrogateSpec {
        n_subjects_per_class: 4,
        ..SurrogateSpec::default()
    };
    let a = generate_surrogate(&spec).unwrap();
    assert_eq!(a, generate_surrogate(&spec).unwrap());
    assert_eq!(a.len(), 8);
    let prepared = prepare_segments(&a, &FilterSpec::default(), 1000, 5, ARTIFACT_THRESHOLD_UV).unwrap();
    assert_eq!(prepared.segments.len(), 40);
    assert!(prepared.rejected.is_empty());
}

#[test]
fn surrogate_effect_separates_injected_band() {
    use eeg_entropy::EntropyConfig;
    let records = generate_surrogate(&SurrogateSpec::default()).unwrap();
    let prepared = prepare_segments(&records, &FilterSpec::default(), 1000, 5, ARTIFACT_THRESHOLD_UV).unwrap();
    let value = |ch: Channel, v: SignalVariant, label: Label| -> Vec<f64> {
        prepared
            .segments
            .iter()
            .filter(|s| s.label == label)
            .map(|s| {
                let c = dwt_db4(s.channel(ch), LEVELS).unwrap();
                let x = reconstruct_variant(&c, v).unwrap();
                EntropyConfig::FUZZY_DEFAULT.compute(&x).unwrap()
            })
            .collect()
    };
    let pd = value(Channel::T8, SignalVariant::CA3, Label::Pd);
    let nc = value(Channel::T8, SignalVariant::CA3, Label::Nc);
    let (_, z) = oracles::mann_whitney(&pd, &nc);
    assert!(z > 5.0, "injected band z = {z}");
    // a left-hemisphere channel carries no effect
    let pd = value(Channel::T7, SignalVariant::CA3, Label::Pd);
    let nc = value(Channel::T7, SignalVariant::CA3, Label::Nc);
    let (_, z) = oracles::mann_whitney(&pd, &nc);
    assert!(z.abs() < 3.0, "control channel z = {z}");
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SurrogateSpec {
        n_subjects_per_class: 2,
        ..SurrogateSpec::default()
    };
    let records = generate_surrogate(&spec).unwrap();
    let manifest = write_dataset(dir.path(), &records).unwrap();
    let back = load_dataset(&manifest).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in back.iter().zip(&records) {
        assert_eq!(a.subject_id, b.subject_id);
        assert_eq!(a.label, b.label);
        for ch in Channel::ALL {
            assert_eq!(a.channel(ch), b.channel(ch));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dwt_perfect_reconstruction(seed in 0u64..100_000, n in 128usize..1100) {
        let x = oracles::gaussian_series(seed, n);
        let c = dwt_db4(&x, LEVELS).unwrap();
        prop_assert_eq!(c.ca[0].len(), (n + 7) / 2);
        prop_assert!(rel_l2(&idwt_db4(&c), &x) <= 1e-8);
    }

    #[test]
    fn segments_are_contiguous_slices(len in 150usize..=1000) {
        let spec = SurrogateSpec { n_subjects_per_class: 2, ..SurrogateSpec::default() };
        let records = generate_surrogate(&spec).unwrap();
        let segs = segment_record(&records[0], len, 5).unwrap();
        prop_assert_eq!(segs.len(), 5);
        for (k, s) in segs.iter().enumerate() {
            prop_assert_eq!(s.segment_index, k);
            prop_assert_eq!(s.channel(Channel::O1), &records[0].channel(Channel::O1)[k * len..(k + 1) * len]);
        }
    }
}
