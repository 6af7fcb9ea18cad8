#![allow(dead_code)]

use eeg_entropy::{Channel, EntropyConfig, FeatureKey, FeatureMatrix, Label, SignalVariant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `subjects` per class, five rows each, `d` columns. PD rows are shifted by
/// `shift` in the first `informative` columns.
pub fn blob_matrix(
    seed: u64,
    subjects: usize,
    d: usize,
    informative: usize,
    shift: f64,
) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys: Vec<FeatureKey> = Channel::ALL
        .iter()
        .flat_map(|&c| SignalVariant::ALL.iter().map(move |&v| (c, v)))
        .take(d)
        .map(|(c, v)| FeatureKey::new(c, v, EntropyConfig::PhaseEn { k: 4 }))
        .collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut segment_index = Vec::new();
    for (prefix, label) in [("NC", Label::Nc), ("PD", Label::Pd)] {
        for s in 0..subjects {
            for k in 0..5 {
                let row: Vec<f64> = (0..d)
                    .map(|j| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        if label == Label::Pd && j < informative {
                            e + shift
                        } else {
                            e
                        }
                    })
                    .collect();
                values.push(row);
                labels.push(label);
                groups.push(format!("{prefix}{:02}", s + 1));
                segment_index.push(k);
            }
        }
    }
    FeatureMatrix {
        keys,
        values,
        labels,
        groups,
        segment_index,
        substitutions: Vec::new(),
    }
}
