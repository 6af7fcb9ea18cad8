mod fixtures;

use std::sync::OnceLock;

use eeg_entropy::experiments::*;
use eeg_entropy::features::*;
use eeg_entropy::signal::*;
use eeg_entropy::svc::*;
use eeg_entropy::{Channel, EegRecord, EntropyConfig, EntropyMethod, Label, SignalVariant};
use proptest::prelude::*;

const PHASE: EntropyConfig = EntropyConfig::PhaseEn { k: 4 };

fn small_protocol() -> ProtocolConfig {
    ProtocolConfig {
        k: 5,
        n_stage1: 2,
        n_stage2: 3,
        ..ProtocolConfig::default()
    }
}

fn records() -> &'static [EegRecord] {
    static RECORDS: OnceLock<Vec<EegRecord>> = OnceLock::new();
    RECORDS.get_or_init(|| {
        generate_surrogate(&SurrogateSpec {
            n_subjects_per_class: 4,
            ..SurrogateSpec::default()
        })
        .unwrap()
    })
}

fn segments() -> &'static [Segment] {
    static SEGMENTS: OnceLock<Vec<Segment>> = OnceLock::new();
    SEGMENTS.get_or_init(|| {
        prepare_segments(records(), &FilterSpec::default(), 400, 5, ARTIFACT_THRESHOLD_UV)
            .unwrap()
            .segments
    })
}

fn phase_matrix() -> &'static FeatureMatrix {
    static FM: OnceLock<FeatureMatrix> = OnceLock::new();
    FM.get_or_init(|| build_feature_matrix(segments(), &FeatureKey::full_grid(PHASE)).unwrap())
}

#[test]
fn matrix_shape_and_row_order() {
    let fm = phase_matrix();
    assert_eq!(fm.n_keys(), 126);
    assert_eq!(fm.n_rows(), 40);
    for r in 1..fm.n_rows() {
        let prev = (&fm.groups[r - 1], fm.segment_index[r - 1]);
        assert!(prev < (&fm.groups[r], fm.segment_index[r]));
    }
    assert_eq!(fm.labels.iter().filter(|&&l| l == Label::Pd).count(), 20);
}

#[test]
fn csv_round_trip_preserves_values_bit_for_bit() {
    let fm = phase_matrix();
    let back = FeatureMatrix::from_csv(&fm.to_csv()).unwrap();
    assert_eq!(back.keys, fm.keys);
    assert_eq!(back.values, fm.values);
    assert_eq!(back.labels, fm.labels);
}

#[test]
fn greedy_steps_equal_fresh_stage2_evaluations() {
    let fm = phase_matrix();
    let protocol = small_protocol();
    let params = SvcParams::new(10.0, 0.05);
    let trace = greedy_forward_select(fm, &params, &protocol, 4, 0.0).unwrap();
    assert_eq!(trace.keys.len(), 4);
    for k in 1..=trace.keys.len() {
        let sub = fm.select(&trace.columns[..k]);
        let fresh = stage2_accuracy(&sub, &params, &protocol.stage2()).unwrap();
        assert_eq!(fresh.a_rkf, trace.a_rkf[k - 1], "step {k}");
    }
    assert!(trace.best_so_far.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn best_single_feature_agrees_with_greedy_first_step() {
    let fm = phase_matrix();
    let protocol = small_protocol();
    let params = SvcParams::new(1.0, 1.0);
    let ranking = per_feature_study(fm, SvcTuning::Fixed(params), &protocol, 126).unwrap();
    let trace = greedy_forward_select(fm, &params, &protocol, 1, 0.0).unwrap();
    assert_eq!(ranking.top[0], trace.columns[0]);
    assert_eq!(ranking.table.cells[ranking.top[0]].a_rkf, trace.a_rkf[0]);
    let acc: Vec<f64> = ranking.top.iter().map(|&c| ranking.table.cells[c].a_rkf).collect();
    assert!(acc.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn study_cardinalities() {
    let fm = phase_matrix();
    let protocol = small_protocol();
    let tuning = SvcTuning::Fixed(SvcParams::new(1.0, 0.1));
    let t = per_variant_study(fm, tuning, &protocol).unwrap();
    assert_eq!(t.cells.len(), 9);
    assert!(t.cells.iter().all(|c| c.n_features == 14 && c.seed == 42));
    let t = per_channel_study(fm, tuning, &protocol).unwrap();
    assert_eq!(t.cells.len(), 14);
    assert!(t.cells.iter().all(|c| c.n_features == 9));
    let header = t.to_csv().lines().next().unwrap().to_string();
    assert_eq!(header, "axis,a_rkf,e_rkf,std,n_folds,seed");
}

#[test]
fn length_study_at_full_length_reproduces_two_stage() {
    let protocol = small_protocol();
    let selected = vec![
        FeatureKey::new(Channel::T8, SignalVariant::CA3, PHASE),
        FeatureKey::new(Channel::P8, SignalVariant::O, PHASE),
    ];
    let setup = LengthStudySetup {
        records: records(),
        filter: FilterSpec::default(),
        n_segments: 5,
        threshold_uv: ARTIFACT_THRESHOLD_UV,
        entropy: PHASE,
        selected,
    };
    let table = segment_length_study(&setup, &[150, 1000], SvcTuning::PerCell, &protocol).unwrap();
    assert_eq!(table.cells.len(), 4);
    let segs = prepare_segments(records(), &FilterSpec::default(), 1000, 5, ARTIFACT_THRESHOLD_UV)
        .unwrap()
        .segments;
    let fm = build_feature_matrix(&segs, &FeatureKey::full_grid(PHASE)).unwrap();
    let (_, report) = two_stage(&fm, &[], &protocol).unwrap();
    assert_eq!(table.cell("L=1000|full").unwrap().a_rkf, report.a_rkf);
    assert!(table.cell("L=150|selected-2").is_some());
}

#[test]
fn histogram_conserves_counts() {
    let fm = phase_matrix();
    let key = FeatureKey::new(Channel::T8, SignalVariant::CA3, PHASE);
    let h = entropy_histogram(fm, &key, 12).unwrap();
    assert_eq!(h.edges.len(), 13);
    assert_eq!(h.nc.iter().sum::<usize>(), 20);
    assert_eq!(h.pd.iter().sum::<usize>(), 20);
    assert!(entropy_histogram(fm, &key, 4).is_err());
}

#[test]
fn sweep_bookkeeping() {
    let bank = VariantBank::full(segments()).unwrap();
    let grid = vec![EntropyConfig::PhaseEn { k: 3 }, EntropyConfig::PhaseEn { k: 6 }];
    let svc = vec![SvcParams::new(1.0, 0.01)];
    let r = sweep_hyperparameters(&bank, EntropyMethod::PhaseEn, &grid, &svc, &small_protocol()).unwrap();
    assert_eq!(r.points.len() + r.failures.len(), grid.len());
    let max = r.points.iter().map(|p| p.a_rkf).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.best.unwrap().a_rkf, max);
    let single = sweep_hyperparameters(&bank, EntropyMethod::PhaseEn, &grid[..1], &svc, &small_protocol()).unwrap();
    assert_eq!(single.best.unwrap().params, grid[0]);
    assert!(sweep_hyperparameters(&bank, EntropyMethod::SampEn, &grid, &svc, &small_protocol()).is_err());
}

#[test]
fn trend_monitor_rules() {
    assert_eq!(monitor_trend(&[1.0, 2.0, 3.0, 4.0], 3, 0.1).unwrap(), TrendVerdict::Deteriorating);
    assert_eq!(monitor_trend(&[4.0, 3.0, 2.0, 1.0], 4, 0.1).unwrap(), TrendVerdict::Improving);
    assert_eq!(monitor_trend(&[2.0; 6], 5, 0.0).unwrap(), TrendVerdict::Stable);
    assert_eq!(monitor_trend(&[0.0, 0.5, 1.0], 3, 0.5).unwrap(), TrendVerdict::Stable);
    assert!(monitor_trend(&[1.0, 2.0], 3, 0.1).is_err());
    let band = default_dead_band(phase_matrix(), &FeatureKey::new(Channel::AF3, SignalVariant::O, PHASE)).unwrap();
    assert!(band > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cache_coherence(picks in proptest::collection::vec(0usize..126, 1..12), method in 0usize..3) {
        let entropy = [PHASE, EntropyConfig::PermEn { m: 3 }, EntropyConfig::SampEn { m: 2, r: 0.2 }][method];
        let grid = FeatureKey::full_grid(entropy);
        let mut keys = Vec::new();
        for p in picks {
            if !keys.contains(&grid[p]) {
                keys.push(grid[p]);
            }
        }
        let segs = &segments()[..12];
        let cached = build_feature_matrix_with(segs, &keys, BuildOptions { cache_variants: true }).unwrap();
        let direct = build_feature_matrix_with(segs, &keys, BuildOptions { cache_variants: false }).unwrap();
        prop_assert_eq!(cached, direct);
    }

    #[test]
    fn selection_is_a_column_projection(cols in proptest::collection::vec(0usize..126, 1..20)) {
        let fm = phase_matrix();
        let sub = fm.select(&cols);
        for (j, &c) in cols.iter().enumerate() {
            prop_assert_eq!(sub.keys[j], fm.keys[c]);
            prop_assert_eq!(sub.column(j), fm.column(c));
        }
    }

    #[test]
    fn greedy_bookkeeping_on_blobs(seed in 0u64..200) {
        let fm = fixtures::blob_matrix(seed, 6, 8, 2, 1.5);
        let protocol = ProtocolConfig { k: 3, n_stage1: 1, n_stage2: 2, ..ProtocolConfig::default() };
        let params = SvcParams::new(1.0, 0.2);
        let trace = greedy_forward_select(&fm, &params, &protocol, 5, DEFAULT_PLATEAU_EPS).unwrap();
        prop_assert_eq!(trace.keys.len(), trace.a_rkf.len());
        let mut cols = trace.columns.clone();
        cols.sort();
        cols.dedup();
        prop_assert_eq!(cols.len(), trace.columns.len());
        let last = trace.columns.len();
        let fresh = stage2_accuracy(&fm.select(&trace.columns), &params, &protocol.stage2()).unwrap();
        prop_assert_eq!(fresh.a_rkf, trace.a_rkf[last - 1]);
    }
}
