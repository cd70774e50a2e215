mod common;

use std::collections::BTreeSet;

use isenet::beats::{
    build_splits_from_dir, class_counts, load_dataset, save_dataset, BalanceConfig, LeadMode, Origin, PrepareConfig, PreparedDataset, Split,
    BEAT_LEN, DS1, DS2,
};
use isenet::eval::{capture_excitations, confusion, default_sites, filter_beats, Subset};
use isenet::model::{ModelSpec, Network};
use isenet::train::{stratified_holdout, train_loop, LabeledBeats, TrainConfig};
use isenet::wfdb::{load_record, MITDB_RECORDS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N_SAMPLES: usize = 7200;
const WINDOW: usize = 3600;

fn prepare_cfg() -> PrepareConfig {
    PrepareConfig {
        train_window_samples: WINDOW,
        ..PrepareConfig::default()
    }
}

fn balance_cfg() -> BalanceConfig {
    BalanceConfig {
        targets: [120, 80, 80, 40, 0],
        ..BalanceConfig::default()
    }
}

fn prepared(dir: &std::path::Path) -> PreparedDataset {
    let ids = common::write_mitdb_like(dir, N_SAMPLES, 5);
    let split = build_splits_from_dir(dir, &ids, &prepare_cfg()).unwrap();
    PreparedDataset::from_split(split, &prepare_cfg(), &balance_cfg()).unwrap()
}

#[test]
fn synthetic_records_decode_with_declared_leads() {
    let dir = tempfile::tempdir().unwrap();
    let r = common::synth_record("201", N_SAMPLES, 1);
    common::write_record(dir.path(), &r);
    let rec = load_record(dir.path(), "201").unwrap();
    assert_eq!(rec.header.lead_names(), vec!["MLII", "V1"]);
    let beats: Vec<(usize, u8)> = rec.beat_annotations().map(|a| (a.sample_index, a.mit_code)).collect();
    assert_eq!(beats, r.beats);
}

#[test]
fn split_and_balance_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path());
    let m = &data.manifest;
    assert_eq!(m.records.ds1.len(), DS1.len());
    assert_eq!(m.records.ds2.len(), DS2.len());
    let excluded: BTreeSet<&str> = ["102", "104", "107", "217"].into();
    for b in data.train_natural.iter().chain(&data.test) {
        assert_eq!(b.leads.len(), BEAT_LEN * 2);
        assert!(b.leads.iter().all(|v| v.is_finite()));
        assert!(!excluded.contains(b.record_id.as_str()));
        assert_eq!(b.split == Split::Train, b.r_index < WINDOW);
    }
    let train_keys: BTreeSet<_> = data.train_natural.iter().map(|b| (&b.record_id, b.r_index)).collect();
    assert!(data.test.iter().all(|b| !train_keys.contains(&(&b.record_id, b.r_index))));
    assert_eq!(class_counts(&data.train), balance_cfg().targets);
    assert!(data.train.iter().all(|b| b.split == Split::Train));
    assert!(data.test.iter().all(|b| b.origin == Origin::Natural));

    // balancing with other targets leaves the test split untouched
    let ids: Vec<String> = MITDB_RECORDS.iter().map(|s| s.to_string()).collect();
    let split = build_splits_from_dir(dir.path(), &ids, &prepare_cfg()).unwrap();
    let other = PreparedDataset::from_split(split, &prepare_cfg(), &BalanceConfig { targets: [50, 20, 20, 10, 0], ..balance_cfg() }).unwrap();
    assert_eq!(other.test, data.test);
}

#[test]
fn single_lead_channel_matches_dual_lead_channel() {
    let dir = tempfile::tempdir().unwrap();
    let ids = common::write_mitdb_like(dir.path(), N_SAMPLES, 2);
    let ids = &ids[..3];
    let both = build_splits_from_dir(dir.path(), ids, &prepare_cfg()).unwrap();
    let v1 = build_splits_from_dir(dir.path(), ids, &PrepareConfig { lead_mode: LeadMode::V1, ..prepare_cfg() }).unwrap();
    for (a, b) in both.beats_test.iter().zip(&v1.beats_test) {
        assert_eq!(a.lead(1).collect::<Vec<_>>(), b.leads);
    }
}

#[test]
fn dataset_train_and_evaluate_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(&dir.path().join("mitdb"));
    let ds_dir = dir.path().join("dataset");
    save_dataset(&ds_dir, &data).unwrap();
    let data = load_dataset(&ds_dir).unwrap();

    let all = LabeledBeats::from_beats(&data.train);
    let (tr, va) = stratified_holdout(&all.labels, 0.1, &mut ChaCha8Rng::seed_from_u64(0));
    let cfg = TrainConfig {
        max_epochs: 2,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let spec = ModelSpec {
        depth: 11,
        ..ModelSpec::default()
    };
    let run = |out: &std::path::Path| {
        let mut net = Network::build(&spec).unwrap();
        let o = train_loop(&mut net, &all.select(&tr), &all.select(&va), &cfg, Some(out)).unwrap();
        (net, o)
    };
    let (net, first) = run(&dir.path().join("run1"));
    let (_, second) = run(&dir.path().join("run2"));
    let trace = |o: &isenet::train::TrainOutcome| o.history.iter().map(|h| h.train_loss).collect::<Vec<_>>();
    assert_eq!(trace(&first), trace(&second));
    assert_eq!(first.history.len(), 3);
    assert!(dir.path().join("run1/selected.json").is_file());
    assert_eq!(
        std::fs::read(dir.path().join("run1/train_log.csv")).unwrap(),
        std::fs::read(dir.path().join("run2/train_log.csv")).unwrap()
    );

    let test = filter_beats(&data.test, Subset::Ds2v);
    let cm = confusion(&net, &test, "ds2v", 64).unwrap();
    assert_eq!(cm.total() as usize, test.len());
    assert_eq!(cm.row_sums().iter().sum::<u64>(), cm.total());

    let beats: Vec<_> = data.test.iter().collect();
    let (traces, _) = capture_excitations(&net, &beats, &default_sites(&net), 20, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(!traces.is_empty());
    assert!(traces.iter().flat_map(|t| &t.mean).all(|&p| p > 0.0 && p < 1.0));
}
