mod common;

use ced_core::distillation::{extract, slot_seed, verify, StoreMeta};
use ced_core::features::{replay_augmented, Corpus, MelSpectrogram};
use ced_core::logit_store::StoreReader;

#[test]
fn extraction_views_replay_bitwise() {
    let (corpus, _) = common::corpus(50, 1);
    let pipeline = common::pipeline();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    let mut seen: Vec<(u64, u16, MelSpectrogram)> = Vec::new();
    let mut record = |s: u64, e: u16, v: &MelSpectrogram| seen.push((s, e, v.clone()));
    extract(&corpus, &pipeline, &path, &common::options(20, 3, 9), None, Some(&mut record)).unwrap();
    assert_eq!(seen.len(), 150);

    let reader = StoreReader::open(&path).unwrap();
    for (s, e, view) in &seen {
        let stored = reader.read_record(*s, *e).unwrap();
        let replayed = replay_augmented(*s as usize, stored.seed, &corpus, &pipeline).unwrap();
        assert!(replayed.bitwise_eq(view), "sample {s} epoch {e}");
    }
    let all: Vec<u64> = (0..50).collect();
    let report = verify(&path, &corpus, &all).unwrap();
    assert!(report.passed());
    assert_eq!(report.slots_checked, 150);
    assert_eq!(report.replay_checks_passed, 150);
}

#[test]
fn neighbouring_seed_gives_a_different_view() {
    let (corpus, _) = common::corpus(100, 2);
    let pipeline = common::pipeline();
    let differing = (0..100)
        .filter(|&s| {
            let phi = slot_seed(5, 0, s as u64);
            let a = replay_augmented(s, phi, &corpus, &pipeline).unwrap();
            let b = replay_augmented(s, phi.wrapping_add(1), &corpus, &pipeline).unwrap();
            !a.bitwise_eq(&b)
        })
        .count();
    assert!(differing >= 99, "{differing}");
}

#[test]
fn verify_flags_exactly_the_flipped_record() {
    let (corpus, _) = common::corpus(8, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    common::extract_store(&corpus, &path, &common::options(5, 2, 4));
    let header = *StoreReader::open(&path).unwrap().header();
    let mut bytes = std::fs::read(&path).unwrap();
    let offset = header.record_offset(6, 1).unwrap() as usize;
    bytes[offset + 1] ^= 0x01;
    std::fs::write(&path, bytes).unwrap();

    let report = verify(&path, &corpus, &(0..8).collect::<Vec<_>>()).unwrap();
    assert_eq!(report.offenders(), vec![(6, 1)]);
}

#[test]
fn replaced_clip_is_a_replay_mismatch() {
    let (corpus, _) = common::corpus(6, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    common::extract_store(&corpus, &path, &common::options(5, 2, 4));
    let mut clips = corpus.clips().to_vec();
    clips[3] = common::corpus(6, 99).0.clip(0).unwrap();
    let swapped = ced_core::features::MemoryCorpus::new(clips);
    let report = verify(&path, &swapped, &(0..6).collect::<Vec<_>>()).unwrap();
    assert!(!report.passed());
    assert_eq!(report.offenders(), vec![(3, 0), (3, 1)]);
    assert!(report
        .mismatches
        .iter()
        .any(|m| m.kind == ced_core::distillation::extract::MismatchKind::Replay));
}

#[test]
fn meta_records_the_config_hash() {
    let (corpus, _) = common::corpus(4, 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    common::extract_store(&corpus, &path, &common::options(3, 1, 4));
    let meta = StoreMeta::load(&path).unwrap();
    assert_eq!(meta.config_hash, common::pipeline().config().hash());
    let mut other = common::pipeline().config().clone();
    other.max_time_mask = 100;
    assert!(matches!(
        meta.check_config(&other),
        Err(ced_core::Error::ConfigMismatch { .. })
    ));
}
