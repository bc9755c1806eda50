mod common;

use ced_core::distillation::{train, StudentModel, StudentView, TeacherSpec, TrainingConfig, TrainingData};
use ced_core::features::{FeatureConfig, FeaturePipeline};
use ced_core::logit_store::{LogitRecord, StoreHeader, StoreReader, StoreWriter};

fn config(epochs: usize) -> TrainingConfig {
    TrainingConfig {
        epochs,
        batch_size: 16,
        peak_lr: 0.05,
        warmup_steps: 5,
        seed: 3,
        ..TrainingConfig::default()
    }
}

fn run(store: &StoreReader, corpus: &dyn ced_core::features::Corpus, cfg: &TrainingConfig) -> (StudentModel, ced_core::distillation::TrainReport) {
    let pipeline = common::pipeline();
    let data = TrainingData {
        store,
        corpus,
        pipeline: &pipeline,
        view: StudentView::Replay,
        cache: None,
    };
    let mut student = StudentModel::new(common::CLASSES, 64, 11);
    let report = train(&data, &mut student, cfg).unwrap();
    (student, report)
}

#[test]
fn loss_halves_on_a_200_sample_corpus() {
    let (corpus, _) = common::corpus(200, 21);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    let mut opts = common::options(20, 4, 8);
    opts.teacher = TeacherSpec {
        gain: 4.0,
        ..TeacherSpec::new(8, common::CLASSES)
    };
    common::extract_store(&corpus, &path, &opts);
    let store = StoreReader::open(&path).unwrap();
    let start = std::time::Instant::now();
    let (_, report) = run(&store, &corpus, &config(30));
    assert!(start.elapsed().as_secs() < 60);
    let first = report.history[0].loss;
    let last = *report.epoch_losses.last().unwrap();
    assert!(last <= 0.5 * first, "loss {first} -> {last}");
    assert_eq!(report.epoch_losses.len(), 30);
}

#[test]
fn single_stored_epoch_is_cycled() {
    let (corpus, _) = common::corpus(10, 22);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    common::extract_store(&corpus, &path, &common::options(5, 1, 8));
    let store = StoreReader::open(&path).unwrap();
    let (_, report) = run(&store, &corpus, &config(3));
    assert_eq!(report.stored_epochs_used, vec![0, 0, 0]);

    let path3 = dir.path().join("s3.ceds");
    common::extract_store(&corpus, &path3, &common::options(5, 3, 8));
    let store3 = StoreReader::open(&path3).unwrap();
    let (_, report) = run(&store3, &corpus, &config(7));
    assert_eq!(report.stored_epochs_used, vec![0, 1, 2, 0, 1, 2, 0]);
}

#[test]
fn all_zero_targets_drive_probabilities_down() {
    let (corpus, _) = common::corpus(40, 23);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    common::extract_store(&corpus, &path, &common::options(5, 2, 8));
    // overwrite every record with zero probabilities, keeping the seeds
    let source = StoreReader::open(&path).unwrap();
    let header = *source.header();
    let records: Vec<Vec<LogitRecord>> = (0..2).map(|e| source.read_epoch(e).unwrap()).collect();
    drop(source);
    let mut writer = StoreWriter::create(&path, StoreHeader::new(40, common::CLASSES as u32, 5, 2).unwrap()).unwrap();
    for (e, epoch) in records.iter().enumerate() {
        for (s, r) in epoch.iter().enumerate() {
            let zero = LogitRecord {
                values: vec![0.0; 5],
                indices: (0..5).collect(),
                seed: r.seed,
            };
            writer.append_record(s as u64, e as u16, &zero).unwrap();
        }
    }
    writer.finish().unwrap();
    let store = StoreReader::open(&path).unwrap();
    assert_eq!(*store.header(), header);

    let cfg = TrainingConfig {
        peak_lr: 0.2,
        ..config(30)
    };
    let (student, _) = run(&store, &corpus, &cfg);
    let pipeline = common::pipeline();
    let mut total = 0.0;
    for s in 0..40 {
        let spec = pipeline.log_mel(&ced_core::features::Corpus::clip(&corpus, s).unwrap()).unwrap();
        total += student.forward(&spec).unwrap().iter().sum::<f64>();
    }
    let mean = total / (40 * common::CLASSES) as f64;
    assert!(mean < 0.05, "mean prob {mean}");
}

#[test]
fn training_is_bitwise_reproducible() {
    let (corpus, _) = common::corpus(30, 24);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    common::extract_store(&corpus, &path, &common::options(20, 2, 8));
    let store = StoreReader::open(&path).unwrap();
    let (a, ra) = run(&store, &corpus, &config(5));
    let (b, rb) = run(&store, &corpus, &config(5));
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(ra.history, rb.history);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (c, _) = pool.install(|| run(&store, &corpus, &config(5)));
    assert_eq!(a.to_bytes(), c.to_bytes());
}

#[test]
fn zero_epochs_leave_the_model_untouched() {
    let (corpus, _) = common::corpus(5, 25);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    common::extract_store(&corpus, &path, &common::options(3, 1, 8));
    let store = StoreReader::open(&path).unwrap();
    let (student, report) = run(&store, &corpus, &config(0));
    assert_eq!(student, StudentModel::new(common::CLASSES, 64, 11));
    assert!(report.history.is_empty());
}

#[test]
fn mismatched_config_is_refused() {
    let (corpus, _) = common::corpus(5, 26);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    common::extract_store(&corpus, &path, &common::options(3, 1, 8));
    let store = StoreReader::open(&path).unwrap();
    let other = FeaturePipeline::new(FeatureConfig {
        max_freq_mask: 10,
        ..FeatureConfig::default()
    })
    .unwrap();
    let data = TrainingData {
        store: &store,
        corpus: &corpus,
        pipeline: &other,
        view: StudentView::Replay,
        cache: None,
    };
    let mut student = StudentModel::new(common::CLASSES, 64, 11);
    let err = train(&data, &mut student, &config(2)).unwrap_err();
    assert!(matches!(err, ced_core::Error::ConfigMismatch { .. }), "{err}");
}

#[test]
fn mixup_training_runs_and_is_deterministic() {
    let cfg = FeatureConfig {
        mixup: ced_core::features::MixupMode::Beta,
        ..FeatureConfig::default()
    };
    let pipeline = FeaturePipeline::new(cfg.clone()).unwrap();
    let (corpus, _) = common::short_task().generate(12, &cfg, 27).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ceds");
    ced_core::distillation::extract(&corpus, &pipeline, &path, &common::options(5, 2, 8), None, None).unwrap();
    let store = StoreReader::open(&path).unwrap();
    let go = || {
        let data = TrainingData {
            store: &store,
            corpus: &corpus,
            pipeline: &pipeline,
            view: StudentView::Replay,
            cache: None,
        };
        let mut student = StudentModel::new(common::CLASSES, 64, 11);
        train(&data, &mut student, &config(3)).unwrap();
        student
    };
    let a = go();
    assert_eq!(a.to_bytes(), go().to_bytes());
    assert!(a.weights.iter().all(|w| w.is_finite()));
}
