use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::json;

use ced_core::distillation::{
    self, evaluate, EvalLabels, ExtractOptions, StoreMeta, StudentModel, SyntheticTask, TeacherSpec,
    TrainingConfig, TrainingData,
};
use ced_core::features::{Corpus, FeatureConfig, FeaturePipeline, SplitMix64, WavCorpus};
use ced_core::logit_store::{estimate_storage, StorageMode, StoreReader, HEADER_SIZE};

use crate::manifest::RunManifest;
use crate::{EvalArgs, ExtractArgs, FeatureArgs, InspectArgs, SynthArgs, TrainArgs, VerifyArgs};

pub const STORE_FILE: &str = "store.ceds";
pub const MODEL_FILE: &str = "model.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const AP_FILE: &str = "ap.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// A problem with the command line itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_config(args: &FeatureArgs) -> Result<FeatureConfig> {
    let mut config = match &args.config {
        Some(path) => FeatureConfig::load(path)?,
        None => FeatureConfig::default(),
    };
    if let Some(m) = args.mixup {
        config.mixup = m.into();
    }
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn open_corpus(dir: &Path, config: &FeatureConfig) -> Result<WavCorpus> {
    Ok(WavCorpus::open(dir, config.sample_rate)?)
}

pub fn synth(args: SynthArgs) -> Result<u8> {
    let config = load_config(&args.features)?;
    let defaults = SyntheticTask::default();
    let task = SyntheticTask {
        num_classes: args.classes,
        clip_seconds: args.clip_seconds,
        max_event_seconds: defaults.max_event_seconds.min(0.5 * args.clip_seconds),
        min_event_seconds: defaults.min_event_seconds.min(0.25 * args.clip_seconds),
        max_events: defaults.max_events.min(args.classes),
        ..defaults
    };
    if args.samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let (corpus, labels) = task.generate(args.samples, &config, args.seed)?;
    create_dir(&args.out)?;
    let width = args.samples.to_string().len().max(5);
    let mut index = String::new();
    for (i, clip) in corpus.clips().iter().enumerate() {
        let name = format!("clip_{i:0width$}.wav");
        clip.write_wav(args.out.join(&name))?;
        index.push_str(&name);
        index.push('\n');
    }
    write_file(&args.out.join(ced_core::features::corpus::INDEX_FILE), index)?;
    labels.save(args.out.join(LABELS_FILE))?;

    let mut manifest = RunManifest::new("synth");
    manifest.config_hash = Some(config.hash());
    manifest.corpus = Some(args.out.clone());
    manifest.seed = Some(args.seed);
    manifest.details = json!({ "task": task, "samples": args.samples });
    manifest.write(&args.out)?;
    println!("wrote {} clips and {} to {}", args.samples, LABELS_FILE, args.out.display());
    Ok(0)
}

pub fn extract(args: ExtractArgs) -> Result<u8> {
    let config = load_config(&args.features)?;
    if args.stored_epochs == 0 {
        return Err(usage("--stored-epochs must be at least 1"));
    }
    if args.top_k as usize > args.classes {
        return Err(ced_core::Error::TopKTooLarge {
            k: args.top_k as usize,
            classes: args.classes,
        }
        .into());
    }
    let corpus = open_corpus(&args.corpus, &config)?;
    let pipeline = FeaturePipeline::new(config.clone())?;
    create_dir(&args.out)?;
    let store = args.store.clone().unwrap_or_else(|| args.out.join(STORE_FILE));
    let teacher_seed = args.teacher_seed.unwrap_or(args.seed);
    let options = ExtractOptions {
        top_k: args.top_k,
        stored_epochs: args.stored_epochs,
        seed: args.seed,
        teacher: TeacherSpec::new(teacher_seed, args.classes),
        teacher_augment: !args.clean_teacher,
    };
    let start = Instant::now();
    let summary = distillation::extract(&corpus, &pipeline, &store, &options, None, None)?;
    log::info!("extraction took {:.2?}", start.elapsed());

    let mut manifest = RunManifest::new("extract");
    manifest.config_hash = Some(config.hash());
    manifest.store = Some(store.clone());
    manifest.corpus = Some(args.corpus.clone());
    manifest.seed = Some(args.seed);
    manifest.details = json!({
        "top_k": args.top_k,
        "stored_epochs": args.stored_epochs,
        "classes": args.classes,
        "teacher_seed": teacher_seed,
        "teacher_augment": options.teacher_augment,
        "records": summary.records,
        "store_bytes": summary.store_bytes,
    });
    manifest.write(&args.out)?;
    println!(
        "wrote {} records ({} bytes) to {}",
        summary.records,
        summary.store_bytes,
        store.display()
    );
    Ok(0)
}

pub fn train(args: TrainArgs) -> Result<u8> {
    let config = load_config(&args.features)?;
    let pipeline = FeaturePipeline::new(config.clone())?;
    // refuse before touching the corpus
    distillation::train::check_store_config(&args.store, &pipeline)?;
    let store = StoreReader::open(&args.store)?;
    let corpus = open_corpus(&args.corpus, &config)?;
    let header = *store.header();
    let training = TrainingConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        peak_lr: args.lr,
        warmup_steps: args.warmup_steps,
        seed: args.seed,
        ..TrainingConfig::default()
    };
    training.validate()?;
    let mut student = StudentModel::new(header.num_classes as usize, config.n_mels, args.seed);
    let data = TrainingData {
        store: &store,
        corpus: &corpus,
        pipeline: &pipeline,
        view: args.view.into(),
        cache: None,
    };
    let start = Instant::now();
    let report = distillation::train(&data, &mut student, &training)?;
    log::info!("training took {:.2?}", start.elapsed());

    create_dir(&args.out)?;
    student.save(args.out.join(MODEL_FILE))?;
    let mut csv = String::from("step,lr,loss\n");
    for p in &report.history {
        csv.push_str(&format!("{},{},{}\n", p.step, p.lr, p.loss));
    }
    write_file(&args.out.join(LOSS_FILE), csv)?;
    let summary = json!({
        "epochs": args.epochs,
        "steps": report.history.len(),
        "final_epoch_loss": report.epoch_losses.last(),
        "epoch_losses": report.epoch_losses,
        "stored_epochs_used": report.stored_epochs_used,
        "view": format!("{:?}", args.view).to_lowercase(),
    });
    write_file(&args.out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;

    let mut manifest = RunManifest::new("train");
    manifest.config_hash = Some(config.hash());
    manifest.store = Some(args.store.clone());
    manifest.corpus = Some(args.corpus.clone());
    manifest.seed = Some(args.seed);
    manifest.details = json!({
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "peak_lr": args.lr,
        "warmup_steps": args.warmup_steps,
        "final_lr_fraction": training.final_lr_fraction,
    });
    manifest.write(&args.out)?;
    match report.epoch_losses.last() {
        Some(loss) => println!("trained {} epochs, final loss {loss:.6}", args.epochs),
        None => println!("0 epochs: model left at initialization"),
    }
    Ok(0)
}

pub fn eval(args: EvalArgs) -> Result<u8> {
    let config = load_config(&args.features)?;
    let pipeline = FeaturePipeline::new(config.clone())?;
    let student = StudentModel::load(&args.model)?;
    let corpus = open_corpus(&args.corpus, &config)?;
    let labels_path = args.labels.clone().unwrap_or_else(|| args.corpus.join(LABELS_FILE));
    let labels = EvalLabels::load(&labels_path, corpus.len(), student.num_classes())?;
    let result = evaluate(&student, &corpus, &pipeline, &labels, None)?;

    create_dir(&args.out)?;
    let mut csv = String::from("class_id,ap\n");
    for (c, ap) in result.per_class_ap.iter().enumerate() {
        match ap {
            Some(ap) => csv.push_str(&format!("{c},{ap}\n")),
            None => csv.push_str(&format!("{c},\n")),
        }
    }
    write_file(&args.out.join(AP_FILE), csv)?;
    let summary = json!({ "map": result.map, "evaluated_classes": result.evaluated_classes() });
    write_file(&args.out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;

    let mut manifest = RunManifest::new("eval");
    manifest.config_hash = Some(config.hash());
    manifest.corpus = Some(args.corpus.clone());
    manifest.details = json!({ "model": args.model, "labels": labels_path, "map": result.map });
    manifest.write(&args.out)?;
    println!("mAP {:.4} over {} classes", result.map, result.evaluated_classes());
    Ok(0)
}

pub fn inspect(args: InspectArgs) -> Result<u8> {
    let store = StoreReader::open(&args.store)?;
    let h = *store.header();
    let mut written = 0u64;
    for e in 0..h.num_epochs {
        for s in 0..h.num_samples {
            written += u64::from(store.is_written(s, e)?.unwrap_or(true));
        }
    }
    let per_epoch = h.num_samples * h.record_size();
    println!("store            {}", args.store.display());
    println!("format version   {}", h.format_version);
    println!("samples (N)      {}", h.num_samples);
    println!("classes (C)      {}", h.num_classes);
    println!("top-k (K)        {}", h.top_k);
    println!("stored epochs    {}", h.num_epochs);
    println!("written records  {written} / {}", h.num_slots());
    println!("bytes/record     {}", h.record_size());
    println!("bytes/epoch      {per_epoch}");
    println!("total bytes      {}", HEADER_SIZE + h.num_slots() * h.record_size());
    if let Ok(meta) = StoreMeta::load(&args.store) {
        println!("config hash      {}", meta.config_hash);
    }
    println!();
    println!("per-epoch storage for N={}, C={}, K={}", h.num_samples, h.num_classes, h.top_k);
    println!("{:<10} {:>16} {:>10} {:>10}", "mode", "bytes", "MB", "MiB");
    for mode in [StorageMode::NaiveF32, StorageMode::DenseF16, StorageMode::TopK] {
        let bytes = estimate_storage(h.num_samples, h.num_classes as u64, h.top_k as u64, mode);
        println!(
            "{:<10} {:>16} {:>10.2} {:>10.2}",
            mode.to_string(),
            bytes,
            bytes as f64 / 1e6,
            bytes as f64 / (1u64 << 20) as f64
        );
    }
    Ok(0)
}

fn choose_samples(n: u64, count: Option<usize>, seed: u64) -> Vec<u64> {
    let mut ids: Vec<u64> = (0..n).collect();
    if let Some(count) = count {
        SplitMix64::new(seed).shuffle(&mut ids);
        ids.truncate(count.min(n as usize));
        ids.sort_unstable();
    }
    ids
}

pub fn verify(args: VerifyArgs) -> Result<u8> {
    let meta = StoreMeta::load(&args.store)?;
    let corpus = open_corpus(&args.corpus, &meta.config)?;
    let samples = choose_samples(meta.num_samples, args.samples, args.seed);
    let report = distillation::verify(&args.store, &corpus, &samples)?;
    let status = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "{} record equality: {}/{} slots",
        status(report.record_checks_passed == report.slots_checked),
        report.record_checks_passed,
        report.slots_checked
    );
    println!(
        "{} replay bit-equality: {}/{} slots",
        status(report.replay_checks_passed == report.slots_checked),
        report.replay_checks_passed,
        report.slots_checked
    );
    for m in &report.mismatches {
        println!("offender sample {} epoch {} ({:?})", m.sample, m.epoch, m.kind);
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        let mut manifest = RunManifest::new("verify");
        manifest.config_hash = Some(meta.config_hash.clone());
        manifest.store = Some(args.store.clone());
        manifest.corpus = Some(args.corpus.clone());
        manifest.seed = Some(args.seed);
        manifest.details = json!({
            "samples": samples,
            "passed": report.passed(),
            "offenders": report.offenders(),
        });
        manifest.write(out)?;
    }
    Ok(if report.passed() { 0 } else { crate::EXIT_RUNTIME })
}
