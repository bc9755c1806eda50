//! Desk-scale experiments on the synthetic task: the consistent-teaching
//! ablation and the top-k sweep.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distillation::extract::{extract, ExtractOptions};
use crate::distillation::student::StudentModel;
use crate::distillation::synthetic::{evaluate, EvalLabels, SyntheticTask};
use crate::distillation::teacher::TeacherSpec;
use crate::distillation::train::{train, TrainingConfig, TrainingData};
use crate::distillation::views::{StudentView, ViewCache};
use crate::error::Result;
use crate::features::rng::mix64;
use crate::features::{FeatureConfig, FeaturePipeline, MemoryCorpus};
use crate::logit_store::StoreReader;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: SyntheticTask,
    pub features: FeatureConfig,
    pub train_samples: usize,
    pub eval_samples: usize,
    pub stored_epochs: u16,
    pub top_k: u16,
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_steps: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: SyntheticTask {
                min_amplitude: 0.01,
                max_amplitude: 0.05,
                ..SyntheticTask::default()
            },
            features: FeatureConfig::default(),
            train_samples: 32,
            eval_samples: 256,
            stored_epochs: 10,
            top_k: 20,
            epochs: 30,
            batch_size: 16,
            peak_lr: 5e-2,
            warmup_steps: 10,
        }
    }
}

impl ExperimentConfig {
    /// Same experiment with every augmentation disabled: no shift, zero-width masks, no mixup.
    pub fn without_augmentation(&self) -> Self {
        Self {
            features: self.features.without_augmentation(),
            ..self.clone()
        }
    }

    fn training(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            peak_lr: self.peak_lr,
            warmup_steps: self.warmup_steps,
            seed,
            ..TrainingConfig::default()
        }
    }
}

/// Train and eval data for one seed, plus caches shared across runs.
pub struct Workbench {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub pipeline: FeaturePipeline,
    pub train_corpus: MemoryCorpus,
    pub eval_corpus: MemoryCorpus,
    pub eval_labels: EvalLabels,
    train_cache: ViewCache,
    eval_cache: ViewCache,
}

impl Workbench {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        let pipeline = FeaturePipeline::new(config.features.clone())?;
        let (train_corpus, _) = config.task.generate(config.train_samples, &config.features, mix64(seed))?;
        let (eval_corpus, eval_labels) =
            config.task.generate(config.eval_samples, &config.features, mix64(seed ^ 0xE7A1))?;
        Ok(Self {
            config: config.clone(),
            seed,
            pipeline,
            train_corpus,
            eval_corpus,
            eval_labels,
            train_cache: ViewCache::new(),
            eval_cache: ViewCache::new(),
        })
    }

    /// Extracts a store with the given teacher input mode and top-k.
    pub fn extract_store(&self, path: &Path, teacher_augment: bool, top_k: u16) -> Result<StoreReader> {
        let options = ExtractOptions {
            top_k,
            stored_epochs: self.config.stored_epochs,
            seed: mix64(self.seed ^ 0x5107),
            teacher: TeacherSpec::new(mix64(self.seed ^ 0x7EAC), self.config.task.num_classes),
            teacher_augment,
        };
        extract(&self.train_corpus, &self.pipeline, path, &options, Some(&self.train_cache), None)?;
        StoreReader::open(path)
    }

    /// Trains a fresh student on `store` with the given view and returns its eval mAP.
    pub fn train_and_evaluate(&self, store: &StoreReader, view: StudentView) -> Result<f64> {
        let mut student = StudentModel::new(
            self.config.task.num_classes,
            self.config.features.n_mels,
            mix64(self.seed ^ 0x57D),
        );
        let data = TrainingData {
            store,
            corpus: &self.train_corpus,
            pipeline: &self.pipeline,
            view,
            cache: Some(&self.train_cache),
        };
        train(&data, &mut student, &self.config.training(mix64(self.seed ^ 0x0DE7)))?;
        let result = evaluate(
            &student,
            &self.eval_corpus,
            &self.pipeline,
            &self.eval_labels,
            Some(&self.eval_cache),
        )?;
        Ok(result.map)
    }
}

/// One cell of the ablation: whether the teacher saw augmented views, and
/// what the student sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    /// Clean teacher, clean student.
    Neither,
    /// Clean teacher, independently augmented student.
    StudentOnly,
    /// Augmented teacher, clean student.
    TeacherOnly,
    /// Augmented teacher, student replays the teacher's view.
    Consistent,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Neither, Arm::StudentOnly, Arm::TeacherOnly, Arm::Consistent];

    pub fn teacher_augment(self) -> bool {
        matches!(self, Arm::TeacherOnly | Arm::Consistent)
    }

    pub fn student_view(self) -> StudentView {
        match self {
            Arm::Neither | Arm::TeacherOnly => StudentView::Clean,
            Arm::StudentOnly => StudentView::Independent,
            Arm::Consistent => StudentView::Replay,
        }
    }

    /// Table label as (teacher augmented, student augmented).
    pub fn label(self) -> &'static str {
        match self {
            Arm::Neither => "(x,x)",
            Arm::StudentOnly => "(x,v)",
            Arm::TeacherOnly => "(v,x)",
            Arm::Consistent => "(v,v)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub map: f64,
}

/// Runs the four ablation arms for one seed, writing stores under `work_dir`.
pub fn consistency_experiment(config: &ExperimentConfig, seed: u64, work_dir: &Path) -> Result<Vec<ArmResult>> {
    let bench = Workbench::new(config, seed)?;
    let clean = bench.extract_store(&work_dir.join(format!("clean-{seed}.ceds")), false, config.top_k)?;
    let augmented = bench.extract_store(&work_dir.join(format!("augmented-{seed}.ceds")), true, config.top_k)?;
    Arm::ALL
        .iter()
        .map(|&arm| {
            let store = if arm.teacher_augment() { &augmented } else { &clean };
            let map = bench.train_and_evaluate(store, arm.student_view())?;
            log::info!("seed {seed} {}: mAP {map:.4}", arm.label());
            Ok(ArmResult { arm, map })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub top_k: u16,
    pub map: f64,
    pub store_bytes: u64,
    pub record_bytes: u64,
}

/// Consistent-teaching runs for each top-k, measuring the written store size.
pub fn k_sweep(config: &ExperimentConfig, seed: u64, ks: &[u16], work_dir: &Path) -> Result<Vec<SweepPoint>> {
    let bench = Workbench::new(config, seed)?;
    ks.iter()
        .map(|&k| {
            let path = work_dir.join(format!("k{k}-{seed}.ceds"));
            let store = bench.extract_store(&path, true, k)?;
            let map = bench.train_and_evaluate(&store, StudentView::Replay)?;
            let store_bytes = std::fs::metadata(&path)
                .map_err(|e| crate::error::Error::io(&path, e))?
                .len();
            let header = store.header();
            let record_bytes = (store_bytes - crate::logit_store::HEADER_SIZE) / header.num_slots();
            log::info!("seed {seed} K={k}: mAP {map:.4}, {store_bytes} bytes");
            Ok(SweepPoint {
                top_k: k,
                map,
                store_bytes,
                record_bytes,
            })
        })
        .collect()
}

/// Median of a non-empty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
