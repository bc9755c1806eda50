#![allow(dead_code)]

use std::path::Path;

use ced_core::distillation::{extract, ExtractOptions, EvalLabels, SyntheticTask, TeacherSpec};
use ced_core::features::{FeatureConfig, FeaturePipeline, MemoryCorpus};

pub const CLASSES: usize = 24;

/// One-second clips keep the integration tests fast.
pub fn short_task() -> SyntheticTask {
    SyntheticTask {
        clip_seconds: 1.0,
        max_event_seconds: 0.6,
        min_event_seconds: 0.2,
        ..SyntheticTask::default()
    }
}

pub fn corpus(n: usize, seed: u64) -> (MemoryCorpus, EvalLabels) {
    short_task().generate(n, &FeatureConfig::default(), seed).unwrap()
}

pub fn pipeline() -> FeaturePipeline {
    FeaturePipeline::new(FeatureConfig::default()).unwrap()
}

pub fn options(top_k: u16, stored_epochs: u16, seed: u64) -> ExtractOptions {
    ExtractOptions {
        top_k,
        stored_epochs,
        seed,
        teacher: TeacherSpec::new(seed ^ 1, CLASSES),
        teacher_augment: true,
    }
}

pub fn extract_store(corpus: &MemoryCorpus, path: &Path, opts: &ExtractOptions) {
    extract(corpus, &pipeline(), path, opts, None, None).unwrap();
}
