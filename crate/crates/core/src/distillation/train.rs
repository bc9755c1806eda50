//! Label-free student training from a finalized logit store.

use std::path::Path;

use crate::distillation::extract::StoreMeta;
use crate::distillation::loss::{sparse_bce_grad_target, sparse_bce_target, SparseTarget};
use crate::distillation::schedule::WarmupCosine;
use crate::distillation::student::{Adam, InputNorm, StudentModel};
use crate::distillation::views::{compute_view, StudentView, ViewCache};
use crate::error::{Error, Result};
use crate::features::augment::{mixup_blend, mixup_draw};
use crate::features::rng::{mix64, SplitMix64};
use crate::features::{Corpus, FeaturePipeline, MixupMode};
use crate::logit_store::{LogitRecord, StoreReader};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub final_lr_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Seeds the per-epoch sample order.
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            peak_lr: 1e-3,
            warmup_steps: 0,
            final_lr_fraction: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "final_lr_fraction {} outside (0, 1]",
                self.final_lr_fraction
            )));
        }
        if !(self.peak_lr >= 0.0 && self.peak_lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad peak_lr {}", self.peak_lr)));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, num_samples: usize) -> u64 {
        num_samples.div_ceil(self.batch_size) as u64
    }

    pub fn schedule(&self, num_samples: usize) -> WarmupCosine {
        WarmupCosine {
            peak_lr: self.peak_lr,
            warmup_steps: self.warmup_steps,
            total_steps: self.epochs as u64 * self.steps_per_epoch(num_samples),
            final_fraction: self.final_lr_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// One point per optimizer step; `loss` is the batch mean.
    pub history: Vec<LossPoint>,
    /// Mean loss of every training epoch.
    pub epoch_losses: Vec<f64>,
    /// Stored epoch replayed by each training epoch.
    pub stored_epochs_used: Vec<u16>,
}

/// Everything the trainer reads. There is no label field: supervision comes
/// from the store alone.
pub struct TrainingData<'a> {
    pub store: &'a StoreReader,
    pub corpus: &'a dyn Corpus,
    pub pipeline: &'a FeaturePipeline,
    pub view: StudentView,
    pub cache: Option<&'a ViewCache>,
}

/// One student input and its (possibly mixup-blended) sparse target.
#[derive(Debug, Clone)]
pub struct TrainingView {
    pub pooled: Vec<f64>,
    pub target: SparseTarget,
}

/// Checks `<store>.meta` against the pipeline config.
pub fn check_store_config(store: &Path, pipeline: &FeaturePipeline) -> Result<StoreMeta> {
    let meta = StoreMeta::load(store)?;
    meta.check_config(pipeline.config())?;
    Ok(meta)
}

struct EpochFeatures {
    records: Vec<LogitRecord>,
    pooled: Vec<std::sync::Arc<Vec<f64>>>,
}

fn load_epoch(data: &TrainingData<'_>, local: &ViewCache, stored_epoch: u16) -> Result<EpochFeatures> {
    let records = data.store.read_epoch(stored_epoch)?;
    let requests: Vec<(usize, Option<u32>)> = records
        .iter()
        .enumerate()
        .map(|(s, r)| (s, data.view.student_seed(r.seed)))
        .collect();
    let cache = data.cache.unwrap_or(local);
    let pooled = cache.pooled_many(data.pipeline, data.corpus, &requests)?;
    Ok(EpochFeatures { records, pooled })
}

fn assemble(data: &TrainingData<'_>, features: &EpochFeatures, sample: usize, mixup: MixupMode) -> Result<TrainingView> {
    let record = &features.records[sample];
    let target = SparseTarget::from_record(record);
    match mixup_draw(record.seed, mixup, features.records.len()) {
        Some(draw) => {
            let partner = &features.records[draw.partner];
            let view = |s: usize, r: &LogitRecord| compute_view(data.pipeline, data.corpus, s, data.view.student_seed(r.seed));
            let mixed = mixup_blend(&view(sample, record)?, &view(draw.partner, partner)?, draw.lambda)?;
            Ok(TrainingView {
                pooled: mixed.max_over_time(),
                target: target.blend(&SparseTarget::from_record(partner), draw.lambda),
            })
        }
        None => Ok(TrainingView {
            pooled: features.pooled[sample].to_vec(),
            target,
        }),
    }
}

/// Trains `student` for `config.epochs` epochs.
///
/// Training epoch `e` replays stored epoch `e mod E`. Samples are visited in a
/// seed-derived uniform random order without any label-aware balancing; each
/// batch takes one Adam step on the class-averaged sparse BCE. Mixup, when the
/// feature config enables it, blends the spectrograms and the sparse targets
/// of a sample and its seed-drawn partner with the same lambda. The partner is
/// viewed under its own stored seed for the same stored epoch.
///
/// Before the first step, the student's input normalization is fitted to the
/// views of stored epoch 0 and then frozen.
pub fn train(data: &TrainingData<'_>, student: &mut StudentModel, config: &TrainingConfig) -> Result<TrainReport> {
    config.validate()?;
    check_store_config(data.store.path(), data.pipeline)?;
    let header = *data.store.header();
    let n = header.num_samples as usize;
    if data.corpus.len() != n {
        return Err(Error::Corpus(format!("corpus has {} samples, store has {n}", data.corpus.len())));
    }
    if student.num_classes() != header.num_classes as usize || student.dim() != data.pipeline.config().n_mels {
        return Err(Error::ShapeMismatch(format!(
            "student is {}x{}, store has {} classes over {} bands",
            student.num_classes(),
            student.dim(),
            header.num_classes,
            data.pipeline.config().n_mels
        )));
    }
    let mut report = TrainReport::default();
    if config.epochs == 0 {
        return Ok(report);
    }

    let local = ViewCache::new();
    let stored = header.num_epochs as usize;
    let mut epochs: Vec<Option<EpochFeatures>> = (0..stored).map(|_| None).collect();
    epochs[0] = Some(load_epoch(data, &local, 0)?);
    let first = epochs[0].as_ref().unwrap();
    student.norm = InputNorm::fit(student.dim(), first.pooled.iter().map(|p| p.as_slice()));

    let mixup = data.pipeline.config().mixup;
    let c = student.num_classes();
    let d = student.dim();
    let schedule = config.schedule(n);
    let mut adam = Adam::new(student.num_params(), config.beta1, config.beta2, config.eps);
    let mut grad = vec![0.0; student.num_params()];
    let mut step = 0u64;

    for epoch in 0..config.epochs {
        let stored_epoch = epoch % stored;
        if epochs[stored_epoch].is_none() {
            epochs[stored_epoch] = Some(load_epoch(data, &local, stored_epoch as u16)?);
        }
        let features = epochs[stored_epoch].as_ref().unwrap();
        report.stored_epochs_used.push(stored_epoch as u16);

        let mut order: Vec<usize> = (0..n).collect();
        SplitMix64::new(mix64(config.seed ^ (epoch as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))).shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &sample in batch {
                let view = assemble(data, features, sample, mixup)?;
                let x = student.normalize(&view.pooled);
                let probs: Vec<f64> = student
                    .logits_normalized(&x)
                    .into_iter()
                    .map(crate::distillation::teacher::sigmoid)
                    .collect();
                batch_loss += sparse_bce_target(&probs, &view.target, c)?;
                let g = sparse_bce_grad_target(&probs, &view.target, c)?;
                for (class, &gc) in g.iter().enumerate() {
                    for (w, &xv) in grad[class * d..(class + 1) * d].iter_mut().zip(&x) {
                        *w += gc * xv;
                    }
                    grad[c * d + class] += gc;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let lr = schedule.lr(step);
            adam.step(student, &grad, lr);
            report.history.push(LossPoint {
                step,
                lr,
                loss: batch_loss * scale,
            });
            epoch_loss += batch_loss;
            step += 1;
        }
        report.epoch_losses.push(epoch_loss / n as f64);
        log::debug!("epoch {epoch} (stored {stored_epoch}): loss {:.6}", epoch_loss / n as f64);
    }
    Ok(report)
}
