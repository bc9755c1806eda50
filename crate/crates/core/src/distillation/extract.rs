//! Teacher logit extraction into a store, and re-extraction checks.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distillation::teacher::{TeacherEnsemble, TeacherSpec};
use crate::distillation::views::ViewCache;
use crate::error::{Error, Result};
use crate::features::rng::mix64;
use crate::features::{Corpus, FeatureConfig, FeaturePipeline, MelSpectrogram};
use crate::logit_store::{compress_topk, side_path, LogitRecord, StoreHeader, StoreReader, StoreWriter};

/// Receives each teacher view as `(sample, stored epoch, view)`.
pub type ViewCallback<'a> = &'a mut dyn FnMut(u64, u16, &MelSpectrogram);

/// Samples processed per parallel batch during extraction.
const EXTRACT_CHUNK: usize = 64;

/// Side file describing how a store was produced, `<store>.meta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub format_version: u16,
    pub config_hash: String,
    pub config: FeatureConfig,
    pub teacher: TeacherSpec,
    /// Master seed from which every per-slot augmentation seed is derived.
    pub seed: u64,
    pub teacher_augment: bool,
    pub num_samples: u64,
}

impl StoreMeta {
    pub fn path_for(store: &Path) -> PathBuf {
        side_path(store, "meta")
    }

    pub fn load(store: &Path) -> Result<Self> {
        let path = Self::path_for(store);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: Self = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptStore(format!("{}: {e}", path.display())))?;
        if meta.config.hash() != meta.config_hash {
            return Err(Error::CorruptStore(format!(
                "{}: recorded config does not match its hash",
                path.display()
            )));
        }
        Ok(meta)
    }

    pub fn save(&self, store: &Path) -> Result<()> {
        let path = Self::path_for(store);
        let text = serde_json::to_string_pretty(self).expect("meta serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Refuses configs that differ from the one used at extraction.
    pub fn check_config(&self, config: &FeatureConfig) -> Result<()> {
        let actual = config.hash();
        if actual != self.config_hash {
            return Err(Error::ConfigMismatch {
                expected: self.config_hash.clone(),
                actual,
            });
        }
        Ok(())
    }
}

/// Per-slot digests of the teacher's input spectrogram, `<store>.views`:
/// E x N little-endian u64 in store slot order.
pub fn view_digest_path(store: &Path) -> PathBuf {
    side_path(store, "views")
}

pub fn read_view_digests(store: &Path) -> Result<Vec<u64>> {
    let path = view_digest_path(store);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::CorruptStore(format!("{} has a partial entry", path.display())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Augmentation seed of a (sample, epoch) slot.
pub fn slot_seed(master: u64, epoch: u16, sample: u64) -> u32 {
    let key = mix64(master) ^ ((epoch as u64) << 48) ^ sample;
    (mix64(key) >> 32) as u32
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub top_k: u16,
    pub stored_epochs: u16,
    pub seed: u64,
    pub teacher: TeacherSpec,
    /// When false the teacher sees the clean clip; seeds are still drawn and stored.
    pub teacher_augment: bool,
}

/// The teacher's input for one slot.
fn teacher_view(
    pipeline: &FeaturePipeline,
    corpus: &dyn Corpus,
    sample: usize,
    seed: u32,
    augment: bool,
) -> Result<MelSpectrogram> {
    let clip = corpus.clip(sample)?;
    if augment {
        pipeline.augment(&clip, seed, corpus.len()).map(|(s, _)| s)
    } else {
        pipeline.log_mel(&clip)
    }
}

fn teacher_record(teacher: &TeacherEnsemble, view: &MelSpectrogram, top_k: u16, seed: u32) -> Result<LogitRecord> {
    let probs = teacher.predict(view)?;
    Ok(compress_topk(&probs, top_k as usize)?.with_seed(seed))
}

#[derive(Debug, Clone)]
pub struct ExtractSummary {
    pub header: StoreHeader,
    pub records: u64,
    pub store_bytes: u64,
}

/// Runs the teacher over every (sample, stored epoch) slot and writes the store,
/// its bitmap, metadata and view digests.
///
/// `on_view` receives each teacher input in slot order. `cache`, when given,
/// is filled with the pooled teacher views of augmented slots.
pub fn extract(
    corpus: &dyn Corpus,
    pipeline: &FeaturePipeline,
    store_path: &Path,
    options: &ExtractOptions,
    cache: Option<&ViewCache>,
    mut on_view: Option<ViewCallback<'_>>,
) -> Result<ExtractSummary> {
    let n = corpus.len();
    let teacher = TeacherEnsemble::new(options.teacher.clone(), pipeline.config())?;
    let header = StoreHeader::new(
        n as u64,
        teacher.num_classes() as u32,
        options.top_k,
        options.stored_epochs,
    )?;
    let mut writer = StoreWriter::create(store_path, header)?;
    let mut digests = Vec::with_capacity(header.num_slots() as usize * 8);

    for epoch in 0..options.stored_epochs {
        for start in (0..n).step_by(EXTRACT_CHUNK) {
            let ids: Vec<usize> = (start..(start + EXTRACT_CHUNK).min(n)).collect();
            let results: Vec<(MelSpectrogram, LogitRecord)> = ids
                .par_iter()
                .map(|&s| {
                    let seed = slot_seed(options.seed, epoch, s as u64);
                    let view = teacher_view(pipeline, corpus, s, seed, options.teacher_augment)?;
                    let record = teacher_record(&teacher, &view, options.top_k, seed)?;
                    Ok((view, record))
                })
                .collect::<Result<_>>()?;
            for (&s, (view, record)) in ids.iter().zip(results) {
                writer.append_record(s as u64, epoch, &record)?;
                digests.extend_from_slice(&view.digest().to_le_bytes());
                if let (Some(cache), true) = (cache, options.teacher_augment) {
                    cache.insert(s, Some(record.seed), view.max_over_time());
                }
                if let Some(cb) = on_view.as_mut() {
                    cb(s as u64, epoch, &view);
                }
            }
        }
        log::debug!("extracted stored epoch {epoch}");
    }
    writer.finish()?;

    let digest_path = view_digest_path(store_path);
    fs::write(&digest_path, &digests).map_err(|e| Error::io(&digest_path, e))?;
    StoreMeta {
        format_version: header.format_version,
        config_hash: pipeline.config().hash(),
        config: pipeline.config().clone(),
        teacher: options.teacher.clone(),
        seed: options.seed,
        teacher_augment: options.teacher_augment,
        num_samples: n as u64,
    }
    .save(store_path)?;

    Ok(ExtractSummary {
        header,
        records: header.num_slots(),
        store_bytes: header.file_size().unwrap(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MismatchKind {
    /// Re-extracted record bytes differ from the stored bytes.
    Record,
    /// Replaying the stored seed does not reproduce the teacher's input.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub sample: u64,
    pub epoch: u16,
    pub kind: MismatchKind,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub slots_checked: usize,
    pub record_checks_passed: usize,
    pub replay_checks_passed: usize,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Distinct offending slots, in check order.
    pub fn offenders(&self) -> Vec<(u64, u16)> {
        let mut out: Vec<(u64, u16)> = Vec::new();
        for m in &self.mismatches {
            if !out.contains(&(m.sample, m.epoch)) {
                out.push((m.sample, m.epoch));
            }
        }
        out
    }
}

/// Re-extracts every stored epoch of `samples` and compares against the store:
/// record bytes must match exactly, and replaying each stored seed must
/// reproduce the recorded teacher-input digest.
pub fn verify(store_path: &Path, corpus: &dyn Corpus, samples: &[u64]) -> Result<VerifyReport> {
    let meta = StoreMeta::load(store_path)?;
    let reader = StoreReader::open(store_path)?;
    let header = *reader.header();
    if corpus.len() as u64 != header.num_samples {
        return Err(Error::Corpus(format!(
            "corpus has {} samples, store has {}",
            corpus.len(),
            header.num_samples
        )));
    }
    let digests = read_view_digests(store_path)?;
    if digests.len() as u64 != header.num_slots() {
        return Err(Error::CorruptStore(format!(
            "{} view digests for {} slots",
            digests.len(),
            header.num_slots()
        )));
    }
    let pipeline = FeaturePipeline::new(meta.config.clone())?;
    let teacher = TeacherEnsemble::new(meta.teacher.clone(), &meta.config)?;

    let slots: Vec<(u64, u16)> = samples
        .iter()
        .flat_map(|&s| (0..header.num_epochs).map(move |e| (s, e)))
        .collect();
    let outcomes: Vec<Vec<Mismatch>> = slots
        .par_iter()
        .map(|&(sample, epoch)| -> Result<Vec<Mismatch>> {
            let mut found = Vec::new();
            let slot = header.slot(sample, epoch)? as usize;
            let seed = slot_seed(meta.seed, epoch, sample);
            let view = teacher_view(&pipeline, corpus, sample as usize, seed, meta.teacher_augment)?;
            let expected = teacher_record(&teacher, &view, header.top_k, seed)?.encode();
            let raw = reader.read_raw(sample, epoch)?;
            let written = reader.is_written(sample, epoch)?.unwrap_or(true);
            if raw != expected || !written {
                found.push(Mismatch {
                    sample,
                    epoch,
                    kind: MismatchKind::Record,
                });
            }
            // replay with whatever seed the store holds
            let stored_seed = u32::from_le_bytes(raw[raw.len() - 4..].try_into().unwrap());
            let replayed = teacher_view(&pipeline, corpus, sample as usize, stored_seed, meta.teacher_augment)?;
            if replayed.digest() != digests[slot] {
                found.push(Mismatch {
                    sample,
                    epoch,
                    kind: MismatchKind::Replay,
                });
            }
            Ok(found)
        })
        .collect::<Result<_>>()?;

    let mut report = VerifyReport {
        slots_checked: slots.len(),
        ..VerifyReport::default()
    };
    for found in outcomes {
        let record_bad = found.iter().any(|m| m.kind == MismatchKind::Record);
        let replay_bad = found.iter().any(|m| m.kind == MismatchKind::Replay);
        report.record_checks_passed += usize::from(!record_bad);
        report.replay_checks_passed += usize::from(!replay_bad);
        report.mismatches.extend(found);
    }
    Ok(report)
}
