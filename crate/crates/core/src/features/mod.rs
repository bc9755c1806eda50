//! Deterministic audio-to-feature pipeline.
//!
//! A view of a sample is a pure function of its waveform, a 32-bit seed and
//! the [`FeatureConfig`]: circular wave shift, log-Mel extraction, then one
//! time mask and one frequency mask. Storing only the seed is enough to
//! regenerate, bit for bit, the input the teacher saw.

pub mod audio;
pub mod augment;
pub mod config;
pub mod corpus;
pub mod mel;
pub mod rng;

pub use audio::AudioClip;
pub use augment::{mixup_blend, mixup_draw, spec_augment, wave_shift, AugmentationPlan, MaskSpan, MixupDraw};
pub use config::{FeatureConfig, MixupMode};
pub use corpus::{Corpus, MemoryCorpus, WavCorpus};
pub use mel::{LogMel, MelFilterbank, MelSpectrogram};
pub use rng::{derive_rng, SplitMix64, StreamTag};

use crate::error::Result;

/// Log-Mel extractor plus the seed-driven augmentations of one config.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    config: FeatureConfig,
    log_mel: LogMel,
}

impl FeaturePipeline {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        let log_mel = LogMel::new(&config)?;
        Ok(Self { config, log_mel })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn log_mel(&self, clip: &AudioClip) -> Result<MelSpectrogram> {
        self.log_mel.compute(clip)
    }

    pub fn plan(&self, seed: u32, clip_len: usize, corpus_len: usize) -> Result<AugmentationPlan> {
        AugmentationPlan::derive(seed, &self.config, clip_len, corpus_len)
    }

    /// Wave shift, log-Mel, then masking, as dictated by `plan`.
    pub fn apply(&self, clip: &AudioClip, plan: &AugmentationPlan) -> Result<MelSpectrogram> {
        let shifted;
        let clip = if plan.shift_offset == 0 {
            clip
        } else {
            shifted = wave_shift(clip, plan.shift_offset);
            &shifted
        };
        let spec = self.log_mel.compute(clip)?;
        if plan.time_mask.width == 0 && plan.freq_mask.width == 0 {
            return Ok(spec);
        }
        spec_augment(&spec, plan, self.config.log_floor_value())
    }

    /// The augmented view of `clip` under `seed`, with its resolved plan.
    pub fn augment(&self, clip: &AudioClip, seed: u32, corpus_len: usize) -> Result<(MelSpectrogram, AugmentationPlan)> {
        let plan = self.plan(seed, clip.len(), corpus_len)?;
        let spec = self.apply(clip, &plan)?;
        Ok((spec, plan))
    }
}

/// Regenerates the single-sample view the teacher saw for `sample_id` under `seed`.
///
/// Mixup is not part of the per-sample view: it combines two replayed views
/// (and their stored targets) at training time, see
/// [`crate::distillation::train`].
pub fn replay_augmented(
    sample_id: usize,
    seed: u32,
    corpus: &dyn Corpus,
    pipeline: &FeaturePipeline,
) -> Result<MelSpectrogram> {
    let clip = corpus.clip(sample_id)?;
    pipeline.augment(&clip, seed, corpus.len()).map(|(spec, _)| spec)
}
