//! Synthetic multilabel tagging task with known ground truth.
//!
//! Each class owns a tone at the center frequency of the Mel band it maps to
//! (see [`class_band`]). A clip is background noise plus one to three
//! class events with short fades. Labels live in [`EvalLabels`], never in the
//! corpus.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distillation::metrics::{mean_average_precision, EvalResult};
use crate::distillation::student::StudentModel;
use crate::distillation::teacher::class_band;
use crate::distillation::views::ViewCache;
use crate::error::{Error, Result};
use crate::features::mel::{hz_to_mel, mel_to_hz};
use crate::features::rng::{mix64, SplitMix64};
use crate::features::{AudioClip, Corpus, FeatureConfig, FeaturePipeline, MemoryCorpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub num_classes: usize,
    pub clip_seconds: f64,
    pub min_events: usize,
    pub max_events: usize,
    pub min_amplitude: f64,
    pub max_amplitude: f64,
    pub min_event_seconds: f64,
    pub max_event_seconds: f64,
    /// Standard deviation of the Gaussian background.
    pub noise_level: f64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self {
            num_classes: 24,
            clip_seconds: 3.0,
            min_events: 1,
            max_events: 3,
            min_amplitude: 0.05,
            max_amplitude: 0.2,
            min_event_seconds: 0.3,
            max_event_seconds: 1.2,
            noise_level: 0.01,
        }
    }
}

/// Center frequency, in Hz, of Mel band `band`.
pub fn band_center_hz(config: &FeatureConfig, band: usize) -> f64 {
    let (lo, hi) = (hz_to_mel(config.f_min), hz_to_mel(config.f_max));
    mel_to_hz(lo + (hi - lo) * (band + 1) as f64 / (config.n_mels + 1) as f64)
}

impl SyntheticTask {
    pub fn validate(&self, config: &FeatureConfig) -> Result<()> {
        if self.num_classes == 0 || self.num_classes > config.n_mels {
            return Err(Error::InvalidConfig(format!(
                "{} classes do not fit {} Mel bands",
                self.num_classes, config.n_mels
            )));
        }
        if self.min_events == 0 || self.min_events > self.max_events || self.max_events > self.num_classes {
            return Err(Error::InvalidConfig("bad event count range".into()));
        }
        if !(self.min_event_seconds > 0.0 && self.min_event_seconds <= self.max_event_seconds)
            || self.max_event_seconds > self.clip_seconds
        {
            return Err(Error::InvalidConfig("bad event duration range".into()));
        }
        Ok(())
    }

    /// Generates `n` clips and their labels from `seed`.
    pub fn generate(&self, n: usize, config: &FeatureConfig, seed: u64) -> Result<(MemoryCorpus, EvalLabels)> {
        self.validate(config)?;
        let sr = config.sample_rate as f64;
        let len = (self.clip_seconds * sr).round() as usize;
        let mut clips = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = SplitMix64::new(mix64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            let mut wave: Vec<f64> = (0..len).map(|_| self.noise_level * rng.next_gaussian()).collect();
            let events = self.min_events + rng.up_to((self.max_events - self.min_events) as u64) as usize;
            let mut classes: Vec<usize> = (0..self.num_classes).collect();
            rng.shuffle(&mut classes);
            classes.truncate(events);
            classes.sort_unstable();
            for &class in &classes {
                let freq = band_center_hz(config, class_band(class, self.num_classes, config.n_mels));
                let amp = self.min_amplitude + (self.max_amplitude - self.min_amplitude) * rng.next_f64();
                let dur = self.min_event_seconds + (self.max_event_seconds - self.min_event_seconds) * rng.next_f64();
                let dur_n = (dur * sr) as usize;
                let start = rng.up_to((len - dur_n) as u64) as usize;
                let phase = std::f64::consts::TAU * rng.next_f64();
                let fade = (0.02 * sr) as usize;
                for t in 0..dur_n {
                    let env = (t.min(dur_n - 1 - t) as f64 / fade as f64).min(1.0);
                    wave[start + t] += amp * env * (std::f64::consts::TAU * freq * t as f64 / sr + phase).sin();
                }
            }
            clips.push(AudioClip::new(wave.into_iter().map(|v| v as f32).collect(), config.sample_rate));
            labels.push(classes.into_iter().map(|c| c as u16).collect());
        }
        Ok((MemoryCorpus::new(clips), EvalLabels::new(self.num_classes, labels)?))
    }
}

/// Ground-truth class sets per sample, used only for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalLabels {
    num_classes: usize,
    positives: Vec<Vec<u16>>,
}

impl EvalLabels {
    pub fn new(num_classes: usize, positives: Vec<Vec<u16>>) -> Result<Self> {
        for row in &positives {
            if let Some(&c) = row.iter().find(|&&c| c as usize >= num_classes) {
                return Err(Error::ClassOutOfRange {
                    index: c as usize,
                    classes: num_classes,
                });
            }
        }
        Ok(Self { num_classes, positives })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn positives(&self, sample: usize) -> &[u16] {
        &self.positives[sample]
    }

    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        self.positives
            .iter()
            .map(|row| {
                let mut dense = vec![false; self.num_classes];
                row.iter().for_each(|&c| dense[c as usize] = true);
                dense
            })
            .collect()
    }

    /// CSV with a `sample_id,class_id` header and one row per positive pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,class_id\n");
        for (s, row) in self.positives.iter().enumerate() {
            for c in row {
                writeln!(out, "{s},{c}").unwrap();
            }
        }
        out
    }

    /// Parses [`EvalLabels::to_csv`] output for a corpus of `num_samples` clips.
    pub fn from_csv(text: &str, num_samples: usize, num_classes: usize) -> Result<Self> {
        let mut positives = vec![Vec::new(); num_samples];
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (line_no == 0 && line.starts_with("sample_id")) {
                continue;
            }
            let parse = || -> Option<(usize, u16)> {
                let (s, c) = line.split_once(',')?;
                Some((s.trim().parse().ok()?, c.trim().parse().ok()?))
            };
            let (s, c) = parse().ok_or_else(|| Error::Evaluation(format!("line {}: bad row {line:?}", line_no + 1)))?;
            let row = positives
                .get_mut(s)
                .ok_or_else(|| Error::Evaluation(format!("line {}: sample {s} outside corpus", line_no + 1)))?;
            if !row.contains(&c) {
                row.push(c);
            }
        }
        positives.iter_mut().for_each(|r| r.sort_unstable());
        Self::new(num_classes, positives)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, num_samples: usize, num_classes: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, num_samples, num_classes)
    }
}

/// mAP of `student` on the clean views of `corpus`.
pub fn evaluate(
    student: &StudentModel,
    corpus: &dyn Corpus,
    pipeline: &FeaturePipeline,
    labels: &EvalLabels,
    cache: Option<&ViewCache>,
) -> Result<EvalResult> {
    if labels.len() != corpus.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} label rows for {} clips",
            labels.len(),
            corpus.len()
        )));
    }
    let local = ViewCache::new();
    let requests: Vec<(usize, Option<u32>)> = (0..corpus.len()).map(|s| (s, None)).collect();
    let pooled = cache.unwrap_or(&local).pooled_many(pipeline, corpus, &requests)?;
    let scores = pooled
        .iter()
        .map(|p| student.forward_pooled(p))
        .collect::<Result<Vec<_>>>()?;
    mean_average_precision(&scores, &labels.to_matrix())
}
