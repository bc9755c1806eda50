use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::Result;
use crate::features::rng::{stream, StreamTag};
use crate::features::{Corpus, FeaturePipeline, MelSpectrogram};

/// Which input the student is shown for a stored (sample, seed) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudentView {
    /// The exact augmented view the teacher saw, replayed from the stored seed.
    Replay,
    /// The un-augmented clip.
    Clean,
    /// An augmented view drawn from a seed unrelated to the teacher's.
    Independent,
}

impl StudentView {
    /// The augmentation seed used for the student, or `None` for the clean view.
    pub fn student_seed(self, stored_seed: u32) -> Option<u32> {
        match self {
            StudentView::Replay => Some(stored_seed),
            StudentView::Clean => None,
            StudentView::Independent => Some(stream(stored_seed, StreamTag::Independent).next_u64() as u32),
        }
    }
}

/// Computes a view: `None` selects the clean spectrogram.
pub fn compute_view(
    pipeline: &FeaturePipeline,
    corpus: &dyn Corpus,
    sample: usize,
    seed: Option<u32>,
) -> Result<MelSpectrogram> {
    let clip = corpus.clip(sample)?;
    match seed {
        Some(seed) => pipeline.augment(&clip, seed, corpus.len()).map(|(s, _)| s),
        None => pipeline.log_mel(&clip),
    }
}

/// Sample index and augmentation seed; `None` is the clean view.
type ViewKey = (usize, Option<u32>);

/// Memo of time-pooled features keyed by `(sample, seed)`.
///
/// A view is a pure function of the clip, the seed and the pipeline config, so
/// a cache must only ever be used with one corpus and one pipeline.
#[derive(Debug, Default)]
pub struct ViewCache {
    pooled: Mutex<HashMap<ViewKey, Arc<Vec<f64>>>>,
}

impl ViewCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pooled.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, sample: usize, seed: Option<u32>, pooled: Vec<f64>) {
        self.pooled.lock().unwrap().insert((sample, seed), Arc::new(pooled));
    }

    fn get(&self, sample: usize, seed: Option<u32>) -> Option<Arc<Vec<f64>>> {
        self.pooled.lock().unwrap().get(&(sample, seed)).cloned()
    }

    /// Pooled features for every request, computing missing ones in parallel.
    /// Output order follows `requests`.
    pub fn pooled_many(
        &self,
        pipeline: &FeaturePipeline,
        corpus: &dyn Corpus,
        requests: &[(usize, Option<u32>)],
    ) -> Result<Vec<Arc<Vec<f64>>>> {
        let missing: Vec<(usize, Option<u32>)> = requests
            .iter()
            .copied()
            .filter(|&(s, seed)| self.get(s, seed).is_none())
            .collect();
        let computed: Vec<(ViewKey, Vec<f64>)> = missing
            .par_iter()
            .map(|&(s, seed)| Ok(((s, seed), compute_view(pipeline, corpus, s, seed)?.max_over_time())))
            .collect::<Result<_>>()?;
        {
            let mut map = self.pooled.lock().unwrap();
            for (key, pooled) in computed {
                map.entry(key).or_insert_with(|| Arc::new(pooled));
            }
        }
        Ok(requests
            .iter()
            .map(|&(s, seed)| self.get(s, seed).expect("view computed above"))
            .collect())
    }
}
