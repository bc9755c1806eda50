use crate::error::{Error, Result};
use crate::features::audio::AudioClip;
use crate::features::config::{FeatureConfig, MixupMode};
use crate::features::mel::MelSpectrogram;
use crate::features::rng::{stream, StreamTag};

/// A contiguous span of frames or bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MaskSpan {
    pub start: usize,
    pub width: usize,
}

impl MaskSpan {
    pub fn end(&self) -> usize {
        self.start + self.width
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.start..self.end()).contains(&i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixupDraw {
    pub partner: usize,
    pub lambda: f64,
}

/// Every stochastic choice made for one augmented view, resolved from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub seed: u32,
    pub shift_offset: usize,
    pub time_mask: MaskSpan,
    pub freq_mask: MaskSpan,
    pub mixup: Option<MixupDraw>,
}

impl AugmentationPlan {
    /// Plan with no augmentation at all.
    pub fn identity(seed: u32) -> Self {
        Self {
            seed,
            shift_offset: 0,
            time_mask: MaskSpan::default(),
            freq_mask: MaskSpan::default(),
            mixup: None,
        }
    }

    /// Resolves the plan for a clip of `clip_len` samples in a corpus of
    /// `corpus_len` clips.
    ///
    /// Draw order, each on its own stream of `seed`:
    /// shift: offset in [0, clip_len);
    /// spec: time width in [0, min(max, T)], time start, freq width in
    /// [0, min(max, F)], freq start (starts uniform over valid positions);
    /// mixup: partner in [0, corpus_len), then lambda.
    pub fn derive(seed: u32, config: &FeatureConfig, clip_len: usize, corpus_len: usize) -> Result<Self> {
        let n_frames = config.num_frames(clip_len).ok_or_else(|| {
            Error::InvalidAudio(format!("clip of {clip_len} samples is shorter than one window"))
        })?;
        let n_mels = config.n_mels;

        let shift_offset = if config.shift {
            stream(seed, StreamTag::Shift).below(clip_len as u64) as usize
        } else {
            0
        };

        let mut spec = stream(seed, StreamTag::Spec);
        let mut span = |max_width: usize, extent: usize| {
            let width = spec.up_to(max_width.min(extent) as u64) as usize;
            let start = spec.up_to((extent - width) as u64) as usize;
            MaskSpan { start, width }
        };
        let time_mask = span(config.max_time_mask, n_frames);
        let freq_mask = span(config.max_freq_mask, n_mels);

        let mixup = mixup_draw(seed, config.mixup, corpus_len);
        if config.mixup != MixupMode::Off && corpus_len == 0 {
            return Err(Error::Corpus("mixup needs a non-empty corpus".into()));
        }

        Ok(Self {
            seed,
            shift_offset,
            time_mask,
            freq_mask,
            mixup,
        })
    }
}

/// The mixup partner and weight drawn from `seed`, or `None` when mixup is off
/// or the corpus is empty.
pub fn mixup_draw(seed: u32, mode: MixupMode, corpus_len: usize) -> Option<MixupDraw> {
    if mode == MixupMode::Off || corpus_len == 0 {
        return None;
    }
    let mut rng = stream(seed, StreamTag::Mixup);
    let partner = rng.below(corpus_len as u64) as usize;
    let lambda = match mode {
        // inverse CDF of the arcsine law, i.e. Beta(1/2, 1/2)
        MixupMode::Beta => (std::f64::consts::FRAC_PI_2 * rng.next_f64()).sin().powi(2),
        _ => 0.5,
    };
    Some(MixupDraw { partner, lambda })
}

/// Circular shift: `out[i] = in[(i + offset) mod len]`.
pub fn wave_shift(clip: &AudioClip, offset: usize) -> AudioClip {
    let mut samples = clip.samples.clone();
    if !samples.is_empty() {
        let len = samples.len();
        samples.rotate_left(offset % len);
    }
    AudioClip::new(samples, clip.sample_rate)
}

/// Applies the plan's time and frequency masks, filling with `fill`.
pub fn spec_augment(spec: &MelSpectrogram, plan: &AugmentationPlan, fill: f64) -> Result<MelSpectrogram> {
    let (n_mels, n_frames) = spec.shape();
    if plan.time_mask.end() > n_frames || plan.freq_mask.end() > n_mels {
        return Err(Error::ShapeMismatch(format!(
            "masks {:?}/{:?} exceed a {n_mels}x{n_frames} spectrogram",
            plan.time_mask, plan.freq_mask
        )));
    }
    let mut out = spec.clone();
    for band in 0..n_mels {
        let row = out.band_mut(band);
        if plan.freq_mask.contains(band) {
            row.fill(fill);
        } else {
            row[plan.time_mask.start..plan.time_mask.end()].fill(fill);
        }
    }
    Ok(out)
}

/// `lambda * a + (1 - lambda) * b`, elementwise.
pub fn mixup_blend(a: &MelSpectrogram, b: &MelSpectrogram, lambda: f64) -> Result<MelSpectrogram> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "mixup of {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = a.clone();
    for (o, &y) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *o = lambda * *o + (1.0 - lambda) * y;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counting(n_mels: usize, n_frames: usize) -> MelSpectrogram {
        let data = (0..n_mels * n_frames).map(|i| i as f64).collect();
        MelSpectrogram::from_vec(n_mels, n_frames, data, 0.01).unwrap()
    }

    #[test]
    fn shift_examples() {
        let clip = AudioClip::new(vec![1.0, 2.0, 3.0, 4.0], 16_000);
        assert_eq!(wave_shift(&clip, 0), clip);
        assert_eq!(wave_shift(&clip, 1).samples, vec![2.0, 3.0, 4.0, 1.0]);
    }

    #[test]
    fn zero_width_masks_are_identity() {
        let spec = counting(8, 20);
        let plan = AugmentationPlan::identity(0);
        assert!(spec_augment(&spec, &plan, -1.0).unwrap().bitwise_eq(&spec));
    }

    #[test]
    fn masked_cell_count_matches_plan() {
        let spec = counting(64, 300);
        let config = FeatureConfig::default();
        for seed in 0..200u32 {
            let plan = AugmentationPlan::derive(seed, &config, 160 * 299 + 512, 1).unwrap();
            let out = spec_augment(&spec, &plan, -1.0).unwrap();
            let changed = spec
                .as_slice()
                .iter()
                .zip(out.as_slice())
                .filter(|(a, b)| a != b)
                .count();
            let (tw, fw) = (plan.time_mask.width, plan.freq_mask.width);
            assert_eq!(changed, tw * 64 + fw * 300 - tw * fw);
        }
    }

    #[test]
    fn plan_respects_bounds() {
        let config = FeatureConfig {
            mixup: MixupMode::Beta,
            ..FeatureConfig::default()
        };
        for clip_len in [512, 700, 4_000, 160_000] {
            let n_frames = config.num_frames(clip_len).unwrap();
            for seed in 0..300u32 {
                let plan = AugmentationPlan::derive(seed, &config, clip_len, 17).unwrap();
                assert!(plan.shift_offset < clip_len);
                assert!(plan.time_mask.width <= 192 && plan.time_mask.end() <= n_frames);
                assert!(plan.freq_mask.width <= 24 && plan.freq_mask.end() <= 64);
                let mix = plan.mixup.unwrap();
                assert!(mix.partner < 17);
                assert!((0.0..=1.0).contains(&mix.lambda));
            }
        }
    }

    #[test]
    fn disabled_augmentations_do_not_move_other_draws() {
        let full = FeatureConfig {
            mixup: MixupMode::Beta,
            ..FeatureConfig::default()
        };
        let no_shift = FeatureConfig {
            shift: false,
            mixup: MixupMode::Off,
            ..FeatureConfig::default()
        };
        for seed in [0u32, 1, 99, u32::MAX] {
            let a = AugmentationPlan::derive(seed, &full, 160_000, 10).unwrap();
            let b = AugmentationPlan::derive(seed, &no_shift, 160_000, 10).unwrap();
            assert_eq!(a.time_mask, b.time_mask);
            assert_eq!(a.freq_mask, b.freq_mask);
            assert_eq!(b.shift_offset, 0);
            assert!(b.mixup.is_none());
        }
    }

    #[test]
    fn fixed_mixup_uses_half() {
        let config = FeatureConfig {
            mixup: MixupMode::Fixed,
            ..FeatureConfig::default()
        };
        let plan = AugmentationPlan::derive(5, &config, 1024, 3).unwrap();
        assert_eq!(plan.mixup.unwrap().lambda, 0.5);
    }

    #[test]
    fn beta_lambda_has_arcsine_moments() {
        let config = FeatureConfig {
            mixup: MixupMode::Beta,
            ..FeatureConfig::default()
        };
        let lambdas: Vec<f64> = (0..20_000u32)
            .map(|s| AugmentationPlan::derive(s, &config, 1024, 3).unwrap().mixup.unwrap().lambda)
            .collect();
        let n = lambdas.len() as f64;
        let mean = lambdas.iter().sum::<f64>() / n;
        let var = lambdas.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
        // Beta(1/2, 1/2): mean 1/2, variance 1/8
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!((var - 0.125).abs() < 0.005, "var {var}");
    }

    #[test]
    fn mixup_examples() {
        let a = counting(4, 5);
        let neg = MelSpectrogram::from_vec(4, 5, a.as_slice().iter().map(|v| -v).collect(), 0.01).unwrap();
        assert!(mixup_blend(&a, &neg, 1.0).unwrap().bitwise_eq(&a));
        assert!(mixup_blend(&a, &neg, 0.5).unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert!(mixup_blend(&a, &counting(4, 6), 0.5).is_err());
    }

    proptest! {
        #[test]
        fn shift_composes_to_identity(samples in prop::collection::vec(-1.0f32..1.0, 1..200), o in 0usize..1000) {
            let clip = AudioClip::new(samples, 16_000);
            let o = o % clip.len();
            let back = wave_shift(&wave_shift(&clip, o), clip.len() - o);
            prop_assert_eq!(back, clip);
        }

        #[test]
        fn blend_inverts(a in prop::collection::vec(-30.0f64..10.0, 12), b in prop::collection::vec(-30.0f64..10.0, 12), lambda in 0.05f64..1.0) {
            let sa = MelSpectrogram::from_vec(3, 4, a, 0.01).unwrap();
            let sb = MelSpectrogram::from_vec(3, 4, b, 0.01).unwrap();
            let mixed = mixup_blend(&sa, &sb, lambda).unwrap();
            for i in 0..12 {
                let recovered = (mixed.as_slice()[i] - (1.0 - lambda) * sb.as_slice()[i]) / lambda;
                prop_assert!((recovered - sa.as_slice()[i]).abs() < 1e-6);
            }
        }
    }
}
