use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::mel::{MelFilterbank, MelSpectrogram};
use crate::features::rng::{mix64, SplitMix64};
use crate::features::FeatureConfig;
use crate::logit_store::DenseLogits;

/// Parameters that fully determine a [`TeacherEnsemble`].
///
/// Each member is affine in the time-pooled log-Mel vector. With `quality > 0`
/// every class listens to its own Mel band (see [`class_band`]); the members
/// differ by seeded Gaussian perturbations of scale `noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherSpec {
    pub seed: u64,
    pub members: usize,
    pub num_classes: usize,
    /// Weight of the class-to-band template, 0 gives a purely random teacher.
    pub quality: f64,
    /// Logit gain per nat of band excess over background.
    pub gain: f64,
    /// Expected log power per FFT bin of the background, subtracted before thresholding.
    pub background_log_power: f64,
    /// Band excess, in nats, at which a class reads probability 1/2.
    pub threshold: f64,
    /// Standard deviation of per-member weight perturbations.
    pub noise: f64,
}

impl TeacherSpec {
    pub fn new(seed: u64, num_classes: usize) -> Self {
        Self {
            seed,
            members: 5,
            num_classes,
            quality: 1.0,
            gain: 2.0,
            background_log_power: -2.7,
            threshold: 1.0,
            noise: 0.05,
        }
    }
}

/// Band a class listens to: classes are spread evenly across the upper three
/// quarters of the Mel axis, where filters span several FFT bins.
pub fn class_band(class: usize, num_classes: usize, n_mels: usize) -> usize {
    let low = n_mels / 4;
    (low + ((2 * class + 1) * (n_mels - low)) / (2 * num_classes)).min(n_mels - 1)
}

#[derive(Debug, Clone)]
struct Member {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Mean-of-probabilities ensemble of affine members over pooled log-Mel features.
#[derive(Debug, Clone)]
pub struct TeacherEnsemble {
    spec: TeacherSpec,
    n_mels: usize,
    members: Vec<Member>,
}

impl TeacherEnsemble {
    pub fn new(spec: TeacherSpec, config: &FeatureConfig) -> Result<Self> {
        if spec.members == 0 || spec.num_classes == 0 {
            return Err(Error::InvalidConfig(
                "teacher needs at least one member and one class".into(),
            ));
        }
        let n_mels = config.n_mels;
        let fb = MelFilterbank::new(n_mels, config.window, config.sample_rate, config.f_min, config.f_max);
        // log of each filter's summed weight: the band's background level above per-bin power
        let band_gain: Vec<f64> = (0..n_mels)
            .map(|m| (0..fb.n_bins()).map(|k| fb.weight(m, k)).sum::<f64>().max(1e-12).ln())
            .collect();

        let c = spec.num_classes;
        let mut template = vec![0.0; c * n_mels];
        let mut template_bias = vec![0.0; c];
        for class in 0..c {
            let band = class_band(class, c, n_mels);
            template[class * n_mels + band] = spec.gain;
            template_bias[class] =
                -spec.gain * (band_gain[band] + spec.background_log_power + spec.threshold);
        }

        let members = (0..spec.members)
            .map(|m| {
                let mut rng = SplitMix64::new(mix64(spec.seed ^ (m as u64).wrapping_mul(0xA24B_AED4_963E_E407)));
                let weights = template
                    .iter()
                    .map(|&t| spec.quality * t + spec.noise * rng.next_gaussian())
                    .collect();
                let bias = template_bias
                    .iter()
                    .map(|&t| spec.quality * t + spec.noise * rng.next_gaussian())
                    .collect();
                Member { weights, bias }
            })
            .collect();
        Ok(Self { spec, n_mels, members })
    }

    /// Builds an ensemble from explicit member parameters (`weights` is C x F, row-major).
    pub fn from_members(spec: TeacherSpec, n_mels: usize, members: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let c = spec.num_classes;
        if members.is_empty() {
            return Err(Error::InvalidConfig("teacher needs at least one member".into()));
        }
        let members = members
            .into_iter()
            .map(|(weights, bias)| {
                if weights.len() != c * n_mels || bias.len() != c {
                    return Err(Error::ShapeMismatch(format!(
                        "member weights {} / bias {} for {c} classes x {n_mels} bands",
                        weights.len(),
                        bias.len()
                    )));
                }
                Ok(Member { weights, bias })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, n_mels, members })
    }

    pub fn spec(&self) -> &TeacherSpec {
        &self.spec
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    /// Sigmoid output of a single member on pooled features.
    pub fn member_probs(&self, member: usize, pooled: &[f64]) -> Vec<f64> {
        let m = &self.members[member];
        m.weights
            .chunks_exact(self.n_mels)
            .zip(&m.bias)
            .map(|(row, b)| sigmoid(row.iter().zip(pooled).map(|(w, x)| w * x).sum::<f64>() + b))
            .collect()
    }

    pub fn predict_pooled(&self, pooled: &[f64]) -> Result<DenseLogits> {
        if pooled.len() != self.n_mels {
            return Err(Error::ShapeMismatch(format!(
                "teacher expects {} bands, got {}",
                self.n_mels,
                pooled.len()
            )));
        }
        let mut mean = vec![0.0; self.spec.num_classes];
        for m in 0..self.members.len() {
            for (acc, p) in mean.iter_mut().zip(self.member_probs(m, pooled)) {
                *acc += p;
            }
        }
        let scale = 1.0 / self.members.len() as f64;
        DenseLogits::new(mean.into_iter().map(|p| (p * scale).clamp(0.0, 1.0)).collect())
    }

    /// Ensemble prediction: arithmetic mean of member probabilities.
    pub fn predict(&self, spec: &MelSpectrogram) -> Result<DenseLogits> {
        self.predict_pooled(&spec.max_over_time())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(members: usize, classes: usize) -> TeacherSpec {
        TeacherSpec {
            members,
            ..TeacherSpec::new(7, classes)
        }
    }

    #[test]
    fn singleton_equals_member() {
        let cfg = FeatureConfig::default();
        let t = TeacherEnsemble::new(spec(1, 6), &cfg).unwrap();
        let x: Vec<f64> = (0..64).map(|i| -6.0 + 0.1 * i as f64).collect();
        assert_eq!(t.predict_pooled(&x).unwrap().as_slice(), t.member_probs(0, &x).as_slice());
    }

    #[test]
    fn complementary_members_average_to_half() {
        let (c, f) = (3, 4);
        let w: Vec<f64> = (0..c * f).map(|i| 0.3 * i as f64 - 1.0).collect();
        let b = vec![0.2, -0.4, 1.0];
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let t = TeacherEnsemble::from_members(spec(2, c), f, vec![(w.clone(), b.clone()), (neg(&w), neg(&b))]).unwrap();
        for p in t.predict_pooled(&[0.5, -1.0, 2.0, 0.25]).unwrap().as_slice() {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn ensemble_is_mean_of_members() {
        let cfg = FeatureConfig::default();
        let t = TeacherEnsemble::new(spec(5, 12), &cfg).unwrap();
        let mut rng = SplitMix64::new(1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..64).map(|_| -10.0 + 8.0 * rng.next_f64()).collect();
            let got = t.predict_pooled(&x).unwrap();
            for c in 0..12 {
                let brute: f64 = (0..5).map(|m| t.member_probs(m, &x)[c]).sum::<f64>() / 5.0;
                assert!((got.as_slice()[c] - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = FeatureConfig::default();
        let a = TeacherEnsemble::new(spec(3, 5), &cfg).unwrap();
        let b = TeacherEnsemble::new(spec(3, 5), &cfg).unwrap();
        let x = vec![-4.0; 64];
        assert_eq!(a.predict_pooled(&x).unwrap(), b.predict_pooled(&x).unwrap());
        assert!(a.predict_pooled(&[0.0; 3]).is_err());
    }

    #[test]
    fn class_bands_are_spread() {
        let bands: Vec<usize> = (0..24).map(|c| class_band(c, 24, 64)).collect();
        assert!(bands.windows(2).all(|w| w[0] < w[1]));
        assert!(*bands.last().unwrap() < 64);
        assert_eq!(class_band(0, 1, 64), 40);
        assert_eq!(bands[0], 17);
        assert_eq!(bands[23], 63);
    }
}
