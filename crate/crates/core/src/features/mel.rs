use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlannerScalar};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::audio::AudioClip;
use crate::features::config::FeatureConfig;

/// F x T matrix of log-Mel energies, stored band-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    n_mels: usize,
    n_frames: usize,
    data: Vec<f64>,
    /// Frame hop in seconds.
    pub hop_seconds: f64,
}

impl MelSpectrogram {
    pub fn from_vec(n_mels: usize, n_frames: usize, data: Vec<f64>, hop_seconds: f64) -> Result<Self> {
        if data.len() != n_mels * n_frames {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {n_mels}x{n_frames} spectrogram",
                data.len()
            )));
        }
        Ok(Self {
            n_mels,
            n_frames,
            data,
            hop_seconds,
        })
    }

    pub fn filled(n_mels: usize, n_frames: usize, value: f64, hop_seconds: f64) -> Self {
        Self {
            n_mels,
            n_frames,
            data: vec![value; n_mels * n_frames],
            hop_seconds,
        }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_mels, self.n_frames)
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.data[band * self.n_frames + frame]
    }

    pub fn set(&mut self, band: usize, frame: usize, value: f64) {
        self.data[band * self.n_frames + frame] = value;
    }

    pub fn band(&self, band: usize) -> &[f64] {
        &self.data[band * self.n_frames..(band + 1) * self.n_frames]
    }

    pub fn band_mut(&mut self, band: usize) -> &mut [f64] {
        &mut self.data[band * self.n_frames..(band + 1) * self.n_frames]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Maximum over time of every band; the pooled feature vector consumed by
    /// teacher and student.
    pub fn max_over_time(&self) -> Vec<f64> {
        (0..self.n_mels)
            .map(|b| self.band(b).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Mean over time of every band.
    pub fn mean_over_time(&self) -> Vec<f64> {
        (0..self.n_mels)
            .map(|b| self.band(b).iter().sum::<f64>() / self.n_frames as f64)
            .collect()
    }

    /// Whole-patch count after non-overlapping `patch x patch` tiling; trailing
    /// frames and bands that do not fill a patch are dropped.
    pub fn patch_grid(&self, patch: usize) -> (usize, usize) {
        (self.n_frames / patch, self.n_mels / patch)
    }

    /// 64-bit digest of the exact bit pattern.
    pub fn digest(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update((self.n_mels as u64).to_le_bytes());
        hasher.update((self.n_frames as u64).to_le_bytes());
        for v in &self.data {
            hasher.update(v.to_le_bytes());
        }
        u64::from_le_bytes(hasher.finalize()[..8].try_into().unwrap())
    }

    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// One triangular filter, stored over its nonzero bin range.
#[derive(Debug, Clone)]
struct Filter {
    first_bin: usize,
    weights: Vec<f64>,
}

/// HTK-scale triangular filterbank over the bins of a real FFT.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    filters: Vec<Filter>,
    n_bins: usize,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Self {
        let n_bins = n_fft / 2 + 1;
        let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = |k: usize| k as f64 * sample_rate as f64 / n_fft as f64;
        let filters = (0..n_mels)
            .map(|m| {
                let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weight = |f: f64| ((f - lo) / (center - lo)).min((hi - f) / (hi - center)).max(0.0);
                let nonzero: Vec<usize> = (0..n_bins).filter(|&k| weight(bin_hz(k)) > 0.0).collect();
                match (nonzero.first(), nonzero.last()) {
                    (Some(&a), Some(&b)) => Filter {
                        first_bin: a,
                        weights: (a..=b).map(|k| weight(bin_hz(k))).collect(),
                    },
                    _ => Filter {
                        first_bin: 0,
                        weights: Vec::new(),
                    },
                }
            })
            .collect();
        Self { filters, n_bins }
    }

    pub fn n_mels(&self) -> usize {
        self.filters.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Weight of filter `band` at FFT bin `bin`.
    pub fn weight(&self, band: usize, bin: usize) -> f64 {
        let f = &self.filters[band];
        bin.checked_sub(f.first_bin)
            .and_then(|i| f.weights.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.filters) {
            *o = f
                .weights
                .iter()
                .zip(&power[f.first_bin..])
                .map(|(w, p)| w * p)
                .sum();
        }
    }
}

/// Hann-windowed STFT, power spectrum, Mel filterbank and natural log.
///
/// Uses the scalar FFT planner so the output does not depend on which SIMD
/// instructions the host supports.
#[derive(Clone)]
pub struct LogMel {
    config: FeatureConfig,
    window: Vec<f64>,
    filterbank: MelFilterbank,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for LogMel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMel").field("config", &self.config).finish_non_exhaustive()
    }
}

impl LogMel {
    pub fn new(config: &FeatureConfig) -> Result<Self> {
        config.validate()?;
        let n = config.window;
        // periodic Hann
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
            .collect();
        let filterbank = MelFilterbank::new(config.n_mels, n, config.sample_rate, config.f_min, config.f_max);
        let fft = FftPlannerScalar::new().plan_fft_forward(n);
        Ok(Self {
            config: config.clone(),
            window,
            filterbank,
            fft,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn compute(&self, clip: &AudioClip) -> Result<MelSpectrogram> {
        let cfg = &self.config;
        if clip.sample_rate != cfg.sample_rate {
            return Err(Error::InvalidAudio(format!(
                "clip sampled at {} Hz, config expects {} Hz",
                clip.sample_rate, cfg.sample_rate
            )));
        }
        let n_frames = cfg.num_frames(clip.len()).ok_or_else(|| {
            Error::InvalidAudio(format!(
                "clip of {} samples is shorter than one {}-sample window",
                clip.len(),
                cfg.window
            ))
        })?;
        let n_mels = cfg.n_mels;
        let floor = cfg.log_floor;
        let mut data = vec![0.0; n_mels * n_frames];
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.window];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; self.filterbank.n_bins()];
        let mut energies = vec![0.0; n_mels];
        for t in 0..n_frames {
            let frame = &clip.samples[t * cfg.hop..t * cfg.hop + cfg.window];
            for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex::new(x as f64 * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            self.filterbank.apply(&power, &mut energies);
            for (m, &e) in energies.iter().enumerate() {
                data[m * n_frames + t] = e.max(floor).ln();
            }
        }
        MelSpectrogram::from_vec(n_mels, n_frames, data, cfg.hop as f64 / cfg.sample_rate as f64)
    }
}
