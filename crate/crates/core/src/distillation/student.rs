use std::path::Path;

use crate::distillation::teacher::sigmoid;
use crate::error::{Error, Result};
use crate::features::mel::MelSpectrogram;
use crate::features::rng::{mix64, SplitMix64};

const MODEL_MAGIC: [u8; 4] = *b"CEDM";
const MODEL_VERSION: u16 = 1;
const NORM_EPS: f64 = 1e-5;

/// Per-band standardization with statistics frozen after one warm pass.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl InputNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0 - NORM_EPS; dim],
        }
    }

    /// Population mean and variance of `inputs`.
    pub fn fit<'a>(dim: usize, inputs: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut count = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for x in inputs {
            count += 1;
            for d in 0..dim {
                let delta = x[d] - mean[d];
                mean[d] += delta / count as f64;
                m2[d] += delta * (x[d] - mean[d]);
            }
        }
        if count == 0 {
            return Self::identity(dim);
        }
        let var = m2.into_iter().map(|s| s / count as f64).collect();
        Self { mean, var }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for d in 0..out.len() {
            out[d] = (x[d] - self.mean[d]) / (self.var[d] + NORM_EPS).sqrt();
        }
    }
}

/// Affine multilabel classifier over time-pooled log-Mel bands.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentModel {
    num_classes: usize,
    dim: usize,
    /// C x D, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub norm: InputNorm,
}

impl StudentModel {
    /// Small Gaussian weights (std 0.01), zero bias, identity normalization.
    pub fn new(num_classes: usize, dim: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(mix64(seed ^ 0x5EED_57DE_u64));
        let weights = (0..num_classes * dim).map(|_| 0.01 * rng.next_gaussian()).collect();
        Self {
            num_classes,
            dim,
            weights,
            bias: vec![0.0; num_classes],
            norm: InputNorm::identity(dim),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn normalize(&self, pooled: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.norm.apply(pooled, &mut out);
        out
    }

    /// Pre-sigmoid outputs for already-normalized features.
    pub fn logits_normalized(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    pub fn forward_pooled(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        if pooled.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "student expects {} features, got {}",
                self.dim,
                pooled.len()
            )));
        }
        let x = self.normalize(pooled);
        Ok(self.logits_normalized(&x).into_iter().map(sigmoid).collect())
    }

    pub fn forward(&self, spec: &MelSpectrogram) -> Result<Vec<f64>> {
        self.forward_pooled(&spec.max_over_time())
    }

    /// Visits every parameter with its flat index: weights first, then bias.
    pub(crate) fn apply_update(&mut self, update: impl Fn(usize, &mut f64)) {
        let n = self.weights.len();
        for (i, w) in self.weights.iter_mut().enumerate() {
            update(i, w);
        }
        for (i, b) in self.bias.iter_mut().enumerate() {
            update(n + i, b);
        }
    }

    /// Little-endian binary form: magic `CEDM`, u16 version, u16 reserved,
    /// u32 C, u32 D, then f64 weights, bias, norm mean and norm variance.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * (self.num_params() + 2 * self.dim));
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.num_classes as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in self
            .weights
            .iter()
            .chain(&self.bias)
            .chain(&self.norm.mean)
            .chain(&self.norm.var)
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || bytes[0..4] != MODEL_MAGIC {
            return Err(Error::InvalidModel("missing CEDM header".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MODEL_VERSION {
            return Err(Error::InvalidModel(format!("unsupported model version {version}")));
        }
        let c = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let count = c * d + c + 2 * d;
        if bytes.len() != 16 + 8 * count {
            return Err(Error::InvalidModel(format!(
                "{} bytes for a {c}x{d} model, expected {}",
                bytes.len(),
                16 + 8 * count
            )));
        }
        let mut values = bytes[16..]
            .chunks_exact(8)
            .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()));
        let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f64>>();
        let weights = take(c * d);
        let bias = take(c);
        let mean = take(d);
        let var = take(d);
        Ok(Self {
            num_classes: c,
            dim: d,
            weights,
            bias,
            norm: InputNorm { mean, var },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, model: &mut StudentModel, grad: &[f64], lr: f64) {
        debug_assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((m, v), &g) in self.m.iter_mut().zip(self.v.iter_mut()).zip(grad) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
        }
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (m, v) = (&self.m, &self.v);
        model.apply_update(|i, p| {
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        });
    }
}
