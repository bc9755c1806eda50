use half::f16;

use crate::error::{Error, Result};

/// Top-K probabilities and their class indices, without a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    pub values: Vec<f64>,
    pub indices: Vec<u16>,
}

impl TopK {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_seed(self, seed: u32) -> LogitRecord {
        LogitRecord {
            values: self.values,
            indices: self.indices,
            seed,
        }
    }
}

/// One (sample, epoch) unit of supervision: the teacher's K most prominent
/// probabilities, their class ids and the augmentation seed that produced the
/// teacher's input.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub values: Vec<f64>,
    pub indices: Vec<u16>,
    pub seed: u32,
}

impl LogitRecord {
    pub fn top_k(&self) -> usize {
        self.values.len()
    }

    /// Checks the write-side invariants: values in [0,1] sorted non-increasing
    /// with ties in ascending index order, indices distinct and below `num_classes`.
    pub fn validate(&self, top_k: usize, num_classes: usize) -> Result<()> {
        self.validate_common(top_k, num_classes)?;
        for (i, pair) in self.values.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            if a < b {
                return Err(Error::InvalidRecord(format!(
                    "values not sorted non-increasing at position {i}: {a} < {b}"
                )));
            }
            if a == b && self.indices[i] > self.indices[i + 1] {
                return Err(Error::InvalidRecord(format!(
                    "tie at position {i} not broken by ascending index ({} > {})",
                    self.indices[i],
                    self.indices[i + 1]
                )));
            }
        }
        Ok(())
    }

    /// Read-side check. Binary16 rounding may merge two distinct values into a
    /// tie, so the tie order is not enforced after decoding.
    pub(crate) fn validate_decoded(&self, top_k: usize, num_classes: usize) -> Result<()> {
        self.validate_common(top_k, num_classes)?;
        if let Some(i) = self.values.windows(2).position(|p| p[0] < p[1]) {
            return Err(Error::InvalidRecord(format!(
                "decoded values not sorted at position {i}"
            )));
        }
        Ok(())
    }

    fn validate_common(&self, top_k: usize, num_classes: usize) -> Result<()> {
        if self.values.len() != top_k || self.indices.len() != top_k {
            return Err(Error::InvalidRecord(format!(
                "expected {top_k} values and indices, got {} and {}",
                self.values.len(),
                self.indices.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRecord(format!("value {v} outside [0, 1]")));
        }
        let mut seen = self.indices.clone();
        seen.sort_unstable();
        if let Some(&last) = seen.last() {
            if last as usize >= num_classes {
                return Err(Error::ClassOutOfRange {
                    index: last as usize,
                    classes: num_classes,
                });
            }
        }
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidRecord(format!("duplicate class index {}", w[0])));
        }
        Ok(())
    }

    /// Serializes as K binary16 values, K u16 indices and the u32 seed, all
    /// little-endian. Values are rounded to nearest, ties to even.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        for &v in &self.values {
            out.extend_from_slice(&f16::from_f64(v).to_le_bytes());
        }
        for &i in &self.indices {
            out.extend_from_slice(&i.to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * self.values.len() + 4);
        self.encode_into(&mut out);
        out
    }

    /// Decodes a record of `top_k` entries without validating it.
    pub fn decode(bytes: &[u8], top_k: usize) -> Result<Self> {
        let expected = 4 * top_k + 4;
        if bytes.len() != expected {
            return Err(Error::CorruptStore(format!(
                "record is {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let (value_bytes, rest) = bytes.split_at(2 * top_k);
        let (index_bytes, seed_bytes) = rest.split_at(2 * top_k);
        let values = value_bytes
            .chunks_exact(2)
            .map(|c| f16::from_le_bytes([c[0], c[1]]).to_f64())
            .collect();
        let indices = index_bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        let seed = u32::from_le_bytes(seed_bytes.try_into().unwrap());
        Ok(Self {
            values,
            indices,
            seed,
        })
    }

    /// The record as it reads back after binary16 quantization.
    pub fn quantized(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| quantize_f16(v)).collect(),
            indices: self.indices.clone(),
            seed: self.seed,
        }
    }
}

pub fn quantize_f16(v: f64) -> f64 {
    f16::from_f64(v).to_f64()
}
