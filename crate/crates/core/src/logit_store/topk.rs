use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::logit_store::record::{LogitRecord, TopK};

/// A full length-C probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLogits {
    probs: Vec<f64>,
}

impl DenseLogits {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidRecord(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self { probs })
    }

    pub fn zeros(num_classes: usize) -> Self {
        Self {
            probs: vec![0.0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// `weight * self + (1 - weight) * other`, elementwise.
    pub fn blend(&self, other: &DenseLogits, weight: f64) -> Result<DenseLogits> {
        if self.probs.len() != other.probs.len() {
            return Err(Error::ShapeMismatch(format!(
                "blending {} classes with {}",
                self.probs.len(),
                other.probs.len()
            )));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        Ok(Self { probs })
    }
}

/// Keeps the `k` largest probabilities, sorted non-increasing with ties
/// broken by ascending class index.
pub fn compress_topk(dense: &DenseLogits, k: usize) -> Result<TopK> {
    let classes = dense.num_classes();
    if k > classes {
        return Err(Error::TopKTooLarge { k, classes });
    }
    if classes > u16::MAX as usize + 1 {
        return Err(Error::ClassOutOfRange {
            index: classes - 1,
            classes,
        });
    }
    let probs = dense.as_slice();
    let rank = |a: &usize, b: &usize| -> Ordering {
        probs[*b]
            .partial_cmp(&probs[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    let mut order: Vec<usize> = (0..classes).collect();
    if k > 0 && k < classes {
        order.select_nth_unstable_by(k - 1, rank);
        order.truncate(k);
    }
    order.sort_unstable_by(rank);
    order.truncate(k);
    Ok(TopK {
        values: order.iter().map(|&i| probs[i]).collect(),
        indices: order.iter().map(|&i| i as u16).collect(),
    })
}

/// Places the stored values at their class indices; every other class is 0.
pub fn densify(record: &LogitRecord, num_classes: usize) -> Result<DenseLogits> {
    densify_parts(&record.values, &record.indices, num_classes)
}

pub fn densify_parts(values: &[f64], indices: &[u16], num_classes: usize) -> Result<DenseLogits> {
    let mut probs = vec![0.0; num_classes];
    for (&v, &i) in values.iter().zip(indices) {
        let slot = probs.get_mut(i as usize).ok_or(Error::ClassOutOfRange {
            index: i as usize,
            classes: num_classes,
        })?;
        *slot = v;
    }
    Ok(DenseLogits { probs })
}
