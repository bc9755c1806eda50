use crate::error::{Error, Result};
use crate::logit_store::LogitRecord;

pub const PROB_CLAMP: f64 = 1e-7;

/// Teacher target with zero probability outside its listed classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTarget {
    entries: Vec<(u16, f64)>,
}

impl SparseTarget {
    pub fn from_record(record: &LogitRecord) -> Self {
        Self {
            entries: record.indices.iter().copied().zip(record.values.iter().copied()).collect(),
        }
    }

    pub fn entries(&self) -> &[(u16, f64)] {
        &self.entries
    }

    /// `lambda * self + (1 - lambda) * other`; a class listed by both is merged.
    pub fn blend(&self, other: &SparseTarget, lambda: f64) -> SparseTarget {
        let mut entries: Vec<(u16, f64)> = self.entries.iter().map(|&(i, v)| (i, lambda * v)).collect();
        for &(i, v) in &other.entries {
            let w = (1.0 - lambda) * v;
            match entries.iter_mut().find(|(j, _)| *j == i) {
                Some(e) => e.1 += w,
                None => entries.push((i, w)),
            }
        }
        SparseTarget { entries }
    }

    pub fn to_dense(&self, num_classes: usize) -> Result<Vec<f64>> {
        let mut dense = vec![0.0; num_classes];
        for &(i, v) in &self.entries {
            *dense.get_mut(i as usize).ok_or(Error::ClassOutOfRange {
                index: i as usize,
                classes: num_classes,
            })? = v;
        }
        Ok(dense)
    }

    fn check(&self, num_classes: usize) -> Result<()> {
        match self.entries.iter().find(|(i, _)| *i as usize >= num_classes) {
            Some(&(i, _)) => Err(Error::ClassOutOfRange {
                index: i as usize,
                classes: num_classes,
            }),
            None => Ok(()),
        }
    }
}

fn check_len(probs: &[f64], num_classes: usize) -> Result<()> {
    if probs.len() != num_classes {
        return Err(Error::ShapeMismatch(format!(
            "{} student probabilities for {num_classes} classes",
            probs.len()
        )));
    }
    Ok(())
}

/// Class-averaged binary cross entropy against a zero-filled sparse target.
///
/// Costs O(C + K): the all-zero-target term is summed once and corrected at
/// the K listed classes.
pub fn sparse_bce_target(probs: &[f64], target: &SparseTarget, num_classes: usize) -> Result<f64> {
    check_len(probs, num_classes)?;
    target.check(num_classes)?;
    let clamp = |p: f64| p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let mut total: f64 = probs.iter().map(|&p| (1.0 - clamp(p)).ln()).sum();
    for &(i, t) in &target.entries {
        let p = clamp(probs[i as usize]);
        total += t * (p.ln() - (1.0 - p).ln());
    }
    Ok(-total / num_classes as f64)
}

pub fn sparse_bce(probs: &[f64], record: &LogitRecord, num_classes: usize) -> Result<f64> {
    sparse_bce_target(probs, &SparseTarget::from_record(record), num_classes)
}

/// Gradient of [`sparse_bce_target`] with respect to the pre-sigmoid logits:
/// `(p_c - t_c) / C`.
pub fn sparse_bce_grad_target(probs: &[f64], target: &SparseTarget, num_classes: usize) -> Result<Vec<f64>> {
    check_len(probs, num_classes)?;
    target.check(num_classes)?;
    let scale = 1.0 / num_classes as f64;
    let mut grad: Vec<f64> = probs.iter().map(|p| p * scale).collect();
    for &(i, t) in &target.entries {
        grad[i as usize] -= t * scale;
    }
    Ok(grad)
}

pub fn sparse_bce_grad(probs: &[f64], record: &LogitRecord, num_classes: usize) -> Result<Vec<f64>> {
    sparse_bce_grad_target(probs, &SparseTarget::from_record(record), num_classes)
}
