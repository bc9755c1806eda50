use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// AP per class; `None` for classes without positives.
    pub per_class_ap: Vec<Option<f64>>,
    /// Mean AP over classes with at least one positive.
    pub map: f64,
}

impl EvalResult {
    pub fn evaluated_classes(&self) -> usize {
        self.per_class_ap.iter().flatten().count()
    }
}

/// Average precision of one class: mean of precision@k over the ranks k of
/// the positives, ranking by descending score with ties broken by ascending
/// sample index. `None` when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Macro mAP over an `N x C` score matrix and binary label matrix.
pub fn mean_average_precision(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<EvalResult> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} score rows vs {} label rows",
            scores.len(),
            labels.len()
        )));
    }
    let classes = scores.first().map_or(0, Vec::len);
    if let Some(bad) = scores
        .iter()
        .zip(labels)
        .position(|(s, l)| s.len() != classes || l.len() != classes)
    {
        return Err(Error::ShapeMismatch(format!("row {bad} does not have {classes} columns")));
    }
    let per_class_ap: Vec<Option<f64>> = (0..classes)
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
            let l: Vec<bool> = labels.iter().map(|row| row[c]).collect();
            average_precision(&s, &l)
        })
        .collect();
    let evaluated: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
    if evaluated.is_empty() {
        return Err(Error::Evaluation("no class has a positive label".into()));
    }
    let map = evaluated.iter().sum::<f64>() / evaluated.len() as f64;
    Ok(EvalResult { per_class_ap, map })
}
