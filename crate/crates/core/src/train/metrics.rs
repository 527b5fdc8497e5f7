use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;
use crate::{Error, Result};

/// Evaluation results. Accuracy fields are set for classification, `mape`
/// for regression. A class absent from the evaluated set has no per-class
/// accuracy.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub class_counts: Vec<usize>,
    pub mape: Option<f64>,
    pub loss_curve: Vec<f64>,
}

impl Metrics {
    pub fn with_loss_curve(mut self, curve: Vec<f64>) -> Self {
        self.loss_curve = curve;
        self
    }
}

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let (_, c) = logits.dims2();
    logits
        .data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn classification_metrics(predicted: &[usize], labels: &[usize], classes: usize) -> Result<Metrics> {
    if predicted.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", predicted.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let mut counts = vec![0usize; classes];
    let mut hits = vec![0usize; classes];
    for (&p, &l) in predicted.iter().zip(labels) {
        if l >= classes {
            return Err(Error::InvalidArgument(format!("label {l} outside 0..{classes}")));
        }
        counts[l] += 1;
        if p == l {
            hits[l] += 1;
        }
    }
    let total_hits: usize = hits.iter().sum();
    Ok(Metrics {
        accuracy: Some(total_hits as f64 / labels.len() as f64),
        per_class_accuracy: counts
            .iter()
            .zip(&hits)
            .map(|(&c, &h)| (c > 0).then(|| h as f64 / c as f64))
            .collect(),
        class_counts: counts,
        mape: None,
        loss_curve: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let l = [0, 1, 2, 3, 3];
        let m = classification_metrics(&l, &l, 4).unwrap();
        assert_eq!(m.accuracy, Some(1.0));
        assert!(m.per_class_accuracy.iter().all(|a| *a == Some(1.0)));
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let l: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let m = classification_metrics(&vec![2; 400], &l, 4).unwrap();
        assert_eq!(m.accuracy, Some(0.25));
        assert_eq!(m.per_class_accuracy, vec![Some(0.0), Some(0.0), Some(1.0), Some(0.0)]);
    }

    #[test]
    fn argmax_ties_low() {
        let t = Tensor::from_rows(&[vec![1.0, 3.0, 3.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(argmax_rows(&t), vec![1, 0]);
    }
}
