use crate::numerics::Tensor;
use crate::{Error, Result};

/// Mean `−log softmax(logits)[target]` over the batch. With class weights the
/// mean is weighted: `Σ w_t ℓ / Σ w_t`.
pub fn cross_entropy(logits: &Tensor, targets: &[usize], class_weights: Option<&[f64]>) -> Result<f64> {
    let (r, c) = logits.dims2();
    if targets.len() != r {
        return Err(Error::shape(format!("{} targets for {r} logit rows", targets.len())));
    }
    if let Some(w) = class_weights {
        if w.len() != c {
            return Err(Error::shape(format!("{} class weights for {c} classes", w.len())));
        }
    }
    if r == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    let mut weight = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        if t >= c {
            return Err(Error::InvalidArgument(format!("class {t} outside 0..{c}")));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let w = class_weights.map_or(1.0, |w| w[t]);
        total += w * (lse - row[t]);
        weight += w;
    }
    Ok(total / weight)
}

/// Mean absolute percentage error, in percent.
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::shape(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    if truth.iter().any(|&t| t == 0.0) {
        return Err(Error::InvalidArgument("MAPE undefined for a zero ground-truth value".into()));
    }
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| ((t - p) / t).abs()).sum();
    Ok(100.0 * s / truth.len() as f64)
}

/// Weights proportional to inverse class frequency, scaled so that
/// `Σ_c count_c · w_c = Σ_c count_c`. Absent classes get weight 0.
pub fn inverse_frequency_weights(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    for &l in labels {
        if l < classes {
            counts[l] += 1;
        }
    }
    let present = counts.iter().filter(|&&c| c > 0).count().max(1) as f64;
    let n = labels.len() as f64;
    counts.iter().map(|&c| if c == 0 { 0.0 } else { n / (present * c as f64) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln4() {
        let l = Tensor::zeros(&[3, 4]);
        assert!((cross_entropy(&l, &[0, 1, 3], None).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_logits_approach_zero() {
        let l = Tensor::from_rows(&[vec![1e3, 0.0, 0.0, 0.0]]).unwrap();
        assert!(cross_entropy(&l, &[0], None).unwrap() < 1e-12);
    }

    #[test]
    fn invalid_class_rejected() {
        assert!(cross_entropy(&Tensor::zeros(&[1, 4]), &[4], None).is_err());
    }

    #[test]
    fn mape_examples() {
        assert!((mape(&[90.0], &[100.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[5.0, 7.0], &[5.0, 7.0]).unwrap(), 0.0);
        assert!((mape(&[110.0, 80.0], &[100.0, 100.0]).unwrap() - 15.0).abs() < 1e-12);
        assert!(mape(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn inverse_weights_balance_counts() {
        let w = inverse_frequency_weights(&[0, 0, 0, 1, 3], 4);
        assert_eq!(w[2], 0.0);
        assert!((3.0 * w[0] - w[1]).abs() < 1e-12);
        assert!((3.0 * w[0] + w[1] + w[3] - 5.0).abs() < 1e-12);
    }
}
