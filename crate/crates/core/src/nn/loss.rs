//! Cross-entropy on softmax outputs.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities below this are clamped inside the log so a confident
/// wrong prediction yields a large finite loss instead of infinity.
pub const PROB_EPSILON: f64 = 1e-12;

/// `-log(prediction[label])`. `prediction` must be a probability vector.
pub fn cross_entropy(prediction: &Tensor, label: usize) -> Result<f64> {
    if label >= prediction.numel() {
        return Err(Error::InvalidParameter(format!(
            "label {label} out of range for {} classes",
            prediction.numel()
        )));
    }
    Ok(-prediction.data()[label].max(PROB_EPSILON).ln())
}

/// Gradient of cross-entropy w.r.t. the logits that produced `probs`
/// through softmax: `p - onehot(label)`.
pub fn softmax_ce_logit_gradient(probs: &Tensor, label: usize) -> Result<Tensor> {
    if label >= probs.numel() {
        return Err(Error::InvalidParameter(format!(
            "label {label} out of range for {} classes",
            probs.numel()
        )));
    }
    let mut grad = probs.clone();
    grad.data_mut()[label] -= 1.0;
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_flip_is_ln2() {
        let p = Tensor::from_vec(&[2], vec![0.5, 0.5]).unwrap();
        let l = cross_entropy(&p, 0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn certain_correct_is_zero() {
        let p = Tensor::from_vec(&[2], vec![1.0, 0.0]).unwrap();
        assert_eq!(cross_entropy(&p, 0).unwrap(), 0.0);
    }

    #[test]
    fn zero_probability_clamped_finite() {
        let p = Tensor::from_vec(&[2], vec![1.0, 0.0]).unwrap();
        let l = cross_entropy(&p, 1).unwrap();
        assert!(l.is_finite());
        assert!(l > 20.0);
    }

    #[test]
    fn logit_gradient_is_p_minus_onehot() {
        let p = Tensor::from_vec(&[2], vec![0.7, 0.3]).unwrap();
        let g = softmax_ce_logit_gradient(&p, 1).unwrap();
        assert!((g.data()[0] - 0.7).abs() < 1e-12);
        assert!((g.data()[1] + 0.7).abs() < 1e-12);
    }
}
