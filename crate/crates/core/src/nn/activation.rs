//! ReLU and numerically stable softmax.

use crate::tensor::Tensor;

/// Elementwise `max(0, x)`. The returned mask records which inputs were
/// strictly positive; backward zeroes gradients everywhere else.
pub fn relu_forward(input: &Tensor) -> (Tensor, Vec<bool>) {
    let mut out = input.clone();
    let mut mask = vec![false; input.numel()];
    for (v, m) in out.data_mut().iter_mut().zip(mask.iter_mut()) {
        if *v > 0.0 {
            *m = true;
        } else {
            *v = 0.0;
        }
    }
    (out, mask)
}

pub fn relu_backward(grad_out: &Tensor, mask: &[bool]) -> Tensor {
    let mut din = grad_out.clone();
    for (g, &m) in din.data_mut().iter_mut().zip(mask) {
        if !m {
            *g = 0.0;
        }
    }
    din
}

/// Softmax with max-subtraction so large logits cannot overflow.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    let data = out.data_mut();
    let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in data.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in data.iter_mut() {
        *v /= sum;
    }
    out
}

/// Full softmax Jacobian-vector product:
/// `din_i = p_i * (g_i - sum_j g_j p_j)`.
#[allow(dead_code)]
pub fn softmax_backward(grad_out: &Tensor, probs: &Tensor) -> Tensor {
    let dot: f64 = grad_out
        .data()
        .iter()
        .zip(probs.data())
        .map(|(g, p)| g * p)
        .sum();
    let mut din = probs.clone();
    for (d, g) in din.data_mut().iter_mut().zip(grad_out.data()) {
        *d *= g - dot;
    }
    din
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        let (y, mask) = relu_forward(&x);
        assert_eq!(y.data(), [0.0, 0.0, 2.0]);
        assert_eq!(mask, [false, false, true]);
    }

    #[test]
    fn softmax_symmetric() {
        let x = Tensor::from_vec(&[2], vec![0.0, 0.0]).unwrap();
        let p = softmax(&x);
        assert!((p.data()[0] - 0.5).abs() < 1e-12);
        assert!((p.data()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_logits_no_overflow() {
        let x = Tensor::from_vec(&[2], vec![1000.0, 1000.0]).unwrap();
        let p = softmax(&x);
        assert!(p.is_finite());
        assert!((p.data()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_sums_to_one() {
        let x = Tensor::from_vec(&[2], vec![3.2, -1.7]).unwrap();
        let p = softmax(&x);
        let s: f64 = p.data().iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(p.data().iter().all(|&v| v >= 0.0));
    }
}
