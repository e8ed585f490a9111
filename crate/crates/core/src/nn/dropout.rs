//! Inverted dropout: survivors are scaled by `1/(1-p)` at train time so
//! evaluation is exactly the identity.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::ChaCha8Rng;
use crate::tensor::Tensor;

use super::Mode;

#[derive(Debug, Clone)]
pub struct DropoutLayer {
    p: f64,
}

impl DropoutLayer {
    pub fn new(p: f64) -> Result<DropoutLayer> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "dropout probability must be in [0,1], got {p}"
            )));
        }
        Ok(DropoutLayer { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Returns the output and the per-element multiplier mask (all ones in
    /// eval mode). Train mode with `p = 1` would zero the whole layer and is
    /// rejected.
    pub fn forward(
        &self,
        input: &Tensor,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor, Vec<f64>)> {
        let n = input.numel();
        if mode == Mode::Eval || self.p == 0.0 {
            return Ok((input.clone(), vec![1.0; n]));
        }
        if self.p >= 1.0 {
            return Err(Error::InvalidParameter(
                "dropout p = 1 in train mode zeroes the network".into(),
            ));
        }
        let rng = rng.ok_or_else(|| {
            Error::InvalidParameter("dropout in train mode needs an rng".into())
        })?;
        let scale = 1.0 / (1.0 - self.p);
        let mut mask = vec![0.0; n];
        for m in &mut mask {
            if rng.gen::<f64>() >= self.p {
                *m = scale;
            }
        }
        let mut out = input.clone();
        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        Ok((out, mask))
    }
}

pub fn backward(grad_out: &Tensor, mask: &[f64]) -> Tensor {
    let mut din = grad_out.clone();
    for (g, m) in din.data_mut().iter_mut().zip(mask) {
        *g *= m;
    }
    din
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn eval_mode_is_identity() {
        let layer = DropoutLayer::new(0.5).unwrap();
        let x = Tensor::from_vec(&[4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let (y, _) = layer.forward(&x, Mode::Eval, None).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn p_zero_train_is_identity() {
        let layer = DropoutLayer::new(0.0).unwrap();
        let x = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut r = rng::stream(1, &[rng::tags::DROPOUT]);
        let (y, _) = layer.forward(&x, Mode::Train, Some(&mut r)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn p_one_train_is_error() {
        let layer = DropoutLayer::new(1.0).unwrap();
        let x = Tensor::zeros(&[3]);
        let mut r = rng::stream(1, &[rng::tags::DROPOUT]);
        assert!(layer.forward(&x, Mode::Train, Some(&mut r)).is_err());
    }

    #[test]
    fn survivor_scaling_preserves_mean() {
        // law of large numbers: with p=0.5 over 1e5 ones, mean stays near 1
        let layer = DropoutLayer::new(0.5).unwrap();
        let x = Tensor::filled(&[100_000], 1.0);
        let mut r = rng::stream(7, &[rng::tags::DROPOUT]);
        let (y, _) = layer.forward(&x, Mode::Train, Some(&mut r)).unwrap();
        let mean = y.data().iter().sum::<f64>() / y.numel() as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean} out of range");
    }

    #[test]
    fn invalid_p_rejected() {
        assert!(DropoutLayer::new(-0.1).is_err());
        assert!(DropoutLayer::new(1.1).is_err());
    }
}
