//! SGD with classical momentum: `v <- mu*v - eta*g; w <- w + v`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{Gradients, Network};

#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<Tensor>,
}

impl SgdMomentum {
    pub fn new(network: &Network, learning_rate: f64, momentum: f64) -> SgdMomentum {
        let velocity = network
            .params()
            .iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect();
        SgdMomentum {
            learning_rate,
            momentum,
            velocity,
        }
    }

    /// Apply one update. Rejects non-finite gradients so a diverged batch
    /// aborts the epoch instead of poisoning the weights.
    pub fn step(&mut self, network: &mut Network, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::TrainingAborted(
                "non-finite gradient encountered".into(),
            ));
        }
        let mut flat: Vec<&Tensor> = Vec::new();
        for g in grads.per_layer.iter().flatten() {
            flat.push(&g.weights);
            flat.push(&g.bias);
        }
        let params = network.params_mut();
        debug_assert_eq!(params.len(), flat.len());
        debug_assert_eq!(params.len(), self.velocity.len());
        for ((param, grad), vel) in params.into_iter().zip(flat).zip(&mut self.velocity) {
            let mu = self.momentum;
            let eta = self.learning_rate;
            for ((w, &g), v) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(vel.data_mut())
            {
                *v = mu * *v - eta * g;
                *w += *v;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::DenseLayer;
    use crate::nn::Layer;

    fn one_dense_net(w: f64) -> Network {
        let dense = DenseLayer::new(
            Tensor::from_vec(&[1, 1], vec![w]).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        Network {
            layers: vec![Layer::Dense(dense), Layer::Softmax],
            conv_blocks: 0,
            dense_layers: 1,
            input_side: 1,
            input_channels: 1,
        }
    }

    fn grads_for(net: &Network, g: f64) -> Gradients {
        let mut grads = Gradients::zeros_like(net);
        let pg = grads.per_layer[0].as_mut().unwrap();
        pg.weights.data_mut()[0] = g;
        grads
    }

    #[test]
    fn zero_learning_rate_is_noop() {
        let mut net = one_dense_net(1.0);
        let grads = grads_for(&net, 123.0);
        let mut opt = SgdMomentum::new(&net, 0.0, 0.9);
        opt.step(&mut net, &grads).unwrap();
        assert_eq!(net.params()[0].data()[0], 1.0);
    }

    #[test]
    fn plain_sgd_update() {
        // mu=0, eta=1, w=1, g=0.5 -> w=0.5
        let mut net = one_dense_net(1.0);
        let grads = grads_for(&net, 0.5);
        let mut opt = SgdMomentum::new(&net, 1.0, 0.0);
        opt.step(&mut net, &grads).unwrap();
        assert_eq!(net.params()[0].data()[0], 0.5);
    }

    #[test]
    fn momentum_accumulates() {
        let mut net = one_dense_net(0.0);
        let grads = grads_for(&net, 1.0);
        let mut opt = SgdMomentum::new(&net, 0.1, 0.5);
        opt.step(&mut net, &grads).unwrap(); // v=-0.1, w=-0.1
        opt.step(&mut net, &grads).unwrap(); // v=-0.15, w=-0.25
        assert!((net.params()[0].data()[0] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut net = one_dense_net(1.0);
        let grads = grads_for(&net, f64::NAN);
        let mut opt = SgdMomentum::new(&net, 0.1, 0.9);
        assert!(matches!(
            opt.step(&mut net, &grads),
            Err(Error::TrainingAborted(_))
        ));
    }
}
