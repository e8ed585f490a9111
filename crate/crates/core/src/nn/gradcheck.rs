//! Gradient verification against central finite differences.
//!
//! Runs in eval mode (dropout inactive) so the loss is a deterministic
//! function of the parameters. Meant for micro-networks; it perturbs every
//! parameter twice.

use crate::error::Result;
use crate::tensor::Tensor;

use super::{loss, Mode, Network};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (parameter tensor index, flat element index) of the worst error.
    pub worst: (usize, usize),
    pub params_checked: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Loss of the network on one labelled sample, eval mode.
pub fn sample_loss(network: &Network, input: &Tensor, label: usize) -> Result<f64> {
    let probs = network.predict(input)?;
    loss::cross_entropy(&probs, label)
}

/// Move every parameter (biases included) to a generic random point.
///
/// Freshly built networks have all-zero biases, which can leave whole
/// activation vectors sitting exactly on the ReLU kink where central
/// differences and the subgradient legitimately disagree. Checks run at a
/// generic point instead.
pub fn randomize_params(network: &mut Network, scale: f64, rng: &mut crate::rng::ChaCha8Rng) {
    use rand::Rng;
    for p in network.params_mut() {
        for v in p.data_mut() {
            *v = rng.gen_range(-scale..scale);
        }
    }
}

/// Analytic gradients for one sample, flattened in parameter order
/// (layer order, weights then bias).
pub fn analytic_gradients(network: &Network, input: &Tensor, label: usize) -> Result<Vec<Tensor>> {
    let (_, caches) = network.forward_cached(input, Mode::Eval, None)?;
    let grads = network.backward(&caches, label)?;
    let mut flat = Vec::new();
    for g in grads.per_layer.into_iter().flatten() {
        flat.push(g.weights);
        flat.push(g.bias);
    }
    Ok(flat)
}

/// Central finite differences over every parameter of the network.
pub fn numeric_gradients(
    network: &mut Network,
    input: &Tensor,
    label: usize,
    epsilon: f64,
) -> Result<Vec<Tensor>> {
    let shapes: Vec<Vec<usize>> = network.params().iter().map(|p| p.shape().to_vec()).collect();
    let mut out: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
    #[allow(clippy::needless_range_loop)]
    for pi in 0..shapes.len() {
        for ei in 0..out[pi].numel() {
            let orig = network.params()[pi].data()[ei];
            network.params_mut()[pi].data_mut()[ei] = orig + epsilon;
            let plus = sample_loss(network, input, label)?;
            network.params_mut()[pi].data_mut()[ei] = orig - epsilon;
            let minus = sample_loss(network, input, label)?;
            network.params_mut()[pi].data_mut()[ei] = orig;
            out[pi].data_mut()[ei] = (plus - minus) / (2.0 * epsilon);
        }
    }
    Ok(out)
}

/// Relative error between two gradient sets:
/// `|a - n| / max(|a| + |n|, 1e-10)` per element, maximum recorded.
pub fn compare_gradients(
    analytic: &[Tensor],
    numeric: &[Tensor],
    tolerance: f64,
) -> GradCheckReport {
    let mut max_rel_err = 0.0f64;
    let mut worst = (0, 0);
    let mut n = 0usize;
    for (pi, (a, g)) in analytic.iter().zip(numeric).enumerate() {
        for (ei, (&av, &nv)) in a.data().iter().zip(g.data()).enumerate() {
            let denom = (av.abs() + nv.abs()).max(1e-10);
            let rel = (av - nv).abs() / denom;
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = (pi, ei);
            }
            n += 1;
        }
    }
    GradCheckReport {
        max_rel_err,
        worst,
        params_checked: n,
        tolerance,
        pass: max_rel_err.is_finite() && max_rel_err < tolerance,
    }
}

/// Full check: analytic vs central finite differences on one sample.
pub fn gradient_check(
    network: &mut Network,
    input: &Tensor,
    label: usize,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(network, input, label)?;
    let numeric = numeric_gradients(network, input, label, epsilon)?;
    Ok(compare_gradients(&analytic, &numeric, tolerance))
}
