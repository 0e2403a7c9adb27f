//! Central finite differences, used as the oracle for backprop.

use serde::{Deserialize, Serialize};

use super::{DenseNet, Sample};
use crate::error::{GeeseError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub per_weight_errors: Vec<f64>,
}

/// Mean squared L2 distance, computed with plain loops over single-sample
/// forwards.
pub fn batch_loss(net: &DenseNet, batch: &[Sample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(GeeseError::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for s in batch {
        let out = net.forward(&s.input)?;
        if out.len() != s.target.len() {
            return Err(GeeseError::ShapeMismatch { expected: out.len(), got: s.target.len() });
        }
        total += out.iter().zip(&s.target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

pub fn finite_diff_grad(net: &DenseNet, batch: &[Sample], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(GeeseError::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    let mut probe = net.clone();
    let mut grad = vec![0.0; net.weights().len()];
    for (i, g) in grad.iter_mut().enumerate() {
        let w0 = net.weights()[i];
        probe.weights_mut()[i] = w0 + step;
        let plus = batch_loss(&probe, batch)?;
        probe.weights_mut()[i] = w0 - step;
        let minus = batch_loss(&probe, batch)?;
        probe.weights_mut()[i] = w0;
        *g = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|, floor)`. The floor keeps gradients that are
/// zero up to rounding from producing spurious large ratios.
pub fn relative_error(a: f64, b: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

pub fn grad_check(net: &DenseNet, batch: &[Sample], step: f64) -> Result<GradCheckReport> {
    let analytic = super::loss_and_grads(net, batch)?.grad_w;
    let numeric = finite_diff_grad(net, batch, step)?;
    let per_weight_errors: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| relative_error(*a, *b)).collect();
    let max_relative_error = per_weight_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport { max_relative_error, per_weight_errors })
}

/// Smallest |pre-activation| over all hidden units and batch rows. Values
/// near zero mean a rectifier kink sits within finite-difference reach.
pub fn min_abs_preactivation(net: &DenseNet, batch: &[Sample]) -> Result<f64> {
    let inputs: Vec<Vec<f64>> = batch.iter().map(|s| s.input.clone()).collect();
    let xs = super::stack_rows(&inputs, net.input_dim())?;
    let tape = net.forward_tape(xs.view())?;
    let hidden = &tape.preactivations()[..net.num_layers() - 1];
    Ok(hidden.iter().flat_map(|z| z.iter()).fold(f64::INFINITY, |m, z| m.min(z.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::Activation;

    #[test]
    fn zero_loss_gives_near_zero_fd_gradient() {
        let net = DenseNet::from_weights(&[1, 1], Activation::Relu, vec![0.5, 0.1]).unwrap();
        let batch = vec![Sample::new(vec![2.0], vec![1.1])];
        let g = finite_diff_grad(&net, &batch, 1e-5).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn single_weight_quadratic_matches_analytic() {
        // loss(w) = (w * 1 - 0)^2 = w^2, derivative 2w
        let w = 0.37;
        let net = DenseNet::from_weights(&[1, 1], Activation::Relu, vec![w, 0.0]).unwrap();
        let batch = vec![Sample::new(vec![1.0], vec![0.0])];
        let g = finite_diff_grad(&net, &batch, 1e-5).unwrap();
        assert!((g[0] - 2.0 * w).abs() < 1e-6);
    }

    #[test]
    fn nonpositive_step_rejected() {
        let net = DenseNet::zeros(&[1, 1], Activation::Relu).unwrap();
        assert!(finite_diff_grad(&net, &[Sample::new(vec![0.0], vec![0.0])], 0.0).is_err());
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!(relative_error(1e-12, 2e-12) < 1e-5);
    }
}
