use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{stack_rows, Adam, DenseNet};
use crate::error::{GeeseError, Result};

/// One supervised example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Sample { input, target }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Maximum optimizer steps per call.
    pub max_iters: usize,
    /// Training stops as soon as a batch loss falls below this value.
    pub early_stop_threshold: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, max_iters: 40, early_stop_threshold: 1e-4, batch_size: 64 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GeeseError::InvalidConfig(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        // zero disables early stopping (ablation arm)
        if !(self.early_stop_threshold >= 0.0) {
            return Err(GeeseError::InvalidConfig("early-stop threshold must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(GeeseError::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrads {
    pub loss: f64,
    pub grad_w: Vec<f64>,
    pub grad_x: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub early_stopped: bool,
    pub final_loss: f64,
    pub steps: usize,
}

fn mse_and_upstream(net: &DenseNet, xs: &Array2<f64>, ys: &Array2<f64>) -> Result<(f64, super::Tape, Array2<f64>)> {
    let tape = net.forward_tape(xs.view())?;
    let diff = tape.output() - ys;
    let n = xs.nrows() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let upstream = diff * (2.0 / n);
    Ok((loss, tape, upstream))
}

fn batch_arrays(net: &DenseNet, batch: &[Sample]) -> Result<(Array2<f64>, Array2<f64>)> {
    if batch.is_empty() {
        return Err(GeeseError::InvalidArgument("empty batch".into()));
    }
    let inputs: Vec<Vec<f64>> = batch.iter().map(|s| s.input.clone()).collect();
    let targets: Vec<Vec<f64>> = batch.iter().map(|s| s.target.clone()).collect();
    Ok((stack_rows(&inputs, net.input_dim())?, stack_rows(&targets, net.output_dim())?))
}

/// Mean squared L2 distance over the batch and its exact gradients with
/// respect to the weights and to every input.
pub fn loss_and_grads(net: &DenseNet, batch: &[Sample]) -> Result<LossGrads> {
    let (xs, ys) = batch_arrays(net, batch)?;
    let (loss, tape, upstream) = mse_and_upstream(net, &xs, &ys)?;
    let (grad_w, grad_x) = net.backward(&tape, upstream.view(), true);
    Ok(LossGrads {
        loss,
        grad_w: grad_w.expect("requested"),
        grad_x: grad_x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect(),
    })
}

/// Train with Adam on shuffled mini-batches for at most `cfg.max_iters`
/// steps. Before each step the current batch loss is compared against the
/// early-stop threshold; if it is below, training stops without stepping.
pub fn train<R: rand::Rng + ?Sized>(net: &mut DenseNet, data: &[Sample], cfg: &TrainConfig, rng: &mut R) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (xs, ys) = batch_arrays(net, data)?;
    let n = xs.nrows();
    if cfg.max_iters == 0 {
        let (loss, _, _) = mse_and_upstream(net, &xs, &ys)?;
        return Ok(TrainOutcome { early_stopped: false, final_loss: loss, steps: 0 });
    }
    let bs = cfg.batch_size.min(n);
    let full_batch = bs == n;
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut opt = Adam::new(cfg.learning_rate, net.weights().len());
    let mut last_loss = f64::NAN;
    for iter in 0..cfg.max_iters {
        let (bx, by) = if full_batch {
            (xs.clone(), ys.clone())
        } else {
            if cursor + bs > n {
                order.shuffle(rng);
                cursor = 0;
            }
            let idx = &order[cursor..cursor + bs];
            cursor += bs;
            (xs.select(Axis(0), idx), ys.select(Axis(0), idx))
        };
        let (loss, tape, upstream) = mse_and_upstream(net, &bx, &by)?;
        if !loss.is_finite() {
            return Err(GeeseError::TrainingDiverged { iteration: iter, loss });
        }
        last_loss = loss;
        if loss < cfg.early_stop_threshold {
            return Ok(TrainOutcome { early_stopped: true, final_loss: loss, steps: iter });
        }
        let (grad_w, _) = net.backward(&tape, upstream.view(), true);
        opt.step(net.weights_mut(), &grad_w.expect("requested"));
    }
    Ok(TrainOutcome { early_stopped: false, final_loss: last_loss, steps: cfg.max_iters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::Activation;
    use crate::rng::rng_from;

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        let mut rng = rng_from(1);
        let net = DenseNet::glorot(&[2, 4, 1], Activation::Relu, &mut rng).unwrap();
        let batch: Vec<Sample> = [[0.1, 0.2], [0.7, -0.3]]
            .iter()
            .map(|x| Sample::new(x.to_vec(), net.forward(x).unwrap()))
            .collect();
        let lg = loss_and_grads(&net, &batch).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.grad_w.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn zero_net_unit_target_has_unit_loss() {
        let net = DenseNet::zeros(&[1, 3, 1], Activation::Relu).unwrap();
        let lg = loss_and_grads(&net, &[Sample::new(vec![0.4], vec![1.0])]).unwrap();
        assert_eq!(lg.loss, 1.0);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let net = DenseNet::zeros(&[1, 1], Activation::Relu).unwrap();
        assert!(matches!(loss_and_grads(&net, &[]), Err(GeeseError::InvalidArgument(_))));
    }

    #[test]
    fn early_stop_at_iteration_zero_when_already_fit() {
        let mut rng = rng_from(2);
        let mut net = DenseNet::glorot(&[2, 5, 1], Activation::Relu, &mut rng).unwrap();
        let data: Vec<Sample> = (0..8)
            .map(|i| {
                let x = vec![i as f64 * 0.1, 1.0 - i as f64 * 0.05];
                let y = net.forward(&x).unwrap();
                Sample::new(x, y)
            })
            .collect();
        let before = net.clone();
        let out = train(&mut net, &data, &TrainConfig::default(), &mut rng).unwrap();
        assert!(out.early_stopped);
        assert_eq!(out.steps, 0);
        assert_eq!(net, before);
    }

    #[test]
    fn zero_iters_leaves_net_unchanged() {
        let mut rng = rng_from(3);
        let mut net = DenseNet::glorot(&[1, 4, 1], Activation::Relu, &mut rng).unwrap();
        let before = net.clone();
        let cfg = TrainConfig { max_iters: 0, ..TrainConfig::default() };
        let out = train(&mut net, &[Sample::new(vec![1.0], vec![5.0])], &cfg, &mut rng).unwrap();
        assert!(!out.early_stopped);
        assert_eq!(net, before);
    }

    #[test]
    fn regression_loss_decreases() {
        let mut rng = rng_from(4);
        let mut net = DenseNet::glorot(&[1, 16, 1], Activation::Relu, &mut rng).unwrap();
        let data: Vec<Sample> = (0..32)
            .map(|i| {
                let x = i as f64 / 31.0 * 2.0 - 1.0;
                Sample::new(vec![x], vec![2.0 * x])
            })
            .collect();
        let initial = loss_and_grads(&net, &data).unwrap().loss;
        let cfg = TrainConfig { learning_rate: 1e-2, max_iters: 200, early_stop_threshold: 1e-12, batch_size: 32 };
        let out = train(&mut net, &data, &cfg, &mut rng).unwrap();
        assert!(out.final_loss < initial, "{} !< {}", out.final_loss, initial);
        assert!(loss_and_grads(&net, &data).unwrap().loss < 0.1 * initial);
    }

    #[test]
    fn divergence_is_reported_with_iteration() {
        let mut rng = rng_from(5);
        let mut net = DenseNet::glorot(&[1, 4, 1], Activation::Relu, &mut rng).unwrap();
        let data = vec![Sample::new(vec![1.0], vec![f64::INFINITY])];
        let err = train(&mut net, &data, &TrainConfig::default(), &mut rng).unwrap_err();
        assert!(matches!(err, GeeseError::TrainingDiverged { iteration: 0, .. }));
    }

    #[test]
    fn minibatch_training_is_deterministic() {
        let data: Vec<Sample> = (0..50).map(|i| Sample::new(vec![i as f64 / 50.0, 0.3], vec![(i as f64 / 7.0).sin()])).collect();
        let cfg = TrainConfig { learning_rate: 1e-2, max_iters: 30, early_stop_threshold: 0.0, batch_size: 8 };
        let run = || {
            let mut rng = rng_from(9);
            let mut net = DenseNet::glorot(&[2, 8, 1], Activation::Relu, &mut rng).unwrap();
            train(&mut net, &data, &cfg, &mut rng).unwrap();
            net
        };
        assert_eq!(run().weights(), run().weights());
    }
}
