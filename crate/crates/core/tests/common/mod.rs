#![allow(dead_code)]

use std::sync::Arc;

use geese::evaluators::{Bounds, ExplicitError, FnImplicit, ProblemSpec, SquaredDistance};
use geese::geese::GeeseConfig;
use geese::netcore::{Activation, DenseNet, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::Tanh => v.tanh(),
        Activation::Identity => v,
    }
}

/// Forward pass written directly against the flat weight layout: for each
/// layer an `n_in x n_out` row-major matrix followed by `n_out` biases.
pub fn plain_forward(net: &DenseNet, x: &[f64]) -> Vec<f64> {
    let sizes = net.layer_sizes();
    let w = net.weights();
    let mut a = x.to_vec();
    let mut off = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut z = vec![0.0; n_out];
        for (j, zj) in z.iter_mut().enumerate() {
            for (i, ai) in a.iter().enumerate() {
                *zj += ai * w[off + i * n_out + j];
            }
            *zj += w[off + n_in * n_out + j];
        }
        off += n_in * n_out + n_out;
        if l + 2 < sizes.len() {
            z.iter_mut().for_each(|v| *v = act(net.activation(), *v));
        }
        a = z;
    }
    a
}

pub fn plain_loss(net: &DenseNet, batch: &[Sample]) -> f64 {
    batch
        .iter()
        .map(|s| plain_forward(net, &s.input).iter().zip(&s.target).map(|(o, t)| (o - t).powi(2)).sum::<f64>())
        .sum::<f64>()
        / batch.len() as f64
}

pub fn random_sizes<R: Rng>(r: &mut R) -> Vec<usize> {
    let layers = r.random_range(2..=4);
    (0..layers).map(|_| r.random_range(1..=6)).collect()
}

pub fn random_batch<R: Rng>(r: &mut R, n_in: usize, n_out: usize, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            Sample::new(
                (0..n_in).map(|_| r.random_range(-1.0..1.0)).collect(),
                (0..n_out).map(|_| r.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect()
}

/// Smallest hidden pre-activation magnitude over a batch (ReLU kink distance).
pub fn min_hidden_preactivation(net: &DenseNet, batch: &[Sample]) -> f64 {
    let sizes = net.layer_sizes();
    if sizes.len() < 3 {
        return f64::INFINITY;
    }
    let mut m = f64::INFINITY;
    for s in batch {
        let mut a = s.input.clone();
        for l in 0..sizes.len() - 2 {
            let sub = DenseNet::from_weights(&sizes[l..=l + 1], Activation::Identity, layer_weights(net, l)).unwrap();
            let z = plain_forward(&sub, &a);
            m = z.iter().fold(m, |m, v| m.min(v.abs()));
            a = z.iter().map(|v| act(net.activation(), *v)).collect();
        }
    }
    m
}

fn layer_weights(net: &DenseNet, l: usize) -> Vec<f64> {
    let (w, b) = net.layer_ranges(l);
    let mut out = net.weights()[w].to_vec();
    out.extend_from_slice(&net.weights()[b]);
    out
}

/// Explicit-only problem: accumulated error is a squared distance plus a
/// constant floor that no state can beat.
pub fn floored_problem(dim: usize, floor: f64, epsilon: f64) -> ProblemSpec {
    let implicit = FnImplicit::new(1, move |x: &[f64]| vec![floor + x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>()]);
    let explicit: Vec<Arc<dyn ExplicitError>> = vec![Arc::new(SquaredDistance { center: vec![0.6; dim] })];
    ProblemSpec::new("floored", Bounds::unit(dim), vec![1.0, 0.1], epsilon, Arc::new(implicit), explicit).unwrap()
}

/// A loop configuration small enough for fuzzing.
pub fn tiny_config(spec: &ProblemSpec, budget: usize, init: usize, seed: u64) -> GeeseConfig {
    let mut cfg = GeeseConfig::for_problem(spec);
    cfg.budget = budget;
    cfg.init_size = init;
    cfg.seed = seed;
    cfg.base_hidden = vec![4];
    cfg.exploit_hidden = vec![4];
    cfg.explore_hidden = 4;
    cfg.latent.n_exploit = 4;
    cfg.latent.n_explore = 4;
    cfg.initial_fit_iters = 10;
    cfg.max_train_iters = 5;
    cfg.ensemble_size = 2;
    cfg.exec = geese::exec::ExecMode::Sequential;
    cfg
}

pub fn median(v: &mut [usize]) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}
