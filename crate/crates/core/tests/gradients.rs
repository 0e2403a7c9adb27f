mod common;

use std::sync::Arc;

use geese::evaluators::{
    postprocess_monotone, postprocess_monotone_vjp, BalanceError, Bounds, ExplicitError, FeasibleDomainError, OrderingError,
};
use geese::netcore::{loss_and_grads, stack_rows, Activation, DenseNet};
use geese::surrogate::{Ensemble, HybridErrorModel, SurrogateTarget};
use proptest::prelude::*;

use common::{min_hidden_preactivation, plain_forward, plain_loss, random_batch, rng};

const STEP: f64 = 1e-6;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backprop_matches_finite_differences(seed in any::<u64>(), tanh in any::<bool>(), sizes in prop::collection::vec(1usize..6, 2..5)) {
        let mut r = rng(seed);
        let act = if tanh { Activation::Tanh } else { Activation::Relu };
        let net = DenseNet::glorot(&sizes, act, &mut r).unwrap();
        let batch = random_batch(&mut r, sizes[0], *sizes.last().unwrap(), 4);
        prop_assume!(min_hidden_preactivation(&net, &batch) > 1e-3);
        let g = loss_and_grads(&net, &batch).unwrap();
        prop_assert!((g.loss - plain_loss(&net, &batch)).abs() < 1e-12);
        for (i, gi) in g.grad_w.iter().enumerate() {
            let mut p = net.clone();
            p.weights_mut()[i] += STEP;
            let mut m = net.clone();
            m.weights_mut()[i] -= STEP;
            let fd = (plain_loss(&p, &batch) - plain_loss(&m, &batch)) / (2.0 * STEP);
            prop_assert!(rel(*gi, fd) < 1e-4, "weight {}: {} vs {}", i, gi, fd);
        }
    }

    #[test]
    fn forward_matches_plain_loops(seed in any::<u64>(), sizes in prop::collection::vec(1usize..7, 2..5)) {
        let mut r = rng(seed);
        let net = DenseNet::glorot(&sizes, Activation::Relu, &mut r).unwrap();
        let batch = random_batch(&mut r, sizes[0], 1, 3);
        for s in &batch {
            let a = net.forward(&s.input).unwrap();
            for (x, y) in a.iter().zip(plain_forward(&net, &s.input)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hybrid_input_gradient_matches_finite_differences(seed in any::<u64>(), d in 2usize..6) {
        let mut r = rng(seed);
        let members = (0..3).map(|_| DenseNet::glorot(&[d, 6, 2], Activation::Tanh, &mut r).unwrap()).collect();
        let bounds = Bounds::unit(d);
        let explicit: Vec<Arc<dyn ExplicitError>> = vec![
            Arc::new(FeasibleDomainError { bounds: bounds.clone() }),
            Arc::new(BalanceError { bounds }),
            Arc::new(OrderingError),
        ];
        let model = HybridErrorModel::new(Ensemble::new(members).unwrap(), explicit, vec![1.0, 0.5, 0.1, 0.3, 2.0], SurrogateTarget::Elementwise).unwrap();
        let x: Vec<f64> = (0..d).map(|i| 0.1 + 0.8 * (i as f64 + rand::Rng::random_range(&mut r, 0.0..0.5)) / d as f64).collect();
        let (_, g) = model.hybrid_error(&x).unwrap();
        for i in 0..d {
            let mut p = x.clone();
            p[i] += STEP;
            let mut m = x.clone();
            m[i] -= STEP;
            let fd = (model.hybrid_error(&p).unwrap().0 - model.hybrid_error(&m).unwrap().0) / (2.0 * STEP);
            prop_assert!((g[i] - fd).abs() < 1e-5 * fd.abs().max(1.0), "coord {}: {} vs {}", i, g[i], fd);
        }
        let xs = stack_rows(&[x.clone(), x.clone()], d).unwrap();
        let (vals, grads) = model.value_grad_batch(xs.view()).unwrap();
        prop_assert_eq!(vals[0], vals[1]);
        prop_assert_eq!(grads.row(0).to_vec(), g);
    }

    #[test]
    fn monotone_postprocess_vjp_matches_finite_differences(raw in prop::collection::vec(0.01f64..0.99, 2..10), up_seed in any::<u64>()) {
        let mut r = rng(up_seed);
        let up: Vec<f64> = raw.iter().map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
        let g = postprocess_monotone_vjp(&raw, &up);
        let f = |v: &[f64]| postprocess_monotone(v).iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..raw.len() {
            let mut p = raw.clone();
            p[i] += STEP;
            let mut m = raw.clone();
            m[i] -= STEP;
            let fd = (f(&p) - f(&m)) / (2.0 * STEP);
            prop_assert!((g[i] - fd).abs() < 1e-6, "{} vs {}", g[i], fd);
        }
    }
}
