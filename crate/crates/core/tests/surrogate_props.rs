mod common;

use geese::generators::{argmax_first, argmin_first, ExploreGenerator};
use geese::netcore::{stack_rows, Activation, DenseNet, Sample, TrainConfig};
use geese::surrogate::{fit_ensemble_update, member_training_sets, Ensemble};
use geese::exec::ExecMode;
use proptest::prelude::*;
use rand::Rng;

use common::{plain_forward, rng};

fn members(seed: u64, l: usize, d: usize, k: usize) -> Vec<DenseNet> {
    let mut r = rng(seed);
    (0..l).map(|_| DenseNet::glorot(&[d, 5, k], Activation::Tanh, &mut r).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ensemble_mean_is_member_average(seed in any::<u64>(), l in 1usize..6, d in 1usize..5, k in 1usize..4) {
        let ms = members(seed, l, d, k);
        let x: Vec<f64> = (0..d).map(|i| (i as f64 * 0.37).fract()).collect();
        let ens = Ensemble::new(ms.clone()).unwrap();
        let p = ens.predict_implicit(&x).unwrap();
        for (j, pj) in p.iter().enumerate() {
            let mean = ms.iter().map(|m| plain_forward(m, &x)[j]).sum::<f64>() / l as f64;
            prop_assert!((pj - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn member_order_does_not_matter(seed in any::<u64>(), l in 2usize..6, shift in 0usize..6) {
        let ms = members(seed, l, 3, 2);
        let mut rotated = ms.clone();
        rotated.rotate_left(shift % l);
        let (a, b) = (Ensemble::new(ms).unwrap(), Ensemble::new(rotated).unwrap());
        let x = [0.2, 0.5, 0.9];
        for (p, q) in a.predict_implicit(&x).unwrap().iter().zip(b.predict_implicit(&x).unwrap()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        for (p, q) in a.disagreement(&x).unwrap().sigma.iter().zip(b.disagreement(&x).unwrap().sigma) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn disagreement_is_nonnegative_and_zero_for_clones(seed in any::<u64>(), l in 2usize..6) {
        let ms = members(seed, l, 2, 2);
        let x = [0.3, 0.7];
        prop_assert!(Ensemble::new(ms.clone()).unwrap().disagreement(&x).unwrap().sigma.iter().all(|s| *s >= 0.0));
        let clones = Ensemble::new(vec![ms[0].clone(); l]).unwrap();
        prop_assert!(clones.disagreement(&x).unwrap().sigma.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn argmin_matches_scan_and_ignores_monotone_transforms(v in prop::collection::vec(-10.0f64..10.0, 1..40), c in -5.0f64..5.0, s in 0.1f64..10.0) {
        let scan = (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
        prop_assert_eq!(argmin_first(&v), Some(scan));
        let shifted: Vec<f64> = v.iter().map(|x| s * x + c).collect();
        prop_assert_eq!(argmin_first(&shifted), Some(scan));
        let scan_max = (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        prop_assert_eq!(argmax_first(&v), Some(scan_max));
    }

    #[test]
    fn explore_selection_matches_exhaustive_scan(seed in any::<u64>()) {
        let ens = Ensemble::new(members(seed, 3, 4, 2)).unwrap();
        let gen = ExploreGenerator::new(8, 4, 16, false, seed).unwrap();
        let w = [1.0, 0.5];
        let pick = gen.select_explore(&ens, &w).unwrap();
        let cands = gen.candidates().unwrap();
        let scores: Vec<f64> = cands.rows().into_iter().map(|row| ens.weighted_disagreement(row.as_slice().unwrap(), &w).unwrap()).collect();
        let scan = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        prop_assert_eq!(pick.index, scan);
        prop_assert_eq!(pick.state, cands.row(scan).to_vec());
    }
}

#[test]
fn update_sets_hold_new_pairs_and_archive_draws() {
    let mut r = rng(4);
    let sample = |r: &mut rand_chacha::ChaCha8Rng| Sample::new(vec![r.random_range(0.0..1.0)], vec![r.random_range(0.0..1.0)]);
    let archive: Vec<Sample> = (0..10).map(|_| sample(&mut r)).collect();
    let fresh: Vec<Sample> = (0..2).map(|_| sample(&mut r)).collect();
    let sets = member_training_sets(&fresh, &archive, 6, 4, 11).unwrap();
    assert_eq!(sets.len(), 4);
    for s in &sets {
        assert_eq!(s.len(), 8);
        assert_eq!(&s[..2], &fresh[..]);
        assert!(s[2..].iter().all(|p| archive.contains(p)));
    }
    assert_ne!(sets[0], sets[1]);
}

#[test]
fn update_never_touches_unrelated_state_and_counts_early_stops() {
    let archive: Vec<Sample> = (0..8).map(|i| Sample::new(vec![i as f64 / 8.0], vec![0.5])).collect();
    let mut ens = Ensemble::random(3, &[1, 4, 1], Activation::Relu, 2).unwrap();
    let cfg = TrainConfig { early_stop_threshold: 1e9, ..TrainConfig::default() };
    let before = ens.clone();
    let n = fit_ensemble_update(&mut ens, &archive[..1], &archive, 4, &cfg, 0, ExecMode::Parallel).unwrap();
    assert_eq!(n, 3);
    assert_eq!(ens, before);
    let xs = stack_rows(&[vec![0.1], vec![0.2]], 1).unwrap();
    assert_eq!(ens.predict_batch(xs.view()).unwrap().nrows(), 2);
}
