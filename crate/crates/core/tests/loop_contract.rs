mod common;

use geese::evaluators::builtin_problem;
use geese::exec::ExecMode;
use geese::geese::{run, tg_schedule};
use proptest::prelude::*;

use common::{floored_problem, tiny_config};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn archive_and_accounting_stay_consistent(seed in any::<u64>(), init in 2usize..8, extra in 0usize..20, focus_off in any::<bool>()) {
        let spec = floored_problem(3, 0.2, 0.25);
        let mut cfg = tiny_config(&spec, init + extra, init, seed);
        if focus_off {
            cfg.focus_coefficient = f64::INFINITY;
        }
        let out = run(&spec, &cfg).unwrap();
        prop_assert!(out.total_queries <= cfg.budget);
        prop_assert_eq!(out.total_queries, out.query_log.len());
        prop_assert_eq!(out.total_queries, init + out.traces.iter().map(|t| t.queries).sum::<usize>());
        let mut last = init;
        for t in &out.traces {
            prop_assert!(t.archive_size >= last);
            prop_assert_eq!(t.archive_size, last + t.queries);
            prop_assert_eq!(t.tg_used, tg_schedule(cfg.train_freq_coeff, t.n_early, cfg.ensemble_size));
            prop_assert!(t.n_early <= cfg.ensemble_size);
            if focus_off {
                prop_assert!(!t.exploit_skipped);
            }
            last = t.archive_size;
        }
        if !out.success {
            let best = out.query_log.iter().map(|r| spec.accumulate(&r.errors)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(out.final_accumulated_error, best);
        } else {
            prop_assert!(out.final_accumulated_error <= spec.epsilon);
        }
    }
}

#[test]
fn full_early_stop_count_triples_next_interval() {
    let spec = floored_problem(3, 1.0, 0.5);
    let mut cfg = tiny_config(&spec, 20, 4, 3);
    cfg.early_stop = 1e9;
    cfg.train_freq_coeff = 2;
    let out = run(&spec, &cfg).unwrap();
    assert!(out.traces.len() > 2);
    assert!(out.traces[1..].iter().all(|t| t.n_early == cfg.ensemble_size && t.tg_used == 3 * cfg.train_freq_coeff));
}

#[test]
fn zero_early_stop_threshold_never_stops_early() {
    let spec = floored_problem(3, 1.0, 0.5);
    let mut cfg = tiny_config(&spec, 20, 4, 3);
    cfg.early_stop = 0.0;
    let out = run(&spec, &cfg).unwrap();
    assert!(out.traces.iter().all(|t| t.n_early == 0 && t.tg_used == cfg.train_freq_coeff));
}

#[test]
fn budget_equal_to_archive_runs_no_iterations() {
    let spec = floored_problem(3, 1.0, 0.5);
    let out = run(&spec, &tiny_config(&spec, 6, 6, 1)).unwrap();
    assert!(out.traces.is_empty());
    assert_eq!(out.total_queries, 6);
    assert!(!out.success);
}

#[test]
fn unreachable_threshold_spends_the_whole_budget() {
    let spec = floored_problem(2, 1.0, 0.5);
    let out = run(&spec, &tiny_config(&spec, 30, 4, 9)).unwrap();
    assert!(!out.success);
    assert_eq!(out.total_queries, 30);
    assert_eq!(out.queries_excluding_init, 26);
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let spec = builtin_problem("S1").unwrap();
    let mut cfg = tiny_config(&spec, 40, 8, 17);
    cfg.ensemble_size = 3;
    let seq = run(&spec, &cfg).unwrap();
    cfg.exec = ExecMode::Parallel;
    let par = run(&spec, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&seq).unwrap(), serde_json::to_string(&par).unwrap());
}
