//! Reference optimizers sharing the ledger: random search, a generational
//! GA and a standard PSO. They search the same unit cube as the main loop
//! and start from the same initial design.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{GeeseError, Result};
use crate::evaluators::{ProblemSpec, QueryLedger};
use crate::geese::{initial_design, query, RunOutcome};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineAlgo {
    Random,
    Ga,
    Pso,
}

impl BaselineAlgo {
    pub fn name(self) -> &'static str {
        match self {
            BaselineAlgo::Random => "random",
            BaselineAlgo::Ga => "ga",
            BaselineAlgo::Pso => "pso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub tournament: usize,
    pub crossover: f64,
    /// Mutation standard deviation as a fraction of each coordinate's range.
    pub mutation_std: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams { tournament: 2, crossover: 0.9, mutation_std: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams { inertia: 0.729, cognitive: 1.49445, social: 1.49445 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub algo: BaselineAlgo,
    pub population: usize,
    pub ga: GaParams,
    pub pso: PsoParams,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn new(algo: BaselineAlgo, seed: u64) -> Self {
        BaselineConfig { algo, population: 64, ga: GaParams::default(), pso: PsoParams::default(), seed }
    }
}

/// Run one baseline. Stops at the first feasible state; running out of
/// budget yields a failed outcome.
pub fn run_baseline(spec: &ProblemSpec, cfg: &BaselineConfig, budget: usize) -> Result<RunOutcome> {
    let needed = match cfg.algo {
        BaselineAlgo::Random => 1,
        BaselineAlgo::Ga | BaselineAlgo::Pso => {
            if cfg.population < 2 {
                return Err(GeeseError::InvalidConfig("population must be at least 2".into()));
            }
            cfg.population
        }
    };
    if budget < needed {
        return Err(GeeseError::InvalidConfig(format!("budget {budget} is below the population {needed}")));
    }
    let mut search = Search { spec, ledger: QueryLedger::new(budget)?, found: None };
    match cfg.algo {
        BaselineAlgo::Random => random_search(&mut search, cfg)?,
        BaselineAlgo::Ga => genetic(&mut search, cfg)?,
        BaselineAlgo::Pso => swarm(&mut search, cfg)?,
    }
    let init = cfg.population.min(search.ledger.count());
    Ok(RunOutcome::from_ledger(spec, search.ledger, search.found, init, Vec::new()))
}

struct Search<'a> {
    spec: &'a ProblemSpec,
    ledger: QueryLedger,
    found: Option<(Vec<f64>, f64)>,
}

impl Search<'_> {
    /// Evaluate a raw search point. `None` once the run is over.
    fn eval(&mut self, raw: &[f64]) -> Result<Option<f64>> {
        if self.found.is_some() || self.ledger.is_exhausted() {
            return Ok(None);
        }
        let state = self.spec.decode(raw);
        let (_, r) = query(self.spec, &mut self.ledger, &state)?;
        if r.feasible {
            self.found = Some((self.spec.bounds.denormalize(&state), r.accumulated));
        }
        Ok(Some(r.accumulated))
    }

    fn done(&self) -> bool {
        self.found.is_some() || self.ledger.is_exhausted()
    }
}

fn random_search(s: &mut Search<'_>, cfg: &BaselineConfig) -> Result<()> {
    for raw in initial_design(s.spec.state_dim(), s.ledger.budget(), cfg.seed) {
        if s.eval(&raw)?.is_none() {
            break;
        }
    }
    Ok(())
}

fn evaluate_all(s: &mut Search<'_>, pop: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    let mut fit = Vec::with_capacity(pop.len());
    for p in pop {
        match s.eval(p)? {
            Some(f) => fit.push(f),
            None => return Ok(None),
        }
    }
    Ok(Some(fit))
}

fn tournament(r: &mut rng::Rng, fit: &[f64], size: usize) -> usize {
    let mut best = r.random_range(0..fit.len());
    for _ in 1..size {
        let c = r.random_range(0..fit.len());
        if fit[c] < fit[best] {
            best = c;
        }
    }
    best
}

fn genetic(s: &mut Search<'_>, cfg: &BaselineConfig) -> Result<()> {
    let d = s.spec.state_dim();
    let mut r = rng::child_rng(cfg.seed, rng::STREAM_BASELINE, 1);
    let noise = Normal::new(0.0, cfg.ga.mutation_std).map_err(|e| GeeseError::InvalidConfig(e.to_string()))?;
    let mut pop = initial_design(d, cfg.population, cfg.seed);
    let Some(mut fit) = evaluate_all(s, &pop)? else { return Ok(()) };
    while !s.done() {
        let elite = (0..pop.len()).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).expect("non-empty population");
        let mut next = vec![pop[elite].clone()];
        while next.len() < pop.len() {
            let a = &pop[tournament(&mut r, &fit, cfg.ga.tournament)];
            let b = &pop[tournament(&mut r, &fit, cfg.ga.tournament)];
            let mut child: Vec<f64> = if r.random_bool(cfg.ga.crossover) {
                a.iter().zip(b).map(|(x, y)| if r.random_bool(0.5) { *x } else { *y }).collect()
            } else {
                a.clone()
            };
            for g in &mut child {
                if r.random_range(0.0..1.0) < 1.0 / d as f64 {
                    *g = (*g + noise.sample(&mut r)).clamp(0.0, 1.0);
                }
            }
            next.push(child);
        }
        let Some(child_fit) = evaluate_all(s, &next[1..])? else { return Ok(()) };
        fit = std::iter::once(fit[elite]).chain(child_fit).collect();
        pop = next;
    }
    Ok(())
}

/// Mirror a coordinate back into [0, 1], flipping its velocity.
fn reflect(x: &mut f64, v: &mut f64) {
    if *x < 0.0 {
        *x = -*x;
        *v = -*v;
    } else if *x > 1.0 {
        *x = 2.0 - *x;
        *v = -*v;
    }
    *x = x.clamp(0.0, 1.0);
}

fn swarm(s: &mut Search<'_>, cfg: &BaselineConfig) -> Result<()> {
    let d = s.spec.state_dim();
    let p = cfg.pso;
    let mut r = rng::child_rng(cfg.seed, rng::STREAM_BASELINE, 2);
    let mut pos = initial_design(d, cfg.population, cfg.seed);
    let mut vel: Vec<Vec<f64>> = (0..pos.len()).map(|_| (0..d).map(|_| r.random_range(-0.1..=0.1)).collect()).collect();
    let Some(fit) = evaluate_all(s, &pos)? else { return Ok(()) };
    let mut best_pos = pos.clone();
    let mut best_fit = fit;
    let mut g = (0..pos.len()).min_by(|&a, &b| best_fit[a].total_cmp(&best_fit[b])).expect("non-empty swarm");
    while !s.done() {
        for i in 0..pos.len() {
            for j in 0..d {
                let (r1, r2): (f64, f64) = (r.random(), r.random());
                vel[i][j] = p.inertia * vel[i][j] + p.cognitive * r1 * (best_pos[i][j] - pos[i][j]) + p.social * r2 * (best_pos[g][j] - pos[i][j]);
                pos[i][j] += vel[i][j];
                reflect(&mut pos[i][j], &mut vel[i][j]);
            }
            let Some(f) = s.eval(&pos[i])? else { return Ok(()) };
            if f < best_fit[i] {
                best_fit[i] = f;
                best_pos[i] = pos[i].clone();
                if f < best_fit[g] {
                    g = i;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluators::builtin_problem;

    #[test]
    fn loose_threshold_random_succeeds_first_query() {
        let spec = builtin_problem("S1").unwrap().with_epsilon(1e6).unwrap();
        let out = run_baseline(&spec, &BaselineConfig::new(BaselineAlgo::Random, 0), 10).unwrap();
        assert!(out.success);
        assert_eq!(out.total_queries, 1);
    }

    #[test]
    fn budget_below_population_is_rejected() {
        let spec = builtin_problem("S1").unwrap();
        let cfg = BaselineConfig { population: 20, ..BaselineConfig::new(BaselineAlgo::Ga, 0) };
        assert!(matches!(run_baseline(&spec, &cfg, 10), Err(GeeseError::InvalidConfig(_))));
    }

    #[test]
    fn baselines_respect_budget() {
        let spec = builtin_problem("S2").unwrap().with_epsilon(1e-9).unwrap();
        for algo in [BaselineAlgo::Random, BaselineAlgo::Ga, BaselineAlgo::Pso] {
            let cfg = BaselineConfig { population: 8, ..BaselineConfig::new(algo, 3) };
            let out = run_baseline(&spec, &cfg, 37).unwrap();
            assert!(!out.success);
            assert_eq!(out.total_queries, 37);
        }
    }

    #[test]
    fn reflection_stays_in_box() {
        let (mut x, mut v) = (1.3, 0.5);
        reflect(&mut x, &mut v);
        assert!((x - 0.7).abs() < 1e-15 && v == -0.5);
        let (mut x, mut v) = (-2.5, -3.0);
        reflect(&mut x, &mut v);
        assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn random_search_shares_the_initial_design() {
        let spec = builtin_problem("S1").unwrap().with_epsilon(1e-9).unwrap();
        let out = run_baseline(&spec, &BaselineConfig::new(BaselineAlgo::Random, 4), 5).unwrap();
        let design = initial_design(spec.state_dim(), 5, 4);
        for (rec, raw) in out.query_log.iter().zip(design) {
            assert_eq!(rec.state, spec.search_to_state(&raw));
        }
    }
}
