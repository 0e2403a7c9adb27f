//! The query-budgeted correction loop: alternate a surrogate-guided
//! exploitation query with a disagreement-driven exploration query, grow
//! the archive, and fine-tune the ensemble until a state meets the
//! threshold or the budget runs out.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{GeeseError, Result};
use crate::evaluators::{evaluate, EvalResult, ProblemSpec, QueryLedger, QueryRecord};
use crate::exec::ExecMode;
use crate::generators::{DiversityReg, ExploitGenerator, ExploitMode, ExploreGenerator, LatentSpec};
use crate::netcore::{Activation, Sample, TrainConfig};
use crate::rng;
use crate::surrogate::{fit_ensemble_initial, fit_ensemble_update, Ensemble, HybridErrorModel, SurrogateTarget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeeseConfig {
    pub budget: usize,
    pub max_train_iters: usize,
    pub early_stop: f64,
    pub init_size: usize,
    /// `f64::INFINITY` disables the focus filter.
    pub focus_coefficient: f64,
    pub train_freq_coeff: usize,
    pub ensemble_size: usize,
    pub lr_generator: f64,
    pub lr_base: f64,
    pub latent: LatentSpec,
    pub exploit_mode: ExploitMode,
    pub regularizer_on: bool,
    pub seed: u64,
    /// Hidden widths of every ensemble member.
    pub base_hidden: Vec<usize>,
    pub exploit_hidden: Vec<usize>,
    pub explore_hidden: usize,
    /// Iteration cap for the bootstrap fit on the initial archive.
    pub initial_fit_iters: usize,
    pub batch_size: usize,
    pub surrogate_target: SurrogateTarget,
    /// Train the exploration generator instead of resampling it.
    pub trainable_explore: bool,
    pub exec: ExecMode,
}

impl GeeseConfig {
    /// Defaults for a problem with `state_dim` coordinates.
    pub fn new(state_dim: usize) -> Self {
        GeeseConfig {
            budget: 1000,
            max_train_iters: 40,
            early_stop: 1e-4,
            init_size: 64,
            focus_coefficient: 1.5,
            train_freq_coeff: 1,
            ensemble_size: 4,
            lr_generator: 1e-2,
            lr_base: 1e-3,
            latent: LatentSpec { dim: state_dim, range: 5.0, n_exploit: 64, n_explore: 64 },
            exploit_mode: ExploitMode::Network,
            regularizer_on: true,
            seed: 0,
            base_hidden: vec![64, 128, 64],
            exploit_hidden: vec![64],
            explore_hidden: 64,
            initial_fit_iters: 400,
            batch_size: 64,
            surrogate_target: SurrogateTarget::Elementwise,
            trainable_explore: false,
            exec: ExecMode::default(),
        }
    }

    /// Defaults tuned per built-in problem; other problems get the S1 set.
    pub fn for_problem(spec: &ProblemSpec) -> Self {
        let mut cfg = Self::new(spec.state_dim());
        let (c, delta, n_it, width) = match spec.name.as_str() {
            "S2" => (2.0, 1, 128, 128),
            "S3" => (5.0, 7, 256, 64),
            _ => (1.5, 1, 64, 64),
        };
        cfg.focus_coefficient = c;
        cfg.train_freq_coeff = delta;
        cfg.latent.n_exploit = n_it;
        cfg.exploit_hidden = vec![width];
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GeeseError::InvalidConfig(m.into()));
        if self.init_size == 0 {
            return bad("init_size must be at least 1");
        }
        if self.budget < self.init_size {
            return Err(GeeseError::BudgetExceeded { budget: self.budget });
        }
        if !(self.focus_coefficient >= 1.0) {
            return bad("focus coefficient must be at least 1");
        }
        if self.train_freq_coeff == 0 {
            return bad("training frequency coefficient must be at least 1");
        }
        if self.ensemble_size < 2 {
            return bad("ensemble needs at least 2 members");
        }
        if !(self.lr_generator > 0.0 && self.lr_base > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.early_stop >= 0.0) {
            return bad("early-stop threshold must be non-negative");
        }
        if self.batch_size == 0 || self.explore_hidden == 0 || self.base_hidden.contains(&0) || self.exploit_hidden.contains(&0) {
            return bad("layer widths and batch size must be positive");
        }
        self.latent.validate()
    }

    fn update_train(&self) -> TrainConfig {
        TrainConfig { learning_rate: self.lr_base, max_iters: self.max_train_iters, early_stop_threshold: self.early_stop, batch_size: self.batch_size }
    }

    fn initial_train(&self) -> TrainConfig {
        TrainConfig { max_iters: self.initial_fit_iters, ..self.update_train() }
    }
}

/// Generator training steps for the next iteration: `delta * floor(2 n_e / L + 1)`.
pub fn tg_schedule(delta_g: usize, n_early: usize, ensemble_size: usize) -> usize {
    delta_g * (2 * n_early / ensemble_size + 1)
}

/// Whether an exploitation candidate is worth a real query.
pub fn focus_filter(surrogate_value: f64, c: f64, epsilon: f64) -> bool {
    surrogate_value <= c * epsilon
}

/// `n` uniform points of the unit search cube, shared by every optimizer
/// given the same seed.
pub fn initial_design(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::child_rng(seed, rng::STREAM_INIT_DESIGN, 0);
    (0..n).map(|_| (0..dim).map(|_| r.random_range(0.0..=1.0)).collect()).collect()
}

/// A normalised state with its true evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub state: Vec<f64>,
    pub errors: Vec<f64>,
    pub accumulated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub tg_used: usize,
    pub exploit_state: Vec<f64>,
    pub exploit_estimate: f64,
    pub exploit_error: Option<f64>,
    pub exploit_skipped: bool,
    pub explore_state: Option<Vec<f64>>,
    pub explore_error: Option<f64>,
    pub n_early: usize,
    pub archive_size: usize,
    pub queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub success: bool,
    pub final_state: Vec<f64>,
    pub final_accumulated_error: f64,
    pub total_queries: usize,
    pub queries_excluding_init: usize,
    pub init_size: usize,
    pub traces: Vec<IterationTrace>,
    pub query_log: Vec<QueryRecord>,
}

impl RunOutcome {
    /// Outcome for a finished ledger. On failure the best queried state is
    /// reported.
    pub fn from_ledger(spec: &ProblemSpec, ledger: QueryLedger, found: Option<(Vec<f64>, f64)>, init_size: usize, traces: Vec<IterationTrace>) -> Self {
        let success = found.is_some();
        let (final_state, final_accumulated_error) = found.unwrap_or_else(|| {
            ledger
                .log()
                .iter()
                .map(|r| (r.state.clone(), spec.accumulate(&r.errors)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((Vec::new(), f64::INFINITY))
        });
        let total_queries = ledger.count();
        RunOutcome {
            success,
            final_state,
            final_accumulated_error,
            total_queries,
            queries_excluding_init: total_queries.saturating_sub(init_size),
            init_size,
            traces,
            query_log: ledger.into_log(),
        }
    }
}

/// Evaluate a normalised state through the ledger.
pub fn query(spec: &ProblemSpec, ledger: &mut QueryLedger, state: &[f64]) -> Result<(ArchiveEntry, EvalResult)> {
    let r = evaluate(spec, ledger, &spec.bounds.denormalize(state))?;
    Ok((ArchiveEntry { state: state.to_vec(), errors: r.error_vector.clone(), accumulated: r.accumulated }, r))
}

/// State after initialization, ready for the main loop.
pub struct Initialized {
    pub archive: Vec<ArchiveEntry>,
    pub model: HybridErrorModel,
    pub exploit: ExploitGenerator,
    pub explore: ExploreGenerator,
    pub n_early: usize,
}

pub fn initialize(spec: &ProblemSpec, cfg: &GeeseConfig, ledger: &mut QueryLedger) -> Result<Initialized> {
    cfg.validate()?;
    if ledger.remaining() < cfg.init_size {
        return Err(GeeseError::BudgetExceeded { budget: ledger.budget() });
    }
    let d = spec.state_dim();
    let mut archive = Vec::with_capacity(cfg.budget);
    for raw in initial_design(d, cfg.init_size, cfg.seed) {
        archive.push(query(spec, ledger, &spec.decode(&raw))?.0);
    }
    let outputs = match cfg.surrogate_target {
        SurrogateTarget::Elementwise => spec.implicit_count(),
        SurrogateTarget::WeightedSum => 1,
    };
    let mut sizes = vec![d];
    sizes.extend_from_slice(&cfg.base_hidden);
    sizes.push(outputs);
    let ensemble = Ensemble::random(cfg.ensemble_size, &sizes, Activation::Relu, cfg.seed)?;
    let mut model = HybridErrorModel::new(ensemble, spec.explicit_terms_normalized(), spec.weights.clone(), cfg.surrogate_target)?;
    let samples = to_samples(&model, &archive);
    let n_early = fit_ensemble_initial(&mut model.ensemble, &samples, &cfg.initial_train(), cfg.seed, cfg.exec)?;
    let exploit = match cfg.exploit_mode {
        ExploitMode::Network => ExploitGenerator::network(&cfg.latent, &cfg.exploit_hidden, d, spec.monotone_constraints, cfg.seed)?,
        ExploitMode::DirectState => ExploitGenerator::direct_state(&cfg.latent, d, spec.monotone_constraints, cfg.seed)?,
    };
    let explore = ExploreGenerator::new(cfg.explore_hidden, d, cfg.latent.n_explore, spec.monotone_constraints, cfg.seed)?;
    Ok(Initialized { archive, model, exploit, explore, n_early })
}

fn to_samples(model: &HybridErrorModel, entries: &[ArchiveEntry]) -> Vec<Sample> {
    entries.iter().map(|e| Sample::new(e.state.clone(), model.targets(&e.errors))).collect()
}

/// Run the full loop on one problem instance. Running out of budget is a
/// failed outcome, not an error.
pub fn run(spec: &ProblemSpec, cfg: &GeeseConfig) -> Result<RunOutcome> {
    let mut ledger = QueryLedger::new(cfg.budget)?;
    let Initialized { mut archive, mut model, mut exploit, mut explore, mut n_early } = initialize(spec, cfg, &mut ledger)?;
    let reg = (cfg.regularizer_on && spec.monotone_constraints).then(DiversityReg::default);
    let head = model.head_weights();
    let update_cfg = cfg.update_train();
    let mut traces = Vec::new();
    let mut found = None;
    let mut t = 0;
    while !ledger.is_exhausted() && t < cfg.budget {
        t += 1;
        let tg = tg_schedule(cfg.train_freq_coeff, n_early, cfg.ensemble_size);
        exploit.improve(&model, tg, cfg.lr_generator, reg)?;
        let pick = exploit.select_exploit(&model)?;
        let mut fresh = Vec::with_capacity(2);
        let skipped = !focus_filter(pick.score, cfg.focus_coefficient, spec.epsilon);
        let mut exploit_error = None;
        if !skipped {
            let (entry, r) = query(spec, &mut ledger, &pick.state)?;
            exploit_error = Some(r.accumulated);
            fresh.push(entry);
            if r.feasible {
                found = Some((spec.bounds.denormalize(&pick.state), r.accumulated));
            }
        }
        let mut trace = IterationTrace {
            iteration: t,
            tg_used: tg,
            exploit_state: spec.bounds.denormalize(&pick.state),
            exploit_estimate: pick.score,
            exploit_error,
            exploit_skipped: skipped,
            explore_state: None,
            explore_error: None,
            n_early,
            archive_size: archive.len() + fresh.len(),
            queries: fresh.len(),
        };
        if found.is_some() || ledger.is_exhausted() {
            traces.push(trace);
            break;
        }
        let explore_seed = rng::derive(cfg.seed, rng::STREAM_EXPLORE, t as u64);
        if cfg.trainable_explore {
            explore.train_explore(&model.ensemble, &head, tg, cfg.lr_generator, explore_seed)?;
        } else {
            explore.resample(explore_seed);
        }
        let probe = explore.select_explore(&model.ensemble, &head)?;
        let (entry, r) = query(spec, &mut ledger, &probe.state)?;
        trace.explore_state = Some(spec.bounds.denormalize(&probe.state));
        trace.explore_error = Some(r.accumulated);
        fresh.push(entry);
        trace.queries = fresh.len();
        trace.archive_size = archive.len() + fresh.len();

        let new_samples = to_samples(&model, &fresh);
        let old_samples = to_samples(&model, &archive);
        let update_seed = rng::derive(cfg.seed, rng::STREAM_UPDATE_SAMPLING, t as u64);
        n_early = fit_ensemble_update(&mut model.ensemble, &new_samples, &old_samples, cfg.init_size, &update_cfg, update_seed, cfg.exec)?;
        archive.extend(fresh);
        traces.push(trace);
    }
    Ok(RunOutcome::from_ledger(spec, ledger, found, cfg.init_size, traces))
}
