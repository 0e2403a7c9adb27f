//! Experiment orchestration: case generation, threshold calibration, runs
//! over (algorithm, epsilon, init size) cells, aggregation, ablations,
//! sensitivity grids and plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineAlgo, BaselineConfig};
use crate::error::{GeeseError, Result};
use crate::evaluators::{builtin_problem, load_problem, ProblemSpec};
use crate::exec::{self, ExecMode};
use crate::generators::ExploitMode;
use crate::geese::{self, GeeseConfig, RunOutcome};
use crate::rng;
use crate::surrogate::SurrogateTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Geese,
    Random,
    Ga,
    Pso,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Geese => "geese",
            Algorithm::Random => BaselineAlgo::Random.name(),
            Algorithm::Ga => BaselineAlgo::Ga.name(),
            Algorithm::Pso => BaselineAlgo::Pso.name(),
        }
    }
}

impl FromStr for Algorithm {
    type Err = GeeseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "geese" => Ok(Algorithm::Geese),
            "random" => Ok(Algorithm::Random),
            "ga" => Ok(Algorithm::Ga),
            "pso" => Ok(Algorithm::Pso),
            other => Err(GeeseError::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Optional replacements for the per-problem loop defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeeseOverrides {
    pub ensemble_size: Option<usize>,
    pub n_exploit: Option<usize>,
    pub lr_generator: Option<f64>,
    pub lr_base: Option<f64>,
    pub early_stop: Option<f64>,
    pub focus_coefficient: Option<f64>,
    pub train_freq_coeff: Option<usize>,
    pub surrogate_target: Option<SurrogateTarget>,
    pub trainable_explore: Option<bool>,
    pub exploit_mode: Option<ExploitMode>,
    pub base_width: Option<usize>,
}

impl GeeseOverrides {
    pub fn apply(&self, cfg: &mut GeeseConfig) {
        if let Some(v) = self.ensemble_size {
            cfg.ensemble_size = v;
        }
        if let Some(v) = self.n_exploit {
            cfg.latent.n_exploit = v;
        }
        if let Some(v) = self.lr_generator {
            cfg.lr_generator = v;
        }
        if let Some(v) = self.lr_base {
            cfg.lr_base = v;
        }
        if let Some(v) = self.early_stop {
            cfg.early_stop = v;
        }
        if let Some(v) = self.focus_coefficient {
            cfg.focus_coefficient = v;
        }
        if let Some(v) = self.train_freq_coeff {
            cfg.train_freq_coeff = v;
        }
        if let Some(v) = self.surrogate_target {
            cfg.surrogate_target = v;
        }
        if let Some(v) = self.trainable_explore {
            cfg.trainable_explore = v;
        }
        if let Some(v) = self.exploit_mode {
            cfg.exploit_mode = v;
        }
        if let Some(w) = self.base_width {
            cfg.base_hidden = vec![w, 2 * w, w];
            cfg.exploit_hidden = vec![w; cfg.exploit_hidden.len()];
            cfg.explore_hidden = w;
        }
    }

    /// Fields set in `other` replace the ones here.
    pub fn merge(&mut self, other: &GeeseOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            ensemble_size,
            n_exploit,
            lr_generator,
            lr_base,
            early_stop,
            focus_coefficient,
            train_freq_coeff,
            surrogate_target,
            trainable_explore,
            exploit_mode,
            base_width
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub algorithms: Vec<Algorithm>,
    pub n_cases: usize,
    pub budget: usize,
    pub epsilons: Vec<f64>,
    pub init_sizes: Vec<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub fixture_dir: Option<PathBuf>,
    pub exec: ExecMode,
    pub geese: GeeseOverrides,
    pub ablations: Vec<u8>,
    pub sense_ensemble: Vec<usize>,
    pub sense_n_exploit: Vec<usize>,
    pub sense_lr_generator: Vec<f64>,
    pub sense_early_stop: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "S1".into(),
            algorithms: vec![Algorithm::Geese, Algorithm::Random, Algorithm::Ga, Algorithm::Pso],
            n_cases: 20,
            budget: 1000,
            epsilons: vec![0.05, 0.075, 0.1],
            init_sizes: vec![16, 32, 64],
            seed: 42,
            out_dir: PathBuf::from("results"),
            fixture_dir: None,
            exec: ExecMode::default(),
            geese: GeeseOverrides::default(),
            ablations: vec![1, 2, 3, 4],
            sense_ensemble: vec![2, 4, 8],
            sense_n_exploit: vec![1, 32, 64, 128],
            sense_lr_generator: vec![1e-1, 1e-2, 1e-3],
            sense_early_stop: vec![1e-3, 1e-4, 1e-5],
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| GeeseError::InvalidConfig(format!("bad value `{s}` for `{key}`"))))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(GeeseError::InvalidConfig(format!("`{key}` needs at least one value")));
    }
    Ok(items)
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| GeeseError::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

impl ExperimentConfig {
    /// Set one option from its textual form. Lists are comma-separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "problem" => self.problem = value.trim().to_string(),
            "algorithms" | "algos" => self.algorithms = parse_list(key, value)?,
            "n_cases" | "cases" => self.n_cases = parse_one(key, value)?,
            "budget" => self.budget = parse_one(key, value)?,
            "epsilon" => self.epsilons = parse_list(key, value)?,
            "init" | "init_size" => self.init_sizes = parse_list(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "out" => self.out_dir = PathBuf::from(value.trim()),
            "fixtures" => self.fixture_dir = Some(PathBuf::from(value.trim())),
            "sequential" => {
                self.exec = if parse_one::<bool>(key, value)? { ExecMode::Sequential } else { ExecMode::Parallel };
            }
            "ablations" => self.ablations = parse_list(key, value)?,
            "sense_L" => self.sense_ensemble = parse_list(key, value)?,
            "sense_NIT" => self.sense_n_exploit = parse_list(key, value)?,
            "sense_lr" => self.sense_lr_generator = parse_list(key, value)?,
            "sense_eps_e" => self.sense_early_stop = parse_list(key, value)?,
            "L" => self.geese.ensemble_size = Some(parse_one(key, value)?),
            "NIT" => self.geese.n_exploit = Some(parse_one(key, value)?),
            "lr_gen" => self.geese.lr_generator = Some(parse_one(key, value)?),
            "lr_base" => self.geese.lr_base = Some(parse_one(key, value)?),
            "eps_e" => self.geese.early_stop = Some(parse_one(key, value)?),
            "focus" => self.geese.focus_coefficient = Some(parse_one(key, value)?),
            "delta_g" => self.geese.train_freq_coeff = Some(parse_one(key, value)?),
            "width" => self.geese.base_width = Some(parse_one(key, value)?),
            "direct_state" => {
                let on: bool = parse_one(key, value)?;
                self.geese.exploit_mode = Some(if on { ExploitMode::DirectState } else { ExploitMode::Network });
            }
            other => return Err(GeeseError::InvalidConfig(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GeeseError::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| GeeseError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cases == 0 {
            return Err(GeeseError::InvalidConfig("n_cases must be at least 1".into()));
        }
        if self.algorithms.is_empty() || self.epsilons.is_empty() || self.init_sizes.is_empty() {
            return Err(GeeseError::InvalidConfig("algorithm, epsilon and init lists must be non-empty".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(GeeseError::InvalidConfig("epsilon values must be positive".into()));
        }
        if self.init_sizes.iter().any(|n| *n == 0 || *n > self.budget) {
            return Err(GeeseError::InvalidConfig("init sizes must lie in 1..=budget".into()));
        }
        Ok(())
    }

    pub fn load_problem(&self) -> Result<ProblemSpec> {
        match &self.fixture_dir {
            Some(dir) => load_problem(&self.problem, dir),
            None => builtin_problem(&self.problem),
        }
    }
}

/// Fraction of uniformly drawn search points whose accumulated error is at
/// most the problem threshold.
pub fn feasible_fraction(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<f64> {
    let errs = sample_errors(spec, samples, seed)?;
    Ok(errs.iter().filter(|e| **e <= spec.epsilon).count() as f64 / samples as f64)
}

/// Threshold at which `fraction` of uniformly drawn search points are feasible.
pub fn calibrate_epsilon(spec: &ProblemSpec, fraction: f64, samples: usize, seed: u64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) || samples == 0 {
        return Err(GeeseError::InvalidArgument("fraction must lie in (0, 1) with at least one sample".into()));
    }
    let mut errs = sample_errors(spec, samples, seed)?;
    errs.sort_by(f64::total_cmp);
    let k = ((fraction * samples as f64).ceil() as usize).clamp(1, samples);
    Ok(errs[k - 1])
}

fn sample_errors(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let mut r = rng::rng_from(seed);
    let d = spec.state_dim();
    (0..samples)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| r.random_range(0.0..=1.0)).collect();
            Ok(spec.assess(&spec.search_to_state(&raw))?.accumulated)
        })
        .collect()
}

/// One experimental case: its seed plus the infeasible starting estimate it
/// stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub index: usize,
    pub seed: u64,
    pub failed_state: Vec<f64>,
    pub failed_error: f64,
}

const FAILED_STATE_TRIES: usize = 100_000;

pub fn generate_cases(spec: &ProblemSpec, n_cases: usize, seed: u64) -> Result<Vec<CaseSpec>> {
    if n_cases == 0 {
        return Err(GeeseError::InvalidConfig("n_cases must be at least 1".into()));
    }
    (0..n_cases)
        .map(|i| {
            let case_seed = rng::derive(seed, rng::STREAM_CASE, i as u64);
            let mut r = rng::child_rng(case_seed, rng::STREAM_FAILED_STATE, 0);
            for _ in 0..FAILED_STATE_TRIES {
                let raw: Vec<f64> = (0..spec.state_dim()).map(|_| r.random_range(0.0..=1.0)).collect();
                let state = spec.search_to_state(&raw);
                let e = spec.assess(&state)?;
                if !e.feasible {
                    return Ok(CaseSpec { index: i, seed: case_seed, failed_state: state, failed_error: e.accumulated });
                }
            }
            Err(GeeseError::InvalidConfig(format!("could not draw an infeasible state for `{}`", spec.name)))
        })
        .collect()
}

/// One case result as written to the JSONL trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub algorithm: String,
    pub problem: String,
    pub epsilon: f64,
    pub init_size: usize,
    pub case_index: usize,
    pub case_seed: u64,
    pub failed_error: f64,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub problem: String,
    pub epsilon: f64,
    pub init_size: usize,
    pub failure_times: usize,
    pub query_mean: f64,
    pub query_std: f64,
    pub query_mean_excl_init: f64,
    pub n_cases: usize,
    pub seed: u64,
    /// Mean over successful cases only; empty when every case failed.
    pub query_mean_success: Option<f64>,
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate one cell. Failed cases count as `budget` queries.
pub fn aggregate(records: &[CaseRecord], budget: usize, seed: u64) -> Result<MetricsRow> {
    let first = records.first().ok_or_else(|| GeeseError::InvalidArgument("cannot aggregate zero cases".into()))?;
    let counted: Vec<f64> = records.iter().map(|r| if r.outcome.success { r.outcome.total_queries } else { budget } as f64).collect();
    let excl: Vec<f64> = records.iter().zip(&counted).map(|(r, q)| q - r.outcome.init_size as f64).collect();
    let wins: Vec<f64> = records.iter().filter(|r| r.outcome.success).map(|r| r.outcome.total_queries as f64).collect();
    let (query_mean, query_std) = mean_std(&counted);
    Ok(MetricsRow {
        algorithm: first.algorithm.clone(),
        problem: first.problem.clone(),
        epsilon: first.epsilon,
        init_size: first.init_size,
        failure_times: records.iter().filter(|r| !r.outcome.success).count(),
        query_mean,
        query_std,
        query_mean_excl_init: mean_std(&excl).0,
        n_cases: records.len(),
        seed,
        query_mean_success: (!wins.is_empty()).then(|| mean_std(&wins).0),
    })
}

/// Run one algorithm on one case.
pub fn run_case(
    spec: &ProblemSpec,
    algo: Algorithm,
    init_size: usize,
    budget: usize,
    case: &CaseSpec,
    overrides: &GeeseOverrides,
    exec: ExecMode,
) -> Result<RunOutcome> {
    match algo {
        Algorithm::Geese => {
            let mut cfg = GeeseConfig::for_problem(spec);
            cfg.budget = budget;
            cfg.init_size = init_size;
            cfg.seed = case.seed;
            cfg.exec = exec;
            overrides.apply(&mut cfg);
            geese::run(spec, &cfg)
        }
        Algorithm::Random | Algorithm::Ga | Algorithm::Pso => {
            let kind = match algo {
                Algorithm::Random => BaselineAlgo::Random,
                Algorithm::Ga => BaselineAlgo::Ga,
                _ => BaselineAlgo::Pso,
            };
            let cfg = BaselineConfig { population: init_size.max(2), ..BaselineConfig::new(kind, case.seed) };
            run_baseline(spec, &cfg, budget)
        }
    }
}

/// All cases of one (algorithm, epsilon, init size) cell; cases run
/// concurrently and come back in case order.
pub fn run_cell(
    spec: &ProblemSpec,
    algo: Algorithm,
    init_size: usize,
    budget: usize,
    cases: &[CaseSpec],
    overrides: &GeeseOverrides,
    exec: ExecMode,
) -> Result<Vec<CaseRecord>> {
    let results = exec::map_indexed(exec, cases.len(), |i| run_case(spec, algo, init_size, budget, &cases[i], overrides, exec));
    results
        .into_iter()
        .zip(cases)
        .map(|(r, c)| {
            Ok(CaseRecord {
                algorithm: algo.name().into(),
                problem: spec.name.clone(),
                epsilon: spec.epsilon,
                init_size,
                case_index: c.index,
                case_seed: c.seed,
                failed_error: c.failed_error,
                outcome: r?,
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| GeeseError::io(dir, e))?;
    }
    let csv_err = |source| GeeseError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| GeeseError::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| GeeseError::io(dir, e))?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| GeeseError::io(path, e))?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| GeeseError::io(path, e))?;
    }
    w.flush().map_err(|e| GeeseError::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| GeeseError::io(path, e))?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str::<T>(l)?)).collect()
}

/// Every (algorithm, epsilon, init size) cell of `cfg`. Writes
/// `summary.csv` and `traces.jsonl` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<MetricsRow>, Vec<CaseRecord>)> {
    cfg.validate()?;
    let base = cfg.load_problem()?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &eps in &cfg.epsilons {
        let spec = base.clone().with_epsilon(eps)?;
        let cases = generate_cases(&spec, cfg.n_cases, cfg.seed)?;
        for &n in &cfg.init_sizes {
            for &algo in &cfg.algorithms {
                info!("{} on {} eps={eps} N={n}: {} cases", algo.name(), spec.name, cases.len());
                let records = run_cell(&spec, algo, n, cfg.budget, &cases, &cfg.geese, cfg.exec)?;
                rows.push(aggregate(&records, cfg.budget, cfg.seed)?);
                traces.extend(records);
            }
        }
    }
    write_csv(&cfg.out_dir.join("summary.csv"), &rows)?;
    write_jsonl(&cfg.out_dir.join("traces.jsonl"), &traces)?;
    Ok((rows, traces))
}

/// One arm of an ablation or sensitivity study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRow {
    pub study: String,
    pub arm: String,
    pub algorithm: String,
    pub problem: String,
    pub epsilon: f64,
    pub init_size: usize,
    pub failure_times: usize,
    pub query_mean: f64,
    pub query_std: f64,
    pub query_mean_excl_init: f64,
    pub n_cases: usize,
    pub seed: u64,
    pub query_mean_success: Option<f64>,
}

impl ArmRow {
    pub fn new(study: impl Into<String>, arm: impl Into<String>, m: MetricsRow) -> Self {
        ArmRow {
            study: study.into(),
            arm: arm.into(),
            algorithm: m.algorithm,
            problem: m.problem,
            epsilon: m.epsilon,
            init_size: m.init_size,
            failure_times: m.failure_times,
            query_mean: m.query_mean,
            query_std: m.query_std,
            query_mean_excl_init: m.query_mean_excl_init,
            n_cases: m.n_cases,
            seed: m.seed,
            query_mean_success: m.query_mean_success,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMeta {
    pub study: String,
    pub arm: String,
    pub case_seeds: Vec<u64>,
}

/// The two arms of ablation `which` (1-4), reference arm first.
pub fn ablation_arms(which: u8) -> Result<(&'static str, [(&'static str, GeeseOverrides); 2])> {
    let o = GeeseOverrides::default;
    Ok(match which {
        1 => (
            "error_estimation",
            [
                ("elementwise", GeeseOverrides { surrogate_target: Some(SurrogateTarget::Elementwise), ..o() }),
                ("error_sum", GeeseOverrides { surrogate_target: Some(SurrogateTarget::WeightedSum), ..o() }),
            ],
        ),
        2 => (
            "exploration_training",
            [
                ("resampled", GeeseOverrides { trainable_explore: Some(false), ..o() }),
                ("trained", GeeseOverrides { trainable_explore: Some(true), ..o() }),
            ],
        ),
        3 => (
            "early_stopping",
            [("on", GeeseOverrides { early_stop: Some(1e-4), ..o() }), ("off", GeeseOverrides { early_stop: Some(0.0), ..o() })],
        ),
        4 => ("focus", [("on", o()), ("off", GeeseOverrides { focus_coefficient: Some(f64::INFINITY), ..o() })]),
        other => return Err(GeeseError::InvalidConfig(format!("unknown ablation {other}; expected 1-4"))),
    })
}

/// Paired arms on identical cases, using the first epsilon and init size.
/// Writes `ablations.csv`, `ablations_meta.json` and `ablations.jsonl`.
pub fn run_ablations(cfg: &ExperimentConfig) -> Result<(Vec<ArmRow>, Vec<CaseRecord>)> {
    cfg.validate()?;
    let spec = cfg.load_problem()?.with_epsilon(cfg.epsilons[0])?;
    let n = cfg.init_sizes[0];
    let cases = generate_cases(&spec, cfg.n_cases, cfg.seed)?;
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    let mut traces = Vec::new();
    for &which in &cfg.ablations {
        let (study, arms) = ablation_arms(which)?;
        for (arm, arm_overrides) in arms {
            let mut overrides = cfg.geese.clone();
            overrides.merge(&arm_overrides);
            info!("ablation {study}/{arm}: {} cases", cases.len());
            let records = run_cell(&spec, Algorithm::Geese, n, cfg.budget, &cases, &overrides, cfg.exec)?;
            rows.push(ArmRow::new(study, arm, aggregate(&records, cfg.budget, cfg.seed)?));
            meta.push(ArmMeta { study: study.into(), arm: arm.into(), case_seeds: records.iter().map(|r| r.case_seed).collect() });
            traces.extend(records);
        }
    }
    write_csv(&cfg.out_dir.join("ablations.csv"), &rows)?;
    write_jsonl(&cfg.out_dir.join("ablations.jsonl"), &traces)?;
    let path = cfg.out_dir.join("ablations_meta.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| GeeseError::io(&path, e))?;
    Ok((rows, traces))
}

/// One-at-a-time sweeps over the ensemble size (`L`), exploitation
/// candidate count (`NIT`), generator learning rate (`lr`) and early-stop
/// threshold (`eps_e`). Writes `sensitivity.csv`.
pub fn run_sensitivity(cfg: &ExperimentConfig, grids: &[String]) -> Result<Vec<ArmRow>> {
    cfg.validate()?;
    let spec = cfg.load_problem()?.with_epsilon(cfg.epsilons[0])?;
    let n = cfg.init_sizes[0];
    let cases = generate_cases(&spec, cfg.n_cases, cfg.seed)?;
    let mut arms: Vec<(String, String, GeeseOverrides)> = Vec::new();
    for g in grids {
        let arm = |v: String, o: GeeseOverrides| {
            let mut merged = cfg.geese.clone();
            merged.merge(&o);
            (g.clone(), v, merged)
        };
        let o = GeeseOverrides::default;
        match g.as_str() {
            "L" => arms.extend(cfg.sense_ensemble.iter().map(|v| arm(v.to_string(), GeeseOverrides { ensemble_size: Some(*v), ..o() }))),
            "NIT" => arms.extend(cfg.sense_n_exploit.iter().map(|v| arm(v.to_string(), GeeseOverrides { n_exploit: Some(*v), ..o() }))),
            "lr" => arms.extend(cfg.sense_lr_generator.iter().map(|v| arm(v.to_string(), GeeseOverrides { lr_generator: Some(*v), ..o() }))),
            "eps_e" => arms.extend(cfg.sense_early_stop.iter().map(|v| arm(v.to_string(), GeeseOverrides { early_stop: Some(*v), ..o() }))),
            other => return Err(GeeseError::InvalidConfig(format!("unknown sensitivity grid `{other}`"))),
        }
    }
    let mut rows = Vec::new();
    for (study, arm, overrides) in arms {
        info!("sensitivity {study}={arm}");
        let records = run_cell(&spec, Algorithm::Geese, n, cfg.budget, &cases, &overrides, cfg.exec)?;
        rows.push(ArmRow::new(study, arm, aggregate(&records, cfg.budget, cfg.seed)?));
    }
    write_csv(&cfg.out_dir.join("sensitivity.csv"), &rows)?;
    Ok(rows)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Bar chart of mean queries (with one-std whiskers) for every summary row.
pub fn render_svg(rows: &[MetricsRow]) -> String {
    let (bar, gap, left, top, height) = (36.0, 18.0, 60.0, 30.0, 240.0);
    let width = left + rows.len() as f64 * (bar + gap) + gap;
    let peak = rows.iter().map(|r| r.query_mean + r.query_std).fold(1.0_f64, f64::max);
    let y = |v: f64| top + height - v / peak * height;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="10">"#,
        width.max(320.0),
        top + height + 110.0
    );
    let _ = writeln!(svg, r#"<text x="{left}" y="16" font-size="12">mean queries per case (whiskers: one std)</text>"#);
    let _ = writeln!(svg, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#, top + height);
    let _ = writeln!(svg, r#"<line x1="{left}" y1="{0:.1}" x2="{width:.1}" y2="{0:.1}" stroke="black"/>"#, top + height);
    for k in 0..=4 {
        let v = peak * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.0}</text>"#, left - 4.0, y(v) + 3.0);
    }
    for (i, r) in rows.iter().enumerate() {
        let x = left + gap + i as f64 * (bar + gap);
        let colour = match r.algorithm.as_str() {
            "geese" => "#2b6cb0",
            "random" => "#a0aec0",
            "ga" => "#dd6b20",
            "pso" => "#38a169",
            _ => "#718096",
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.1}" y="{:.1}" width="{bar}" height="{:.1}" fill="{colour}"/>"#,
            y(r.query_mean),
            top + height - y(r.query_mean)
        );
        let cx = x + bar / 2.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            y((r.query_mean - r.query_std).max(0.0)),
            y(r.query_mean + r.query_std)
        );
        let label = xml_escape(&format!("{} e={} N={} fail={}", r.algorithm, r.epsilon, r.init_size, r.failure_times));
        let _ = writeln!(svg, r#"<text transform="translate({cx:.1},{:.1}) rotate(60)">{label}</text>"#, top + height + 10.0);
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn read_summary(csv_path: &Path) -> Result<Vec<MetricsRow>> {
    let csv_err = |source| GeeseError::Csv { path: csv_path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(csv_path).map_err(csv_err)?;
    reader.deserialize::<MetricsRow>().collect::<std::result::Result<Vec<_>, _>>().map_err(csv_err)
}

/// Read a summary CSV and write one comparison chart per problem next to
/// it. An empty summary writes nothing.
pub fn emit_plots(csv_path: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_summary(csv_path)?;
    if rows.is_empty() {
        warn!("{} has no rows; no plots written", csv_path.display());
        return Ok(Vec::new());
    }
    let mut by_problem: BTreeMap<String, Vec<MetricsRow>> = BTreeMap::new();
    for r in rows {
        by_problem.entry(r.problem.clone()).or_default().push(r);
    }
    let dir = csv_path.parent().unwrap_or_else(|| Path::new("."));
    let mut written = Vec::new();
    for (problem, rows) in by_problem {
        let path = dir.join(format!("queries_{problem}.svg"));
        fs::write(&path, render_svg(&rows)).map_err(|e| GeeseError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
