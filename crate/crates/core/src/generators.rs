//! Candidate generators.
//!
//! Both generators produce raw points in the unit cube (a sigmoid on the
//! network output). When the problem carries the monotone pattern the raw
//! point is passed through [`postprocess_monotone`]; the result is the
//! normalised state the surrogate consumes.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GeeseError, Result};
use crate::evaluators::{postprocess_monotone, postprocess_monotone_vjp, sigmoid};
use crate::netcore::{Activation, Adam, DenseNet};
use crate::rng;
use crate::surrogate::{Ensemble, HybridErrorModel};

pub const DEFAULT_SIGMA_MIN: f64 = 0.0288;
pub const EXPLORE_LATENT_RANGE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub dim: usize,
    pub range: f64,
    pub n_exploit: usize,
    pub n_explore: usize,
}

impl LatentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n_exploit == 0 || self.n_explore == 0 {
            return Err(GeeseError::InvalidConfig("latent dim and candidate counts must be at least 1".into()));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(GeeseError::InvalidConfig(format!("latent range must be positive, got {}", self.range)));
        }
        Ok(())
    }

    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, count: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| (0..dim).map(|_| rng.random_range(-self.range..=self.range)).collect()).collect()
    }
}

/// A chosen candidate: its index, normalised state and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub state: Vec<f64>,
    pub score: f64,
}

/// Index of the smallest score, first on ties; NaN never wins.
pub fn argmin_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best.or((!scores.is_empty()).then_some(0))
}

/// Index of the largest score, first on ties; NaN never wins.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
    argmin_first(&neg)
}

/// Hinge on the spread of the first coordinate across a batch of states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityReg {
    pub sigma_min: f64,
}

impl Default for DiversityReg {
    fn default() -> Self {
        DiversityReg { sigma_min: DEFAULT_SIGMA_MIN }
    }
}

impl DiversityReg {
    pub fn value(&self, states: ArrayView2<'_, f64>) -> Result<f64> {
        Ok(self.value_grad(states)?.0)
    }

    /// Value and gradient with respect to every state coordinate. At zero
    /// spread the hinge has no usable direction and the gradient is zero.
    pub fn value_grad(&self, states: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
        let b = states.nrows();
        if b < 2 {
            return Err(GeeseError::InvalidArgument(format!("diversity needs a batch of at least 2 states, got {b}")));
        }
        let first = states.column(0);
        let mean = first.sum() / b as f64;
        let sigma = if first.iter().all(|v| *v == first[0]) {
            0.0
        } else {
            (first.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / b as f64).sqrt()
        };
        let mut grad = Array2::zeros(states.raw_dim());
        let value = (self.sigma_min - sigma).max(0.0);
        if value > 0.0 && sigma > 0.0 {
            for (i, v) in first.iter().enumerate() {
                grad[(i, 0)] = -(v - mean) / (b as f64 * sigma);
            }
        }
        Ok((value, grad))
    }
}

pub fn diversity_regularizer(states: ArrayView2<'_, f64>) -> Result<f64> {
    DiversityReg::default().value(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExploitMode {
    #[default]
    Network,
    DirectState,
}

/// Maps raw unit-cube points to normalised states and back-propagates
/// through that map (sigmoid excluded).
fn decode_rows(raw: &Array2<f64>, monotone: bool) -> Array2<f64> {
    if !monotone {
        return raw.clone();
    }
    let mut out = raw.clone();
    for (mut o, r) in out.axis_iter_mut(Axis(0)).zip(raw.axis_iter(Axis(0))) {
        let p = postprocess_monotone(r.as_slice().expect("contiguous row"));
        o.iter_mut().zip(p).for_each(|(o, p)| *o = p);
    }
    out
}

fn decode_rows_vjp(raw: &Array2<f64>, upstream: &Array2<f64>, monotone: bool) -> Array2<f64> {
    if !monotone {
        return upstream.clone();
    }
    let mut out = upstream.clone();
    for (i, mut o) in out.axis_iter_mut(Axis(0)).enumerate() {
        let r = raw.row(i);
        let u = upstream.row(i);
        let g = postprocess_monotone_vjp(r.as_slice().expect("contiguous row"), u.as_slice().expect("contiguous row"));
        o.iter_mut().zip(g).for_each(|(o, g)| *o = g);
    }
    out
}

/// Mean surrogate value over a batch (plus the regulariser) and its
/// gradient with respect to the normalised states.
fn batch_objective(model: &HybridErrorModel, states: &Array2<f64>, reg: Option<DiversityReg>) -> Result<(f64, Array2<f64>)> {
    let b = states.nrows() as f64;
    let (values, mut grad) = model.value_grad_batch(states.view())?;
    let mut loss = values.iter().sum::<f64>() / b;
    grad /= b;
    if let Some(reg) = reg {
        if states.nrows() >= 2 {
            let (r, rg) = reg.value_grad(states.view())?;
            loss += r;
            grad += &rg;
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploitGenerator {
    mode: ExploitMode,
    net: Option<DenseNet>,
    raw_states: Vec<Vec<f64>>,
    fixed_latents: Vec<Vec<f64>>,
    monotone: bool,
    state_dim: usize,
    adam: Option<Adam>,
}

impl ExploitGenerator {
    /// Network mode: `latent.dim -> hidden.. -> state_dim`.
    pub fn network(latent: &LatentSpec, hidden: &[usize], state_dim: usize, monotone: bool, seed: u64) -> Result<Self> {
        latent.validate()?;
        let mut rng = rng::child_rng(seed, rng::STREAM_EXPLOIT, 0);
        let mut sizes = vec![latent.dim];
        sizes.extend_from_slice(hidden);
        sizes.push(state_dim);
        let mut net = DenseNet::glorot(&sizes, Activation::Relu, &mut rng)?;
        // large latents would otherwise saturate the output sigmoid at start
        net.scale_output_layer(1.0 / latent.range);
        let fixed_latents = latent.sample(&mut rng, latent.n_exploit, latent.dim);
        Ok(ExploitGenerator { mode: ExploitMode::Network, net: Some(net), raw_states: Vec::new(), fixed_latents, monotone, state_dim, adam: None })
    }

    /// Direct-state mode: `n_exploit` raw points drawn uniformly from the
    /// unit cube, optimised in place.
    pub fn direct_state(latent: &LatentSpec, state_dim: usize, monotone: bool, seed: u64) -> Result<Self> {
        latent.validate()?;
        let mut rng = rng::child_rng(seed, rng::STREAM_EXPLOIT, 0);
        let raw_states = (0..latent.n_exploit).map(|_| (0..state_dim).map(|_| rng.random_range(0.0..=1.0)).collect()).collect();
        Ok(ExploitGenerator { mode: ExploitMode::DirectState, net: None, raw_states, fixed_latents: Vec::new(), monotone, state_dim, adam: None })
    }

    pub fn mode(&self) -> ExploitMode {
        self.mode
    }

    pub fn net(&self) -> Option<&DenseNet> {
        self.net.as_ref()
    }

    pub fn fixed_latents(&self) -> &[Vec<f64>] {
        &self.fixed_latents
    }

    pub fn raw_states(&self) -> &[Vec<f64>] {
        &self.raw_states
    }

    pub fn candidate_count(&self) -> usize {
        match self.mode {
            ExploitMode::Network => self.fixed_latents.len(),
            ExploitMode::DirectState => self.raw_states.len(),
        }
    }

    fn raw_matrix(&self) -> Result<Array2<f64>> {
        match self.mode {
            ExploitMode::Network => {
                let z = crate::netcore::stack_rows(&self.fixed_latents, self.fixed_latents[0].len())?;
                let out = self.net.as_ref().expect("network mode").forward_batch(z.view())?;
                Ok(out.mapv(sigmoid))
            }
            ExploitMode::DirectState => crate::netcore::stack_rows(&self.raw_states, self.state_dim),
        }
    }

    /// Normalised candidate states, one per row.
    pub fn candidates(&self) -> Result<Array2<f64>> {
        Ok(decode_rows(&self.raw_matrix()?, self.monotone))
    }

    fn adam(&mut self, lr: f64, n: usize) -> &mut Adam {
        let adam = self.adam.get_or_insert_with(|| Adam::new(lr, n));
        adam.lr = lr;
        adam
    }

    /// Gradient steps on the network weights minimising the mean surrogate
    /// value over the fixed latents. The surrogate is read only.
    pub fn train_exploit(&mut self, model: &HybridErrorModel, steps: usize, lr: f64, reg: Option<DiversityReg>) -> Result<()> {
        if self.mode != ExploitMode::Network {
            return Err(GeeseError::InvalidArgument("train_exploit needs a network-mode generator".into()));
        }
        let z = crate::netcore::stack_rows(&self.fixed_latents, self.fixed_latents[0].len())?;
        for step in 0..steps {
            let net = self.net.as_ref().expect("network mode");
            let tape = net.forward_tape(z.view())?;
            let raw = tape.output().mapv(sigmoid);
            let states = decode_rows(&raw, self.monotone);
            let (loss, g_state) = batch_objective(model, &states, reg)?;
            if !loss.is_finite() {
                return Err(GeeseError::TrainingDiverged { iteration: step, loss });
            }
            let mut g_out = decode_rows_vjp(&raw, &g_state, self.monotone);
            g_out.zip_mut_with(&raw, |g, &r| *g *= r * (1.0 - r));
            let (gw, _) = net.backward(&tape, g_out.view(), true);
            let gw = gw.expect("weight gradient requested");
            let n = gw.len();
            let mut net = self.net.take().expect("network mode");
            self.adam(lr, n).step(net.weights_mut(), &gw);
            self.net = Some(net);
        }
        Ok(())
    }

    /// Gradient steps applied to the stored raw points themselves, each
    /// clipped back into the unit cube after every step.
    pub fn direct_state_step(&mut self, model: &HybridErrorModel, steps: usize, lr: f64, reg: Option<DiversityReg>) -> Result<()> {
        if self.mode != ExploitMode::DirectState {
            return Err(GeeseError::InvalidArgument("direct_state_step needs a direct-state generator".into()));
        }
        let n = self.raw_states.len() * self.state_dim;
        for step in 0..steps {
            let raw = self.raw_matrix()?;
            let states = decode_rows(&raw, self.monotone);
            let (loss, g_state) = batch_objective(model, &states, reg)?;
            if !loss.is_finite() {
                return Err(GeeseError::TrainingDiverged { iteration: step, loss });
            }
            let g_raw = decode_rows_vjp(&raw, &g_state, self.monotone);
            let mut flat: Vec<f64> = raw.iter().copied().collect();
            let grads: Vec<f64> = g_raw.iter().copied().collect();
            self.adam(lr, n).step(&mut flat, &grads);
            for (s, chunk) in self.raw_states.iter_mut().zip(flat.chunks(self.state_dim)) {
                s.iter_mut().zip(chunk).for_each(|(s, v)| *s = v.clamp(0.0, 1.0));
            }
        }
        Ok(())
    }

    /// Dispatch on the generator mode.
    pub fn improve(&mut self, model: &HybridErrorModel, steps: usize, lr: f64, reg: Option<DiversityReg>) -> Result<()> {
        match self.mode {
            ExploitMode::Network => self.train_exploit(model, steps, lr, reg),
            ExploitMode::DirectState => self.direct_state_step(model, steps, lr, reg),
        }
    }

    /// The candidate with the lowest surrogate value.
    pub fn select_exploit(&self, model: &HybridErrorModel) -> Result<Selection> {
        let cands = self.candidates()?;
        let scores = model.value_batch(cands.view())?;
        let index = argmin_first(&scores).ok_or_else(|| GeeseError::InvalidState("no exploitation candidates".into()))?;
        Ok(Selection { index, state: cands.row(index).to_vec(), score: scores[index] })
    }
}

/// Single-hidden-layer `R^1 -> R^D` network with standard-normal weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreGenerator {
    net: DenseNet,
    latents: Vec<f64>,
    n_candidates: usize,
    range: f64,
    monotone: bool,
    adam: Option<Adam>,
}

impl ExploreGenerator {
    pub fn new(hidden: usize, state_dim: usize, n_candidates: usize, monotone: bool, seed: u64) -> Result<Self> {
        if n_candidates == 0 {
            return Err(GeeseError::InvalidConfig("exploration needs at least one candidate".into()));
        }
        let net = DenseNet::zeros(&[1, hidden, state_dim], Activation::Tanh)?;
        let mut gen = ExploreGenerator { net, latents: Vec::new(), n_candidates, range: EXPLORE_LATENT_RANGE, monotone, adam: None };
        gen.resample(seed);
        Ok(gen)
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn weights(&self) -> &[f64] {
        self.net.weights()
    }

    /// Redraw every weight from N(0, 1) and a fresh set of latents from
    /// U([-5, 5]).
    pub fn resample(&mut self, seed: u64) {
        let mut rng = rng::child_rng(seed, rng::STREAM_EXPLORE, 0);
        for w in self.net.weights_mut() {
            *w = StandardNormal.sample(&mut rng);
        }
        self.resample_latents(&mut rng);
    }

    fn resample_latents(&mut self, rng: &mut rng::Rng) {
        self.latents = (0..self.n_candidates).map(|_| rng.random_range(-self.range..=self.range)).collect();
    }

    fn hidden_scale(&self) -> f64 {
        1.0 / (self.net.layer_sizes()[1] as f64).sqrt()
    }

    fn latent_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.latents.len(), 1), self.latents.clone()).expect("column of latents")
    }

    /// Normalised candidate states, one per row. The output pre-activation
    /// is scaled by `1/sqrt(hidden)` so the sigmoid does not saturate.
    pub fn candidates(&self) -> Result<Array2<f64>> {
        let s = self.hidden_scale();
        let raw = self.net.forward_batch(self.latent_matrix().view())?.mapv(|v| sigmoid(s * v));
        Ok(decode_rows(&raw, self.monotone))
    }

    /// The candidate the ensemble disagrees on most, scored by the weighted
    /// per-element population standard deviation.
    pub fn select_explore(&self, ens: &Ensemble, w: &[f64]) -> Result<Selection> {
        let cands = self.candidates()?;
        let scores = ens.weighted_disagreement_batch(cands.view(), w)?;
        let index = argmax_first(&scores).ok_or_else(|| GeeseError::InvalidState("no exploration candidates".into()))?;
        Ok(Selection { index, state: cands.row(index).to_vec(), score: scores[index] })
    }

    /// Gradient ascent on mean weighted disagreement. Only used to compare
    /// against the untrained, resampled generator.
    pub fn train_explore(&mut self, ens: &Ensemble, w: &[f64], steps: usize, lr: f64, seed: u64) -> Result<()> {
        let mut rng = rng::child_rng(seed, rng::STREAM_EXPLORE, 1);
        self.resample_latents(&mut rng);
        let s = self.hidden_scale();
        let z = self.latent_matrix();
        let b = z.nrows() as f64;
        for step in 0..steps {
            let tape = self.net.forward_tape(z.view())?;
            let raw = tape.output().mapv(|v| sigmoid(s * v));
            let states = decode_rows(&raw, self.monotone);
            let (scores, g_state) = ens.weighted_disagreement_grad_batch(states.view(), w)?;
            let loss = -scores.iter().sum::<f64>() / b;
            if !loss.is_finite() {
                return Err(GeeseError::TrainingDiverged { iteration: step, loss });
            }
            let mut g_out = decode_rows_vjp(&raw, &g_state, self.monotone);
            g_out.zip_mut_with(&raw, |g, &r| *g *= -r * (1.0 - r) * s / b);
            let (gw, _) = self.net.backward(&tape, g_out.view(), true);
            let gw = gw.expect("weight gradient requested");
            let n = gw.len();
            let adam = self.adam.get_or_insert_with(|| Adam::new(lr, n));
            adam.lr = lr;
            adam.step(self.net.weights_mut(), &gw);
        }
        Ok(())
    }
}
