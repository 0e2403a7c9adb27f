//! Hybrid surrogate error model: an ensemble of dense nets estimates the
//! implicit error elements, exact closed-form terms supply the rest.
//!
//! The model takes normalised states as input. Ensemble members map
//! `R^D -> R^k` (or `R^D -> R` in weighted-sum mode); their mean is the
//! implicit estimate and their population standard deviation the
//! disagreement used for exploration.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{GeeseError, Result};
use crate::evaluators::ExplicitError;
use crate::exec::{self, ExecMode};
use crate::netcore::{self, Activation, DenseNet, Sample, TrainConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    members: Vec<DenseNet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementVector {
    pub sigma: Vec<f64>,
}

impl DisagreementVector {
    pub fn weighted(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.sigma.len() {
            return Err(GeeseError::ShapeMismatch { expected: self.sigma.len(), got: w.len() });
        }
        Ok(self.sigma.iter().zip(w).map(|(s, w)| s * w).sum())
    }
}

impl Ensemble {
    pub fn new(members: Vec<DenseNet>) -> Result<Self> {
        let first = members.first().ok_or_else(|| GeeseError::InvalidEnsemble("ensemble needs at least one member".into()))?;
        if members.iter().any(|m| m.layer_sizes() != first.layer_sizes()) {
            return Err(GeeseError::InvalidEnsemble("members must share layer sizes".into()));
        }
        Ok(Ensemble { members })
    }

    /// `size` members with independent Glorot initialisations.
    pub fn random(size: usize, layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let members = (0..size)
            .map(|i| DenseNet::glorot(layer_sizes, activation, &mut rng::child_rng(seed, rng::STREAM_MEMBER_INIT, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[DenseNet] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [DenseNet] {
        &mut self.members
    }

    pub fn state_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.members[0].output_dim()
    }

    pub fn member_outputs(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        self.members.iter().map(|m| m.forward_batch(xs)).collect()
    }

    /// Element-wise mean of member outputs for every row of `xs`.
    pub fn predict_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let outs = self.member_outputs(xs)?;
        Ok(mean_of(&outs))
    }

    pub fn predict_implicit(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(row(x))?.into_raw_vec_and_offset().0)
    }

    /// Population standard deviation of member outputs, per row and element.
    pub fn disagreement_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.require_disagreement()?;
        let outs = self.member_outputs(xs)?;
        let mean = mean_of(&outs);
        let l = outs.len() as f64;
        let mut var = Array2::<f64>::zeros(mean.raw_dim());
        for o in &outs {
            var.zip_mut_with(&(o - &mean), |v, d| *v += d * d);
        }
        let mut sigma = var.mapv(|v| (v / l).sqrt());
        // exact agreement must give exactly zero regardless of rounding in the mean
        for ((r, c), s) in sigma.indexed_iter_mut() {
            let first = outs[0][(r, c)];
            if outs.iter().all(|o| o[(r, c)] == first) {
                *s = 0.0;
            }
        }
        Ok(sigma)
    }

    pub fn disagreement(&self, x: &[f64]) -> Result<DisagreementVector> {
        let s = self.disagreement_batch(row(x))?;
        Ok(DisagreementVector { sigma: s.into_raw_vec_and_offset().0 })
    }

    pub fn weighted_disagreement(&self, x: &[f64], w: &[f64]) -> Result<f64> {
        self.disagreement(x)?.weighted(w)
    }

    pub fn weighted_disagreement_batch(&self, xs: ArrayView2<'_, f64>, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.output_dim() {
            return Err(GeeseError::ShapeMismatch { expected: self.output_dim(), got: w.len() });
        }
        let s = self.disagreement_batch(xs)?;
        Ok(s.axis_iter(Axis(0)).map(|r| r.iter().zip(w).map(|(s, w)| s * w).sum()).collect())
    }

    /// Weighted disagreement and its gradient with respect to the inputs.
    /// Elements with zero spread contribute no gradient.
    pub fn weighted_disagreement_grad_batch(&self, xs: ArrayView2<'_, f64>, w: &[f64]) -> Result<(Vec<f64>, Array2<f64>)> {
        self.require_disagreement()?;
        let tapes = self.members.iter().map(|m| m.forward_tape(xs)).collect::<Result<Vec<_>>>()?;
        let outs: Vec<Array2<f64>> = tapes.iter().map(|t| t.output().clone()).collect();
        let mean = mean_of(&outs);
        let sigma = self.disagreement_batch(xs)?;
        let l = outs.len() as f64;
        let scores = sigma.axis_iter(Axis(0)).map(|r| r.iter().zip(w).map(|(s, w)| s * w).sum()).collect();
        let mut grad = Array2::<f64>::zeros(xs.raw_dim());
        for (m, (tape, out)) in self.members.iter().zip(tapes.iter().zip(&outs)) {
            let mut up = out - &mean;
            for ((r, c), u) in up.indexed_iter_mut() {
                let s = sigma[(r, c)];
                *u = if s > 0.0 { w[c] * *u / (l * s) } else { 0.0 };
            }
            let (_, gx) = m.backward(tape, up.view(), false);
            grad += &gx;
        }
        Ok((scores, grad))
    }

    fn require_disagreement(&self) -> Result<()> {
        if self.members.len() < 2 {
            return Err(GeeseError::InvalidEnsemble(format!("disagreement needs at least 2 members, have {}", self.members.len())));
        }
        Ok(())
    }
}

fn row(x: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((1, x.len()), x).expect("row vector")
}

fn mean_of(outs: &[Array2<f64>]) -> Array2<f64> {
    let mut acc = outs[0].clone();
    for o in &outs[1..] {
        acc += o;
    }
    acc / outs.len() as f64
}

/// Train each member on its own bootstrap resample (with replacement, same
/// size as `data`). Returns how many members stopped early.
pub fn fit_ensemble_initial(ens: &mut Ensemble, data: &[Sample], cfg: &TrainConfig, seed: u64, mode: ExecMode) -> Result<usize> {
    if data.is_empty() {
        return Err(GeeseError::InvalidArgument("cannot fit an ensemble on an empty dataset".into()));
    }
    let outcomes = train_members(ens, cfg, seed, mode, |i, rng| {
        let _ = i;
        (0..data.len()).map(|_| data[rng.random_range(0..data.len())].clone()).collect()
    });
    count_early(outcomes)
}

/// The per-member fine-tuning sets: the new pairs plus `n` pairs drawn
/// uniformly with replacement from the archive, independently per member.
pub fn member_training_sets(new_pairs: &[Sample], archive: &[Sample], n: usize, members: usize, seed: u64) -> Result<Vec<Vec<Sample>>> {
    if archive.is_empty() {
        return Err(GeeseError::InvalidArgument("archive must be non-empty".into()));
    }
    if new_pairs.is_empty() && n == 0 {
        return Err(GeeseError::InvalidArgument("fine-tuning set would be empty".into()));
    }
    Ok((0..members)
        .map(|i| {
            let mut rng = rng::child_rng(seed, rng::STREAM_UPDATE_SAMPLING, i as u64);
            let mut set = new_pairs.to_vec();
            set.extend((0..n).map(|_| archive[rng.random_range(0..archive.len())].clone()));
            set
        })
        .collect())
}

/// Fine-tune existing member weights on [`member_training_sets`].
pub fn fit_ensemble_update(
    ens: &mut Ensemble,
    new_pairs: &[Sample],
    archive: &[Sample],
    n: usize,
    cfg: &TrainConfig,
    seed: u64,
    mode: ExecMode,
) -> Result<usize> {
    let sets = member_training_sets(new_pairs, archive, n, ens.len(), seed)?;
    let outcomes = train_members(ens, cfg, seed, mode, |i, _| sets[i].clone());
    count_early(outcomes)
}

fn train_members<F>(ens: &mut Ensemble, cfg: &TrainConfig, seed: u64, mode: ExecMode, make_set: F) -> Vec<Result<bool>>
where
    F: Fn(usize, &mut rng::Rng) -> Vec<Sample> + Sync + Send,
{
    let mut slots: Vec<(DenseNet, Option<Result<bool>>)> = ens.members.drain(..).map(|m| (m, None)).collect();
    exec::for_each_mut(mode, &mut slots, |i, (net, out)| {
        let mut rng = rng::child_rng(seed, rng::STREAM_MEMBER_TRAIN, i as u64);
        let set = make_set(i, &mut rng);
        *out = Some(netcore::train(net, &set, cfg, &mut rng).map(|o| o.early_stopped));
    });
    let mut outcomes = Vec::with_capacity(slots.len());
    for (net, out) in slots {
        ens.members.push(net);
        outcomes.push(out.expect("every member visited"));
    }
    outcomes
}

fn count_early(outcomes: Vec<Result<bool>>) -> Result<usize> {
    let mut n = 0;
    for o in outcomes {
        n += usize::from(o?);
    }
    Ok(n)
}

/// What the ensemble members are trained to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SurrogateTarget {
    /// One output per implicit error element.
    #[default]
    Elementwise,
    /// A single output estimating the weighted implicit error sum.
    WeightedSum,
}

#[derive(Debug, Clone)]
pub struct HybridErrorModel {
    pub ensemble: Ensemble,
    explicit: Vec<Arc<dyn ExplicitError>>,
    weights: Vec<f64>,
    implicit_count: usize,
    target: SurrogateTarget,
}

impl HybridErrorModel {
    /// `weights` has one entry per error element (implicit ones first).
    pub fn new(ensemble: Ensemble, explicit: Vec<Arc<dyn ExplicitError>>, weights: Vec<f64>, target: SurrogateTarget) -> Result<Self> {
        let implicit_count = weights
            .len()
            .checked_sub(explicit.len())
            .ok_or(GeeseError::ShapeMismatch { expected: explicit.len(), got: weights.len() })?;
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(GeeseError::InvalidConfig("error weights must be non-negative".into()));
        }
        let outputs = match target {
            SurrogateTarget::Elementwise => implicit_count,
            SurrogateTarget::WeightedSum => 1,
        };
        if ensemble.output_dim() != outputs {
            return Err(GeeseError::ShapeMismatch { expected: outputs, got: ensemble.output_dim() });
        }
        Ok(HybridErrorModel { ensemble, explicit, weights, implicit_count, target })
    }

    pub fn target(&self) -> SurrogateTarget {
        self.target
    }

    pub fn implicit_count(&self) -> usize {
        self.implicit_count
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights applied to the ensemble outputs.
    pub fn head_weights(&self) -> Vec<f64> {
        match self.target {
            SurrogateTarget::Elementwise => self.weights[..self.implicit_count].to_vec(),
            SurrogateTarget::WeightedSum => vec![1.0],
        }
    }

    /// Training target for the ensemble given a full error vector.
    pub fn targets(&self, errors: &[f64]) -> Vec<f64> {
        let k = self.implicit_count;
        match self.target {
            SurrogateTarget::Elementwise => errors[..k].to_vec(),
            SurrogateTarget::WeightedSum => vec![self.weights[..k].iter().zip(&errors[..k]).map(|(w, e)| w * e).sum()],
        }
    }

    fn explicit_weights(&self) -> &[f64] {
        &self.weights[self.implicit_count..]
    }

    fn explicit_part(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let mut total = 0.0;
        let mut grad = grad;
        for (t, w) in self.explicit.iter().zip(self.explicit_weights()) {
            let v = t.value(x);
            if !v.is_finite() {
                return Err(GeeseError::EvaluatorFault(format!("explicit term `{}` is not finite", t.name())));
            }
            total += w * v;
            if let Some(g) = grad.as_deref_mut() {
                if *w != 0.0 {
                    for (gi, ti) in g.iter_mut().zip(t.gradient(x)) {
                        *gi += w * ti;
                    }
                }
            }
        }
        Ok(total)
    }

    /// Surrogate accumulated error for every row of `xs`.
    pub fn value_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let mean = self.ensemble.predict_batch(xs)?;
        let hw = self.head_weights();
        xs.axis_iter(Axis(0))
            .zip(mean.axis_iter(Axis(0)))
            .map(|(x, m)| {
                let implicit: f64 = m.iter().zip(&hw).map(|(m, w)| m * w).sum();
                Ok(implicit + self.explicit_part(x.as_slice().expect("contiguous row"), None)?)
            })
            .collect()
    }

    /// Values and exact input gradients for every row of `xs`.
    pub fn value_grad_batch(&self, xs: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let xs = xs.as_standard_layout();
        let hw = self.head_weights();
        let l = self.ensemble.len() as f64;
        let b = xs.nrows();
        let upstream = Array2::from_shape_fn((b, hw.len()), |(_, j)| hw[j] / l);
        let mut values = vec![0.0; b];
        let mut grad = Array2::<f64>::zeros(xs.raw_dim());
        for m in self.ensemble.members() {
            let tape = m.forward_tape(xs.view())?;
            for (v, out) in values.iter_mut().zip(tape.output().axis_iter(Axis(0))) {
                *v += out.iter().zip(&hw).map(|(o, w)| o * w).sum::<f64>() / l;
            }
            let (_, gx) = m.backward(&tape, upstream.view(), false);
            grad += &gx;
        }
        for (i, (v, mut g)) in values.iter_mut().zip(grad.axis_iter_mut(Axis(0))).enumerate() {
            let x = xs.row(i);
            *v += self.explicit_part(x.as_slice().expect("contiguous row"), g.as_slice_mut())?;
        }
        Ok((values, grad))
    }

    pub fn hybrid_error(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.value_grad_batch(row(x))?;
        Ok((v[0], g.into_raw_vec_and_offset().0))
    }
}
