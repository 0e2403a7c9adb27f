//! Physical evaluation: error-vector assembly, the accumulated weighted
//! error, explicit error terms, built-in synthetic problems and metered
//! query accounting.

mod formulas;
mod ledger;
mod problems;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use formulas::{
    balance_error, feasible_domain_error, inequality_error, population_std, postprocess_monotone, postprocess_monotone_vjp,
    reconstruction_error, sigmoid, BalanceError, Bounds, ExplicitError, FeasibleDomainError, OrderingError, SquaredDistance,
};
pub use ledger::{QueryLedger, QueryRecord};
pub use problems::{builtin_problem, load_problem, parse_table, SineObservationModel, BUILTIN_PROBLEMS};

use crate::error::{GeeseError, Result};

/// The expensive part of the error vector: its first `count()` entries.
/// Opaque to the optimizer, which only sees the values via metered queries.
pub trait ImplicitModel: Send + Sync + fmt::Debug {
    fn count(&self) -> usize;
    fn errors(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn obs_dim(&self) -> usize {
        0
    }
}

/// Implicit model given by a closure, mostly for tests and custom problems.
pub struct FnImplicit<F> {
    count: usize,
    f: F,
}

impl<F> FnImplicit<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(count: usize, f: F) -> Self {
        FnImplicit { count, f }
    }
}

impl<F> fmt::Debug for FnImplicit<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnImplicit").field("count", &self.count).finish()
    }
}

impl<F> ImplicitModel for FnImplicit<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn count(&self) -> usize {
        self.count
    }

    fn errors(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub error_vector: Vec<f64>,
    pub accumulated: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub bounds: Bounds,
    /// One weight per error element, implicit elements first.
    pub weights: Vec<f64>,
    pub epsilon: f64,
    /// States must be increasing; optimizers search raw coordinates and
    /// map them through [`postprocess_monotone`].
    pub monotone_constraints: bool,
    /// A state known to reconstruct the target exactly, when available.
    pub reference_state: Option<Vec<f64>>,
    implicit: Arc<dyn ImplicitModel>,
    explicit: Vec<Arc<dyn ExplicitError>>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        bounds: Bounds,
        weights: Vec<f64>,
        epsilon: f64,
        implicit: Arc<dyn ImplicitModel>,
        explicit: Vec<Arc<dyn ExplicitError>>,
    ) -> Result<Self> {
        let h = implicit.count() + explicit.len();
        if weights.len() != h {
            return Err(GeeseError::ShapeMismatch { expected: h, got: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(GeeseError::InvalidConfig("error weights must be non-negative".into()));
        }
        let spec = ProblemSpec {
            name: name.into(),
            bounds,
            weights,
            epsilon: 1.0,
            monotone_constraints: false,
            reference_state: None,
            implicit,
            explicit,
        };
        spec.with_epsilon(epsilon)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(GeeseError::InvalidConfig(format!("feasibility threshold must be positive, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_monotone_constraints(mut self, on: bool) -> Self {
        self.monotone_constraints = on;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.implicit.obs_dim()
    }

    pub fn implicit_count(&self) -> usize {
        self.implicit.count()
    }

    pub fn total_errors(&self) -> usize {
        self.weights.len()
    }

    pub fn implicit_weights(&self) -> &[f64] {
        &self.weights[..self.implicit_count()]
    }

    pub fn explicit_weights(&self) -> &[f64] {
        &self.weights[self.implicit_count()..]
    }

    pub fn explicit_terms(&self) -> &[Arc<dyn ExplicitError>] {
        &self.explicit
    }

    /// The explicit terms re-expressed on min-max normalised states, with
    /// gradients scaled accordingly.
    pub fn explicit_terms_normalized(&self) -> Vec<Arc<dyn ExplicitError>> {
        self.explicit
            .iter()
            .map(|t| Arc::new(NormalizedTerm { inner: Arc::clone(t), bounds: self.bounds.clone() }) as Arc<dyn ExplicitError>)
            .collect()
    }

    /// Search coordinates in `[0, 1]^D` to normalised state coordinates.
    pub fn decode(&self, raw: &[f64]) -> Vec<f64> {
        if self.monotone_constraints {
            postprocess_monotone(raw)
        } else {
            raw.to_vec()
        }
    }

    pub fn decode_vjp(&self, raw: &[f64], upstream: &[f64]) -> Vec<f64> {
        if self.monotone_constraints {
            postprocess_monotone_vjp(raw, upstream)
        } else {
            upstream.to_vec()
        }
    }

    /// Search coordinates straight to a physical state.
    pub fn search_to_state(&self, raw: &[f64]) -> Vec<f64> {
        self.bounds.denormalize(&self.decode(raw))
    }

    pub fn accumulate(&self, errors: &[f64]) -> f64 {
        self.weights.iter().zip(errors).map(|(w, e)| w * e).sum()
    }

    /// Unmetered evaluation. Optimizers go through [`evaluate`]; this is for
    /// offline checks, case construction and calibration.
    pub fn assess(&self, x: &[f64]) -> Result<EvalResult> {
        if x.len() != self.state_dim() {
            return Err(GeeseError::ShapeMismatch { expected: self.state_dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GeeseError::InvalidState("state contains non-finite values".into()));
        }
        let mut errors = self.implicit.errors(x)?;
        if errors.len() != self.implicit_count() {
            return Err(GeeseError::EvaluatorFault(format!(
                "implicit model returned {} values, expected {}",
                errors.len(),
                self.implicit_count()
            )));
        }
        errors.extend(self.explicit.iter().map(|t| t.value(x)));
        if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
            return Err(GeeseError::EvaluatorFault(format!("error element {i} is not finite")));
        }
        let accumulated = self.accumulate(&errors);
        Ok(EvalResult { feasible: accumulated <= self.epsilon, accumulated, error_vector: errors })
    }
}

/// One metered physical evaluation: computes the full error vector and
/// records it in the ledger. Fails without recording when the budget is spent.
pub fn evaluate(spec: &ProblemSpec, ledger: &mut QueryLedger, x: &[f64]) -> Result<EvalResult> {
    ledger.ensure_capacity()?;
    let result = spec.assess(x)?;
    ledger.record(x.to_vec(), result.error_vector.clone());
    Ok(result)
}

#[derive(Debug)]
struct NormalizedTerm {
    inner: Arc<dyn ExplicitError>,
    bounds: Bounds,
}

impl ExplicitError for NormalizedTerm {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn value(&self, xn: &[f64]) -> f64 {
        self.inner.value(&self.bounds.denormalize(xn))
    }

    fn gradient(&self, xn: &[f64]) -> Vec<f64> {
        let g = self.inner.gradient(&self.bounds.denormalize(xn));
        g.iter().enumerate().map(|(i, v)| v * self.bounds.range(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ProblemSpec {
        let bounds = Bounds::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let implicit = Arc::new(FnImplicit::new(1, |x: &[f64]| vec![(x[0] - 1.0).abs()]));
        let explicit: Vec<Arc<dyn ExplicitError>> = vec![Arc::new(FeasibleDomainError { bounds: bounds.clone() })];
        ProblemSpec::new("toy", bounds, vec![1.0, 0.5], 0.1, implicit, explicit).unwrap()
    }

    #[test]
    fn evaluate_counts_and_logs() {
        let spec = toy();
        let mut ledger = QueryLedger::new(2).unwrap();
        let r = evaluate(&spec, &mut ledger, &[1.0, 1.0]).unwrap();
        assert!(r.feasible);
        assert_eq!(r.error_vector, vec![0.0, 0.0]);
        assert_eq!(ledger.count(), 1);
        let r = evaluate(&spec, &mut ledger, &[3.0, 1.0]).unwrap();
        assert!((r.accumulated - (2.0 + 0.5 * 0.25)).abs() < 1e-15);
        assert!(!r.feasible);
        assert_eq!(ledger.log()[1].index, 1);
        assert!(matches!(evaluate(&spec, &mut ledger, &[1.0, 1.0]), Err(GeeseError::BudgetExceeded { budget: 2 })));
        assert_eq!(ledger.count(), 2);
    }

    #[test]
    fn evaluate_rejects_bad_states_without_counting() {
        let spec = toy();
        let mut ledger = QueryLedger::new(5).unwrap();
        assert!(matches!(evaluate(&spec, &mut ledger, &[f64::NAN, 1.0]), Err(GeeseError::InvalidState(_))));
        assert!(matches!(evaluate(&spec, &mut ledger, &[1.0]), Err(GeeseError::ShapeMismatch { .. })));
        assert_eq!(ledger.count(), 0);
    }

    #[test]
    fn weights_must_match_error_count() {
        let bounds = Bounds::unit(2);
        let implicit = Arc::new(FnImplicit::new(1, |_: &[f64]| vec![0.0]));
        assert!(ProblemSpec::new("x", bounds.clone(), vec![1.0, 1.0], 0.1, implicit.clone(), vec![]).is_err());
        assert!(ProblemSpec::new("x", bounds.clone(), vec![-1.0], 0.1, implicit.clone(), vec![]).is_err());
        assert!(ProblemSpec::new("x", bounds, vec![1.0], 0.0, implicit, vec![]).is_err());
    }

    #[test]
    fn doubling_weights_doubles_accumulated() {
        let spec = toy();
        let mut doubled = toy();
        doubled.weights.iter_mut().for_each(|w| *w *= 2.0);
        let x = [2.7, 0.4];
        let a = spec.assess(&x).unwrap().accumulated;
        let b = doubled.assess(&x).unwrap().accumulated;
        assert!((b - 2.0 * a).abs() < 1e-14);
    }

    #[test]
    fn normalized_terms_agree_with_physical() {
        let spec = toy();
        let terms = spec.explicit_terms_normalized();
        let xn = [1.4, -0.2];
        let x = spec.bounds.denormalize(&xn);
        assert_eq!(terms[0].value(&xn), spec.explicit_terms()[0].value(&x));
        let h = 1e-6;
        let g = terms[0].gradient(&xn);
        for j in 0..2 {
            let mut p = xn;
            let mut m = xn;
            p[j] += h;
            m[j] -= h;
            let fd = (terms[0].value(&p) - terms[0].value(&m)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6);
        }
    }
}
