//! Closed-form physical error components and the monotone post-processing
//! used by problems with ordered states.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GeeseError, Result};

/// Per-dimension box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(GeeseError::ShapeMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.is_empty() {
            return Err(GeeseError::InvalidArgument("bounds need at least one dimension".into()));
        }
        if let Some(i) = lower.iter().zip(&upper).position(|(lo, hi)| !(lo < hi)) {
            return Err(GeeseError::InvalidArgument(format!("dimension {i}: lower bound must be below upper bound")));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Bounds { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Min-max normalised coordinates; the box maps onto `[0, 1]^D`.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| (v - self.lower[i]) / self.range(i)).collect()
    }

    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, v)| self.lower[i] + v * self.range(i)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }
}

/// Sum of per-observation relative L1 errors, normalised by `m * |y_i|`.
pub fn reconstruction_error(reconstructed: &[f64], target: &[f64]) -> Result<f64> {
    if reconstructed.len() != target.len() {
        return Err(GeeseError::ShapeMismatch { expected: target.len(), got: reconstructed.len() });
    }
    if target.is_empty() {
        return Err(GeeseError::InvalidArgument("observation must have at least one component".into()));
    }
    if let Some(index) = target.iter().position(|y| *y == 0.0) {
        return Err(GeeseError::InvalidTarget { index });
    }
    let m = target.len() as f64;
    Ok(reconstructed.iter().zip(target).map(|(f, y)| (f - y).abs() / (m * y.abs())).sum())
}

/// Mean over dimensions of how far the normalised coordinate leaves `[0, 1]`.
pub fn feasible_domain_error(x: &[f64], bounds: &Bounds) -> f64 {
    let u = bounds.normalize(x);
    u.iter().map(|v| (v - 1.0).max(0.0) + (-v).max(0.0)).sum::<f64>() / u.len() as f64
}

/// Population standard deviation of the normalised coordinates.
pub fn balance_error(x: &[f64], bounds: &Bounds) -> Result<f64> {
    if x.len() < 2 {
        return Err(GeeseError::InvalidArgument("balance error needs at least two dimensions".into()));
    }
    Ok(population_std(&bounds.normalize(x)))
}

/// Mean of the positive parts of constraint values `c_i <= 0`.
pub fn inequality_error(c: &[f64]) -> Result<f64> {
    if c.is_empty() {
        return Err(GeeseError::InvalidArgument("at least one constraint value required".into()));
    }
    Ok(c.iter().map(|v| v.max(0.0)).sum::<f64>() / c.len() as f64)
}

pub fn population_std(v: &[f64]) -> f64 {
    if v.iter().all(|x| *x == v[0]) {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Map raw coordinates in `[0, 1]` to a non-decreasing vector anchored at
/// the first coordinate: `out_i = r_1 + sigmoid(r_1 + ... + r_i) * (1 - r_1)`
/// for `i >= 2`. Partial sums run over the raw inputs.
pub fn postprocess_monotone(raw: &[f64]) -> Vec<f64> {
    let Some(&anchor) = raw.first() else { return Vec::new() };
    let mut out = Vec::with_capacity(raw.len());
    out.push(anchor);
    let mut partial = anchor;
    for r in &raw[1..] {
        partial += r;
        out.push(anchor + sigmoid(partial) * (1.0 - anchor));
    }
    out
}

/// Vector-Jacobian product of [`postprocess_monotone`].
pub fn postprocess_monotone_vjp(raw: &[f64], upstream: &[f64]) -> Vec<f64> {
    let n = raw.len();
    let mut grad = vec![0.0; n];
    if n == 0 {
        return grad;
    }
    let anchor = raw[0];
    // s'_i (1 - r_1) g_i for every i >= 2, accumulated as suffix sums
    let mut partial = anchor;
    let mut scaled = vec![0.0; n];
    grad[0] = upstream[0];
    for i in 1..n {
        partial += raw[i];
        let s = sigmoid(partial);
        let ds = s * (1.0 - s);
        scaled[i] = upstream[i] * ds * (1.0 - anchor);
        grad[0] += upstream[i] * (1.0 - s);
    }
    let mut suffix = 0.0;
    for i in (1..n).rev() {
        suffix += scaled[i];
        grad[i] = suffix;
    }
    // r_1 enters every partial sum as well
    grad[0] += suffix;
    grad
}

/// An error component with a closed form and an analytic (sub)gradient.
/// Gradients of hinge terms are zero exactly at the kink.
pub trait ExplicitError: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct FeasibleDomainError {
    pub bounds: Bounds,
}

impl ExplicitError for FeasibleDomainError {
    fn name(&self) -> &str {
        "feasible_domain"
    }

    fn value(&self, x: &[f64]) -> f64 {
        feasible_domain_error(x, &self.bounds)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len() as f64;
        let u = self.bounds.normalize(x);
        u.iter()
            .enumerate()
            .map(|(i, v)| {
                let s = if *v > 1.0 {
                    1.0
                } else if *v < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                s / (d * self.bounds.range(i))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BalanceError {
    pub bounds: Bounds,
}

impl ExplicitError for BalanceError {
    fn name(&self) -> &str {
        "balance"
    }

    fn value(&self, x: &[f64]) -> f64 {
        population_std(&self.bounds.normalize(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let u = self.bounds.normalize(x);
        let d = u.len() as f64;
        let mean = u.iter().sum::<f64>() / d;
        let sd = population_std(&u);
        if sd == 0.0 {
            return vec![0.0; u.len()];
        }
        u.iter().enumerate().map(|(i, v)| (v - mean) / (d * sd * self.bounds.range(i))).collect()
    }
}

/// Mean violation of `x_i - x_{i+1} < 0` over consecutive coordinates.
#[derive(Debug, Clone, Default)]
pub struct OrderingError;

impl ExplicitError for OrderingError {
    fn name(&self) -> &str {
        "ordering"
    }

    fn value(&self, x: &[f64]) -> f64 {
        let c: Vec<f64> = x.windows(2).map(|w| w[0] - w[1]).collect();
        inequality_error(&c).unwrap_or(0.0)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        if x.len() < 2 {
            return g;
        }
        let n = (x.len() - 1) as f64;
        for (i, w) in x.windows(2).enumerate() {
            if w[0] - w[1] > 0.0 {
                g[i] += 1.0 / n;
                g[i + 1] -= 1.0 / n;
            }
        }
        g
    }
}

/// `||x - center||^2`, handy as a smooth test objective.
#[derive(Debug, Clone)]
pub struct SquaredDistance {
    pub center: Vec<f64>,
}

impl ExplicitError for SquaredDistance {
    fn name(&self) -> &str {
        "squared_distance"
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, b)| 2.0 * (a - b)).collect()
    }
}
