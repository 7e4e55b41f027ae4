//! Probability vectors and the shared numeric helpers used by every model.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Lower clamp applied to probabilities that enter a logarithm or a division.
pub const PROB_FLOOR: f64 = 1e-9;
/// Upper clamp, the mirror of [`PROB_FLOOR`].
pub const PROB_CEIL: f64 = 1.0 - 1e-9;

/// Tolerance on the unit sum of an [`ActionDistribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, PROB_CEIL)
}

/// A model's output: a probability for every action of a decision task.
///
/// Decision task 1 has eight actions (options 1..4 then agents 1..4),
/// decision task 2 has four (options 1..4).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(domain("empty action distribution"));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(domain(format!("invalid action probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(domain(format!("action probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Uniform distribution over `n` actions.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero actions");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most probable action; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl TryFrom<Vec<f64>> for ActionDistribution {
    type Error = crate::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ActionDistribution> for Vec<f64> {
    fn from(d: ActionDistribution) -> Self {
        d.probs
    }
}

/// Numerically stable softmax.
pub fn softmax(values: &[f64]) -> Result<ActionDistribution> {
    if values.is_empty() {
        return Err(domain("softmax of an empty vector"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(domain("softmax input contains NaN"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(domain("softmax input is not finite"));
    }
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ActionDistribution {
        probs: exps.into_iter().map(|e| e / total).collect(),
    })
}

/// Softmax over finite values, overwriting them. Used in hot loops.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Divides by the sum. Falls back to uniform when the mass is zero.
pub fn normalize<const N: usize>(v: [f64; N]) -> [f64; N] {
    let total: f64 = v.iter().sum();
    if total > 0.0 && total.is_finite() {
        v.map(|x| x / total)
    } else {
        [1.0 / N as f64; N]
    }
}

/// Shannon entropy in nats.
pub fn entropy(q: &[f64]) -> f64 {
    q.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}
