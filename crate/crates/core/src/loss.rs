//! Scoring a model distribution `q` against an observed action `i`.
//!
//! L1 is `min_p H(q, p)` and L2 is `min_p H(p, q)`, both over data
//! distributions `p` whose maximum sits on `i` (`p_i ≥ p_k`, ties allowed).
//! Binary loss is `−ln q_i`. All logarithms are natural.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::prob::{clamp_prob, SUM_TOLERANCE};

pub const MAX_ORACLE_DIM: usize = 8;
pub const MIN_ORACLE_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    L1,
    L2,
    Binary,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::L1, LossKind::L2, LossKind::Binary];

    pub fn loss(self, q: &[f64], i: usize) -> f64 {
        match self {
            LossKind::L1 => l1_loss(q, i),
            LossKind::L2 => l2_loss(q, i),
            LossKind::Binary => binary_loss(q, i),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
            LossKind::Binary => "binary",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "l2" => Ok(LossKind::L2),
            "binary" => Ok(LossKind::Binary),
            _ => Err(domain(format!("unknown loss `{s}` (l1|l2|binary)"))),
        }
    }
}

/// Checks `q` is a distribution and `i` indexes it.
pub fn check_scoring_input(q: &[f64], i: usize) -> Result<()> {
    if i >= q.len() {
        return Err(domain(format!(
            "observed action {i} out of range for {} actions",
            q.len()
        )));
    }
    if q.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(domain("distribution has negative or NaN entries"));
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(domain(format!("distribution sums to {total}")));
    }
    Ok(())
}

#[inline]
fn nlog(p: f64) -> f64 {
    -clamp_prob(p).ln()
}

/// Members of the tie region: `i` plus every `k` passing `keep`.
fn pooled_set(q: &[f64], i: usize, keep: impl Fn(f64) -> bool) -> Vec<bool> {
    q.iter()
        .enumerate()
        .map(|(k, v)| k == i || keep(*v))
        .collect()
}

/// Level shared by the pooled entries of the L1 minimizer.
///
/// Pools `i` with every entry above the running average until no entry
/// leaves. The averages are unimodal along the sorted entries, so the
/// fixed point is the largest achievable level.
fn l1_level(q: &[f64], i: usize) -> (f64, Vec<bool>) {
    // the set only shrinks, so rounding cannot make it cycle
    let mut set = vec![true; q.len()];
    let mut level = q[i];
    let mut count = usize::MAX;
    loop {
        let next = pooled_set(q, i, |v| v >= level);
        set.iter_mut().zip(next).for_each(|(s, n)| *s &= n);
        let n = set.iter().filter(|b| **b).count();
        let sum: f64 = q
            .iter()
            .zip(&set)
            .filter(|(_, b)| **b)
            .map(|(v, _)| v)
            .sum();
        if n == count {
            return (level, set);
        }
        count = n;
        level = sum / n as f64;
    }
}

/// Optimal data distribution for L1: `i` pooled with the larger entries
/// at their common average, the rest copied from `q`.
pub fn l1_minimizer(q: &[f64], i: usize) -> Vec<f64> {
    let (level, set) = l1_level(q, i);
    q.iter()
        .zip(&set)
        .map(|(v, pooled)| if *pooled { level } else { *v })
        .collect()
}

/// Pools all of `q_H = {k : q_k ≥ q_i}` at their average. Optimal only when
/// no member of `q_H` lies below that average.
pub fn l1_upper_pool_minimizer(q: &[f64], i: usize) -> Vec<f64> {
    let qi = q[i];
    let set = pooled_set(q, i, |v| v >= qi);
    let n = set.iter().filter(|b| **b).count() as f64;
    let level = q
        .iter()
        .zip(&set)
        .filter(|(_, b)| **b)
        .map(|(v, _)| v)
        .sum::<f64>()
        / n;
    q.iter()
        .zip(&set)
        .map(|(v, pooled)| if *pooled { level } else { *v })
        .collect()
}

/// `H(q, p) = −Σ q_k ln p_k`, skipping zero-weight terms.
pub fn cross_entropy(weights: &[f64], probs: &[f64]) -> f64 {
    weights
        .iter()
        .zip(probs)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, p)| w * nlog(*p))
        .sum()
}

pub fn l1_loss(q: &[f64], i: usize) -> f64 {
    cross_entropy(q, &l1_minimizer(q, i))
}

fn uniform_over(set: &[bool]) -> Vec<f64> {
    let n = set.iter().filter(|b| **b).count() as f64;
    set.iter().map(|b| if *b { 1.0 / n } else { 0.0 }).collect()
}

/// L2 candidate spreading `p` uniformly over `q_H`.
pub fn l2_candidate_uniform(q: &[f64], i: usize) -> Vec<f64> {
    let qi = q[i];
    uniform_over(&pooled_set(q, i, |v| v >= qi))
}

/// L2 candidate spreading `p` over `i`, an argmax `j`, and every `l` with
/// `q_l > sqrt(q_i·q_j)`.
pub fn l2_candidate_threshold(q: &[f64], i: usize) -> Vec<f64> {
    let j = crate::prob::argmax(q);
    let cut = (q[i] * q[j]).sqrt();
    let mut set = pooled_set(q, i, |v| v > cut);
    set[j] = true;
    uniform_over(&set)
}

/// Exact L2 minimizer: uniform over `i` and the entries whose `−ln q` sits
/// below the running average. The objective is linear in `p`, so some
/// uniform-over-a-set vertex is optimal.
pub fn l2_pooled(q: &[f64], i: usize) -> Vec<f64> {
    let cost: Vec<f64> = q.iter().map(|v| nlog(*v)).collect();
    let mut set = vec![true; q.len()];
    let mut level = cost[i];
    let mut count = usize::MAX;
    loop {
        for (k, (s, c)) in set.iter_mut().zip(&cost).enumerate() {
            *s &= k == i || *c <= level;
        }
        let n = set.iter().filter(|b| **b).count();
        if n == count {
            return uniform_over(&set);
        }
        count = n;
        level = cost
            .iter()
            .zip(&set)
            .filter(|(_, b)| **b)
            .map(|(c, _)| c)
            .sum::<f64>()
            / n as f64;
    }
}

/// Best of the uniform, threshold and pooled candidates.
pub fn l2_minimizer(q: &[f64], i: usize) -> Vec<f64> {
    [
        l2_pooled(q, i),
        l2_candidate_threshold(q, i),
        l2_candidate_uniform(q, i),
    ]
    .into_iter()
    .map(|p| (cross_entropy(&p, q), p))
    .min_by(|a, b| a.0.total_cmp(&b.0))
    .map(|(_, p)| p)
    .expect("three candidates")
}

pub fn l2_loss(q: &[f64], i: usize) -> f64 {
    cross_entropy(&l2_minimizer(q, i), q)
}

pub fn binary_loss(q: &[f64], i: usize) -> f64 {
    nlog(q[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `H(q, p)`, the L1 direction.
    QP,
    /// `H(p, q)`, the L2 direction.
    PQ,
}

/// Searches feasible data distributions for the smallest cross-entropy.
///
/// `p_i` runs over a lattice whose step is at most `resolution` and divides
/// `1/m` for every `m ≤ dim`, so all uniform-over-a-subset vertices are hit.
/// For each `p_i = t` the remaining coordinates are solved exactly: capped
/// proportional fill for `QP`, greedy fill of the largest `q` for `PQ`.
pub fn oracle_min_cross_entropy(
    q: &[f64],
    i: usize,
    direction: Direction,
    resolution: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = q.len();
    if n > MAX_ORACLE_DIM {
        return Err(Error::Unsupported(format!(
            "oracle limited to {MAX_ORACLE_DIM} actions, got {n}"
        )));
    }
    if resolution.is_nan() || resolution < MIN_ORACLE_RESOLUTION {
        return Err(domain(format!(
            "oracle resolution {resolution} below {MIN_ORACLE_RESOLUTION}"
        )));
    }
    check_scoring_input(q, i)?;
    let lcm = (1..=n as u64).fold(1u64, |acc, m| acc / gcd(acc, m) * m);
    let per_unit = lcm * ((1.0 / (resolution * lcm as f64)).ceil() as u64).max(1);
    let first = per_unit / n as u64;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for step in first..=per_unit {
        let t = step as f64 / per_unit as f64;
        let p = match direction {
            Direction::QP => fill_proportional(q, i, t),
            Direction::PQ => fill_greedy(q, i, t),
        };
        let loss = match direction {
            Direction::QP => cross_entropy(q, &p),
            Direction::PQ => cross_entropy(&p, q),
        };
        if best.as_ref().is_none_or(|b| loss < b.1) {
            best = Some((p, loss));
        }
    }
    Ok(best.expect("lattice is non-empty"))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// With `p_i = t`, minimizes `−Σ_{k≠i} q_k ln p_k` under `p_k ≤ t` and
/// `Σ p_k = 1 − t`: proportional to `q` with the largest entries capped.
fn fill_proportional(q: &[f64], i: usize, t: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..q.len()).filter(|k| *k != i).collect();
    order.sort_by(|a, b| q[*b].total_cmp(&q[*a]));
    let mut p = vec![0.0; q.len()];
    p[i] = t;
    let mut remaining = 1.0 - t;
    let mut weight: f64 = order.iter().map(|k| q[*k]).sum();
    for (pos, k) in order.iter().enumerate() {
        let scaled = if weight > 0.0 {
            q[*k] * remaining / weight
        } else {
            remaining / (order.len() - pos) as f64
        };
        if scaled > t {
            p[*k] = t;
            remaining -= t;
            weight -= q[*k];
        } else {
            // the rest are no larger, so none of them hit the cap
            let rest = &order[pos..];
            for r in rest {
                p[*r] = if weight > 0.0 {
                    q[*r] * remaining / weight
                } else {
                    remaining / rest.len() as f64
                };
            }
            break;
        }
    }
    p
}

/// With `p_i = t`, minimizes `−Σ_{k≠i} p_k ln q_k`: fill the largest `q`
/// first, each up to `t`.
fn fill_greedy(q: &[f64], i: usize, t: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..q.len()).filter(|k| *k != i).collect();
    order.sort_by(|a, b| q[*b].total_cmp(&q[*a]));
    let mut p = vec![0.0; q.len()];
    p[i] = t;
    let mut remaining = 1.0 - t;
    for k in order {
        let take = remaining.min(t);
        p[k] = take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    p
}
