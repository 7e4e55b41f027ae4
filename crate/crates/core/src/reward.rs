//! Reward scheme and expected rewards for the two kinds of DT1 action.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Points awarded per question.
///
/// `c2` and `c3` are stored as positive magnitudes and subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScheme {
    /// Points for a correct answer.
    pub c1: f64,
    /// Penalty for an incorrect answer (or no consensus).
    pub c2: f64,
    /// Penalty for consulting an agent.
    pub c3: f64,
}

impl Default for RewardScheme {
    fn default() -> Self {
        Self {
            c1: 4.0,
            c2: 1.0,
            c3: 1.0,
        }
    }
}

impl RewardScheme {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let s = Self { c1, c2, c3 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            return Err(domain(format!("c1 must be positive, got {}", self.c1)));
        }
        if !(self.c2.is_finite() && self.c2 >= 0.0) {
            return Err(domain(format!("c2 must be nonnegative, got {}", self.c2)));
        }
        if !(self.c3.is_finite() && self.c3 >= 0.0) {
            return Err(domain(format!("c3 must be nonnegative, got {}", self.c3)));
        }
        Ok(())
    }

    /// Expected points for answering with an option that is correct with probability `p`.
    #[inline]
    pub fn option_reward(&self, p: f64) -> f64 {
        self.c1 * p - self.c2 * (1.0 - p)
    }

    /// Expected points for consulting an agent that is correct with probability `p`.
    /// The consultation fee is paid either way.
    #[inline]
    pub fn agent_reward(&self, p: f64) -> f64 {
        (self.c1 - self.c3) * p - (self.c2 + self.c3) * (1.0 - p)
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.c1, self.c2, self.c3)
    }
}

impl FromStr for RewardScheme {
    type Err = Error;

    /// Parses `c1,c2,c3`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(domain(format!("expected c1,c2,c3 but got `{s}`")));
        }
        let mut vals = [0.0; 3];
        for (slot, part) in vals.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| domain(format!("`{part}` is not a number")))?;
        }
        Self::new(vals[0], vals[1], vals[2])
    }
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(domain(format!("probability {p} outside [0, 1]")))
    }
}

/// `c1·p − c2·(1−p)`.
pub fn reward_for_option(p_correct: f64, scheme: &RewardScheme) -> Result<f64> {
    check_prob(p_correct)?;
    Ok(scheme.option_reward(p_correct))
}

/// `(c1−c3)·p − (c2+c3)·(1−p)`.
pub fn reward_for_agent(p_correct: f64, scheme: &RewardScheme) -> Result<f64> {
    check_prob(p_correct)?;
    Ok(scheme.agent_reward(p_correct))
}
