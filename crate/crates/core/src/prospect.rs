//! Prospect-theory valuation of two-outcome gambles and the PT variants
//! of the decision-task-1 models.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::prob::{softmax, ActionDistribution};
use crate::reward::RewardScheme;
use crate::session::{N_OPTIONS, TEAM_SIZE};

/// Smallest distortion used in place of a zero grid point; `γ = 0` makes
/// the weighting function constant.
pub const GAMMA_FLOOR: f64 = 0.01;

pub const LAMBDA_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtParams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

impl PtParams {
    /// Parameters under which every gamble is valued at its expectation.
    pub const IDENTITY: PtParams = PtParams {
        alpha: 1.0,
        beta: 1.0,
        lambda: 1.0,
        gamma_plus: 1.0,
        gamma_minus: 1.0,
    };

    pub fn new(
        alpha: f64,
        beta: f64,
        lambda: f64,
        gamma_plus: f64,
        gamma_minus: f64,
    ) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            lambda,
            gamma_plus,
            gamma_minus,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(domain(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("beta", self.beta)?;
        if !(0.0..=LAMBDA_MAX).contains(&self.lambda) {
            return Err(domain(format!(
                "lambda = {} outside [0, {LAMBDA_MAX}]",
                self.lambda
            )));
        }
        for (name, g) in [
            ("gamma_plus", self.gamma_plus),
            ("gamma_minus", self.gamma_minus),
        ] {
            if !(g > 0.0 && g <= 1.0) {
                return Err(domain(format!("{name} = {g} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

impl Default for PtParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Win `gain` with probability `p`, otherwise receive `loss` (non-positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamble {
    pub gain: f64,
    pub p: f64,
    pub loss: f64,
}

impl Gamble {
    pub fn new(gain: f64, p: f64, loss: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("gamble probability {p} outside [0, 1]")));
        }
        if !(gain >= 0.0 && loss <= 0.0) {
            return Err(domain(format!(
                "gamble needs gain ≥ 0 ≥ loss, got {gain} and {loss}"
            )));
        }
        Ok(Self { gain, p, loss })
    }

    /// Gamble behind answering an option believed right with probability `p`.
    pub fn option(scheme: &RewardScheme, p: f64) -> Self {
        Self {
            gain: scheme.c1,
            p,
            loss: -scheme.c2,
        }
    }

    /// Gamble behind consulting an agent believed right with probability `p`.
    pub fn agent(scheme: &RewardScheme, p: f64) -> Self {
        Self {
            gain: scheme.c1 - scheme.c3,
            p,
            loss: -(scheme.c2 + scheme.c3),
        }
    }
}

/// Probability weighting `exp(−(ln 1/p)^γ)`. Exact at both endpoints.
pub fn weight(p: f64, gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(domain(format!(
            "weighting exponent {gamma} must be positive"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(weight_unchecked(p, gamma))
}

#[inline]
pub(crate) fn weight_unchecked(p: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        return p;
    }
    // -ln(0) = inf and inf^γ = inf give w(0) = 0; ln(1) = 0 gives w(1) = 1
    (-(-p.ln()).powf(gamma)).exp()
}

/// Subjective value `gain^α·w⁺(p) − λ·|loss|^β·w⁻(1−p)`.
pub fn pt_value(g: &Gamble, params: &PtParams) -> f64 {
    let up = g.gain.powf(params.alpha) * weight_unchecked(g.p, params.gamma_plus);
    let down = params.lambda
        * g.loss.abs().powf(params.beta)
        * weight_unchecked(1.0 - g.p, params.gamma_minus);
    up - down
}

/// Softmax over the prospect values of the four option gambles and the
/// four agent gambles.
pub fn pt_dt1_distribution(
    option_post: &[f64; N_OPTIONS],
    agent_probs: &[f64; TEAM_SIZE],
    params: &PtParams,
    scheme: &RewardScheme,
) -> Result<ActionDistribution> {
    params.validate()?;
    let mut values = [0.0; N_OPTIONS + TEAM_SIZE];
    for (k, p) in option_post.iter().enumerate() {
        values[k] = pt_value(&Gamble::option(scheme, *p), params);
    }
    for (j, p) in agent_probs.iter().enumerate() {
        values[N_OPTIONS + j] = pt_value(&Gamble::agent(scheme, *p), params);
    }
    softmax(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::dt1_distribution;
    use crate::prob::normalize;
    use proptest::prelude::*;

    const KT: PtParams = PtParams {
        alpha: 0.88,
        beta: 0.88,
        lambda: 2.25,
        gamma_plus: 0.61,
        gamma_minus: 0.61,
    };

    #[test]
    fn weight_fixed_points() {
        assert_eq!(weight(0.5, 1.0).unwrap(), 0.5);
        let e_inv = (-1.0f64).exp();
        for g in [0.01, 0.3, 0.61, 1.0] {
            assert!((weight(e_inv, g).unwrap() - e_inv).abs() < 1e-15);
            assert_eq!(weight(0.0, g).unwrap(), 0.0);
            assert_eq!(weight(1.0, g).unwrap(), 1.0);
        }
        assert!((weight(0.05, 0.5).unwrap() - 0.177_139_382_845_034_3).abs() < 1e-13);
        assert!(weight(0.5, 0.0).is_err());
        assert!(weight(1.5, 0.5).is_err());
    }

    #[test]
    fn identity_values_are_expectations() {
        let s = RewardScheme::default();
        let v = pt_value(&Gamble::new(4.0, 0.828, -1.0).unwrap(), &PtParams::IDENTITY);
        assert!((v - (5.0 * 0.828 - 1.0)).abs() < 1e-12);
        let v = pt_value(&Gamble::agent(&s, 0.75), &PtParams::IDENTITY);
        assert!((v - 1.75).abs() < 1e-12);
    }

    #[test]
    fn kahneman_tversky_value() {
        // term by term: 4^0.88·w(0.45) − 2.25·w(0.55)
        let g = Gamble::new(4.0, 0.45, -1.0).unwrap();
        let w_up = (-(1.0f64 / 0.45).ln().powf(0.61)).exp();
        let w_down = (-(1.0f64 / 0.55).ln().powf(0.61)).exp();
        let want = 4.0f64.powf(0.88) * w_up - 2.25 * w_down;
        assert!((pt_value(&g, &KT) - want).abs() < 1e-12);
        // 50-digit evaluation
        assert!((pt_value(&g, &KT) - 0.332_925_313_772_741_3).abs() < 1e-12);
    }

    #[test]
    fn example_gamble_table() {
        let s = RewardScheme::default();
        let opts = [0.05, 0.05, 0.45, 0.45];
        let values: Vec<f64> = opts
            .iter()
            .map(|p| pt_value(&Gamble::option(&s, *p), &KT))
            .chain((0..4).map(|_| pt_value(&Gamble::agent(&s, 0.75), &KT)))
            .collect();
        assert_eq!(values[0], values[1]);
        assert_eq!(values[2], values[3]);
        assert!(values[4..].iter().all(|v| *v == values[4]));
        assert!(values[2] > values[0]);
    }

    #[test]
    fn loss_aversion_sends_team_to_agents() {
        let s = RewardScheme::default();
        let opts = [0.4, 0.3, 0.2, 0.1];
        let agents = [0.75; 4];
        let averse = PtParams {
            lambda: 10.0,
            ..PtParams::IDENTITY
        };
        let d = pt_dt1_distribution(&opts, &agents, &averse, &s).unwrap();
        assert!(d.argmax() >= 4);
        let sure = [0.99, 0.005, 0.003, 0.002];
        let d = pt_dt1_distribution(&sure, &agents, &PtParams::IDENTITY, &s).unwrap();
        assert_eq!(d.argmax(), 0);
    }

    #[test]
    fn params_serialize_with_named_fields() {
        let json = serde_json::to_value(KT).unwrap();
        for key in ["alpha", "beta", "lambda", "gamma_plus", "gamma_minus"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert!(PtParams::new(0.5, 0.5, 11.0, 0.5, 0.5).is_err());
        assert!(PtParams::new(0.5, 0.5, 2.0, 0.0, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn identity_matches_expected_rewards(
            opts in prop::array::uniform4(0.0f64..1.0),
            agents in prop::array::uniform4(0.5f64..1.0),
        ) {
            let s = RewardScheme::default();
            let o = normalize(opts);
            let a = pt_dt1_distribution(&o, &agents, &PtParams::IDENTITY, &s).unwrap();
            let b = dt1_distribution(&o, &agents, &s).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            for p in o {
                prop_assert!((pt_value(&Gamble::option(&s, p), &PtParams::IDENTITY) - s.option_reward(p)).abs() <= 1e-12);
            }
        }

        #[test]
        fn value_nondecreasing_in_p(
            p1 in 0.0f64..1.0, p2 in 0.0f64..1.0,
            alpha in 0.0f64..=1.0, lambda in 0.0f64..=10.0,
            gp in 0.01f64..=1.0, gm in 0.01f64..=1.0,
        ) {
            let params = PtParams { alpha, beta: alpha, lambda, gamma_plus: gp, gamma_minus: gm };
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let s = RewardScheme::default();
            prop_assert!(pt_value(&Gamble::option(&s, lo), &params) <= pt_value(&Gamble::option(&s, hi), &params) + 1e-12);
        }

        #[test]
        fn weight_strictly_increasing(p1 in 0.001f64..0.999, dp in 0.001f64..0.5, g in 0.01f64..=1.0) {
            let p2 = (p1 + dp).min(0.9995);
            prop_assume!(p2 > p1);
            prop_assert!(weight(p1, g).unwrap() < weight(p2, g).unwrap());
        }
    }
}
