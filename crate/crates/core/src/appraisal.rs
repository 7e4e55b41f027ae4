//! Accuracy appraisals and influence centralities.
//!
//! Humans and agents are tracked with Beta pseudo-counts. Agents live on
//! the upper half of the unit interval because teams are told every agent
//! is at least 50% accurate, so an agent's mean is `0.5 + 0.5·a/(a+b)`.
//!
//! Influence is summarized by the left Perron vector of the surveyed
//! row-stochastic matrix `W`, found by power iteration.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::session::{Matrix4, ROW_SUM_TOLERANCE, TEAM_SIZE};

/// Convergence threshold on the L1 distance between successive iterates.
pub const POWER_TOLERANCE: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 10_000;
/// Weight kept on `W` when the undamped iteration fails to settle.
pub const DAMPING: f64 = 0.99;
/// Default L∞ tolerance for [`degroot_converge`].
pub const DEGROOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Accuracy anywhere in [0, 1].
    Unit,
    /// Accuracy in [0.5, 1].
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaAppraisal {
    pub a: f64,
    pub b: f64,
    pub support: Support,
}

impl BetaAppraisal {
    pub fn mean(&self) -> f64 {
        let frac = self.a / (self.a + self.b);
        match self.support {
            Support::Unit => frac,
            Support::Upper => 0.5 + 0.5 * frac,
        }
    }

    pub fn observe(self, correct: bool) -> Self {
        if correct {
            Self {
                a: self.a + 1.0,
                ..self
            }
        } else {
            Self {
                b: self.b + 1.0,
                ..self
            }
        }
    }
}

/// Uniform prior on [0, 1], mean 0.5.
pub fn init_human_appraisal() -> BetaAppraisal {
    BetaAppraisal {
        a: 1.0,
        b: 1.0,
        support: Support::Unit,
    }
}

/// Uniform prior on [0.5, 1], mean 0.75.
pub fn init_agent_appraisal() -> BetaAppraisal {
    BetaAppraisal {
        a: 1.0,
        b: 1.0,
        support: Support::Upper,
    }
}

pub fn observe(appraisal: BetaAppraisal, correct: bool) -> BetaAppraisal {
    appraisal.observe(correct)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centrality {
    pub delta: [f64; TEAM_SIZE],
    pub iterations: usize,
    /// True when the result comes from the damped fallback matrix.
    pub damped: bool,
}

pub fn check_row_stochastic(w: &Matrix4) -> Result<()> {
    for (i, row) in w.iter().enumerate() {
        if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(domain(format!(
                "row {} of W has a negative or non-finite entry",
                i + 1
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(domain(format!("row {} of W sums to {sum}", i + 1)));
        }
    }
    Ok(())
}

fn left_multiply(x: &[f64; TEAM_SIZE], w: &Matrix4) -> [f64; TEAM_SIZE] {
    let mut out = [0.0; TEAM_SIZE];
    for (i, xi) in x.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += xi * w[i][j];
        }
    }
    let total: f64 = out.iter().sum();
    out.map(|v| v / total)
}

fn power_iterate(w: &Matrix4) -> Option<([f64; TEAM_SIZE], usize)> {
    let mut x = [1.0 / TEAM_SIZE as f64; TEAM_SIZE];
    for it in 1..=MAX_ITERATIONS {
        let next = left_multiply(&x, w);
        let dist: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if dist <= POWER_TOLERANCE {
            return Some((x, it));
        }
    }
    None
}

/// Every member reaches every other along positive weights.
fn is_irreducible(w: &Matrix4) -> bool {
    let mut reach: [[bool; TEAM_SIZE]; TEAM_SIZE] =
        std::array::from_fn(|i| std::array::from_fn(|j| i == j || w[i][j] > 0.0));
    for k in 0..TEAM_SIZE {
        for i in 0..TEAM_SIZE {
            for j in 0..TEAM_SIZE {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    reach.iter().all(|row| row.iter().all(|r| *r))
}

/// Normalized left eigenvector of `w` for eigenvalue 1.
///
/// Periodic irreducible `w` is solved exactly through its lazy chain;
/// only reducible `w` falls back to damping.
pub fn centrality(w: &Matrix4) -> Result<Centrality> {
    check_row_stochastic(w)?;
    if let Some((delta, iterations)) = power_iterate(w) {
        return Ok(Centrality {
            delta,
            iterations,
            damped: false,
        });
    }
    if is_irreducible(w) {
        // a periodic chain: the lazy chain shares its stationary vector
        let lazy = std::array::from_fn(|i| {
            std::array::from_fn(|j| 0.5 * w[i][j] + if i == j { 0.5 } else { 0.0 })
        });
        if let Some((delta, iterations)) = power_iterate(&lazy) {
            return Ok(Centrality {
                delta,
                iterations: MAX_ITERATIONS + iterations,
                damped: false,
            });
        }
    }
    let uniform = 1.0 / TEAM_SIZE as f64;
    let damped = w.map(|row| row.map(|x| DAMPING * x + (1.0 - DAMPING) * uniform));
    match power_iterate(&damped) {
        Some((delta, iterations)) => Ok(Centrality {
            delta,
            iterations: MAX_ITERATIONS + iterations,
            damped: true,
        }),
        None => Err(Error::Numeric(
            "power iteration did not converge even after damping".into(),
        )),
    }
}

/// `‖δᵀW − δᵀ‖∞`.
pub fn stationarity_residual(delta: &[f64; TEAM_SIZE], w: &Matrix4) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..TEAM_SIZE {
        let v: f64 = (0..TEAM_SIZE).map(|i| delta[i] * w[i][j]).sum();
        worst = worst.max((v - delta[j]).abs());
    }
    worst
}

/// Surveyed influence matrix together with its centrality vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceState {
    pub w: Matrix4,
    pub delta: [f64; TEAM_SIZE],
    pub damped: bool,
}

impl InfluenceState {
    pub fn from_matrix(w: Matrix4) -> Result<Self> {
        let c = centrality(&w)?;
        Ok(Self {
            w,
            delta: c.delta,
            damped: c.damped,
        })
    }

    /// State used before any survey: everyone equally influential.
    pub fn uniform() -> Self {
        Self {
            w: [[0.25; TEAM_SIZE]; TEAM_SIZE],
            delta: [0.25; TEAM_SIZE],
            damped: false,
        }
    }
}

/// Centrality-weighted column averages `π_j = Σ_i δ_i π_ij`.
pub fn aggregate_agent_appraisal(
    delta: &[f64; TEAM_SIZE],
    pi: &Matrix4,
) -> Result<[f64; TEAM_SIZE]> {
    let total: f64 = delta.iter().sum();
    if delta.iter().any(|d| *d < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(domain("centrality vector is not on the simplex"));
    }
    if pi.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(domain("agent rating outside [0, 1]"));
    }
    let mut out = [0.0; TEAM_SIZE];
    for (i, d) in delta.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += d * pi[i][j];
        }
    }
    Ok(out)
}

/// One step of `X(k+1) = W·X(k)`.
pub fn degroot_step(w: &Matrix4, x: &[f64; TEAM_SIZE]) -> [f64; TEAM_SIZE] {
    let mut out = [0.0; TEAM_SIZE];
    for (i, o) in out.iter_mut().enumerate() {
        *o = w[i].iter().zip(x).map(|(wij, xj)| wij * xj).sum();
    }
    out
}

/// Iterates the DeGroot update until successive positions differ by at most `tol`.
pub fn degroot_converge(w: &Matrix4, x0: &[f64; TEAM_SIZE], tol: f64) -> Result<[f64; TEAM_SIZE]> {
    check_row_stochastic(w)?;
    let mut x = *x0;
    for _ in 0..MAX_ITERATIONS {
        let next = degroot_step(w, &x);
        let dist = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if dist <= tol {
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!(
        "opinions did not settle within {MAX_ITERATIONS} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE_RATINGS: Matrix4 = [
        [0.45, 0.67, 0.85, 0.6],
        [0.6, 0.75, 0.9, 0.55],
        [0.8, 0.65, 0.7, 0.5],
        [0.75, 0.75, 0.95, 1.0],
    ];

    #[test]
    fn priors_have_expected_means() {
        assert_eq!(init_human_appraisal().mean(), 0.5);
        assert_eq!(init_agent_appraisal().mean(), 0.75);
    }

    #[test]
    fn observing_moves_the_mean() {
        let h = init_human_appraisal();
        assert!((h.observe(true).mean() - 2.0 / 3.0).abs() < 1e-12);
        assert!((h.observe(false).mean() - 1.0 / 3.0).abs() < 1e-12);
        let a = init_agent_appraisal().observe(true);
        assert!((a.mean() - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(a.support, Support::Upper);
    }

    #[test]
    fn uniform_matrix_has_uniform_centrality() {
        let c = centrality(&[[0.25; 4]; 4]).unwrap();
        for d in c.delta {
            assert!((d - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_matrix_returns_common_row() {
        let v = [0.4, 0.3, 0.2, 0.1];
        let c = centrality(&[v; 4]).unwrap();
        for (d, e) in c.delta.iter().zip(v) {
            assert!((d - e).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_matrix_is_solved_exactly() {
        // bipartite star: member 1 listens to the others, who listen only to 1
        let third = 1.0 / 3.0;
        let w = [
            [0.0, third, third, third],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ];
        let c = centrality(&w).unwrap();
        assert!(!c.damped);
        assert!(c.iterations > MAX_ITERATIONS);
        assert!(stationarity_residual(&c.delta, &w) < 1e-10);
        assert!((c.delta[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn reducible_matrix_falls_back_to_damping() {
        // member 4 listens only to themself; 2 and 3 alternate
        let w = [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let c = centrality(&w).unwrap();
        assert!(c.damped);
        assert!((c.delta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(!is_irreducible(&w));
    }

    #[test]
    fn non_stochastic_matrix_is_rejected() {
        let mut w = [[0.25; 4]; 4];
        w[1] = [0.2; 4];
        assert!(matches!(centrality(&w), Err(Error::Domain(_))));
    }

    #[test]
    fn aggregate_matches_worked_example() {
        let pi = aggregate_agent_appraisal(&[0.4, 0.3, 0.2, 0.1], &EXAMPLE_RATINGS).unwrap();
        // the fourth column works out to 0.24 + 0.165 + 0.1 + 0.1
        for (got, want) in pi.iter().zip([0.595, 0.698, 0.845, 0.605]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn aggregate_of_single_voter_is_their_row() {
        let pi = aggregate_agent_appraisal(&[1.0, 0.0, 0.0, 0.0], &EXAMPLE_RATINGS).unwrap();
        assert_eq!(pi, EXAMPLE_RATINGS[0]);
        let flat = aggregate_agent_appraisal(&[0.4, 0.3, 0.2, 0.1], &[[0.6; 4]; 4]).unwrap();
        for p in flat {
            assert!((p - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn degroot_preserves_consensus() {
        let w = [
            [0.5, 0.2, 0.2, 0.1],
            [0.1, 0.6, 0.2, 0.1],
            [0.3, 0.3, 0.3, 0.1],
            [0.25; 4],
        ];
        let x = degroot_converge(&w, &[2.0; 4], DEGROOT_TOLERANCE).unwrap();
        for v in x {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degroot_rank_one_settles_after_one_step() {
        let v = [0.4, 0.3, 0.2, 0.1];
        let x0 = [1.0, 2.0, 3.0, 4.0];
        let step = degroot_step(&[v; 4], &x0);
        let expected: f64 = v.iter().zip(&x0).map(|(a, b)| a * b).sum();
        for s in step {
            assert!((s - expected).abs() < 1e-12);
        }
    }

    fn stochastic_matrix() -> impl Strategy<Value = Matrix4> {
        prop::array::uniform4(prop::array::uniform4(0.05f64..1.0)).prop_map(|m| {
            m.map(|row| {
                let s: f64 = row.iter().sum();
                row.map(|x| x / s)
            })
        })
    }

    proptest! {
        #[test]
        fn centrality_is_stationary(w in stochastic_matrix()) {
            let c = centrality(&w).unwrap();
            prop_assert!(stationarity_residual(&c.delta, &w) <= 1e-8);
            prop_assert!((c.delta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn degroot_limit_is_centrality_weighted_mean(
            w in stochastic_matrix(),
            x0 in prop::array::uniform4(-5.0f64..5.0),
        ) {
            let limit = degroot_converge(&w, &x0, DEGROOT_TOLERANCE).unwrap();
            let delta = centrality(&w).unwrap().delta;
            let expected: f64 = delta.iter().zip(&x0).map(|(d, x)| d * x).sum();
            for v in limit {
                prop_assert!((v - expected).abs() < 1e-6);
            }
        }

        #[test]
        fn aggregate_is_bounded_by_column_extremes(
            raw in prop::array::uniform4(0.01f64..1.0),
            pi in prop::array::uniform4(prop::array::uniform4(0.0f64..=1.0)),
        ) {
            let s: f64 = raw.iter().sum();
            let delta = raw.map(|x| x / s);
            let agg = aggregate_agent_appraisal(&delta, &pi).unwrap();
            for j in 0..4 {
                let lo = (0..4).map(|i| pi[i][j]).fold(f64::INFINITY, f64::min);
                let hi = (0..4).map(|i| pi[i][j]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(agg[j] >= lo - 1e-12 && agg[j] <= hi + 1e-12);
            }
        }

        #[test]
        fn observation_keeps_mean_inside_support(outcomes in prop::collection::vec(any::<bool>(), 0..200)) {
            let mut h = init_human_appraisal();
            let mut a = init_agent_appraisal();
            for o in outcomes {
                let before = h.a + h.b;
                h = h.observe(o);
                a = a.observe(o);
                prop_assert!(h.a + h.b > before);
            }
            prop_assert!(h.mean() > 0.0 && h.mean() < 1.0);
            prop_assert!(a.mean() > 0.5 && a.mean() < 1.0);
        }
    }
}
