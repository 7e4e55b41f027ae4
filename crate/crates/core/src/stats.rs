//! Wilcoxon signed-rank test for paired samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};

/// Largest effective sample size handled by the exact distribution.
pub const EXACT_MAX_N: usize = 25;
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `x` tends to be smaller than `y`.
    Less,
    /// `x` tends to be larger than `y`.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W⁺, W⁻)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: Method,
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(x, y, Alternative::TwoSided)
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(domain(format!(
            "paired samples differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < MIN_PAIRS {
        return Err(domain(format!(
            "need at least {MIN_PAIRS} pairs, got {}",
            x.len()
        )));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(domain("NaN in paired samples"));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            w_plus: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: Method::Exact,
        });
    }
    let (ranks2, tie_sizes) = doubled_ranks(&diffs);
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let w_plus = w_plus2 as f64 / 2.0;
    let w_minus = (total2 - w_plus2) as f64 / 2.0;
    let statistic = w_plus.min(w_minus);

    let (p_value, method) = if n <= EXACT_MAX_N {
        let dist = SignedRankDistribution::new(&ranks2);
        let p = match alternative {
            Alternative::TwoSided => 2.0 * dist.cdf(w_plus2.min(total2 - w_plus2)),
            Alternative::Greater => dist.sf(w_plus2),
            Alternative::Less => dist.cdf(w_plus2),
        };
        (p.min(1.0), Method::Exact)
    } else {
        (normal_p(w_plus, n, &tie_sizes, alternative), Method::Normal)
    };
    Ok(WilcoxonResult {
        statistic,
        w_plus,
        p_value,
        n_effective: n,
        method,
    })
}

/// Twice the average rank of each `|d|`, so tied ranks stay integral,
/// plus the sizes of the tie groups.
fn doubled_ranks(diffs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|a, b| diffs[*a].abs().total_cmp(&diffs[*b].abs()));
    let mut ranks = vec![0u64; diffs.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && diffs[order[end + 1]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        // ranks start..=end are 1-based start+1..=end+1; their sum doubled over count
        let doubled = (start + 1 + end + 1) as u64;
        for k in &order[start..=end] {
            ranks[*k] = doubled;
        }
        ties.push(end - start + 1);
        start = end + 1;
    }
    (ranks, ties)
}

/// Null distribution of the doubled positive-rank sum under random signs.
struct SignedRankDistribution {
    /// `prob[s]`: probability the doubled sum equals `s`.
    prob: Vec<f64>,
}

impl SignedRankDistribution {
    fn new(ranks2: &[u64]) -> Self {
        let total: usize = ranks2.iter().map(|r| *r as usize).sum();
        let mut prob = vec![0.0; total + 1];
        prob[0] = 1.0;
        let mut reach = 0;
        for r in ranks2 {
            let r = *r as usize;
            for s in (0..=reach).rev() {
                let p = prob[s] * 0.5;
                prob[s] = p;
                prob[s + r] += p;
            }
            reach += r;
        }
        Self { prob }
    }

    fn cdf(&self, s: u64) -> f64 {
        self.prob[..=(s as usize)].iter().sum()
    }

    fn sf(&self, s: u64) -> f64 {
        self.prob[s as usize..].iter().sum()
    }
}

fn normal_p(w_plus: f64, n: usize, tie_sizes: &[usize], alternative: Alternative) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|t| (*t as f64).powi(3) - *t as f64)
        .sum::<f64>()
        / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    let sd = var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let diff = w_plus - mean;
    match alternative {
        Alternative::TwoSided => {
            let z = ((diff.abs() - 0.5) / sd).max(0.0);
            (2.0 * std_normal.sf(z)).min(1.0)
        }
        Alternative::Greater => std_normal.sf((diff - 0.5) / sd),
        Alternative::Less => std_normal.cdf((diff + 0.5) / sd),
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two-sided p by listing every sign assignment.
    fn enumerate_p(diffs: &[f64]) -> f64 {
        let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        let (ranks2, _) = doubled_ranks(&nz);
        let observed: u64 = nz
            .iter()
            .zip(&ranks2)
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, r)| r)
            .sum();
        let total: u64 = ranks2.iter().sum();
        let w = observed.min(total - observed);
        let n = nz.len();
        let hits = (0u32..1 << n)
            .filter(|mask| {
                let s: u64 = (0..n)
                    .filter(|k| mask >> k & 1 == 1)
                    .map(|k| ranks2[k])
                    .sum();
                s <= w
            })
            .count();
        (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn textbook_example() {
        let x = [2.0, 4.0, 6.0, 8.0, 10.0];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.0625).abs() < 1e-15);
        assert_eq!(r.method, Method::Exact);
        let one = wilcoxon_signed_rank_with(&x, &y, Alternative::Greater).unwrap();
        assert!((one.p_value - 1.0 / 32.0).abs() < 1e-15);
        let other = wilcoxon_signed_rank_with(&x, &y, Alternative::Less).unwrap();
        assert!((other.p_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank(&x, &x).unwrap();
        assert_eq!((r.p_value, r.n_effective), (1.0, 0));
    }

    #[test]
    fn input_checks() {
        assert!(wilcoxon_signed_rank(&[1.0; 4], &[2.0; 4]).is_err());
        assert!(wilcoxon_signed_rank(&[1.0; 5], &[2.0; 6]).is_err());
    }

    #[test]
    fn tie_averaged_ranks() {
        let (r, ties) = doubled_ranks(&[1.0, -1.0, 2.0, 3.0, 3.0, 3.0]);
        assert_eq!(r, vec![3, 3, 6, 10, 10, 10]);
        assert_eq!(ties, vec![2, 1, 3]);
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let x: Vec<f64> = (0..40).map(|k| k as f64 + 0.5).collect();
        let y: Vec<f64> = (0..40)
            .map(|k| if k % 3 == 0 { k as f64 + 2.0 } else { k as f64 })
            .collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.method, Method::Normal);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
        // exact and normal agree loosely at the boundary
        let xs = &x[..25];
        let ys = &y[..25];
        let exact = wilcoxon_signed_rank(xs, ys).unwrap().p_value;
        let approx = normal_p(
            wilcoxon_signed_rank(xs, ys).unwrap().w_plus,
            25,
            &doubled_ranks(&xs.iter().zip(ys).map(|(a, b)| a - b).collect::<Vec<_>>()).1,
            Alternative::TwoSided,
        );
        assert!((exact - approx).abs() < 0.05, "{exact} vs {approx}");
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.2909944487358056).abs() < 1e-15);
        assert_eq!(mean_std(&[2.0]).1, 0.0);
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(
            pairs in prop::collection::vec((-3i32..=3, -3i32..=3), 5..=12),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let r = wilcoxon_signed_rank(&x, &y).unwrap();
            let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let want = if r.n_effective == 0 { 1.0 } else { enumerate_p(&diffs) };
            prop_assert!((r.p_value - want).abs() < 1e-12);
        }

        #[test]
        fn swapping_samples_is_symmetric(
            x in prop::collection::vec(0.0f64..5.0, 6..30),
            shift in prop::collection::vec(-1.0f64..1.0, 30),
        ) {
            let y: Vec<f64> = x.iter().zip(&shift).map(|(a, s)| a + s).collect();
            let a = wilcoxon_signed_rank(&x, &y).unwrap();
            let b = wilcoxon_signed_rank(&y, &x).unwrap();
            prop_assert_eq!(a.statistic, b.statistic);
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        }
    }
}
