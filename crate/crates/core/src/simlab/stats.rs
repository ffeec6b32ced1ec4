use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::SimError;

/// Largest sample size handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 12;
/// Fewest non-zero differences the test accepts.
pub const MIN_PAIRS: usize = 5;

/// Direction of the one-sided alternative on paired values `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences `a - b`.
    pub t: f64,
    pub p: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
}

/// Non-zero differences `a - b` and their average ranks by magnitude.
pub fn signed_ranks(pairs: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    d.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut i = 0;
    while i < d.len() {
        let mut j = i;
        while j + 1 < d.len() && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        ranks[i..=j].fill(avg);
        i = j + 1;
    }
    (d, ranks)
}

/// Null distribution of the doubled positive-rank sum: `counts[s]` sign
/// assignments give `2 T+ = s`.
fn null_counts(doubled: &[usize]) -> Vec<u64> {
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Exact one-sided p-value from the full sign-flip null distribution.
pub fn exact_p(ranks: &[f64], t: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let counts = null_counts(&doubled);
    let t2 = (2.0 * t).round() as usize;
    let hits: u64 = match alternative {
        Alternative::Less => counts[..=t2].iter().sum(),
        Alternative::Greater => counts[t2..].iter().sum(),
    };
    hits as f64 / (1u64 << ranks.len()) as f64
}

/// Normal approximation with tie and continuity corrections.
pub fn normal_p(ranks: &[f64], t: f64, alternative: Alternative) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut ties = 0.0;
    let mut i = 0;
    while i < ranks.len() {
        let j = ranks[i..].iter().take_while(|&&r| r == ranks[i]).count();
        let c = j as f64;
        ties += c * c * c - c;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    let sd = var.sqrt();
    let phi = Normal::new(0.0, 1.0).expect("standard normal");
    let p = match alternative {
        Alternative::Less => phi.cdf((t - mean + 0.5) / sd),
        Alternative::Greater => phi.cdf(-(t - mean - 0.5) / sd),
    };
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// One-sided paired signed-rank test. Zero differences are dropped; ties in
/// magnitude share their average rank. The p-value is exact up to
/// [`EXACT_MAX_N`] non-zero pairs and normal-approximated beyond.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], alternative: Alternative) -> Result<WilcoxonResult, SimError> {
    if pairs.iter().any(|(a, b)| !(a.is_finite() && b.is_finite())) {
        return Err(SimError::InvalidConfig("non-finite value in paired data".into()));
    }
    let (d, ranks) = signed_ranks(pairs);
    if d.len() < MIN_PAIRS {
        return Err(SimError::TooFewPairs(d.len()));
    }
    let t: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let exact = d.len() <= EXACT_MAX_N;
    let p = if exact { exact_p(&ranks, t, alternative) } else { normal_p(&ranks, t, alternative) };
    Ok(WilcoxonResult { t, p, n: d.len(), exact })
}
