use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{mean, EvalError, Metric, Result, RunResult};

/// Samples smaller than this (on either side) use the exact null distribution.
pub const EXACT_BELOW: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values` and the tie groups' sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Input("Mann-Whitney U needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::Input("Mann-Whitney U needs finite values".into()));
    }
    Ok(())
}

fn pooled(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    midranks(&all)
}

fn u_statistic(ranks: &[f64], na: usize) -> f64 {
    let r: f64 = ranks[..na].iter().sum();
    r - (na * (na + 1)) as f64 / 2.0
}

/// Two-sided p from the exact permutation distribution of the first sample's
/// rank sum, ties included.
pub fn mann_whitney_exact_p(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let (ranks, _) = pooled(a, b);
    // doubled midranks are integers
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let na = a.len();
    let observed: usize = doubled[..na].iter().sum();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; na + 1];
    counts[0][0] = 1.0;
    for (i, &r) in doubled.iter().enumerate() {
        for k in (1..=na.min(i + 1)).rev() {
            let (lo, hi) = counts.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - r];
            }
        }
    }
    let dist = &counts[na];
    let total: f64 = dist.iter().sum();
    let lower: f64 = dist[..=observed].iter().sum::<f64>() / total;
    let upper: f64 = dist[observed..].iter().sum::<f64>() / total;
    Ok((2.0 * lower.min(upper)).min(1.0))
}

/// Two-sided p from the normal approximation with tie-corrected variance and
/// continuity correction.
pub fn mann_whitney_normal_p(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let (ranks, ties) = pooled(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let u = u_statistic(&ranks, a.len());
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = if n > 1.0 {
        na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - na * nb / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    Ok((2.0 * normal.sf(z)).min(1.0))
}

/// U of `a` with a two-sided p-value: exact when either sample has fewer
/// than [`EXACT_BELOW`] values, normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    let (ranks, _) = pooled(a, b);
    let u = u_statistic(&ranks, a.len());
    let exact = a.len().min(b.len()) < EXACT_BELOW;
    let p = if exact {
        mann_whitney_exact_p(a, b)?
    } else {
        mann_whitney_normal_p(a, b)?
    };
    Ok(MannWhitney { u, p, exact })
}

/// Result of comparing two run sets on one metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub metric: Metric,
    pub mean_a: f64,
    pub mean_b: f64,
    pub u: f64,
    pub p: f64,
    pub significant: bool,
}

pub fn compare_runs(a: &[RunResult], b: &[RunResult], metric: Metric, alpha: f64) -> Result<RunComparison> {
    let xa: Vec<f64> = a.iter().map(|r| r.metric(metric)).collect();
    let xb: Vec<f64> = b.iter().map(|r| r.metric(metric)).collect();
    let t = mann_whitney_u(&xa, &xb)?;
    Ok(RunComparison {
        metric,
        mean_a: mean(&xa),
        mean_b: mean(&xb),
        u: t.u,
        p: t.p,
        significant: t.p < alpha,
    })
}
