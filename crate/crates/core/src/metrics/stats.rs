use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::MetricError;

/// Largest pooled sample size for which [`rank_sum_test`] enumerates the
/// exact permutation distribution.
pub const EXACT_RANK_SUM_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of sorted data by linear interpolation between order
/// statistics (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    let s = sorted(values);
    let m = mean(&s);
    let var = s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / s.len() as f64;
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    Ok(SummaryStats {
        count: s.len(),
        mean: m,
        std: var.sqrt(),
        median: quantile_sorted(&s, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        min: s[0],
        max: s[s.len() - 1],
    })
}

/// Vargha-Delaney A12: probability that a draw from `a` exceeds a draw
/// from `b`, ties counting one half.
pub fn a12(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySample);
    }
    let b = sorted(b);
    let (mut greater, mut equal) = (0usize, 0usize);
    for &x in a {
        let below = b.partition_point(|&y| y < x);
        let not_above = b.partition_point(|&y| y <= x);
        greater += below;
        equal += not_above - below;
    }
    Ok((greater as f64 + 0.5 * equal as f64) / (a.len() * b.len()) as f64)
}

/// Midranks (1-based) of `values` in the order given.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn check_rank_sum_sizes(a: &[f64], b: &[f64]) -> Result<(), MetricError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricError::TooFewSamples { a: a.len(), b: b.len() });
    }
    Ok(())
}

/// Two-sided Wilcoxon rank-sum p-value, exact for small pooled samples and
/// normal-approximated otherwise.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() + b.len() <= EXACT_RANK_SUM_LIMIT {
        rank_sum_exact(a, b)
    } else {
        rank_sum_normal(a, b)
    }
}

/// Exact permutation p-value: the share of all relabelings whose rank sum
/// lies at least as far from its expectation as the observed one.
pub fn rank_sum_exact(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    check_rank_sum_sizes(a, b)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    // Doubled midranks are integers, which keeps the comparison exact.
    let doubled: Vec<i64> = midranks(&pooled).iter().map(|r| (r * 2.0).round() as i64).collect();
    let n = a.len();
    let total: i64 = doubled.iter().sum();
    let big_n = pooled.len() as i64;
    // 2 * (expected rank sum) * N, scaled to stay integral.
    let expected_scaled = total * n as i64;
    let observed: i64 = doubled[..n].iter().sum();
    let threshold = (observed * big_n - expected_scaled).abs();

    let mut extreme = 0u64;
    let mut count = 0u64;
    let mut stack: Vec<(usize, usize, i64)> = vec![(0, 0, 0)];
    while let Some((pos, chosen, sum)) = stack.pop() {
        if chosen == n {
            count += 1;
            if (sum * big_n - expected_scaled).abs() >= threshold {
                extreme += 1;
            }
            continue;
        }
        if pooled.len() - pos < n - chosen {
            continue;
        }
        stack.push((pos + 1, chosen, sum));
        stack.push((pos + 1, chosen + 1, sum + doubled[pos]));
    }
    Ok(extreme as f64 / count as f64)
}

/// Normal approximation with tie and continuity corrections.
pub fn rank_sum_normal(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    check_rank_sum_sizes(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..a.len()].iter().sum();
    let u = w - n * (n + 1.0) / 2.0;
    let mu = n * m / 2.0;

    let big_n = n + m;
    let s = sorted(&pooled);
    let mut ties = 0.0;
    let mut i = 0;
    while i < s.len() {
        let j = s[i..].iter().take_while(|&&x| x == s[i]).count();
        let t = j as f64;
        ties += t * t * t - t;
        i += j;
    }
    let var = n * m / 12.0 * ((big_n + 1.0) - ties / (big_n * (big_n - 1.0)));
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((2.0 * (1.0 - normal.cdf(z))).min(1.0))
}

/// Upper `alpha` critical value of chi-square with `df` (possibly
/// fractional) degrees of freedom, by the Wilson-Hilferty transform.
pub fn chi_square_critical(df: f64, alpha: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = normal.inverse_cdf(1.0 - alpha);
    let c = 2.0 / (9.0 * df);
    df * (1.0 - c + z * c.sqrt()).powi(3)
}

/// One input group of [`scott_knott`].
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub values: Vec<f64>,
}

impl Group {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Group { name: name.into(), values }
    }
}

/// Classic Scott-Knott clustering of group means.
///
/// Returns clusters of group names, best mean first. Group means are
/// compared with the pooled within-group variance of all groups; the
/// variance of a mean uses the average of `1/n_i` so unequal group sizes
/// are allowed.
pub fn scott_knott(groups: &[Group], alpha: f64) -> Result<Vec<Vec<String>>, MetricError> {
    if groups.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    if let Some(g) = groups.iter().find(|g| g.values.is_empty()) {
        return Err(MetricError::EmptyGroup(g.name.clone()));
    }
    let mut ordered: Vec<(String, f64)> = groups.iter().map(|g| (g.name.clone(), mean(&g.values))).collect();
    ordered.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));

    let total: usize = groups.iter().map(|g| g.values.len()).sum();
    let nu = (total - groups.len()) as f64;
    let sse: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(&g.values);
            g.values.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        })
        .sum();
    let mse = if nu > 0.0 { sse / nu } else { 0.0 };
    let inv_n = groups.iter().map(|g| 1.0 / g.values.len() as f64).sum::<f64>() / groups.len() as f64;
    let mean_var = mse * inv_n;

    let mut clusters = Vec::new();
    split(&ordered, nu, mean_var, alpha, &mut clusters);
    Ok(clusters)
}

fn split(ordered: &[(String, f64)], nu: f64, mean_var: f64, alpha: f64, out: &mut Vec<Vec<String>>) {
    let k = ordered.len();
    let names = || ordered.iter().map(|(n, _)| n.clone()).collect();
    if k < 2 {
        out.push(names());
        return;
    }
    let means: Vec<f64> = ordered.iter().map(|(_, m)| *m).collect();
    let grand = mean(&means);
    let mut best = (0.0, 0);
    for cut in 1..k {
        let (l, r) = means.split_at(cut);
        let (ml, mr) = (mean(l), mean(r));
        let b0 = l.len() as f64 * (ml - grand).powi(2) + r.len() as f64 * (mr - grand).powi(2);
        if b0.partial_cmp(&best.0) == Some(Ordering::Greater) {
            best = (b0, cut);
        }
    }
    let (b0, cut) = best;
    let spread: f64 = means.iter().map(|m| (m - grand).powi(2)).sum();
    let sigma2 = (spread + nu * mean_var) / (k as f64 + nu);
    let significant = cut > 0 && sigma2 > 0.0 && {
        let lambda = PI / (2.0 * (PI - 2.0)) * b0 / sigma2;
        lambda > chi_square_critical(k as f64 / (PI - 2.0), alpha)
    };
    if significant {
        split(&ordered[..cut], nu, mean_var, alpha, out);
        split(&ordered[cut..], nu, mean_var, alpha, out);
    } else {
        out.push(names());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn summary_of_small_series() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        let c = summarize(&[7.0; 5]).unwrap();
        assert_eq!((c.std, c.iqr), (0.0, 0.0));
        assert!(matches!(summarize(&[]), Err(MetricError::EmptySeries)));
    }

    #[test]
    fn a12_extremes() {
        assert_eq!(a12(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.5);
        assert_eq!(a12(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!(a12(&[], &[1.0]).is_err());
    }

    #[test]
    fn chi_square_critical_is_close_to_tables() {
        assert_abs_diff_eq!(chi_square_critical(1.0, 0.05), 3.841, epsilon = 0.1);
        assert_abs_diff_eq!(chi_square_critical(5.0, 0.05), 11.070, epsilon = 0.05);
    }

    #[test]
    fn rank_sum_identical_and_separated() {
        let a = [1.0, 2.0, 3.0];
        assert!(rank_sum_test(&a, &a).unwrap() >= 0.99);
        let lo: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        let hi: Vec<f64> = (0..8).map(|i| 100.0 + i as f64 / 8.0).collect();
        // Two of the 12870 labelings are as extreme.
        assert_abs_diff_eq!(rank_sum_exact(&lo, &hi).unwrap(), 2.0 / 12870.0, epsilon = 1e-15);
        assert!(matches!(rank_sum_test(&[1.0], &[2.0, 3.0]), Err(MetricError::TooFewSamples { .. })));
    }

    #[test]
    fn scott_knott_basic_cases() {
        let one = scott_knott(&[Group::new("a", vec![1.0, 2.0])], 0.05).unwrap();
        assert_eq!(one, vec![vec!["a".to_string()]]);
        let flat = [Group::new("a", vec![3.0; 4]), Group::new("b", vec![3.0; 4])];
        assert_eq!(scott_knott(&flat, 0.05).unwrap().len(), 1);
        let apart = [Group::new("lo", vec![0.0, 0.1, -0.1]), Group::new("hi", vec![10.0, 10.1, 9.9])];
        assert_eq!(scott_knott(&apart, 0.05).unwrap(), vec![vec!["hi".to_string()], vec!["lo".to_string()]]);
    }
}
