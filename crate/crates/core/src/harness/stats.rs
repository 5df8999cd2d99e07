//! Descriptive statistics and the rank-sum test used to compare methods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Five-number-style summary of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl StatSummary {
    /// `None` on an empty sample.
    pub fn from_values(values: &[f64]) -> Option<StatSummary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(StatSummary {
            n: sorted.len(),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median: quantile(&sorted, 0.5),
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Linear-interpolation quantile of an ascending sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    StatSummary::from_values(values).map(|s| s.median)
}

/// How the two-sided p value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    NormalApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyResult {
    pub n_a: usize,
    pub n_b: usize,
    pub u_a: f64,
    pub u_b: f64,
    pub p_two_sided: f64,
    pub method: PMethod,
}

/// Two-sided Mann-Whitney U test with midranks for ties.
///
/// Small samples (neither group larger than 8, at most 64 observations in
/// total) get the exact permutation distribution of the rank sum; larger
/// ones use the normal approximation with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitneyResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("both samples must be nonempty".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Input("samples must not contain NaN".into()));
    }
    let na = a.len();
    let nb = b.len();
    let n = na + nb;

    // Midranks over the pooled sample; group A tagged true.
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0f64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = midrank;
        }
        tie_sizes.push(j + 1 - i);
        i = j + 1;
    }

    let rank_sum_a: f64 = pooled
        .iter()
        .zip(&ranks)
        .filter(|((_, is_a), _)| *is_a)
        .map(|(_, r)| r)
        .sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    let exact_applicable = !(na > 8 && nb > 8) && n <= 64;
    let p = if exact_applicable {
        exact_two_sided_p(&pooled, &ranks, na, nb)
    } else {
        normal_two_sided_p(u_a, na, nb, &tie_sizes)
    };
    Ok(MannWhitneyResult {
        n_a: na,
        n_b: nb,
        u_a,
        u_b,
        p_two_sided: p,
        method: if exact_applicable {
            PMethod::Exact
        } else {
            PMethod::NormalApprox
        },
    })
}

/// Exact two-sided p over all subsets of the pooled ranks, via a counting
/// pass over doubled midranks (doubling keeps every rank integral). Counts
/// stay exact in f64 because the smaller group has at most 8 members.
fn exact_two_sided_p(pooled: &[(f64, bool)], ranks: &[f64], na: usize, nb: usize) -> f64 {
    // Work with whichever group is smaller; |U - mu| is the same for both.
    let (k, small_is_a) = if na <= nb { (na, true) } else { (nb, false) };
    let doubled: Vec<u64> = ranks.iter().map(|&r| (2.0 * r).round() as u64).collect();
    let observed_sum: u64 = pooled
        .iter()
        .zip(&doubled)
        .filter(|((_, is_a), _)| *is_a == small_is_a)
        .map(|(_, &d)| d)
        .sum();
    // D = 2U = doubled rank sum - k(k+1); the observed deviation from the
    // mean 2U = na*nb sets the two-sided threshold.
    let shift = (k * (k + 1)) as i64;
    let mu2 = (na * nb) as i64;
    let observed_dev = ((observed_sum as i64 - shift) - mu2).abs();

    let max_sum: u64 = doubled.iter().sum();
    // dp[c][s]: subsets of size c with doubled rank sum s.
    let mut dp = vec![vec![0.0f64; max_sum as usize + 1]; k + 1];
    dp[0][0] = 1.0;
    for &d in &doubled {
        for c in (0..k).rev() {
            for s in 0..=(max_sum - d) as usize {
                if dp[c][s] > 0.0 {
                    dp[c + 1][s + d as usize] += dp[c][s];
                }
            }
        }
    }
    let mut total = 0.0;
    let mut extreme = 0.0;
    for (s, &count) in dp[k].iter().enumerate() {
        if count == 0.0 {
            continue;
        }
        total += count;
        let dev = ((s as i64 - shift) - mu2).abs();
        if dev >= observed_dev {
            extreme += count;
        }
    }
    extreme / total
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction.
fn normal_two_sided_p(u_a: f64, na: usize, nb: usize, tie_sizes: &[usize]) -> f64 {
    let n = (na + nb) as f64;
    let mu = (na * nb) as f64 / 2.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((u_a - mu).abs() - 0.5).max(0.0) / variance.sqrt();
    (2.0 * normal_sf(z)).min(1.0)
}

/// Upper tail of the standard normal, via the Abramowitz-Stegun 7.1.26
/// polynomial for erf (absolute error below 1.5e-7).
fn normal_sf(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erfc = poly * (-x * x).exp();
    0.5 * erfc
}
