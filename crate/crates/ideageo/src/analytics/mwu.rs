//! Two-sided Mann-Whitney U test. The p-value is exact (subset enumeration)
//! for small pooled samples and switches to the tie-corrected normal
//! approximation above [`EXACT_LIMIT`] observations.

use statrs::distribution::{ContinuousCDF, Normal};

use super::AnalyticsError;

/// Largest pooled sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 12;

/// Outcome of a two-sample comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    /// U statistic of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
}

/// Compares two per-day series, ignoring missing days.
pub fn compare_groups(
    series_a: &[Option<f64>],
    series_b: &[Option<f64>],
) -> Result<TestResult, AnalyticsError> {
    let a: Vec<f64> = series_a.iter().flatten().copied().collect();
    let b: Vec<f64> = series_b.iter().flatten().copied().collect();
    if a.is_empty() || b.is_empty() {
        return Err(AnalyticsError::InsufficientData);
    }
    Ok(mann_whitney_u(&a, &b))
}

/// Two-sided Mann-Whitney U on raw samples. Both inputs must be non-empty.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> TestResult {
    assert!(!a.is_empty() && !b.is_empty());
    let n_a = a.len();
    let n_b = b.len();
    let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let ranks = average_ranks(&pooled);

    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let mean_u = (n_a * n_b) as f64 / 2.0;

    if n_a + n_b <= EXACT_LIMIT {
        let p = exact_two_sided_p(&ranks, n_a, (u_a - mean_u).abs());
        TestResult {
            statistic: u_a,
            p_value: p,
            method: "mann-whitney-u-exact".into(),
        }
    } else {
        let p = approx_two_sided_p(&pooled, n_a, n_b, (u_a - mean_u).abs());
        TestResult {
            statistic: u_a,
            p_value: p,
            method: "mann-whitney-u-approx".into(),
        }
    }
}

/// Ranks of `values` (1-based), ties replaced by their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // average of 1-based ranks i+1 ..= j
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Exact two-sided p by enumerating every choice of which pooled
/// observations form the first sample: the fraction of choices whose |U - mu|
/// is at least the observed one.
fn exact_two_sided_p(ranks: &[f64], n_a: usize, observed_dev: f64) -> f64 {
    let n = ranks.len();
    let mean_u = (n_a * (n - n_a)) as f64 / 2.0;
    let offset = (n_a * (n_a + 1)) as f64 / 2.0;
    let mut favorable: u64 = 0;
    let mut total: u64 = 0;
    // Rank sums are multiples of 1/2, so a half-ulp guard is enough to make
    // the >= comparison exact.
    let guard = 1e-9;
    let mut combo: Vec<usize> = (0..n_a).collect();
    loop {
        let rank_sum: f64 = combo.iter().map(|&i| ranks[i]).sum();
        let u = rank_sum - offset;
        if (u - mean_u).abs() >= observed_dev - guard {
            favorable += 1;
        }
        total += 1;
        if !next_combination(&mut combo, n) {
            break;
        }
    }
    favorable as f64 / total as f64
}

/// Advances `combo` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in (i + 1)..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Normal approximation with tie correction and continuity correction.
fn approx_two_sided_p(pooled: &[f64], n_a: usize, n_b: usize, observed_dev: f64) -> f64 {
    let n = (n_a + n_b) as f64;
    let tie_term: f64 = tie_sizes(pooled)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = (n_a * n_b) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        // Every pooled value tied: U always equals its mean.
        return 1.0;
    }
    let z = (observed_dev - 0.5) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    (2.0 * normal.sf(z)).clamp(0.0, 1.0)
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            sizes.push(j - i);
        }
        i = j;
    }
    sizes
}
