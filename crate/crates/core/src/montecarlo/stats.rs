//! Confidence intervals and goodness-of-fit tests for the simulation
//! oracle. Normal-approximation intervals at a fixed 99% level, switching
//! to exact (Clopper-Pearson) intervals when a cell holds fewer than 30
//! observations; chi-square tests for two-sample homogeneity and
//! goodness of fit.

use crate::error::{Error, Result};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, Normal};

/// Fixed confidence level for interval checks.
pub const CI_LEVEL: f64 = 0.99;

/// Cells smaller than this use the exact binomial interval.
pub const EXACT_CI_THRESHOLD: u64 = 30;

/// Standard normal quantile.
pub fn z_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Normal-approximation interval for a proportion estimate.
pub fn normal_ci(estimate: f64, std_error: f64, level: f64) -> (f64, f64) {
    let z = z_quantile(0.5 + level / 2.0);
    (estimate - z * std_error, estimate + z * std_error)
}

/// Exact Clopper-Pearson interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    let alpha = 1.0 - level;
    let (s, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(s, n - s + 1.0)
            .unwrap()
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(s + 1.0, n - s)
            .unwrap()
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Whether `analytic` lies in the level-`CI_LEVEL` interval around the
/// frequency `successes / trials`, using the exact interval for small
/// cells.
pub fn ci_contains(analytic: f64, successes: u64, trials: u64) -> bool {
    let small = successes.min(trials - successes) < EXACT_CI_THRESHOLD;
    let (lo, hi) = if small {
        clopper_pearson(successes, trials, CI_LEVEL)
    } else {
        let p = successes as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        normal_ci(p, se, CI_LEVEL)
    };
    (lo..=hi).contains(&analytic)
}

/// Chi-square homogeneity test for two histograms over the same cells.
/// Cells with pooled expected count below 5 are merged into the running
/// group. Returns the p-value.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension("histograms must share cells".into()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::Validation("empty histogram".into()));
    }
    let total = (na + nb) as f64;
    // Merge sparse cells so every group has pooled expectation >= 5.
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0f64, 0.0f64);
    for (&ca, &cb) in a.iter().zip(b) {
        acc.0 += ca as f64;
        acc.1 += cb as f64;
        let pooled = acc.0 + acc.1;
        if pooled * na as f64 / total >= 5.0 && pooled * nb as f64 / total >= 5.0 {
            groups.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        if let Some(last) = groups.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            groups.push(acc);
        }
    }
    if groups.len() < 2 {
        // Everything in one group: the histograms are trivially compatible.
        return Ok(1.0);
    }
    let mut chi2 = 0.0;
    for &(ca, cb) in &groups {
        let pooled = (ca + cb) / total;
        let ea = pooled * na as f64;
        let eb = pooled * nb as f64;
        chi2 += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
    }
    let df = (groups.len() - 1) as f64;
    let dist = ChiSquared::new(df)
        .map_err(|e| Error::Internal(format!("chi-square with df {df}: {e}")))?;
    Ok(1.0 - dist.cdf(chi2))
}

/// Chi-square goodness-of-fit of observed counts against `probs`.
/// Sparse cells (expected < 5) are merged; the remainder mass joins the
/// last group. Returns the p-value.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<f64> {
    if observed.len() != probs.len() {
        return Err(Error::Dimension("observed and probs must share cells".into()));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::Validation("empty histogram".into()));
    }
    let nf = n as f64;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0f64, 0.0f64);
    for (&o, &p) in observed.iter().zip(probs) {
        acc.0 += o as f64;
        acc.1 += p;
        if acc.1 * nf >= 5.0 {
            groups.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        if let Some(last) = groups.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            groups.push(acc);
        }
    }
    if groups.len() < 2 {
        return Ok(1.0);
    }
    let mut chi2 = 0.0;
    for &(o, p) in &groups {
        let e = p * nf;
        chi2 += (o - e).powi(2) / e;
    }
    let df = (groups.len() - 1) as f64;
    let dist = ChiSquared::new(df)
        .map_err(|e| Error::Internal(format!("chi-square with df {df}: {e}")))?;
    Ok(1.0 - dist.cdf(chi2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_basics() {
        assert!((z_quantile(0.995) - 2.5758).abs() < 1e-3);
        assert!(z_quantile(0.5).abs() < 1e-12);
    }

    #[test]
    fn clopper_pearson_brackets_frequency() {
        let (lo, hi) = clopper_pearson(3, 100, 0.99);
        assert!(lo < 0.03 && 0.03 < hi);
        assert_eq!(clopper_pearson(0, 50, 0.99).0, 0.0);
        assert_eq!(clopper_pearson(50, 50, 0.99).1, 1.0);
    }

    #[test]
    fn identical_histograms_pass_two_sample() {
        let a = [100u64, 220, 380, 300];
        let p = chi_square_two_sample(&a, &a).unwrap();
        assert!(p > 0.99);
    }

    #[test]
    fn disjoint_histograms_fail_two_sample() {
        let a = [1000u64, 0, 0, 0];
        let b = [0u64, 0, 0, 1000];
        let p = chi_square_two_sample(&a, &b).unwrap();
        assert!(p < 1e-6);
    }

    #[test]
    fn gof_accepts_true_law_and_rejects_wrong_one() {
        let probs = [0.125, 0.375, 0.375, 0.125];
        let obs = [125u64, 380, 370, 125];
        assert!(chi_square_gof(&obs, &probs).unwrap() > 0.05);
        let wrong = [0.7, 0.1, 0.1, 0.1];
        assert!(chi_square_gof(&obs, &wrong).unwrap() < 1e-6);
    }
}
