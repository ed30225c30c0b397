//! Hypothesis tests, confidence intervals and multiple-comparison correction.

use serde::Serialize;

use super::dist::{normal_two_sided, t_quantile, t_two_sided};
use super::StatsError;

/// Sample sizes up to which the Mann–Whitney null distribution is enumerated.
pub const MWU_EXACT_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestMethod {
    #[serde(rename = "t-test")]
    TTest,
    #[serde(rename = "mann-whitney-exact")]
    MannWhitneyExact,
    #[serde(rename = "mann-whitney-normal")]
    MannWhitneyNormal,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::TTest => "t-test",
            TestMethod::MannWhitneyExact => "mann-whitney-exact",
            TestMethod::MannWhitneyNormal => "mann-whitney-normal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Equal to `p_value` until a correction is applied.
    pub adjusted_p: f64,
    pub n: usize,
    pub mean: f64,
    pub ci: Option<(f64, f64)>,
    pub method: TestMethod,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator); `None` below two values.
pub fn sample_sd(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let m = mean(x);
    Some((x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt())
}

fn mean_and_se(x: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFew(x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let m = mean(x);
    let s = sample_sd(x).expect("n >= 2");
    if s == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((m, s / (x.len() as f64).sqrt()))
}

/// `mean ± t_{(1+level)/2, n−1} · s/√n`.
pub fn t_confidence_interval(x: &[f64], level: f64) -> Result<(f64, f64), StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Level(level));
    }
    let (m, se) = mean_and_se(x)?;
    let half = t_quantile(0.5 * (1.0 + level), (x.len() - 1) as f64) * se;
    Ok((m - half, m + half))
}

/// Two-sided one-sample t test of a zero mean, with a `level` interval.
pub fn one_sample_t_test(x: &[f64], level: f64) -> Result<TestResult, StatsError> {
    let (m, se) = mean_and_se(x)?;
    let t = m / se;
    let p = t_two_sided(t, (x.len() - 1) as f64);
    Ok(TestResult {
        statistic: t,
        p_value: p,
        adjusted_p: p,
        n: x.len(),
        mean: m,
        ci: Some(t_confidence_interval(x, level)?),
        method: TestMethod::TTest,
    })
}

/// Midranks (1-based) of the pooled sample and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// `(U₁, U₂)` for samples `a` and `b`, midranks for ties.
pub fn mann_whitney_statistics(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, _) = midranks(&pooled);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    (u1, n1 * n2 - u1)
}

/// Counts of rank-sum arrangements: `counts[u]` = number of ways to obtain
/// U₁ = u with sizes (n1, n2), no ties.
pub fn mann_whitney_null_counts(n1: usize, n2: usize) -> Vec<u128> {
    // f[i][j][u] built up over i (first sample) and j (second sample)
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<u128>> = vec![vec![1]; n2 + 1];
    for i in 1..=n1 {
        let mut cur: Vec<Vec<u128>> = Vec::with_capacity(n2 + 1);
        cur.push(vec![1]);
        for j in 1..=n2 {
            // largest element belongs to sample 1 (adds j to U₁) or to sample 2
            let len = i * j + 1;
            let mut v = vec![0u128; len];
            for (u, &c) in prev[j].iter().enumerate() {
                v[u + j] += c;
            }
            for (u, &c) in cur[j - 1].iter().enumerate() {
                v[u] += c;
            }
            cur.push(v);
        }
        prev = cur;
    }
    let mut out = prev.swap_remove(n2);
    out.resize(max_u + 1, 0);
    out
}

/// Two-sided exact p-value `min(1, 2·min(P(U ≤ u), P(U ≥ u)))`.
pub fn mann_whitney_exact_p(u1: f64, n1: usize, n2: usize) -> f64 {
    let counts = mann_whitney_null_counts(n1, n2);
    let total: u128 = counts.iter().sum();
    let u = u1.round() as usize;
    let lower: u128 = counts[..=u].iter().sum();
    let upper: u128 = counts[u..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

/// Two-sided Mann–Whitney U test of `a` against `b`.
///
/// Exact when `n1·n2 ≤ 400` and the pooled sample has no ties; otherwise the
/// normal approximation with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (_, ties) = midranks(&pooled);
    let (u1, _) = mann_whitney_statistics(a, b);
    let (n1, n2) = (a.len(), b.len());
    let has_ties = ties.iter().any(|&t| t > 1);
    let (p, method) = if n1 * n2 <= MWU_EXACT_LIMIT && !has_ties {
        (mann_whitney_exact_p(u1, n1, n2), TestMethod::MannWhitneyExact)
    } else {
        let (f1, f2) = (n1 as f64, n2 as f64);
        let n = f1 + f2;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term);
        let p = if var <= 0.0 {
            1.0
        } else {
            let z = ((u1 - f1 * f2 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
            normal_two_sided(z)
        };
        (p, TestMethod::MannWhitneyNormal)
    };
    Ok(TestResult {
        statistic: u1,
        p_value: p,
        adjusted_p: p,
        n: n1 + n2,
        mean: mean(b) - mean(a),
        ci: None,
        method,
    })
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_adjust(p: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(&bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(StatsError::PValue(bad));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (j, &i) in order.iter().enumerate() {
        running = running.max(((m - j) as f64 * p[i]).min(1.0));
        out[i] = running;
    }
    Ok(out)
}

/// Replaces `adjusted_p` of each result with its Holm-adjusted value.
pub fn apply_holm(results: &mut [TestResult]) -> Result<(), StatsError> {
    let raw: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    for (r, a) in results.iter_mut().zip(holm_adjust(&raw)?) {
        r.adjusted_p = a;
    }
    Ok(())
}

#[cfg(test)]
mod unit_tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn holm_examples() {
        assert_eq!(holm_adjust(&[0.01, 0.04]).unwrap(), vec![0.02, 0.04]);
        assert_eq!(holm_adjust(&[0.3]).unwrap(), vec![0.3]);
        assert_eq!(holm_adjust(&[0.5, 0.5, 0.5]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(holm_adjust(&[0.04, 0.01]).unwrap(), vec![0.04, 0.02]);
        assert!(holm_adjust(&[1.5]).is_err());
    }

    #[test]
    fn t_test_examples() {
        let r = one_sample_t_test(&[-2.0, -1.0, 1.0, 2.0], 0.99).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert!(matches!(one_sample_t_test(&[1.0; 4], 0.99), Err(StatsError::ZeroVariance)));
        assert!(matches!(one_sample_t_test(&[1.0], 0.99), Err(StatsError::TooFew(1))));
        let r = one_sample_t_test(&[2.1, 1.9, 2.0, 2.2, 1.8], 0.99).unwrap();
        // mean 2, s = sqrt(0.025)
        let t = 2.0 / (0.025f64.sqrt() / 5f64.sqrt());
        assert!((r.statistic - t).abs() < 1e-12);
        let (lo, hi) = r.ci.unwrap();
        assert!(lo < 2.0 && 2.0 < hi);
    }

    #[test]
    fn mann_whitney_examples() {
        let a = [1.0, 2.0, 3.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.statistic, 4.5);
        let (u1, u2) = mann_whitney_statistics(&[1.0, 5.0, 7.0, 9.0, 2.5, 3.0], &[4.0, 6.0, 8.0, 0.5, 10.0, 11.0]);
        let brute: f64 = [1.0, 5.0, 7.0, 9.0, 2.5, 3.0]
            .iter()
            .flat_map(|x| [4.0, 6.0, 8.0, 0.5, 10.0, 11.0].map(|y: f64| if *x > y { 1.0 } else { 0.0 }))
            .sum();
        assert_eq!(u1, brute);
        assert_eq!(u1 + u2, 36.0);
        assert!(matches!(mann_whitney_u(&[], &a), Err(StatsError::EmptySample)));
    }

    #[test]
    fn null_counts_sum_to_binomial() {
        let c = mann_whitney_null_counts(3, 2);
        assert_eq!(c, vec![1, 1, 2, 2, 2, 1, 1]);
        let c = mann_whitney_null_counts(20, 20);
        assert_eq!(c.iter().sum::<u128>(), 137_846_528_820);
    }

    proptest! {
        #[test]
        fn holm_properties(p in prop::collection::vec(0.0f64..=1.0, 1..12)) {
            let adj = holm_adjust(&p).unwrap();
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
            for (a, r) in adj.iter().zip(&p) {
                prop_assert!(a >= r && *a <= 1.0);
            }
        }

        #[test]
        fn t_test_sign_and_scale(x in prop::collection::vec(-50.0f64..50.0, 3..20), c in 0.1f64..10.0) {
            prop_assume!(sample_sd(&x).unwrap() > 1e-6);
            let r = one_sample_t_test(&x, 0.99).unwrap();
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let rn = one_sample_t_test(&neg, 0.99).unwrap();
            prop_assert_eq!(rn.statistic, -r.statistic);
            prop_assert_eq!(rn.p_value, r.p_value);
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let rs = one_sample_t_test(&scaled, 0.99).unwrap();
            prop_assert!((rs.p_value - r.p_value).abs() < 1e-9);
            let (lo, hi) = r.ci.unwrap();
            prop_assert!(lo <= r.mean && r.mean <= hi);
        }

        #[test]
        fn ci_translation(x in prop::collection::vec(-5.0f64..5.0, 3..15), c in -100.0f64..100.0) {
            prop_assume!(sample_sd(&x).unwrap() > 1e-3);
            let (lo, hi) = t_confidence_interval(&x, 0.99).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let (slo, shi) = t_confidence_interval(&shifted, 0.99).unwrap();
            prop_assert!((slo - lo - c).abs() < 1e-9 && (shi - hi - c).abs() < 1e-9);
        }
    }
}
