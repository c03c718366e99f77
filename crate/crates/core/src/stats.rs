//! Two-sample goodness-of-fit tests.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};
use crate::points::Points;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    KsAsymptotic,
    CramerPermutation,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::KsAsymptotic => "ks-asymptotic",
            Method::CramerPermutation => "cramer-permutation",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form, fast for small lambda.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (c * ((2 * k - 1) as f64).powi(2)).exp()).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Largest gap between the two empirical CDFs. Tied values advance both
/// CDFs before the gap is taken.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> f64 {
    let (a, b) = (sorted(x), sorted(y));
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size `n1 n2 / (n1 + n2)`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> TestResult {
    assert!(!x.is_empty() && !y.is_empty(), "empty sample");
    let d = ks_statistic(x, y);
    let (n1, n2) = (x.len(), y.len());
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    TestResult {
        statistic: d,
        p_value: kolmogorov_sf(ne.sqrt() * d),
        method: Method::KsAsymptotic,
        n1,
        n2,
    }
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    assert!(!x.is_empty(), "empty sample");
    let a = sorted(x);
    let n = a.len() as f64;
    let mut d = 0.0f64;
    for (i, v) in a.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    TestResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
        method: Method::KsAsymptotic,
        n1: a.len(),
        n2: 0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CramerOptions {
    pub permutations: usize,
    /// Larger samples are subsampled to this many rows per side.
    pub max_per_side: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for CramerOptions {
    fn default() -> Self {
        CramerOptions {
            permutations: 200,
            max_per_side: 5000,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Pooled pairwise distances, upper triangle without the diagonal.
struct Distances {
    n: usize,
    tri: Vec<f64>,
    total: f64,
}

impl Distances {
    fn new(pool: &[&[f64]], exec: Execution) -> Self {
        let n = pool.len();
        let rows = par::map_indexed(exec, n, |i| (i + 1..n).map(|j| euclid(pool[i], pool[j])).collect::<Vec<f64>>());
        let tri: Vec<f64> = rows.into_iter().flatten().collect();
        let total = tri.iter().sum();
        Distances { n, tri, total }
    }

    /// Statistic for the labeling where `in_x[i]` marks the first sample.
    fn statistic(&self, in_x: &[bool], n1: usize) -> f64 {
        let n2 = self.n - n1;
        let (mut sxx, mut syy) = (0.0, 0.0);
        let mut k = 0;
        for i in 0..self.n {
            let row = &self.tri[k..k + self.n - i - 1];
            k += row.len();
            let xi = in_x[i];
            let mut s = 0.0;
            for (j, d) in (i + 1..self.n).zip(row) {
                if in_x[j] == xi {
                    s += d;
                }
            }
            if xi {
                sxx += s;
            } else {
                syy += s;
            }
        }
        let sxy = self.total - sxx - syy;
        energy(sxy, sxx, syy, n1, n2)
    }
}

/// `n1 n2/(n1+n2) * (mean |X-Y| - mean |X-X'|/2 - mean |Y-Y'|/2)`, with
/// within-sample means over all `n^2` ordered pairs. Sums are over unordered
/// pairs.
fn energy(sxy: f64, sxx: f64, syy: f64, n1: usize, n2: usize) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let cross = sxy / (a * b);
    let within_x = 2.0 * sxx / (a * a);
    let within_y = 2.0 * syy / (b * b);
    a * b / (a + b) * (cross - 0.5 * within_x - 0.5 * within_y)
}

/// Cramér statistic by direct double sums.
pub fn cramer_statistic(x: &Points, y: &Points) -> f64 {
    let sum_pairs = |p: &Points| {
        let mut s = 0.0;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                s += euclid(p.row(i), p.row(j));
            }
        }
        s
    };
    let mut sxy = 0.0;
    for a in x.rows() {
        for b in y.rows() {
            sxy += euclid(a, b);
        }
    }
    energy(sxy, sum_pairs(x), sum_pairs(y), x.len(), y.len())
}

fn subsample(p: &Points, cap: usize, rng: &mut ChaCha8Rng) -> Points {
    if p.len() <= cap {
        return p.clone();
    }
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.shuffle(rng);
    idx.truncate(cap);
    idx.sort_unstable();
    p.select(&idx)
}

/// Two-sample Cramér test with a permutation p-value,
/// `(1 + #{T_b >= T}) / (B + 1)`.
pub fn cramer_two_sample(x: &Points, y: &Points, opts: &CramerOptions) -> TestResult {
    assert_eq!(x.dims(), y.dims());
    assert!(!x.is_empty() && !y.is_empty(), "empty sample");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x = subsample(x, opts.max_per_side, &mut rng);
    let y = subsample(y, opts.max_per_side, &mut rng);
    let (n1, n2) = (x.len(), y.len());
    let pool: Vec<&[f64]> = x.rows().chain(y.rows()).collect();
    let dist = Distances::new(&pool, opts.execution);
    let labels: Vec<bool> = (0..n1 + n2).map(|i| i < n1).collect();
    let observed = dist.statistic(&labels, n1);

    let tol = 1e-10 * (1.0 + observed.abs());
    let perm_stats = par::map_indexed(opts.execution, opts.permutations, |b| {
        let mut r = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
        r.set_stream(b as u64 + 1);
        let mut lab = labels.clone();
        lab.shuffle(&mut r);
        dist.statistic(&lab, n1)
    });
    let hits = perm_stats.iter().filter(|t| **t >= observed - tol).count();
    TestResult {
        statistic: observed,
        p_value: (1 + hits) as f64 / (opts.permutations + 1) as f64,
        method: Method::CramerPermutation,
        n1,
        n2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn brute_ks(x: &[f64], y: &[f64]) -> f64 {
        let ecdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
        x.iter()
            .chain(y)
            .map(|t| (ecdf(x, *t) - ecdf(y, *t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let x: Vec<f64> = (0..100).map(|i| i as f64 * 0.37).collect();
        let r = ks_two_sample(&x, &x);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = ks_two_sample(&vec![0.0; 1000], &vec![1.0; 1000]);
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-100);
    }

    #[test]
    fn ks_matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..60).map(|_| (rng.random::<f64>() * 10.0).floor()).collect();
            let y: Vec<f64> = (0..45).map(|_| (rng.random::<f64>() * 12.0).floor()).collect();
            assert!((ks_statistic(&x, &y) - brute_ks(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Critical values of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.3580986393225505) - 0.05).abs() < 1e-6);
        assert!((kolmogorov_sf(1.6276236115189) - 0.01).abs() < 1e-6);
        assert!((kolmogorov_sf(0.8275735551899) - 0.5).abs() < 1e-6);
        // Both branches agree where they meet.
        assert!((kolmogorov_sf(1.18 - 1e-12) - kolmogorov_sf(1.18)).abs() < 1e-10);
        let mut last = 1.0;
        for i in 0..300 {
            let p = kolmogorov_sf(i as f64 * 0.01);
            assert!(p <= last + 1e-15);
            last = p;
        }
    }

    #[test]
    fn ks_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut passes = 0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
            passes += (ks_two_sample(&x, &y).p_value > 0.01) as usize;
        }
        assert!(passes >= 95, "{passes}");
    }

    #[test]
    fn one_sample_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_one_sample(&x, |v| v.clamp(0.0, 1.0)).p_value > 0.01);
        assert!(ks_one_sample(&x, |v| v.clamp(0.0, 1.0).powi(2)).p_value < 1e-6);
    }

    fn normal_points(n: usize, d: usize, shift: f64, rng: &mut ChaCha8Rng) -> Points {
        let v: Vec<f64> = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect();
        Points::from_flat(d, v)
    }

    #[test]
    fn cramer_identical_and_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = normal_points(80, 3, 0.0, &mut rng);
        let same = cramer_two_sample(&x, &x, &CramerOptions::default());
        assert!(same.statistic.abs() < 1e-9);
        assert_eq!(same.p_value, 1.0);
        let shifted = Points::from_flat(3, x.as_flat().iter().map(|v| v + 10.0).collect());
        let r = cramer_two_sample(&x, &shifted, &CramerOptions::default());
        assert_eq!(r.p_value, 1.0 / 201.0);
    }

    #[test]
    fn cramer_matches_direct_sums_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = normal_points(60, 2, 0.0, &mut rng);
        let y = normal_points(70, 2, 0.3, &mut rng);
        let r = cramer_two_sample(&x, &y, &CramerOptions::default());
        let direct = cramer_statistic(&x, &y);
        assert!((r.statistic - direct).abs() < 1e-9 * direct.abs().max(1.0));
        assert!((cramer_statistic(&y, &x) - direct).abs() < 1e-9 * direct.abs().max(1.0));
        // Permuting rows within a sample leaves the statistic alone.
        let rev: Vec<usize> = (0..x.len()).rev().collect();
        assert!((cramer_statistic(&x.select(&rev), &y) - direct).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn cramer_is_deterministic_across_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = normal_points(100, 2, 0.0, &mut rng);
        let y = normal_points(100, 2, 0.0, &mut rng);
        let mut o = CramerOptions::default();
        o.execution = Execution::Sequential;
        let a = cramer_two_sample(&x, &y, &o);
        o.execution = Execution::Parallel;
        let b = cramer_two_sample(&x, &y, &o);
        assert_eq!(a, b);
    }
}
