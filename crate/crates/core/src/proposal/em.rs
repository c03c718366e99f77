//! Weighted expectation-maximization for diagonal mixtures.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GmmProposal, SIGMA_FLOOR, WEIGHT_FLOOR};
use crate::normal::LN_SQRT_2PI;
use crate::par::{self, Execution};
use crate::points::Points;
use crate::target::Domain;
use crate::{Error, Result};

/// Per-dimension lower bound on sigma for mixtures on `domain`.
pub fn sigma_floor(domain: &Domain) -> Vec<f64> {
    (0..domain.dims()).map(|i| SIGMA_FLOOR * domain.scale(i)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 100,
            rel_tol: 1e-6,
        }
    }
}

/// Outcome of a weighted EM fit.
#[derive(Clone, Debug)]
pub struct EmFit {
    pub proposal: GmmProposal,
    /// Weighted log-likelihood (weights normalized to sum 1) before each
    /// M-step, then once more for the returned parameters.
    pub log_likelihood: Vec<f64>,
    pub reseeded: usize,
}

/// Indices of `k` seeds picked by weighted k-means++.
pub fn kmeans_pp<R: Rng + ?Sized>(data: &Points, weights: &[f64], k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = data.len();
    check_fit_input(data, weights, k)?;
    let pick = |scores: &[f64], rng: &mut R| -> Option<usize> {
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        for (i, s) in scores.iter().enumerate() {
            if *s > 0.0 {
                if u < *s {
                    return Some(i);
                }
                u -= s;
            }
        }
        scores.iter().rposition(|s| *s > 0.0)
    };
    let first = pick(weights, rng).ok_or_else(|| Error::Fit("all weights are zero".into()))?;
    let mut seeds = vec![first];
    let mut dist2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(first))).collect();
    while seeds.len() < k {
        let scores: Vec<f64> = dist2.iter().zip(weights).map(|(d2, w)| d2 * w).collect();
        let next = pick(&scores, rng).ok_or_else(|| Error::Fit("too few distinct weighted points".into()))?;
        seeds.push(next);
        for (i, d2) in dist2.iter_mut().enumerate() {
            *d2 = d2.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    Ok(seeds)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_fit_input(data: &Points, weights: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Fit("k must be at least 1".into()));
    }
    if weights.len() != data.len() {
        return Err(Error::Fit("one weight per point required".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Fit("weights must be finite and nonnegative".into()));
    }
    if data.len() < k {
        return Err(Error::Fit(format!("{} points for {k} components", data.len())));
    }
    if distinct_weighted(data, weights, k) < k {
        return Err(Error::Fit(format!("fewer than {k} distinct weighted points")));
    }
    Ok(())
}

/// Number of distinct positive-weight rows, counting at most to `cap`.
pub fn distinct_weighted(data: &Points, weights: &[f64], cap: usize) -> usize {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for (x, &w) in data.rows().zip(weights) {
        if w > 0.0 {
            seen.insert(x.iter().map(|v| v.to_bits()).collect());
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

/// Weighted EM for a diagonal mixture, seeded by weighted k-means++.
pub fn fit_em<R: Rng + ?Sized>(
    data: &Points,
    weights: &[f64],
    k: usize,
    domain: &Domain,
    opts: EmOptions,
    exec: Execution,
    rng: &mut R,
) -> Result<EmFit> {
    let seeds = kmeans_pp(data, weights, k, rng)?;
    fit_em_seeded(data, weights, &data.select(&seeds), domain, opts, exec)
}

/// Mixture state during EM: plain (untruncated) Gaussians.
struct EmState {
    k: usize,
    d: usize,
    log_w: Vec<f64>,
    mu: Vec<f64>,
    var: Vec<f64>,
}

impl EmState {
    fn log_terms(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let d = self.d;
        let mut best = f64::NEG_INFINITY;
        for c in 0..self.k {
            let mut t = self.log_w[c];
            for i in 0..d {
                let j = c * d + i;
                let dx = x[i] - self.mu[j];
                t -= 0.5 * (dx * dx / self.var[j] + self.var[j].ln()) + LN_SQRT_2PI;
            }
            out[c] = t;
            best = best.max(t);
        }
        best + out.iter().map(|t| (t - best).exp()).sum::<f64>().ln()
    }
}

/// Weighted EM from explicit initial centers.
///
/// Initial parameters come from a hard nearest-center assignment. Each
/// iteration computes responsibilities, then the closed-form weighted M-step
/// with sigma floored per [`sigma_floor`] and weights floored at
/// [`WEIGHT_FLOOR`].
pub fn fit_em_seeded(
    data: &Points,
    weights: &[f64],
    centers: &Points,
    domain: &Domain,
    opts: EmOptions,
    exec: Execution,
) -> Result<EmFit> {
    let k = centers.len();
    check_fit_input(data, weights, k)?;
    let d = data.dims();
    let n = data.len();
    let total_w: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|v| v / total_w).collect();
    let var_floor: Vec<f64> = sigma_floor(domain).iter().map(|s| s * s).collect();
    let kd = k * d;

    // Sufficient statistics: [N_k | S1_kd | S2_kd | loglik]
    let stat_len = k + 2 * kd + 1;

    let hard = par::sum_chunks(exec, n, stat_len, |r, acc| {
        for i in r {
            let x = data.row(i);
            let c = (0..k)
                .min_by(|&a, &b| sq_dist(x, centers.row(a)).total_cmp(&sq_dist(x, centers.row(b))))
                .unwrap();
            add_stats(acc, k, d, c, w[i], x);
        }
    });
    let mut st = EmState {
        k,
        d,
        log_w: vec![0.0; k],
        mu: centers.as_flat().to_vec(),
        var: vec![0.0; kd],
    };
    let mut reseeded = m_step(&mut st, &hard, &var_floor, data, &w);

    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let stats = e_step(&st, data, &w, exec, stat_len);
        let ll = stats[stat_len - 1];
        trace.push(ll);
        if prev.is_finite() && (ll - prev).abs() <= opts.rel_tol * prev.abs() {
            converged = true;
            break;
        }
        prev = ll;
        reseeded += m_step(&mut st, &stats, &var_floor, data, &w);
    }
    if !converged {
        trace.push(e_step(&st, data, &w, exec, stat_len)[stat_len - 1]);
    }

    let proposal = GmmProposal::new(
        st.mu,
        st.var.iter().map(|v| 0.5 * v.ln()).collect(),
        st.log_w,
        domain.clone(),
    )?;
    Ok(EmFit {
        proposal,
        log_likelihood: trace,
        reseeded,
    })
}

fn add_stats(acc: &mut [f64], k: usize, d: usize, c: usize, wr: f64, x: &[f64]) {
    let kd = k * d;
    acc[c] += wr;
    for i in 0..d {
        acc[k + c * d + i] += wr * x[i];
        acc[k + kd + c * d + i] += wr * x[i] * x[i];
    }
}

fn e_step(st: &EmState, data: &Points, w: &[f64], exec: Execution, stat_len: usize) -> Vec<f64> {
    let (k, d) = (st.k, st.d);
    par::sum_chunks(exec, data.len(), stat_len, |r, acc| {
        let mut terms = vec![0.0; k];
        for i in r {
            if w[i] == 0.0 {
                continue;
            }
            let x = data.row(i);
            let lse = st.log_terms(x, &mut terms);
            acc[stat_len - 1] += w[i] * lse;
            for c in 0..k {
                let resp = (terms[c] - lse).exp();
                if resp > 0.0 {
                    add_stats(acc, k, d, c, w[i] * resp, x);
                }
            }
        }
    })
}

/// Closed-form M-step; returns how many empty components were re-seeded.
fn m_step(
    st: &mut EmState,
    stats: &[f64],
    var_floor: &[f64],
    data: &Points,
    w: &[f64],
) -> usize {
    let (k, d) = (st.k, st.d);
    let kd = k * d;
    let mut reseeded = 0;
    let mut weights = vec![0.0; k];
    for c in 0..k {
        let nk = stats[c];
        if nk <= 1e-12 {
            // Empty: move to the heaviest, worst-explained point.
            reseeded += 1;
            let target = worst_explained(st, data, w);
            for i in 0..d {
                st.mu[c * d + i] = data.row(target)[i];
                let v = st.var[c * d + i];
                st.var[c * d + i] = if v > 0.0 { v } else { 1.0 }.max(var_floor[i]);
            }
            weights[c] = WEIGHT_FLOOR;
            continue;
        }
        weights[c] = nk;
        for i in 0..d {
            let j = c * d + i;
            let m = stats[k + j] / nk;
            let v = (stats[k + kd + j] / nk - m * m).max(0.0);
            st.mu[j] = m;
            st.var[j] = v.max(var_floor[i]);
        }
    }
    let sum: f64 = weights.iter().sum();
    let mut normalized: Vec<f64> = weights.iter().map(|x| x / sum).collect();
    if normalized.iter().any(|x| *x < WEIGHT_FLOOR) {
        let floored: f64 = normalized.iter().filter(|x| **x < WEIGHT_FLOOR).count() as f64 * WEIGHT_FLOOR;
        let free: f64 = normalized.iter().filter(|x| **x >= WEIGHT_FLOOR).sum();
        for x in &mut normalized {
            *x = if *x < WEIGHT_FLOOR {
                WEIGHT_FLOOR
            } else {
                *x * (1.0 - floored) / free
            };
        }
    }
    st.log_w = normalized.iter().map(|x| x.ln()).collect();
    reseeded
}

fn worst_explained(st: &EmState, data: &Points, w: &[f64]) -> usize {
    let mut terms = vec![0.0; st.k];
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 0..data.len() {
        if w[i] <= 0.0 {
            continue;
        }
        let score = w[i].ln() - st.log_terms(data.row(i), &mut terms);
        if score > best.0 {
            best = (score, i);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn two_tight_clusters() {
        let mut r = rng(1);
        let mut rows = Vec::new();
        for c in [-3.0, 5.0] {
            for _ in 0..4 {
                rows.push(vec![c + r.random_range(-1e-4..1e-4)]);
            }
        }
        let data = Points::from_rows(1, &rows);
        let centroid = |lo: usize| rows[lo..lo + 4].iter().map(|v| v[0]).sum::<f64>() / 4.0;
        let fit = fit_em(&data, &[1.0; 8], 2, &Domain::unbounded(1), EmOptions::default(), Execution::Sequential, &mut r).unwrap();
        let mut means = fit.proposal.means().to_vec();
        means.sort_by(f64::total_cmp);
        assert!((means[0] - centroid(0)).abs() < 1e-3);
        assert!((means[1] - centroid(4)).abs() < 1e-3);
    }

    #[test]
    fn single_component_is_the_weighted_moments() {
        let mut r = rng(2);
        let xs: Vec<f64> = (0..200).map(|_| r.random_range(-2.0..7.0)).collect();
        let data = Points::from_flat(1, xs.clone());
        let w = vec![1.0; xs.len()];
        let fit = fit_em(&data, &w, 1, &Domain::unbounded(1), EmOptions::default(), Execution::Sequential, &mut r).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((fit.proposal.means()[0] - mean).abs() < 1e-12);
        assert!((fit.proposal.sigmas()[0].powi(2) - var).abs() < 1e-12 * var);
        assert_eq!(fit.proposal.weights(), vec![1.0]);
    }

    #[test]
    fn variance_is_floored() {
        let data = Points::from_flat(1, vec![0.3; 5]);
        let mut r = rng(3);
        let fit = fit_em(&data, &[1.0; 5], 1, &Domain::unit_cube(1), EmOptions::default(), Execution::Sequential, &mut r).unwrap();
        assert!((fit.proposal.sigmas()[0] - SIGMA_FLOOR).abs() < 1e-18);
    }

    /// Textbook weighted EM over nested vectors, from the same hard
    /// assignment to the same centers.
    fn oracle_em(xs: &[Vec<f64>], w: &[f64], centers: &[Vec<f64>], iters: usize, floor: &[f64]) -> Vec<Vec<f64>> {
        let (n, k, d) = (xs.len(), centers.len(), xs[0].len());
        let tw: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / tw).collect();
        let nearest = |x: &Vec<f64>| {
            (0..k)
                .min_by(|&a, &b| {
                    let da: f64 = (0..d).map(|i| (x[i] - centers[a][i]).powi(2)).sum();
                    let db: f64 = (0..d).map(|i| (x[i] - centers[b][i]).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap()
        };
        let mut resp: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| {
                let c = nearest(x);
                (0..k).map(|j| if j == c { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        for _ in 0..=iters {
            // M-step from the current responsibilities
            let mut pi = vec![0.0; k];
            let mut mu = vec![vec![0.0; d]; k];
            let mut var = vec![vec![0.0; d]; k];
            for c in 0..k {
                let nk: f64 = (0..n).map(|i| w[i] * resp[i][c]).sum();
                pi[c] = nk;
                for j in 0..d {
                    let m: f64 = (0..n).map(|i| w[i] * resp[i][c] * xs[i][j]).sum::<f64>() / nk;
                    let v: f64 = (0..n).map(|i| w[i] * resp[i][c] * (xs[i][j] - m).powi(2)).sum::<f64>() / nk;
                    mu[c][j] = m;
                    var[c][j] = v.max(floor[j] * floor[j]);
                }
            }
            // E-step
            for i in 0..n {
                let dens: Vec<f64> = (0..k)
                    .map(|c| {
                        let mut p = pi[c];
                        for j in 0..d {
                            let v = var[c][j];
                            p *= (-(xs[i][j] - mu[c][j]).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                        }
                        p
                    })
                    .collect();
                let s: f64 = dens.iter().sum();
                resp[i] = dens.iter().map(|p| p / s).collect();
            }
        }
        resp
    }

    #[test]
    fn matches_an_independent_weighted_em() {
        let mut r = rng(4);
        let mut rows = Vec::new();
        let mut w = Vec::new();
        for i in 0..60 {
            let centre = if i % 3 == 0 { [-2.0, 1.0] } else { [1.5, -0.5] };
            rows.push(vec![centre[0] + r.random_range(-1.0..1.0), centre[1] + r.random_range(-1.0..1.0)]);
            w.push(if i < 20 { 10.0 } else { 1.0 });
        }
        let data = Points::from_rows(2, &rows);
        let dom = Domain::unbounded(2);
        let seeds = kmeans_pp(&data, &w, 3, &mut r).unwrap();
        let centers = data.select(&seeds);
        let iters = 15;
        let opts = EmOptions { max_iter: iters, rel_tol: 0.0 };
        let fit = fit_em_seeded(&data, &w, &centers, &dom, opts, Execution::Sequential).unwrap();
        let center_rows: Vec<Vec<f64>> = centers.rows().map(|c| c.to_vec()).collect();
        let want = oracle_em(&rows, &w, &center_rows, iters, &sigma_floor(&dom));

        // Responsibilities under the fitted mixture, untruncated since the domain is unbounded.
        let g = &fit.proposal;
        let mut terms = vec![0.0; 3];
        for (i, x) in rows.iter().enumerate() {
            let lse = g.component_terms(x, &mut terms);
            for c in 0..3 {
                let got = (terms[c] - lse).exp();
                assert!((got - want[i][c]).abs() < 1e-8, "point {i} comp {c}: {got} vs {}", want[i][c]);
            }
        }
    }

    #[test]
    fn log_likelihood_never_decreases() {
        for seed in 0..8 {
            let mut r = rng(100 + seed);
            let n = 300;
            let data = Points::from_flat(
                2,
                (0..2 * n)
                    .map(|i| if i % 4 < 2 { r.random_range(-3.0..0.0) } else { r.random_range(1.0..2.0) })
                    .collect(),
            );
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0f64).powi(3)).collect();
            let opts = EmOptions { max_iter: 100, rel_tol: 0.0 };
            let fit = fit_em(&data, &w, 4, &Domain::unbounded(2), opts, Execution::Parallel, &mut r).unwrap();
            assert_eq!(fit.reseeded, 0);
            for pair in fit.log_likelihood.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9, "seed {seed}: {} -> {}", pair[0], pair[1]);
            }
        }
    }

    #[test]
    fn refuses_degenerate_input() {
        let mut r = rng(5);
        let dom = Domain::unbounded(1);
        let two = Points::from_flat(1, vec![1.0, 2.0]);
        assert!(fit_em(&two, &[1.0, 1.0], 3, &dom, EmOptions::default(), Execution::Sequential, &mut r).is_err());
        let dup = Points::from_flat(1, vec![1.0, 1.0, 1.0, 2.0]);
        assert!(fit_em(&dup, &[1.0, 1.0, 1.0, 0.0], 2, &dom, EmOptions::default(), Execution::Sequential, &mut r).is_err());
        assert_eq!(distinct_weighted(&dup, &[1.0; 4], 10), 2);
    }

    #[test]
    fn kmeans_pp_respects_zero_weights() {
        let data = Points::from_flat(1, vec![0.0, 10.0, 20.0, 30.0]);
        let w = [0.0, 1.0, 0.0, 1.0];
        for s in 0..20 {
            let seeds = kmeans_pp(&data, &w, 2, &mut rng(s)).unwrap();
            let mut seeds = seeds.clone();
            seeds.sort();
            assert_eq!(seeds, vec![1, 3]);
        }
    }
}
