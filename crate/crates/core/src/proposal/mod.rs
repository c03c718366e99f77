//! Truncated diagonal Gaussian-mixture proposal.
//!
//! Each component is a product of univariate normals truncated to the domain
//! and renormalized per dimension, so [`GmmProposal::log_density`] is exactly
//! the density that [`GmmProposal::sample`] draws from.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::normal::{self, LN_SQRT_2PI};
use crate::par::{self, Execution};
use crate::points::Points;
use crate::target::Domain;
use crate::{Error, Result};

mod em;

pub use em::{distinct_weighted, fit_em, fit_em_seeded, kmeans_pp, sigma_floor, EmFit, EmOptions};

/// Relative variance floor: `sigma >= SIGMA_FLOOR * scale_i`.
pub const SIGMA_FLOOR: f64 = 1e-4;
/// Smallest mixture weight EM may leave on a component.
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GmmProposal {
    k: usize,
    d: usize,
    means: Vec<f64>,
    log_sigmas: Vec<f64>,
    weight_logits: Vec<f64>,
    domain: Domain,

    sigmas: Vec<f64>,
    inv_sigmas: Vec<f64>,
    weights: Vec<f64>,
    cum_weights: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    log_z: Vec<f64>,
    /// `log w_k - sum_i (log sigma_ki + ln sqrt(2 pi) + log Z_ki)`
    log_const: Vec<f64>,
    /// `d log Z / d mu`
    dlz_dmu: Vec<f64>,
    /// `d log Z / d log sigma`
    dlz_dls: Vec<f64>,
}

/// Gradient of `log g(x)` with respect to every proposal parameter, laid out
/// like [`GmmProposal::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrad {
    pub means: Vec<f64>,
    pub log_sigmas: Vec<f64>,
    pub weight_logits: Vec<f64>,
}

impl ParamGrad {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.means.clone();
        v.extend_from_slice(&self.log_sigmas);
        v.extend_from_slice(&self.weight_logits);
        v
    }
}

/// A batch of proposal draws.
#[derive(Clone, Debug)]
pub struct Draws {
    pub points: Points,
    /// Draws whose component had (near) zero mass inside the domain.
    pub degenerate: usize,
}

impl GmmProposal {
    /// Builds a mixture from unconstrained parameters. `means` and
    /// `log_sigmas` are row-major `k x d`.
    pub fn new(
        means: Vec<f64>,
        log_sigmas: Vec<f64>,
        weight_logits: Vec<f64>,
        domain: Domain,
    ) -> Result<Self> {
        let k = weight_logits.len();
        let d = domain.dims();
        if k == 0 {
            return Err(Error::Proposal("no components".into()));
        }
        if means.len() != k * d || log_sigmas.len() != k * d {
            return Err(Error::Proposal(format!(
                "expected {k}x{d} means and sigmas, got {} and {}",
                means.len(),
                log_sigmas.len()
            )));
        }
        if means.iter().chain(&log_sigmas).chain(&weight_logits).any(|v| !v.is_finite()) {
            return Err(Error::Proposal("non-finite parameter".into()));
        }

        let max_logit = weight_logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max_logit + weight_logits.iter().map(|l| (l - max_logit).exp()).sum::<f64>().ln();
        let log_weights: Vec<f64> = weight_logits.iter().map(|l| l - lse).collect();
        let mut cum_weights = Vec::with_capacity(k);
        let mut acc = 0.0;
        for lw in &log_weights {
            acc += lw.exp();
            cum_weights.push(acc);
        }
        if log_weights.iter().any(|lw| lw.exp() <= 0.0) {
            return Err(Error::Proposal("a component weight underflows to zero".into()));
        }

        let sigmas: Vec<f64> = log_sigmas.iter().map(|l| l.exp()).collect();
        if sigmas.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(Error::Proposal("sigma out of range".into()));
        }
        let mut alpha = vec![0.0; k * d];
        let mut beta = vec![0.0; k * d];
        let mut log_z = vec![0.0; k * d];
        let mut dlz_dmu = vec![0.0; k * d];
        let mut dlz_dls = vec![0.0; k * d];
        let mut log_const = log_weights.clone();
        for c in 0..k {
            for i in 0..d {
                let j = c * d + i;
                let (mu, s) = (means[j], sigmas[j]);
                let a = (domain.lower()[i] - mu) / s;
                let b = (domain.upper()[i] - mu) / s;
                let lz = normal::log_diff_cdf(a, b);
                if !lz.is_finite() {
                    return Err(Error::Proposal(format!(
                        "component {c} has no mass in dimension {i}"
                    )));
                }
                // phi(t)/Z and t*phi(t)/Z, zero at infinite bounds
                let ratio = |t: f64| if t.is_finite() { (normal::log_pdf(t) - lz).exp() } else { 0.0 };
                let (ra, rb) = (ratio(a), ratio(b));
                let ta = if a.is_finite() { a * ra } else { 0.0 };
                let tb = if b.is_finite() { b * rb } else { 0.0 };
                alpha[j] = a;
                beta[j] = b;
                log_z[j] = lz;
                dlz_dmu[j] = (ra - rb) / s;
                dlz_dls[j] = ta - tb;
                log_const[c] -= log_sigmas[j] + LN_SQRT_2PI + lz;
            }
        }

        Ok(GmmProposal {
            k,
            d,
            means,
            log_sigmas,
            weight_logits,
            domain,
            inv_sigmas: sigmas.iter().map(|s| 1.0 / s).collect(),
            sigmas,
            weights: log_weights.iter().map(|l| l.exp()).collect(),
            cum_weights,
            alpha,
            beta,
            log_z,
            log_const,
            dlz_dmu,
            dlz_dls,
        })
    }

    /// Builds a mixture from means, standard deviations and (unnormalized,
    /// positive) weights.
    pub fn from_moments(
        means: Vec<f64>,
        sigmas: Vec<f64>,
        weights: Vec<f64>,
        domain: Domain,
    ) -> Result<Self> {
        if sigmas.iter().any(|s| !(*s > 0.0)) || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Proposal("sigmas and weights must be positive".into()));
        }
        GmmProposal::new(
            means,
            sigmas.iter().map(|s| s.ln()).collect(),
            weights.iter().map(|w| w.ln()).collect(),
            domain,
        )
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn mean(&self, c: usize) -> &[f64] {
        &self.means[c * self.d..(c + 1) * self.d]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn log_sigmas(&self) -> &[f64] {
        &self.log_sigmas
    }

    pub fn weight_logits(&self) -> &[f64] {
        &self.weight_logits
    }

    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    /// Per-component, per-dimension truncation masses `ln Z_ki`.
    pub fn log_masses(&self) -> &[f64] {
        &self.log_z
    }

    /// Parameters as one flat vector: means, then log-sigmas, then logits.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_len());
        v.extend_from_slice(&self.means);
        v.extend_from_slice(&self.log_sigmas);
        v.extend_from_slice(&self.weight_logits);
        v
    }

    pub fn param_len(&self) -> usize {
        2 * self.k * self.d + self.k
    }

    /// Same shape and domain, new flat parameters.
    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let kd = self.k * self.d;
        if p.len() != self.param_len() {
            return Err(Error::Proposal("parameter vector has the wrong length".into()));
        }
        GmmProposal::new(
            p[..kd].to_vec(),
            p[kd..2 * kd].to_vec(),
            p[2 * kd..].to_vec(),
            self.domain.clone(),
        )
    }

    /// Writes `log w_k + log N_k(x)` for every component into `terms` and
    /// returns their log-sum-exp. Assumes `x` is in the domain.
    fn component_terms(&self, x: &[f64], terms: &mut [f64]) -> f64 {
        let d = self.d;
        let mut best = f64::NEG_INFINITY;
        for c in 0..self.k {
            let mut q = 0.0;
            for i in 0..d {
                let j = c * d + i;
                let z = (x[i] - self.means[j]) * self.inv_sigmas[j];
                q += z * z;
            }
            let t = self.log_const[c] - 0.5 * q;
            terms[c] = t;
            if t > best {
                best = t;
            }
        }
        if best == f64::NEG_INFINITY {
            return best;
        }
        let s: f64 = terms.iter().map(|t| (t - best).exp()).sum();
        best + s.ln()
    }

    /// `log g(x)`; `-inf` outside the domain.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        if !self.domain.contains(x) {
            return f64::NEG_INFINITY;
        }
        let mut terms = vec![0.0; self.k];
        self.component_terms(x, &mut terms)
    }

    /// `log g` at every row.
    pub fn log_density_batch(&self, xs: &Points, exec: Execution) -> Vec<f64> {
        par::map_chunks(exec, xs.len(), |r| {
            let mut terms = vec![0.0; self.k];
            r.map(|i| {
                let x = xs.row(i);
                if self.domain.contains(x) {
                    self.component_terms(x, &mut terms)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
    }

    /// Like [`log_density_batch`](Self::log_density_batch), also returning the
    /// per-component terms row-major `n x k`.
    pub fn log_density_terms_batch(&self, xs: &Points, exec: Execution) -> (Vec<f64>, Vec<f64>) {
        let k = self.k;
        let parts = par::map_chunks(exec, xs.len(), |r| {
            let mut terms = vec![f64::NEG_INFINITY; r.len() * k];
            let lg: Vec<f64> = r
                .clone()
                .zip(terms.chunks_mut(k))
                .map(|(i, t)| {
                    let x = xs.row(i);
                    if self.domain.contains(x) {
                        self.component_terms(x, t)
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            (lg, terms)
        });
        let mut lg = Vec::with_capacity(xs.len());
        let mut terms = Vec::with_capacity(xs.len() * k);
        for (l, t) in parts {
            lg.extend(l);
            terms.extend(t);
        }
        (lg, terms)
    }

    /// Adds `coef * grad_theta log g(x)` into `acc` (flat parameter layout)
    /// and returns `log g(x)`. `terms` is scratch of length `k`.
    pub fn accumulate_param_grad(&self, x: &[f64], coef: f64, terms: &mut [f64], acc: &mut [f64]) -> f64 {
        let lg = self.component_terms(x, terms);
        if lg.is_finite() && coef != 0.0 {
            self.accumulate_from_terms(x, coef, terms, lg, acc);
        }
        lg
    }

    /// The accumulation step of [`accumulate_param_grad`](Self::accumulate_param_grad)
    /// with `terms` and `lg` already computed by [`log_density_terms_batch`](Self::log_density_terms_batch).
    pub fn accumulate_from_terms(&self, x: &[f64], coef: f64, terms: &[f64], lg: f64, acc: &mut [f64]) {
        let (d, kd) = (self.d, self.k * self.d);
        for c in 0..self.k {
            let resp = (terms[c] - lg).exp();
            acc[2 * kd + c] += coef * (resp - self.weights[c]);
            if resp == 0.0 {
                continue;
            }
            let rc = coef * resp;
            for i in 0..d {
                let j = c * d + i;
                let inv = self.inv_sigmas[j];
                let z = (x[i] - self.means[j]) * inv;
                acc[j] += rc * (z * inv - self.dlz_dmu[j]);
                acc[kd + j] += rc * (z * z - 1.0 - self.dlz_dls[j]);
            }
        }
    }

    /// Analytic gradient of `log g(x)` including the truncation masses.
    pub fn param_grad(&self, x: &[f64]) -> ParamGrad {
        let kd = self.k * self.d;
        let mut acc = vec![0.0; self.param_len()];
        let mut terms = vec![0.0; self.k];
        self.accumulate_param_grad(x, 1.0, &mut terms, &mut acc);
        ParamGrad {
            means: acc[..kd].to_vec(),
            log_sigmas: acc[kd..2 * kd].to_vec(),
            weight_logits: acc[2 * kd..].to_vec(),
        }
    }

    /// Draws `m` points: a component by weight, then each coordinate by
    /// inverse-CDF from its truncated normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Draws {
        let d = self.d;
        let mut points = Points::with_capacity(d, m);
        let mut degenerate = 0;
        let mut x = vec![0.0; d];
        for _ in 0..m {
            let u: f64 = rng.random::<f64>() * self.cum_weights[self.k - 1];
            let c = self.cum_weights.partition_point(|&cw| cw <= u).min(self.k - 1);
            let mut flagged = false;
            for i in 0..d {
                let j = c * d + i;
                let draw = normal::sample_truncated(self.alpha[j], self.beta[j], self.log_z[j], open_unit(rng));
                flagged |= draw.degenerate;
                let (lo, hi) = (self.domain.lower()[i], self.domain.upper()[i]);
                let mut v = self.means[j] + self.sigmas[j] * draw.z;
                if v <= lo {
                    v = lo.next_up();
                }
                if v >= hi {
                    v = hi.next_down();
                }
                x[i] = v;
            }
            degenerate += flagged as usize;
            points.push(&x);
        }
        Draws { points, degenerate }
    }
}

/// Uniform on the open interval (0, 1).
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GmmRepr {
    means: Vec<Vec<f64>>,
    sigmas: Vec<Vec<f64>>,
    weights: Vec<f64>,
    domain: Domain,
}

impl Serialize for GmmProposal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = |v: &[f64]| v.chunks(self.d).map(|c| c.to_vec()).collect();
        GmmRepr {
            means: rows(&self.means),
            sigmas: rows(&self.sigmas),
            weights: self.weights(),
            domain: self.domain.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GmmProposal {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = GmmRepr::deserialize(de)?;
        GmmProposal::from_moments(
            r.means.concat(),
            r.sigmas.concat(),
            r.weights,
            r.domain,
        )
        .map_err(serde::de::Error::custom)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unbounded_1d(means: &[f64], sigmas: &[f64], weights: &[f64]) -> GmmProposal {
        GmmProposal::from_moments(means.to_vec(), sigmas.to_vec(), weights.to_vec(), Domain::unbounded(1)).unwrap()
    }

    fn random_mixture(rng: &mut ChaCha8Rng, k: usize, domain: Domain) -> GmmProposal {
        let d = domain.dims();
        let means = (0..k * d).map(|_| rng.random_range(-0.2..1.2)).collect();
        let log_sigmas = (0..k * d).map(|_| rng.random_range(-2.5..0.5)).collect();
        let logits = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        GmmProposal::new(means, log_sigmas, logits, domain).unwrap()
    }

    /// Straight summation in linear space with `Phi` differences.
    fn naive_density(g: &GmmProposal, x: &[f64]) -> f64 {
        let (k, d) = (g.components(), g.dims());
        let w = g.weights();
        let mut total = 0.0;
        for c in 0..k {
            let mut prod = w[c];
            for i in 0..d {
                let (mu, s) = (g.means()[c * d + i], g.sigmas()[c * d + i]);
                let (a, b) = (g.domain().lower()[i], g.domain().upper()[i]);
                let z = normal::cdf((b - mu) / s) - normal::cdf((a - mu) / s);
                let u = (x[i] - mu) / s;
                prod *= (-0.5 * u * u).exp() / ((2.0 * std::f64::consts::PI).sqrt() * s * z);
            }
            total += prod;
        }
        total.ln()
    }

    #[test]
    fn standard_normal_component() {
        let g = unbounded_1d(&[0.0], &[1.0], &[1.0]);
        assert!((g.log_density(&[0.0]) + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_at_the_midpoint() {
        let g = unbounded_1d(&[-1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]);
        assert!((g.log_density(&[0.0]) + 1.418_938_533_204_672_7).abs() < 1e-14);
    }

    #[test]
    fn matches_naive_summation_on_the_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_mixture(&mut rng, 3, Domain::unit_cube(2));
        for _ in 0..20 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let (got, want) = (g.log_density(&x), naive_density(&g, &x));
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
        }
        assert_eq!(g.log_density(&[1.5, 0.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn batch_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_mixture(&mut rng, 4, Domain::unit_cube(2));
        let xs = g.sample(&mut rng, 2000).points;
        let batch = g.log_density_batch(&xs, Execution::Parallel);
        for (i, v) in batch.iter().enumerate() {
            assert_eq!(*v, g.log_density(xs.row(i)));
        }
    }

    #[test]
    fn wide_component_on_unit_interval_is_centered() {
        let g = GmmProposal::from_moments(vec![0.5], vec![100.0], vec![1.0], Domain::unit_cube(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let xs = g.sample(&mut rng, n).points;
        assert!(xs.rows().all(|x| x[0] > 0.0 && x[0] < 1.0));
        let mean = xs.as_flat().iter().sum::<f64>() / n as f64;
        let se = (1.0f64 / 12.0).sqrt() / (n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn half_normal_mean() {
        let dom = Domain::new(vec![0.0], vec![f64::INFINITY]).unwrap();
        let g = GmmProposal::from_moments(vec![0.0], vec![1.0], vec![1.0], dom).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let xs = g.sample(&mut rng, n).points;
        let mean = xs.as_flat().iter().sum::<f64>() / n as f64;
        let want = (2.0 / std::f64::consts::PI).sqrt();
        let se = (1.0 - 2.0 / std::f64::consts::PI).sqrt() / (n as f64).sqrt();
        assert!((mean - want).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn far_away_component_still_samples_inside() {
        let dom = Domain::unit_cube(1);
        let g = GmmProposal::from_moments(vec![60.0], vec![1.0], vec![1.0], dom).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = g.sample(&mut rng, 100);
        assert_eq!(draws.degenerate, 100);
        assert!(draws.points.rows().all(|x| x[0] > 0.0 && x[0] < 1.0));
        // Mass piles up against the upper bound.
        assert!(draws.points.rows().all(|x| x[0] > 0.8));
        assert!(g.log_density(&[0.99]).is_finite());
    }

    /// Composite Simpson on [a, b] with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for dom in [
            Domain::unit_cube(1),
            Domain::new(vec![-1.0], vec![0.5]).unwrap(),
            Domain::new(vec![0.0], vec![f64::INFINITY]).unwrap(),
        ] {
            let g = random_mixture(&mut rng, 3, dom.clone());
            let hi = if dom.upper()[0].is_finite() { dom.upper()[0] } else { 40.0 };
            let lo = dom.lower()[0];
            let mass = simpson(|x| g.log_density(&[x.clamp(lo, hi)]).exp(), lo, hi, 200_000);
            assert!((mass - 1.0).abs() < 1e-3, "mass {mass} on {dom:?}");
        }
    }

    #[test]
    fn standard_normal_score() {
        let g = unbounded_1d(&[0.0], &[1.0], &[1.0]);
        let gr = g.param_grad(&[2.0]);
        assert!((gr.means[0] - 2.0).abs() < 1e-15);
        assert!((gr.log_sigmas[0] - 3.0).abs() < 1e-15);
        assert_eq!(gr.weight_logits, vec![0.0]);
    }

    fn finite_diff(g: &GmmProposal, x: &[f64], h: f64) -> Vec<f64> {
        let p = g.params();
        (0..p.len())
            .map(|j| {
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[j] += h;
                pm[j] -= h;
                let fp = g.with_params(&pp).unwrap().log_density(x);
                let fm = g.with_params(&pm).unwrap().log_density(x);
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn param_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..10 {
            let g = random_mixture(&mut rng, 3, Domain::unit_cube(1));
            // include points hugging the bounds
            let x = match trial {
                0 => [1e-6],
                1 => [1.0 - 1e-6],
                _ => [rng.random::<f64>()],
            };
            let analytic = g.param_grad(&x);
            let sum: f64 = analytic.weight_logits.iter().sum();
            assert!(sum.abs() < 1e-12);
            for (a, f) in analytic.flat().iter().zip(finite_diff(&g, &x, 1e-6)) {
                assert!((a - f).abs() <= 1e-5 * f.abs().max(1.0), "analytic {a} vs fd {f}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let dom = Domain::new(vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, 3.0]).unwrap();
        let g = GmmProposal::from_moments(vec![1.0, 2.0, 0.5, -1.0], vec![0.5, 1.0, 2.0, 0.25], vec![0.25, 0.75], dom).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("\"weights\":[") && s.contains("\"sigmas\":[[0.5,1.0],[2.0,0.25]]"));
        let back: GmmProposal = serde_json::from_str(&s).unwrap();
        for x in [[0.5, 1.0], [3.0, -2.0]] {
            assert!((back.log_density(&x) - g.log_density(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let dom = Domain::unbounded(1);
        assert!(GmmProposal::new(vec![f64::NAN], vec![0.0], vec![0.0], dom.clone()).is_err());
        assert!(GmmProposal::new(vec![0.0, 1.0], vec![0.0], vec![0.0], dom.clone()).is_err());
        assert!(GmmProposal::new(vec![], vec![], vec![], dom).is_err());
    }
}
