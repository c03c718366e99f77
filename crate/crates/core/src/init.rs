//! First proposal from a small number of target evaluations.
//!
//! A compact domain gets one component at its center covering the range with
//! three standard deviations. Otherwise a point of nonzero density is found,
//! `d + 4` starts around it are pushed uphill, and the resulting modes decide
//! between a single component shaped by the log-density level set five nats
//! below the mode, and an isotropic mixture over the distinct modes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::optim::accel_minimize_tol;
use crate::par::{self, Execution};
use crate::points::Points;
use crate::proposal::{sigma_floor, GmmProposal};
use crate::target::LogTarget;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitOptions {
    pub mode_steps: usize,
    pub mode_step_size: f64,
    pub spread_steps: usize,
    pub spread_step_size: f64,
    /// Spread points sit this many nats below the mode.
    pub spread_gap: f64,
    /// Spread points further than this from the level are dropped.
    pub spread_tolerance: f64,
    /// Unimodality threshold and k-farthest stopping distance.
    pub eps: f64,
    /// Early stop for the accelerated descent, relative step length.
    pub step_tol: f64,
    pub max_zero_draws: usize,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            mode_steps: 100,
            mode_step_size: 0.05,
            spread_steps: 100,
            spread_step_size: 0.05,
            spread_gap: 5.0,
            spread_tolerance: 1.0,
            eps: 1e-3,
            step_tol: 1e-9,
            max_zero_draws: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modal {
    CompactShortcut,
    Unimodal,
    Multimodal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub f_evals_used: u64,
    pub modal: Modal,
    pub modes_found: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: usize,
}

/// Builds the first proposal for `t`.
///
/// Every target evaluation made here is counted in the report, including the
/// draws spent searching for nonzero density.
pub fn initialize<R: Rng + ?Sized>(
    t: &LogTarget,
    opts: &InitOptions,
    exec: Execution,
    rng: &mut R,
) -> Result<(GmmProposal, InitReport)> {
    let start = t.evals();
    let dm = t.domain();
    let d = dm.dims();

    if dm.is_compact() {
        let center = dm.center()?;
        let sigmas = dm.range()?.iter().map(|r| r / 3.0).collect();
        let g = GmmProposal::from_moments(center.clone(), sigmas, vec![1.0], dm.clone())?;
        let report = InitReport {
            f_evals_used: t.evals() - start,
            modal: Modal::CompactShortcut,
            modes_found: vec![center],
            k: 1,
        };
        return Ok((g, report));
    }

    let x = find_support(t, opts, rng)?;
    let mut starts = vec![x.clone()];
    for _ in 0..d + 3 {
        starts.push(perturb(t, &x, rng));
    }

    let found: Vec<Option<(f64, Vec<f64>)>> = par::map_indexed(exec, starts.len(), |i| {
        let out = accel_minimize_tol(
            |y| neg_log_f(t, y),
            &starts[i],
            opts.mode_steps,
            opts.mode_step_size,
            opts.step_tol,
            Some(dm),
        );
        (!out.failed).then(|| (-out.value, out.x))
    });
    let mut modes: Vec<(f64, Vec<f64>)> = found.into_iter().flatten().collect();
    if modes.is_empty() {
        // Every descent failed; the support point itself is the only mode.
        modes.push((t.log_density(&x)?, x.clone()));
    }
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Stationary points well below the best mode (saddles, a start sitting
    // between two basins) are dropped.
    let floor_log = modes[0].0 - opts.spread_gap;
    modes.retain(|m| m.0 >= floor_log);
    let mode_points: Vec<Vec<f64>> = modes.iter().map(|m| m.1.clone()).collect();

    let spread = max_variance(&mode_points);
    if spread < opts.eps {
        let best = &modes[0];
        let cov = spread_cov_at(t, &x, &best.1, best.0, opts, exec, rng)?;
        let floor = sigma_floor(dm);
        let sigmas = cov.iter().zip(&floor).map(|(v, f)| v.sqrt().max(*f)).collect();
        let g = GmmProposal::from_moments(best.1.clone(), sigmas, vec![1.0], dm.clone())?;
        let report = InitReport {
            f_evals_used: t.evals() - start,
            modal: Modal::Unimodal,
            modes_found: vec![best.1.clone()],
            k: 1,
        };
        return Ok((g, report));
    }

    let picked = k_farthest_select(&mode_points, opts.eps);
    let k = picked.len();
    let max_dist = max_pairwise_distance(&picked);
    let sigma = (max_dist / k as f64).sqrt();
    let floor = sigma_floor(dm);
    let mut means = Vec::with_capacity(k * d);
    let mut sigmas = Vec::with_capacity(k * d);
    for p in &picked {
        means.extend_from_slice(p);
        sigmas.extend(floor.iter().map(|f| sigma.max(*f)));
    }
    let g = GmmProposal::from_moments(means, sigmas, vec![1.0; k], dm.clone())?;
    let report = InitReport {
        f_evals_used: t.evals() - start,
        modal: Modal::Multimodal,
        modes_found: picked,
        k,
    };
    Ok((g, report))
}

/// First point with nonzero density: the origin, then standard normal draws,
/// each moved inside the domain.
fn find_support<R: Rng + ?Sized>(t: &LogTarget, opts: &InitOptions, rng: &mut R) -> Result<Vec<f64>> {
    let d = t.dims();
    let mut x = vec![0.0; d];
    for _ in 0..opts.max_zero_draws {
        t.domain().clamp_interior(&mut x);
        if t.log_density(&x)? > f64::NEG_INFINITY {
            return Ok(x);
        }
        x = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    }
    Err(Error::InitFailed {
        draws: opts.max_zero_draws,
    })
}

fn perturb<R: Rng + ?Sized>(t: &LogTarget, x: &[f64], rng: &mut R) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect();
    t.domain().clamp_interior(&mut y);
    y
}

fn neg_log_f(t: &LogTarget, y: &[f64]) -> Option<(f64, Vec<f64>)> {
    let (v, g) = t.value_and_grad(y).ok()?;
    v.is_finite().then(|| (-v, g.iter().map(|c| -c).collect()))
}

/// Diagonal covariance of points placed on the level set `spread_gap` nats
/// below `log f(mode)`.
pub fn estimate_spread_cov<R: Rng + ?Sized>(
    t: &LogTarget,
    mode: &[f64],
    opts: &InitOptions,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let top = t.log_density(mode)?;
    if !top.is_finite() {
        return Err(Error::Config("log f at the mode must be finite".into()));
    }
    spread_cov_at(t, mode, mode, top, opts, Execution::Sequential, rng)
}

/// Level-set points are searched from perturbations of `origin`. The result
/// is the second moment about the mode, rather than the sample covariance, so
/// that a mode on the boundary still gets a spread matching its level set,
/// and points that reach the level set of a mode the multi-start search
/// missed widen the estimate.
fn spread_cov_at<R: Rng + ?Sized>(
    t: &LogTarget,
    origin: &[f64],
    mode: &[f64],
    top: f64,
    opts: &InitOptions,
    exec: Execution,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = mode.len();
    let level = top - opts.spread_gap;
    let starts: Vec<Vec<f64>> = (0..2 * d + 10).map(|_| perturb(t, origin, rng)).collect();
    let objective = |y: &[f64]| {
        let (v, g) = t.value_and_grad(y).ok()?;
        if !v.is_finite() {
            return None;
        }
        let r = v - level;
        Some((r * r, g.iter().map(|c| 2.0 * r * c).collect()))
    };
    let ends: Vec<Option<Vec<f64>>> = par::map_indexed(exec, starts.len(), |i| {
        let out = accel_minimize_tol(
            objective,
            &starts[i],
            opts.spread_steps,
            opts.spread_step_size,
            opts.step_tol,
            Some(t.domain()),
        );
        (!out.failed && out.value.sqrt() <= opts.spread_tolerance).then_some(out.x)
    });
    let ends: Vec<Vec<f64>> = ends.into_iter().flatten().collect();
    if ends.len() < d + 2 {
        return Ok(vec![1.0; d]);
    }
    let floor = sigma_floor(t.domain());
    Ok((0..d)
        .map(|i| {
            let m2 = ends.iter().map(|p| (p[i] - mode[i]).powi(2)).sum::<f64>() / ends.len() as f64;
            m2.max(floor[i] * floor[i])
        })
        .collect())
}

/// Greedy max-min selection: the farthest pair first, then repeatedly the
/// point farthest from the selected set, until that distance drops below
/// `eps`. Identical points yield a single selection.
pub fn k_farthest_select(points: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    match points.len() {
        0 => return Vec::new(),
        1 => return vec![points[0].clone()],
        _ => {}
    }
    let n = points.len();
    let (mut a, mut b, mut best) = (0, 1, -1.0);
    for i in 0..n {
        for j in i + 1..n {
            let dij = dist(&points[i], &points[j]);
            if dij > best {
                (a, b, best) = (i, j, dij);
            }
        }
    }
    if best < eps {
        return vec![points[a].clone()];
    }
    let mut chosen = vec![a, b];
    let mut gap: Vec<f64> = (0..n)
        .map(|i| dist(&points[i], &points[a]).min(dist(&points[i], &points[b])))
        .collect();
    loop {
        let (next, far) = gap
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, g)| if *g > acc.1 { (i, *g) } else { acc });
        if far < eps {
            break;
        }
        chosen.push(next);
        for i in 0..n {
            gap[i] = gap[i].min(dist(&points[i], &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn max_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            m = m.max(dist(&points[i], &points[j]));
        }
    }
    m
}

/// Largest per-dimension sample variance.
fn max_variance(points: &[Vec<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let p = Points::from_rows(points[0].len(), points);
    (0..p.dims())
        .map(|i| {
            let c = p.column(i);
            let m = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (c.len() - 1) as f64
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Scalar;
    use crate::target::{Domain, Generic, ScalarFn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct StdNormal;
    impl ScalarFn for StdNormal {
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            x.iter().fold(S::from_f64(0.0), |acc, v| acc - v.clone() * v.clone() * 0.5)
        }
    }

    struct TwoBumps;
    impl ScalarFn for TwoBumps {
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            let a = (x[0].clone() - 4.0).powi(2) * -0.5;
            let b = (x[0].clone() + 4.0).powi(2) * -0.5;
            a.ln_add_exp(&b)
        }
    }

    struct Laplace(f64);
    impl ScalarFn for Laplace {
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            -x[0].abs() / self.0
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn compact_domain_shortcut() {
        let t = LogTarget::new(Generic(StdNormal), Domain::unit_cube(2));
        let (g, rep) = initialize(&t, &InitOptions::default(), Execution::Sequential, &mut rng()).unwrap();
        assert_eq!(rep.modal, Modal::CompactShortcut);
        assert_eq!(rep.f_evals_used, 0);
        assert_eq!(t.evals(), 0);
        assert_eq!(g.components(), 1);
        assert_eq!(g.means(), &[0.5, 0.5]);
        for s in g.sigmas() {
            assert!((s - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(g.weights(), vec![1.0]);
    }

    #[test]
    fn standard_normal_is_unimodal() {
        let t = LogTarget::new(Generic(StdNormal), Domain::unbounded(1));
        let (g, rep) = initialize(&t, &InitOptions::default(), Execution::Sequential, &mut rng()).unwrap();
        assert_eq!(rep.modal, Modal::Unimodal);
        assert_eq!(rep.f_evals_used, t.evals());
        assert!(g.means()[0].abs() < 0.2);
        assert!((1.0..=6.0).contains(&g.sigmas()[0]), "sigma {}", g.sigmas()[0]);
        assert!(g.log_density(&rep.modes_found[0]).is_finite());
    }

    #[test]
    fn two_bumps_are_multimodal() {
        let t = LogTarget::new(Generic(TwoBumps), Domain::unbounded(1));
        let mut hits = 0;
        for seed in 0..5 {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let (g, rep) = initialize(&t, &InitOptions::default(), Execution::Sequential, &mut r).unwrap();
            if rep.modal != Modal::Multimodal {
                continue;
            }
            // Structural: isotropic variance max-distance / K and uniform weights.
            let k = g.components();
            let sig = (max_pairwise_distance(&rep.modes_found) / k as f64).sqrt();
            assert!(g.sigmas().iter().all(|s| (s - sig).abs() < 1e-12));
            assert!(g.weights().iter().all(|w| (w - 1.0 / k as f64).abs() < 1e-12));
            let mut m = g.means().to_vec();
            m.sort_by(f64::total_cmp);
            if k == 2 && (m[0] + 4.0).abs() < 0.5 && (m[1] - 4.0).abs() < 0.5 {
                hits += 1;
            }
        }
        assert!(hits >= 1, "no seed found both basins");
    }

    #[test]
    fn two_bumps_fixed_seed() {
        let t = LogTarget::new(Generic(TwoBumps), Domain::unbounded(1));
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let (g, rep) = initialize(&t, &InitOptions::default(), Execution::Sequential, &mut r).unwrap();
        assert_eq!(rep.modal, Modal::Multimodal);
        assert_eq!(g.components(), 2);
        let mut m = g.means().to_vec();
        m.sort_by(f64::total_cmp);
        assert!((m[0] + 4.0).abs() < 0.5 && (m[1] - 4.0).abs() < 0.5, "{m:?}");
    }

    #[test]
    fn spread_of_standard_normal() {
        let t = LogTarget::new(Generic(StdNormal), Domain::unbounded(1));
        let cov = estimate_spread_cov(&t, &[0.0], &InitOptions::default(), &mut rng()).unwrap();
        assert!((5.0..=20.0).contains(&cov[0]), "cov {}", cov[0]);
    }

    #[test]
    fn spread_of_laplace() {
        let s = 0.7;
        let t = LogTarget::new(Generic(Laplace(s)), Domain::unbounded(1));
        let cov = estimate_spread_cov(&t, &[0.0], &InitOptions::default(), &mut rng()).unwrap();
        let r = cov[0].sqrt();
        assert!((r - 5.0 * s).abs() < 0.1 * 5.0 * s, "radius {r}");
    }

    #[test]
    fn spread_isotropic_in_two_dims() {
        let t = LogTarget::new(Generic(StdNormal), Domain::unbounded(2));
        let cov = estimate_spread_cov(&t, &[0.0, 0.0], &InitOptions::default(), &mut rng()).unwrap();
        let ratio = cov[0] / cov[1];
        assert!((0.5..=2.0).contains(&ratio), "{cov:?}");
    }

    #[test]
    fn k_farthest_examples() {
        let p = vec![vec![0.0], vec![0.001], vec![10.0]];
        let s = k_farthest_select(&p, 0.01);
        assert_eq!(s.len(), 2);
        assert!(s.contains(&vec![0.0]) && s.contains(&vec![10.0]));

        let same = vec![vec![1.0, 2.0]; 4];
        assert_eq!(k_farthest_select(&same, 0.01), vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn k_farthest_matches_brute_force() {
        let mut r = rng();
        let centers = [vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 4.0]];
        let mut pts = Vec::new();
        for c in &centers {
            for _ in 0..5 {
                pts.push(c.iter().map(|v| v + 1e-4 * (r.random::<f64>() - 0.5)).collect::<Vec<_>>());
            }
        }
        let s = k_farthest_select(&pts, 0.01);
        assert_eq!(s.len(), 3);
        // Brute force: each selected point is near a distinct center.
        let mut seen = [false; 3];
        for p in &s {
            let c = (0..3).find(|&c| dist(p, &centers[c]) < 1e-3).unwrap();
            assert!(!seen[c]);
            seen[c] = true;
        }
    }
}
