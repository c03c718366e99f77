//! Gradient refinement of the proposal against cached target values.
//!
//! The loss is `<softmax(a), a>` with `a_i = log f(x_i) - log g(x_i)`, a
//! smooth stand-in for the largest log-ratio. Only cached values of `log f`
//! are used. Points with zero target density carry no information about the
//! bound and are left out.

use serde::{Deserialize, Serialize};

use crate::optim::AdaBelief;
use crate::par::{self, Execution};
use crate::points::Points;
use crate::proposal::GmmProposal;

/// Ratios more than this many nats below the largest get zero loss weight.
const NEGLIGIBLE: f64 = 70.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    pub steps: usize,
    pub checkpoints: Vec<usize>,
    pub lr: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            steps: 800,
            checkpoints: vec![100, 200, 400, 800],
            lr: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    pub proposal: GmmProposal,
    /// Max log-ratio of `proposal` over the cache, recomputed on return.
    pub achieved_log_ratio_max: f64,
    /// Max log-ratio of the starting proposal.
    pub initial_log_ratio_max: f64,
    pub improved: bool,
    /// Step count of the chosen checkpoint; `None` when reverted.
    pub checkpoint_chosen: Option<usize>,
}

/// `log f(x_i) - log g(x_i)` for every cached point with finite `log f`.
pub fn log_ratios(g: &GmmProposal, xs: &Points, logf: &[f64], exec: Execution) -> Vec<f64> {
    assert_eq!(xs.len(), logf.len());
    let lg = g.log_density_batch(xs, exec);
    logf.iter()
        .zip(lg)
        .filter(|(lf, _)| lf.is_finite())
        .map(|(lf, lg)| lf - lg)
        .collect()
}

/// Largest log-ratio over the cache; `-inf` when no point has positive density.
pub fn max_log_ratio(g: &GmmProposal, xs: &Points, logf: &[f64], exec: Execution) -> f64 {
    log_ratios(g, xs, logf, exec).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `<softmax(a), a>`; `+inf` if `g` gives zero density to a cached point of
/// positive target density.
pub fn ratio_loss(g: &GmmProposal, xs: &Points, logf: &[f64], exec: Execution) -> f64 {
    let a = log_ratios(g, xs, logf, exec);
    if a.is_empty() {
        return f64::NEG_INFINITY;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    crate::optim::softmax_weighted_max(&a)
}

/// The loss and its gradient in the flat parameter layout of
/// [`GmmProposal::params`]. `None` when the loss is not finite.
///
/// With `p = softmax(a)` and `l = <p, a>`, `dl/da_i = p_i (1 + a_i - l)` and
/// `da_i/dtheta = -dlog g(x_i)/dtheta`.
pub fn ratio_loss_grad(g: &GmmProposal, xs: &Points, logf: &[f64], exec: Execution) -> Option<(f64, Vec<f64>)> {
    let (lg, terms) = g.log_density_terms_batch(xs, exec);
    let k = g.components();
    let mut top = f64::NEG_INFINITY;
    for (lf, lg) in logf.iter().zip(&lg) {
        if lf.is_finite() {
            let a = lf - lg;
            if !a.is_finite() {
                return None;
            }
            top = top.max(a);
        }
    }
    if top == f64::NEG_INFINITY {
        return None;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (lf, lg) in logf.iter().zip(&lg) {
        if lf.is_finite() {
            let s = lf - lg - top;
            let e = s.exp();
            num += e * s;
            den += e;
        }
    }
    let loss = top + num / den;

    let len = g.param_len();
    let grad = par::sum_chunks(exec, xs.len(), len, |r, acc| {
        for i in r {
            if !logf[i].is_finite() {
                continue;
            }
            let a = logf[i] - lg[i];
            if a - top < -NEGLIGIBLE {
                continue;
            }
            let p = (a - top).exp() / den;
            g.accumulate_from_terms(xs.row(i), -p * (1.0 + a - loss), &terms[i * k..(i + 1) * k], lg[i], acc);
        }
    });
    Some((loss, grad))
}

/// Runs AdaBelief on [`ratio_loss`] and keeps the checkpoint with the lowest
/// exact max log-ratio. The result is marked improved when that value does
/// not exceed `c_hat_log`; otherwise `g0` is returned unchanged.
pub fn refine(g0: &GmmProposal, xs: &Points, logf: &[f64], c_hat_log: f64, opts: &RefineOptions, exec: Execution) -> RefineResult {
    let initial = max_log_ratio(g0, xs, logf, exec);
    let revert = |g0: &GmmProposal| RefineResult {
        proposal: g0.clone(),
        achieved_log_ratio_max: initial,
        initial_log_ratio_max: initial,
        improved: false,
        checkpoint_chosen: None,
    };
    if ratio_loss_grad(g0, xs, logf, exec).is_none() {
        return revert(g0);
    }

    let mut params = g0.params();
    let mut current = g0.clone();
    let mut opt = AdaBelief::new(params.len(), opts.lr);
    let mut best: Option<(f64, GmmProposal, usize)> = None;
    let mut consider = |g: &GmmProposal, step: usize| {
        let m = max_log_ratio(g, xs, logf, exec);
        if m.is_finite() && best.as_ref().is_none_or(|b| m < b.0) {
            best = Some((m, g.clone(), step));
        }
    };

    let mut step = 0;
    while step < opts.steps {
        let Some((_, grad)) = ratio_loss_grad(&current, xs, logf, exec) else {
            break;
        };
        opt.step(&mut params, &grad);
        match g0.with_params(&params) {
            Ok(g) => current = g,
            Err(_) => break,
        }
        step += 1;
        if opts.checkpoints.contains(&step) {
            consider(&current, step);
        }
    }
    if step < opts.steps && !opts.checkpoints.contains(&step) && step > 0 {
        // Stopped early; the last valid iterate is the final checkpoint.
        consider(&current, step);
    }

    match best {
        Some((m, g, s)) if m <= c_hat_log => RefineResult {
            proposal: g,
            achieved_log_ratio_max: m,
            initial_log_ratio_max: initial,
            improved: true,
            checkpoint_chosen: Some(s),
        },
        _ => revert(g0),
    }
}
