//! First-order optimizers and the softmax-weighted maximum.

use crate::target::Domain;

/// AdaBelief: Adam with the second moment replaced by the variance of the
/// gradient around its running mean.
#[derive(Clone, Debug)]
pub struct AdaBelief {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    s: Vec<f64>,
    skipped: u64,
}

impl AdaBelief {
    pub fn new(n: usize, lr: f64) -> Self {
        AdaBelief {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-16,
            t: 0,
            m: vec![0.0; n],
            s: vec![0.0; n],
            skipped: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn belief(&self) -> &[f64] {
        &self.s
    }

    /// One descent step on `params`. A non-finite gradient skips the step and
    /// returns `false`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> bool {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        if grad.iter().any(|g| !g.is_finite()) {
            self.skipped += 1;
            return false;
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            let dev = g - self.m[i];
            self.s[i] = self.beta2 * self.s[i] + (1.0 - self.beta2) * dev * dev + self.eps;
            let m_hat = self.m[i] / bc1;
            let s_hat = self.s[i] / bc2;
            params[i] -= self.lr * m_hat / (s_hat.sqrt() + self.eps);
        }
        true
    }
}

/// Result of [`accel_minimize`].
#[derive(Clone, Debug, PartialEq)]
pub struct AccelOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// No finite objective value was ever observed.
    pub failed: bool,
    pub evals: usize,
}

/// FISTA-style accelerated gradient descent.
///
/// `objective` returns the value and gradient, or `None`/non-finite values
/// where it is undefined. Momentum follows `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`.
/// An iterate that is worse than the best point so far, or non-finite,
/// restarts from the best point with half the step and no momentum.
/// Iterates are kept inside `domain` when one is given. Returns the best
/// point evaluated.
pub fn accel_minimize<F>(objective: F, x0: &[f64], steps: usize, step_size: f64, domain: Option<&Domain>) -> AccelOutcome
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    accel_minimize_tol(objective, x0, steps, step_size, 0.0, domain)
}

/// [`accel_minimize`] that also stops once a gradient step moves no
/// coordinate by more than `tol * (1 + max |y_i|)`.
pub fn accel_minimize_tol<F>(
    mut objective: F,
    x0: &[f64],
    steps: usize,
    step_size: f64,
    tol: f64,
    domain: Option<&Domain>,
) -> AccelOutcome
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let clamp = |x: &mut [f64]| {
        if let Some(dm) = domain {
            dm.clamp_interior(x);
        }
    };
    let mut y = x0.to_vec();
    clamp(&mut y);
    let mut x_prev = y.clone();
    let mut t = 1.0f64;
    let mut step = step_size;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evals = 0;

    for _ in 0..steps {
        evals += 1;
        let eval = objective(&y).filter(|(v, g)| v.is_finite() && g.iter().all(|c| c.is_finite()));
        let Some((value, grad)) = eval else {
            // Back off to the best point seen so far.
            step *= 0.5;
            t = 1.0;
            y = best.as_ref().map(|b| b.1.clone()).unwrap_or_else(|| x0.to_vec());
            clamp(&mut y);
            x_prev = y.clone();
            continue;
        };
        if let Some(b) = best.as_ref().filter(|b| value > b.0) {
            step *= 0.5;
            t = 1.0;
            y = b.1.clone();
            x_prev = y.clone();
            continue;
        }
        best = Some((value, y.clone()));

        let mut x: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - step * gi).collect();
        clamp(&mut x);
        let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if x.iter().zip(&y).all(|(a, b)| (a - b).abs() <= tol * scale) {
            break;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        y = x.iter().zip(&x_prev).map(|(xi, pi)| xi + beta * (xi - pi)).collect();
        clamp(&mut y);
        x_prev = x;
        t = t_next;
    }

    match best {
        Some((value, x)) => AccelOutcome {
            x,
            value,
            failed: false,
            evals,
        },
        None => AccelOutcome {
            x: x0.to_vec(),
            value: f64::NAN,
            failed: true,
            evals,
        },
    }
}

/// Shift-stabilized softmax.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "softmax of an empty vector");
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `<softmax(a), a>`, a smooth under-estimate of `max(a)` that never drops
/// below `mean(a)`.
pub fn softmax_weighted_max(a: &[f64]) -> f64 {
    assert!(!a.is_empty(), "softmax_weighted_max of an empty vector");
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for &x in a {
        let e = (x - m).exp();
        num += e * (x - m);
        den += e;
    }
    // Every (x - m) <= 0, so the sum cannot exceed m.
    m + num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut opt = AdaBelief::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        opt.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn nan_gradient_is_skipped() {
        let mut opt = AdaBelief::new(1, 0.1);
        let mut p = vec![1.0];
        assert!(!opt.step(&mut p, &[f64::NAN]));
        assert_eq!(p, vec![1.0]);
        assert_eq!(opt.skipped(), 1);
        assert_eq!(opt.steps(), 0);
    }

    /// Scalar AdaBelief recurrence, written out independently.
    fn reference_updates(c: f64, lr: f64, steps: usize) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-16);
        let (mut m, mut s) = (0.0f64, 0.0f64);
        (1..=steps)
            .map(|t| {
                m = b1 * m + (1.0 - b1) * c;
                s = b2 * s + (1.0 - b2) * (c - m).powi(2) + eps;
                let mh = m / (1.0 - b1.powi(t as i32));
                let sh = s / (1.0 - b2.powi(t as i32));
                -lr * mh / (sh.sqrt() + eps)
            })
            .collect()
    }

    #[test]
    fn constant_gradient_moves_against_its_sign() {
        let c = [2.5, -0.3];
        let mut opt = AdaBelief::new(2, 0.1);
        let mut p = vec![0.0, 0.0];
        let refs: Vec<Vec<f64>> = c.iter().map(|&ci| reference_updates(ci, 0.1, 300)).collect();
        for t in 0..300 {
            let before = p.clone();
            opt.step(&mut p, &c);
            for i in 0..2 {
                let du = p[i] - before[i];
                assert_eq!(du.signum(), -c[i].signum());
                assert!(du.abs() >= 0.1 * 0.99, "step {t}: |update| {} below lr", du.abs());
                assert!((du - refs[i][t]).abs() <= 1e-9 * refs[i][t].abs());
            }
        }
        assert!(opt.belief().iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn quadratic_converges() {
        let mut opt = AdaBelief::new(1, 0.1);
        let mut x = vec![3.0];
        for _ in 0..500 {
            let g = vec![2.0 * x[0]];
            opt.step(&mut x, &g);
        }
        assert!(x[0].abs() < 1e-2, "x = {}", x[0]);
    }

    #[test]
    fn accel_solves_a_shifted_quadratic() {
        let out = accel_minimize(|x| Some(((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)])), &[0.0], 100, 0.1, None);
        assert!(!out.failed);
        assert!((out.x[0] - 2.0).abs() < 1e-6, "x = {}", out.x[0]);
    }

    #[test]
    fn accel_tolerance_stops_early() {
        let mut calls = 0;
        let out = accel_minimize_tol(
            |x| {
                calls += 1;
                Some(((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)]))
            },
            &[0.0],
            1000,
            0.1,
            1e-10,
            None,
        );
        assert!((out.x[0] - 2.0).abs() < 1e-8);
        assert!(out.evals < 1000 && out.evals == calls);
    }

    #[test]
    fn accel_stationary_start() {
        let out = accel_minimize(|x| Some((x[0] * x[0], vec![2.0 * x[0]])), &[0.0], 20, 0.1, None);
        assert_eq!(out.x, vec![0.0]);
    }

    #[test]
    fn accel_all_non_finite_fails() {
        let out = accel_minimize(|_| None, &[1.5], 10, 0.1, None);
        assert!(out.failed);
        assert_eq!(out.x, vec![1.5]);
    }

    #[test]
    fn accel_clamps_to_the_boundary_mode() {
        // -log of e^{-x}/(1+x)^2 on (0, inf); decreasing towards 0.
        let dom = Domain::new(vec![0.0], vec![f64::INFINITY]).unwrap();
        let obj = |x: &[f64]| Some((x[0] + 2.0 * (1.0 + x[0]).ln(), vec![1.0 + 2.0 / (1.0 + x[0])]));
        let out = accel_minimize(obj, &[3.0], 100, 0.05, Some(&dom));
        assert!(out.x[0] > 0.0 && out.x[0] < 1e-6, "x = {}", out.x[0]);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[4.0, 4.0, 4.0]);
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(softmax_weighted_max(&[4.0, 4.0, 4.0]), 4.0);
        let e10 = 10f64.exp();
        let expected = 10.0 * e10 / (1.0 + e10);
        assert!((softmax_weighted_max(&[0.0, 10.0]) - expected).abs() < 1e-12);
        assert!((softmax_weighted_max(&[0.0, 10.0]) - 9.99955).abs() < 1e-5);
        let a = [0.3, -1.2, 2.0];
        let shifted: Vec<f64> = a.iter().map(|x| x + 1000.0).collect();
        let (p1, p2) = (softmax(&a), softmax(&shifted));
        for (x, y) in p1.iter().zip(&p2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    #[should_panic]
    fn softmax_rejects_empty() {
        softmax(&[]);
    }
}
