//! Support domains and the target log-density contract.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dual::{Dual, Scalar};
use crate::par::{self, Execution};
use crate::points::Points;
use crate::{Error, Result};

/// Axis-aligned support `[lower_i, upper_i]` per dimension; bounds may be
/// infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Domain("zero dimensions".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::Domain(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || !(lo < hi) || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Domain(format!("dimension {i}: [{lo}, {hi}] is empty")));
            }
        }
        Ok(Domain { lower, upper })
    }

    pub fn unbounded(dims: usize) -> Self {
        Domain::new(vec![f64::NEG_INFINITY; dims], vec![f64::INFINITY; dims]).unwrap()
    }

    pub fn unit_cube(dims: usize) -> Self {
        Domain::new(vec![0.0; dims], vec![1.0; dims]).unwrap()
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_compact(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|b| b.is_finite())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| v.is_finite() && lo <= v && v <= hi)
    }

    pub fn center(&self) -> Result<Vec<f64>> {
        if !self.is_compact() {
            return Err(Error::NotCompact);
        }
        Ok(self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (lo + hi) / 2.0)
            .collect())
    }

    pub fn range(&self) -> Result<Vec<f64>> {
        if !self.is_compact() {
            return Err(Error::NotCompact);
        }
        Ok(self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).collect())
    }

    /// Width of dimension `i`, or 1 when that dimension is unbounded on
    /// either side. Used as the scale for variance floors.
    pub fn scale(&self, i: usize) -> f64 {
        let w = self.upper[i] - self.lower[i];
        if w.is_finite() {
            w
        } else {
            1.0
        }
    }

    /// Moves `x` into the interior, a relative hair away from any finite bound.
    pub fn clamp_interior(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            let pad = |b: f64| 1e-9 * b.abs().max(1.0).min((hi - lo) * 1e3);
            if lo.is_finite() && *v < lo + pad(lo) {
                *v = lo + pad(lo);
            }
            if hi.is_finite() && *v > hi - pad(hi) {
                *v = hi - pad(hi);
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DomainRepr {
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

impl Serialize for Domain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let fin = |v: &f64| v.is_finite().then_some(*v);
        DomainRepr {
            lower: self.lower.iter().map(fin).collect(),
            upper: self.upper.iter().map(fin).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = DomainRepr::deserialize(d)?;
        Domain::new(
            r.lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
            r.upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// A user log-density `log f`, possibly unnormalized.
///
/// Implementations must be pure: deterministic and safe to call from several
/// threads at once. `-inf` marks zero density; NaN is a definition error.
pub trait Target: Send + Sync {
    fn log_f(&self, x: &[f64]) -> f64;

    /// Forward-mode evaluation. Targets written against [`Scalar`] get this
    /// through [`Generic`].
    fn log_f_dual(&self, _x: &[Dual]) -> Option<Dual> {
        None
    }

    /// A hand-written gradient, preferred over the dual path when present.
    fn grad_log_f(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// A log-density written once, generically over the scalar type.
pub trait ScalarFn: Send + Sync {
    fn eval<S: Scalar>(&self, x: &[S]) -> S;
}

/// Adapts a [`ScalarFn`] into a [`Target`] with forward-mode gradients.
#[derive(Clone, Debug)]
pub struct Generic<F>(pub F);

impl<F: ScalarFn> Target for Generic<F> {
    fn log_f(&self, x: &[f64]) -> f64 {
        self.0.eval(x)
    }

    fn log_f_dual(&self, x: &[Dual]) -> Option<Dual> {
        Some(self.0.eval(x))
    }
}

type LogFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A closure target with an explicit gradient.
pub struct FnTarget {
    log_f: Box<LogFn>,
    grad: Box<GradFn>,
}

impl FnTarget {
    pub fn new(
        log_f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnTarget {
            log_f: Box::new(log_f),
            grad: Box::new(grad),
        }
    }
}

impl Target for FnTarget {
    fn log_f(&self, x: &[f64]) -> f64 {
        (self.log_f)(x)
    }

    fn grad_log_f(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some((self.grad)(x))
    }
}

/// A target bound to its domain, with an evaluation counter.
///
/// Every call to [`log_density`](Self::log_density),
/// [`grad_log_density`](Self::grad_log_density) or
/// [`value_and_grad`](Self::value_and_grad) counts as one evaluation of `f`.
pub struct LogTarget {
    inner: Arc<dyn Target>,
    domain: Domain,
    evals: AtomicU64,
}

impl std::fmt::Debug for LogTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogTarget")
            .field("domain", &self.domain)
            .field("evals", &self.evals())
            .finish()
    }
}

impl LogTarget {
    pub fn new(target: impl Target + 'static, domain: Domain) -> Self {
        LogTarget::from_arc(Arc::new(target), domain)
    }

    pub fn from_arc(inner: Arc<dyn Target>, domain: Domain) -> Self {
        LogTarget {
            inner,
            domain,
            evals: AtomicU64::new(0),
        }
    }

    /// A fresh handle on the same function with its own counter.
    pub fn fresh(&self) -> Self {
        LogTarget::from_arc(Arc::clone(&self.inner), self.domain.clone())
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dims(&self) -> usize {
        self.domain.dims()
    }

    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::Dimension {
                expected: self.dims(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `log f(x)`; `-inf` outside the domain.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dims(x)?;
        self.evals.fetch_add(1, Ordering::Relaxed);
        if !self.domain.contains(x) {
            return Ok(f64::NEG_INFINITY);
        }
        let v = self.inner.log_f(x);
        if v.is_nan() {
            return Err(Error::TargetNan { point: x.to_vec() });
        }
        Ok(v)
    }

    /// `log f` at every row, evaluated concurrently when `exec` allows.
    pub fn log_density_batch(&self, xs: &Points, exec: Execution) -> Result<Vec<f64>> {
        par::map_indexed(exec, xs.len(), |i| self.log_density(xs.row(i)))
            .into_iter()
            .collect()
    }

    /// `log f(x)` and its gradient from a single evaluation.
    ///
    /// When `log f(x) = -inf` the gradient is undefined and returned as zeros.
    pub fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dims(x)?;
        self.evals.fetch_add(1, Ordering::Relaxed);
        let d = self.dims();
        if !self.domain.contains(x) {
            return Ok((f64::NEG_INFINITY, vec![0.0; d]));
        }
        let (v, g) = if let Some(g) = self.inner.grad_log_f(x) {
            (self.inner.log_f(x), g)
        } else if let Some(y) = self.inner.log_f_dual(&Dual::variables(x)) {
            let g = y.gradient(d);
            (y.value, g)
        } else {
            return Err(Error::Gradient { point: x.to_vec() });
        };
        if v.is_nan() {
            return Err(Error::TargetNan { point: x.to_vec() });
        }
        if v == f64::NEG_INFINITY {
            return Ok((v, vec![0.0; d]));
        }
        if g.len() != d || g.iter().any(|c| !c.is_finite()) {
            return Err(Error::Gradient { point: x.to_vec() });
        }
        Ok((v, g))
    }

    /// `grad log f(x)`, from the user gradient when provided, else forward mode.
    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (v, g) = self.value_and_grad(x)?;
        if !v.is_finite() {
            return Err(Error::Gradient { point: x.to_vec() });
        }
        Ok(g)
    }
}
