//! Benchmark targets and reference samplers.
//!
//! * peakiness: `f(x) ∝ exp(-x) / (1 + x)^a` on `(0, inf)`;
//! * sinusoid: `f(x) ∝ prod_i (1 + sin(4 pi x_i - pi/2))` on `[0, 1]^d`;
//! * clutter: `f(x) ∝ prod_i [r N(x; theta_i, I) + (1 - r) N(x; 0, 100^2 I)]`
//!   on `R^d`, with ten centers, five in `[-5, -3]` and five in `[2, 4]`.
//!
//! The reference samplers invert numerically integrated CDFs on fine grids.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::normal::LN_SQRT_2PI;
use crate::points::Points;
use crate::target::{Domain, Generic, LogTarget, ScalarFn};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Peakiness,
    Sinusoid,
    Clutter,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Peakiness => "peakiness",
            Family::Sinusoid => "sinusoid",
            Family::Clutter => "clutter",
        })
    }
}

pub const CLUTTER_R: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub family: Family,
    /// Peakiness exponent.
    pub a: f64,
    pub d: usize,
    /// Clutter mixing weight.
    pub r: f64,
}

impl BenchSpec {
    /// A family with default parameters (`a = 1`, `r = 0.5`).
    pub fn new(family: Family, d: usize) -> Result<Self> {
        BenchSpec {
            family,
            a: 1.0,
            d,
            r: CLUTTER_R,
        }
        .checked()
    }

    pub fn peakiness(a: f64) -> Result<Self> {
        BenchSpec {
            a,
            ..BenchSpec::new(Family::Peakiness, 1)?
        }
        .checked()
    }

    pub fn sinusoid(d: usize) -> Result<Self> {
        BenchSpec::new(Family::Sinusoid, d)
    }

    pub fn clutter(d: usize, r: f64) -> Result<Self> {
        BenchSpec {
            r,
            ..BenchSpec::new(Family::Clutter, d)?
        }
        .checked()
    }

    fn checked(self) -> Result<Self> {
        if self.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        match self.family {
            Family::Peakiness if self.d != 1 => Err(Error::Config("peakiness is one-dimensional".into())),
            Family::Peakiness if !(self.a >= 0.0 && self.a.is_finite()) => {
                Err(Error::Config(format!("peakiness needs a >= 0, got {}", self.a)))
            }
            Family::Clutter if !(0.0..=1.0).contains(&self.r) => {
                Err(Error::Config(format!("clutter needs r in [0, 1], got {}", self.r)))
            }
            _ => Ok(self),
        }
    }

    pub fn domain(&self) -> Domain {
        match self.family {
            Family::Peakiness => Domain::new(vec![0.0], vec![f64::INFINITY]).expect("valid bounds"),
            Family::Sinusoid => Domain::unit_cube(self.d),
            Family::Clutter => Domain::unbounded(self.d),
        }
    }

    /// Parameter summary, e.g. `a=20` or `d=2;r=0.5`.
    pub fn params(&self) -> String {
        match self.family {
            Family::Peakiness => format!("a={}", self.a),
            Family::Sinusoid => format!("d={}", self.d),
            Family::Clutter => format!("d={};r={}", self.d, self.r),
        }
    }

    pub fn log_density<S: Scalar>(&self, x: &[S]) -> S {
        match self.family {
            Family::Peakiness => peakiness_log(self.a, &x[0]),
            Family::Sinusoid => sinusoid_log(x),
            Family::Clutter => clutter_log(self.r, &clutter_centers(), x),
        }
    }

    pub fn target(&self) -> LogTarget {
        LogTarget::new(Generic(self.clone()), self.domain())
    }
}

impl ScalarFn for BenchSpec {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        self.log_density(x)
    }
}

/// `-x - a ln(1 + x)`; `-inf` for `x <= 0`.
pub fn peakiness_log<S: Scalar>(a: f64, x: &S) -> S {
    if x.value() <= 0.0 {
        return S::from_f64(f64::NEG_INFINITY);
    }
    -x.clone() - x.ln_1p() * a
}

/// `sum_i ln(1 + sin(4 pi x_i - pi/2))`; `-inf` outside `[0, 1]^d`.
pub fn sinusoid_log<S: Scalar>(x: &[S]) -> S {
    let mut acc = S::from_f64(0.0);
    for xi in x {
        let v = xi.value();
        if !(0.0..=1.0).contains(&v) {
            return S::from_f64(f64::NEG_INFINITY);
        }
        let s = (xi.clone() * (4.0 * PI) - PI / 2.0).sin() + 1.0;
        if s.value() <= 0.0 {
            return S::from_f64(f64::NEG_INFINITY);
        }
        acc = acc + s.ln();
    }
    acc
}

/// Ten clutter centers: five evenly spaced over `[-5, -3]`, five over `[2, 4]`.
pub fn clutter_centers() -> Vec<f64> {
    let mut c: Vec<f64> = (0..5).map(|i| -5.0 + 0.5 * i as f64).collect();
    c.extend((0..5).map(|i| 2.0 + 0.5 * i as f64));
    c
}

/// `sum_i ln(r N(x; theta_i 1, I) + (1 - r) N(x; 0, 100^2 I))`, where each
/// center is repeated along every coordinate.
pub fn clutter_log<S: Scalar>(r: f64, centers: &[f64], x: &[S]) -> S {
    let d = x.len() as f64;
    let ln_r = if r > 0.0 { r.ln() } else { f64::NEG_INFINITY };
    let ln_q = if r < 1.0 { (1.0 - r).ln() } else { f64::NEG_INFINITY };
    let mut sq = S::from_f64(0.0);
    for xi in x {
        sq = sq + xi.clone() * xi.clone();
    }
    let broad = sq * (-0.5 / 1e4) + (ln_q - d * (LN_SQRT_2PI + 100f64.ln()));
    let mut acc = S::from_f64(0.0);
    for &c in centers {
        let mut dist = S::from_f64(0.0);
        for xi in x {
            let u = xi.clone() - c;
            dist = dist + u.clone() * u;
        }
        let signal = dist * -0.5 + (ln_r - d * LN_SQRT_2PI);
        acc = acc + signal.ln_add_exp(&broad);
    }
    acc
}

/// A tabulated 1-D density with piecewise linear interpolation.
struct Grid1 {
    x: Vec<f64>,
    f: Vec<f64>,
    cdf: Vec<f64>,
}

impl Grid1 {
    fn new(lo: f64, hi: f64, n: usize, logf: &dyn Fn(f64) -> f64) -> Self {
        let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let lf: Vec<f64> = x.iter().map(|v| logf(*v)).collect();
        let top = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = lf.iter().map(|v| (v - top).exp()).collect();
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            cdf[i] = cdf[i - 1] + 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
        }
        Grid1 { x, f, cdf }
    }

    fn mass(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    /// Smallest interval holding all but `tail` of the mass on each side.
    fn trimmed(&self, tail: f64) -> (f64, f64) {
        let m = self.mass();
        let lo = self.cdf.partition_point(|c| *c < tail * m).saturating_sub(1);
        let hi = self.cdf.partition_point(|c| *c <= (1.0 - tail) * m).min(self.x.len() - 1);
        (self.x[lo], self.x[hi])
    }

    /// Exact inverse of the piecewise-linear density's CDF.
    fn sample(&self, u: f64) -> f64 {
        let target = u * self.mass();
        let i = self.cdf.partition_point(|c| *c < target).clamp(1, self.x.len() - 1);
        let (x0, h) = (self.x[i - 1], self.x[i] - self.x[i - 1]);
        let (f0, f1) = (self.f[i - 1], self.f[i]);
        let rem = target - self.cdf[i - 1];
        // Solve f0 t + (f1 - f0) t^2 / (2h) = rem for t in [0, h].
        let slope = (f1 - f0) / h;
        let t = if slope.abs() < 1e-300 || (slope * rem).abs() < 1e-12 * f0 * f0 {
            if f0 > 0.0 {
                rem / f0
            } else {
                0.5 * h
            }
        } else {
            let disc = (f0 * f0 + 2.0 * slope * rem).max(0.0);
            2.0 * rem / (f0 + disc.sqrt())
        };
        x0 + t.clamp(0.0, h)
    }

    /// Normalized CDF at `v` by interpolation within the cell.
    fn cdf_at(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v <= self.x[0] {
            return 0.0;
        }
        if v >= self.x[n - 1] {
            return 1.0;
        }
        let i = self.x.partition_point(|x| *x <= v).clamp(1, n - 1);
        let (x0, h) = (self.x[i - 1], self.x[i] - self.x[i - 1]);
        let t = v - x0;
        let (f0, f1) = (self.f[i - 1], self.f[i]);
        (self.cdf[i - 1] + f0 * t + (f1 - f0) * t * t / (2.0 * h)) / self.mass()
    }
}

const GRID_1D: usize = 1 << 17;
const GRID_2D: usize = 2048;
const TAIL: f64 = 1e-12;

/// A fine grid over the range that holds all but `TAIL` of the mass, located
/// on a first grid over `[lo, hi]`.
fn adaptive_grid(lo: f64, hi: f64, logf: &dyn Fn(f64) -> f64) -> Grid1 {
    let coarse = Grid1::new(lo, hi, GRID_1D, logf);
    let (a, b) = coarse.trimmed(TAIL);
    let pad = 2.0 * (hi - lo) / GRID_1D as f64;
    Grid1::new((a - pad).max(lo), (b + pad).min(hi), GRID_1D, logf)
}

/// Reference sampler with the same distribution as the target.
pub struct Oracle {
    spec: BenchSpec,
    kind: OracleKind,
}

enum OracleKind {
    Line(Grid1),
    Product(Grid1),
    Plane { xs: Vec<f64>, cum: Vec<f64>, h: f64 },
}

impl Oracle {
    pub fn new(spec: &BenchSpec) -> Result<Self> {
        let kind = match (spec.family, spec.d) {
            (Family::Peakiness, _) => {
                let a = spec.a;
                OracleKind::Line(adaptive_grid(0.0, 100.0, &|x| if x <= 0.0 { f64::NEG_INFINITY } else { -x - a * x.ln_1p() }))
            }
            (Family::Sinusoid, _) => OracleKind::Product(Grid1::new(0.0, 1.0, GRID_1D, &|x| sinusoid_log(&[x]))),
            (Family::Clutter, 1) => {
                let (r, c) = (spec.r, clutter_centers());
                OracleKind::Line(adaptive_grid(-600.0, 600.0, &|x| clutter_log(r, &c, &[x])))
            }
            (Family::Clutter, 2) => plane(spec.r),
            (f, d) => return Err(Error::Unsupported(format!("reference sampler for {f} in {d} dimensions"))),
        };
        Ok(Oracle { spec: spec.clone(), kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Points {
        let d = self.spec.d;
        let mut out = Points::with_capacity(d, n);
        let mut x = vec![0.0; d];
        for _ in 0..n {
            match &self.kind {
                OracleKind::Line(g) | OracleKind::Product(g) => {
                    for v in x.iter_mut() {
                        *v = g.sample(rng.random());
                    }
                }
                OracleKind::Plane { xs, cum, h } => {
                    let m = xs.len() - 1;
                    let u = rng.random::<f64>() * cum[cum.len() - 1];
                    let c = cum.partition_point(|v| *v <= u).min(cum.len() - 1);
                    let (i, j) = (c / m, c % m);
                    x[0] = xs[i] + h * rng.random::<f64>();
                    x[1] = xs[j] + h * rng.random::<f64>();
                }
            }
            out.push(&x);
        }
        out
    }

    /// Marginal CDF of the first coordinate, for one-dimensional grids.
    pub fn cdf(&self, v: f64) -> Option<f64> {
        match &self.kind {
            OracleKind::Line(g) | OracleKind::Product(g) => Some(g.cdf_at(v)),
            OracleKind::Plane { .. } => None,
        }
    }
}

/// Cell masses of the 2-D clutter density on a grid over the box that holds
/// all but `TAIL` of each marginal.
fn plane(r: f64) -> OracleKind {
    let c = clutter_centers();
    let logf = |x: f64, y: f64| clutter_log(r, &c, &[x, y]);
    let cells = |lo: f64, hi: f64, n: usize| -> (Vec<f64>, Vec<f64>, f64) {
        let h = (hi - lo) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
        let lf: Vec<f64> = xs.iter().flat_map(|a| xs.iter().map(move |b| (*a, *b))).map(|(a, b)| logf(a, b)).collect();
        let top = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = lf.iter().map(|v| (v - top).exp()).collect();
        let m = n - 1;
        let mut mass = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                mass.push(0.25 * (f[i * n + j] + f[i * n + j + 1] + f[(i + 1) * n + j] + f[(i + 1) * n + j + 1]));
            }
        }
        (xs, mass, h)
    };

    // Locate the bulk on a coarse grid, then tabulate finely.
    let (xs, mass, h) = cells(-60.0, 60.0, 1201);
    let m = xs.len() - 1;
    let mut marg = [vec![0.0; m], vec![0.0; m]];
    for i in 0..m {
        for j in 0..m {
            marg[0][i] += mass[i * m + j];
            marg[1][j] += mass[i * m + j];
        }
    }
    let total: f64 = marg[0].iter().sum();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for mg in &marg {
        let mut acc = 0.0;
        let mut first = None;
        let mut last = 0;
        for (k, v) in mg.iter().enumerate() {
            acc += v;
            if first.is_none() && acc > TAIL * total {
                first = Some(k);
            }
            if acc < (1.0 - TAIL) * total {
                last = k + 1;
            }
        }
        lo = lo.min(xs[first.unwrap_or(0)] - h);
        hi = hi.max(xs[(last + 1).min(m)] + h);
    }
    let (xs, mass, h) = cells(lo, hi, GRID_2D);
    let mut cum = Vec::with_capacity(mass.len());
    let mut acc = 0.0;
    for v in mass {
        acc += v;
        cum.push(acc);
    }
    OracleKind::Plane { xs, cum, h }
}

/// `n` reference draws for `spec`.
pub fn oracle_sample<R: Rng + ?Sized>(spec: &BenchSpec, n: usize, rng: &mut R) -> Result<Points> {
    Ok(Oracle::new(spec)?.sample(n, rng))
}
