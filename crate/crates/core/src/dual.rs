//! Forward-mode automatic differentiation.
//!
//! [`Scalar`] is the numeric interface a target writes its log-density
//! against. Evaluating with `f64` gives the value; evaluating with [`Dual`]
//! seeded by [`Dual::variables`] gives the value and the full gradient in one
//! pass.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric type a log-density can be written against.
pub trait Scalar:
    Clone
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn ln_1p(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn abs(&self) -> Self;
    fn powf(&self, e: f64) -> Self;
    fn pow(&self, e: &Self) -> Self;

    fn powi(&self, n: i32) -> Self {
        self.powf(n as f64)
    }

    /// `ln(exp(self) + exp(other))` without overflow.
    fn ln_add_exp(&self, other: &Self) -> Self {
        let (hi, lo) = if self.value() >= other.value() {
            (self, other)
        } else {
            (other, self)
        };
        if hi.value() == f64::NEG_INFINITY {
            return hi.clone();
        }
        hi.clone() + (lo.clone() - hi.clone()).exp().ln_1p()
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn ln_1p(&self) -> Self {
        f64::ln_1p(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
    fn pow(&self, e: &Self) -> Self {
        f64::powf(*self, *e)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

/// A value together with its partial derivatives.
///
/// An empty `partials` vector stands for an all-zero gradient, so constants
/// cost no allocation. Binary operations zero-extend the shorter operand.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64) -> Self {
        Dual {
            value,
            partials: Vec::new(),
        }
    }

    /// The `i`-th of `n` independent variables.
    pub fn variable(value: f64, i: usize, n: usize) -> Self {
        let mut partials = vec![0.0; n];
        partials[i] = 1.0;
        Dual { value, partials }
    }

    /// Seeds one variable per coordinate of `x`.
    pub fn variables(x: &[f64]) -> Vec<Dual> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| Dual::variable(v, i, x.len()))
            .collect()
    }

    /// Gradient of length `n`, padding an implicit-zero gradient.
    pub fn gradient(&self, n: usize) -> Vec<f64> {
        let mut g = self.partials.clone();
        g.resize(n, 0.0);
        g
    }

    /// Chain rule for a unary function with derivative `dv` at `self.value`.
    fn chain(&self, value: f64, dv: f64) -> Dual {
        Dual {
            value,
            partials: self.partials.iter().map(|p| p * dv).collect(),
        }
    }

    /// `a * da + b * db` over zero-extended partial vectors.
    fn combine(a: &[f64], da: f64, b: &[f64], db: f64) -> Vec<f64> {
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| {
                let pa = a.get(i).copied().unwrap_or(0.0);
                let pb = b.get(i).copied().unwrap_or(0.0);
                pa * da + pb * db
            })
            .collect()
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value + rhs.value,
            partials: Dual::combine(&self.partials, 1.0, &rhs.partials, 1.0),
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value - rhs.value,
            partials: Dual::combine(&self.partials, 1.0, &rhs.partials, -1.0),
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value * rhs.value,
            partials: Dual::combine(&self.partials, rhs.value, &rhs.partials, self.value),
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.value;
        let value = self.value * inv;
        Dual {
            value,
            partials: Dual::combine(&self.partials, inv, &rhs.partials, -value * inv),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.chain(-self.value, -1.0)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(mut self, rhs: f64) -> Dual {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(mut self, rhs: f64) -> Dual {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        self.chain(self.value * rhs, rhs)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, rhs: f64) -> Dual {
        self.chain(self.value / rhs, 1.0 / rhs)
    }
}

impl Scalar for Dual {
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn ln(&self) -> Self {
        self.chain(self.value.ln(), 1.0 / self.value)
    }
    fn ln_1p(&self) -> Self {
        self.chain(self.value.ln_1p(), 1.0 / (1.0 + self.value))
    }
    fn sin(&self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn abs(&self) -> Self {
        let sign = if self.value < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.value.abs(), sign)
    }
    fn powf(&self, e: f64) -> Self {
        if e == 0.0 {
            return Dual::constant(1.0);
        }
        self.chain(self.value.powf(e), e * self.value.powf(e - 1.0))
    }
    fn pow(&self, e: &Self) -> Self {
        // d(a^b) = a^b (b' ln a + b a'/a)
        let v = self.value.powf(e.value);
        let da = e.value * self.value.powf(e.value - 1.0);
        let db = if e.partials.iter().all(|&p| p == 0.0) {
            0.0
        } else {
            v * self.value.ln()
        };
        Dual {
            value: v,
            partials: Dual::combine(&self.partials, da, &e.partials, db),
        }
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(1.0);
        }
        self.chain(self.value.powi(n), n as f64 * self.value.powi(n - 1))
    }
}
