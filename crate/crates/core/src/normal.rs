//! Standard normal special functions, accurate in the far tails.
//!
//! Everything that can underflow is available in log space so truncated
//! normals stay usable when a bound sits dozens of standard deviations from
//! the mean.

use std::f64::consts::FRAC_1_SQRT_2;

/// `ln(sqrt(2 pi))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn pdf(x: f64) -> f64 {
    log_pdf(x).exp()
}

pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `Phi(x)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Phi(x)`, finite for every finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x > 5.0 {
        (-cdf(-x)).ln_1p()
    } else if x > -37.0 {
        cdf(x).ln()
    } else {
        // Asymptotic Mills-ratio expansion.
        let z2 = 1.0 / (x * x);
        let series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
        log_pdf(x) - (-x).ln() + series.ln()
    }
}

/// `ln(Phi(b) - Phi(a))` for `a <= b`; `-inf` when `a == b`.
pub fn log_diff_cdf(a: f64, b: f64) -> f64 {
    debug_assert!(!(a > b), "log_diff_cdf({a}, {b})");
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a == f64::NEG_INFINITY {
        return log_cdf(b);
    }
    if b == f64::INFINITY {
        return log_cdf(-a);
    }
    if b <= 0.0 {
        let lb = log_cdf(b);
        lb + log1mexp(log_cdf(a) - lb)
    } else if a >= 0.0 {
        let la = log_cdf(-a);
        la + log1mexp(log_cdf(-b) - la)
    } else {
        (-(cdf(a) + cdf(-b))).ln_1p()
    }
}

/// `ln(1 - exp(x))` for `x <= 0`.
fn log1mexp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `Phi^{-1}(p)` (Wichura's AS 241, relative error about 1e-16).
pub fn inv_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        return central(q);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let x = tail((-r.ln()).sqrt());
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// `Phi^{-1}(exp(log_p))`, usable when `p` underflows.
pub fn inv_cdf_log(log_p: f64) -> f64 {
    if log_p >= 0.0 {
        return f64::INFINITY;
    }
    if log_p == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if log_p > -0.6931 {
        // Upper half: work with the complement.
        let p = log_p.exp();
        if p - 0.5 <= 0.425 {
            return central(p - 0.5);
        }
        return tail((-(-log_p.exp_m1()).ln()).sqrt());
    }
    if log_p > (0.075f64).ln() {
        return central(log_p.exp() - 0.5);
    }
    let r = (-log_p).sqrt();
    let mut x = -tail(r);
    if r > 27.0 {
        // Beyond the fitted range: polish with Newton on ln Phi.
        for _ in 0..3 {
            let lc = log_cdf(x);
            x -= (lc - log_p) * (lc - log_pdf(x)).exp();
        }
    }
    x
}

fn central(q: f64) -> f64 {
    let r = 0.180625 - q * q;
    q * (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
        + 6.726_577_092_700_87e4)
        * r
        + 4.592_195_393_154_987e4)
        * r
        + 1.373_169_376_550_946e4)
        * r
        + 1.971_590_950_306_551_3e3)
        * r
        + 1.331_416_678_917_843_8e2)
        * r
        + 3.387_132_872_796_366_5)
        / (((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0)
}

/// Upper-tail quantile as a function of `r = sqrt(-ln(tail mass))`.
fn tail(r: f64) -> f64 {
    if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 1.519_866_656_361_645_7e-2)
                * r
                + 1.481_039_764_274_800_8e-1)
                * r
                + 6.897_673_349_851e-1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 1.487_536_129_085_061_5e-2)
                * r
                + 1.369_298_809_227_358e-1)
                * r
                + 5.998_322_065_558_88e-1)
                * r
                + 1.0)
    }
}

/// Result of a standardized truncated-normal draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedDraw {
    pub z: f64,
    /// The interval carried less than `1e-300` of the normal mass.
    pub degenerate: bool,
}

/// Threshold on `ln Z` below which a truncation is flagged degenerate.
pub const LOG_DEGENERATE_MASS: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// Draws `z ~ N(0, 1)` restricted to `[alpha, beta]` by inverting the CDF at
/// `Phi(alpha) + u (Phi(beta) - Phi(alpha))`.
///
/// The inversion runs in log space on whichever side of zero keeps the
/// probabilities small, so bounds deep in either tail stay exact. `log_mass`
/// is `ln(Phi(beta) - Phi(alpha))`, passed in because callers cache it.
pub fn sample_truncated(alpha: f64, beta: f64, log_mass: f64, u: f64) -> TruncatedDraw {
    let degenerate = log_mass < LOG_DEGENERATE_MASS;
    let z = if alpha >= 0.0 {
        // Mirror into the lower tail: -z lies in [-beta, -alpha].
        -lower_inverse(-beta, log_mass, 1.0 - u)
    } else {
        lower_inverse(alpha, log_mass, u)
    };
    let z = if z.is_nan() {
        if alpha.is_finite() {
            alpha
        } else {
            beta
        }
    } else {
        z.clamp(alpha, beta)
    };
    TruncatedDraw { z, degenerate }
}

/// Inverse CDF of `N(0,1)` on `[lo, ..]` with mass `exp(log_mass)`.
fn lower_inverse(lo: f64, log_mass: f64, u: f64) -> f64 {
    let log_lo = log_cdf(lo);
    let log_step = u.ln() + log_mass;
    let (hi, small) = if log_lo >= log_step {
        (log_lo, log_step)
    } else {
        (log_step, log_lo)
    };
    let log_p = if small == f64::NEG_INFINITY {
        hi
    } else {
        hi + (small - hi).exp().ln_1p()
    };
    inv_cdf_log(log_p.min(0.0))
}

/// Mean of `N(0,1)` truncated to `[alpha, beta]`.
pub fn truncated_mean(alpha: f64, beta: f64) -> f64 {
    let lz = log_diff_cdf(alpha, beta);
    let t = |x: f64| {
        if x.is_finite() {
            (log_pdf(x) - lz).exp()
        } else {
            0.0
        }
    };
    t(alpha) - t(beta)
}

/// CDF of `N(mu, sigma^2)` truncated to `[a, b]`, evaluated at `x`.
pub fn truncated_cdf(x: f64, mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    if x <= a {
        return 0.0;
    }
    if x >= b {
        return 1.0;
    }
    let alpha = (a - mu) / sigma;
    let beta = (b - mu) / sigma;
    let z = (x - mu) / sigma;
    (log_diff_cdf(alpha, z) - log_diff_cdf(alpha, beta)).exp()
}
