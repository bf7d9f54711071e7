//! Error functions, the Gaussian CDF and bracketed root finding.
//!
//! `erf`/`erfc` delegate to the fdlibm-derived routines in `libm`, which are
//! accurate to about one ulp. Everything here is pure and allocation free.

use crate::error::{ensure, Error, Result};

/// Convergence controls for iterative routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64, max_iter: usize) -> Result<Self> {
        ensure(abs > 0.0, "tolerance.abs", abs, "> 0")?;
        ensure(rel > 0.0, "tolerance.rel", rel, "> 0")?;
        ensure(max_iter >= 1, "tolerance.max_iter", max_iter as f64, ">= 1")?;
        Ok(Self { abs, rel, max_iter })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-12,
            max_iter: 200,
        }
    }
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `1 - erf(x)`, evaluated directly so the upper tail keeps full relative
/// precision.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Solves `erfc(x) = q` for `q` in `(0, 2)`.
///
/// Bisection on a fixed bracket, run until the midpoint stops moving, so the
/// result is as close as double precision allows.
pub fn inverse_erfc(q: f64) -> Result<f64> {
    ensure(q > 0.0 && q < 2.0, "q", q, "0 < q < 2")?;
    if q == 1.0 {
        return Ok(0.0);
    }
    if q > 1.0 {
        return inverse_erfc(2.0 - q).map(|x| -x);
    }
    // erfc(27) underflows to zero, so every representable q <= 1 lies in here.
    let (mut lo, mut hi) = (0.0_f64, 27.3_f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if erfc(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever endpoint has the smaller residual
    if (erfc(lo) - q).abs() <= (erfc(hi) - q).abs() {
        Ok(lo)
    } else {
        Ok(hi)
    }
}

/// Normal CDF with a point mass at `mean` when `std == 0`.
///
/// Returns NaN for a negative or non-finite `std`.
pub fn gaussian_cdf(x: f64, mean: f64, std: f64) -> f64 {
    if !std.is_finite() || std < 0.0 {
        return f64::NAN;
    }
    if std == 0.0 {
        return if x < mean { 0.0 } else { 1.0 };
    }
    0.5 * erfc(-(x - mean) / (std * core::f64::consts::SQRT_2))
}

/// Finds `x` in `[lo, hi]` with `f(x) = target` for monotone `f`.
///
/// Stops once `|f(x) - target| <= tol.abs` or the bracket has shrunk below
/// `tol.abs + tol.rel * |x|`.
pub fn bisect<F>(mut f: F, target: f64, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut g_lo = f(lo) - target;
    let g_hi = f(hi) - target;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.is_nan() || g_hi.is_nan() || g_lo.signum() == g_hi.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..tol.max_iter {
        mid = 0.5 * (lo + hi);
        let g_mid = f(mid) - target;
        if g_mid.abs() <= tol.abs || (hi - lo) <= tol.abs + tol.rel * mid.abs() {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NotConverged {
        iterations: tol.max_iter,
        residual: f(mid) - target,
    })
}
