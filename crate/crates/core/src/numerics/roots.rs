//! Bracketing scalar root finder.
//!
//! ITP (interpolate, truncate, project): regula-falsi steps are truncated
//! toward the midpoint and projected into a shrinking minmax interval, so the
//! iteration count never exceeds the bisection count plus `N0`.

use crate::error::{Error, Result};

/// Slack over the bisection iteration count.
pub const N0: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub x: f64,
    /// Final bracket, `lo <= x <= hi`, with `hi - lo <= 2 tol`.
    pub lo: f64,
    pub hi: f64,
    pub iterations: u32,
}

/// Upper bound on iterations for a bracket of width `width` and tolerance `tol`.
pub fn max_iterations(width: f64, tol: f64) -> u32 {
    ((width / (2.0 * tol)).log2().ceil().max(0.0)) as u32 + N0
}

/// Finds a root of `f` in `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// `f` may be discontinuous (a sign classifier); the bracket still shrinks
/// onto the sign change.
pub fn bracket_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(Root { x: a, lo: a, hi: a, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, lo: b, hi: b, iterations: 0 });
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }
    let tol = tol.max(f64::EPSILON * a.abs().max(b.abs()));
    let n_max = max_iterations(b - a, tol);
    let k1 = 0.2 / (b - a);
    let k2 = 2.0;
    let mut j = 0u32;
    while b - a > 2.0 * tol {
        let mid = 0.5 * (a + b);
        let r = tol * 2f64.powi(n_max as i32 - j as i32) - 0.5 * (b - a);
        let delta = k1 * (b - a).powf(k2);
        // regula falsi; falls back to the midpoint for step-like data
        let xf = if (fb - fa).is_finite() && fb != fa {
            (fb * a - fa * b) / (fb - fa)
        } else {
            mid
        };
        let sigma = (mid - xf).signum();
        let xt = if delta <= (mid - xf).abs() { xf + sigma * delta } else { mid };
        let x = if (xt - mid).abs() <= r { xt } else { mid - sigma * r };
        let x = x.clamp(a, b);
        let fx = f(x);
        j += 1;
        if fx == 0.0 {
            return Ok(Root { x, lo: x, hi: x, iterations: j });
        }
        if fx.is_nan() {
            return Err(Error::NoConvergence(format!("f({x}) is NaN")));
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if j > n_max + 4 {
            break;
        }
    }
    Ok(Root { x: 0.5 * (a + b), lo: a, hi: b, iterations: j })
}
