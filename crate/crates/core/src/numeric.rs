//! Root finding and quadrature used by the analytic solver paths.
//!
//! The oracle module deliberately carries its own, separately written
//! routines; nothing in here is shared with it.

use crate::error::CoreError;
use crate::Result;

/// Default iteration cap for bisection.
pub const BISECT_MAX_ITER: usize = 200;

/// Bisect `f` for a root on `[lo, hi]`, assuming `f(lo)` and `f(hi)` have
/// opposite (or zero) signs. Converges unconditionally on continuous `f`.
///
/// Stops when the bracket width falls below `tol` or the iteration cap is
/// reached; returns the bracket midpoint.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(CoreError::SolverFailure(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Locate a sign change of `f` on `[lo, hi]` by uniform scanning, then close
/// in with [`bisect`]. Used where the root function is continuous but only
/// piecewise smooth, so a direct endpoint bracket is not guaranteed.
pub fn scan_bisect<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    scan_points: usize,
    tol: f64,
) -> Result<f64> {
    let n = scan_points.max(2);
    let h = (hi - lo) / n as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    if f0 == 0.0 {
        return Ok(x0);
    }
    for i in 1..=n {
        let x1 = if i == n { hi } else { lo + h * i as f64 };
        let f1 = f(x1);
        if f1 == 0.0 {
            return Ok(x1);
        }
        if f0.signum() != f1.signum() {
            return bisect(&f, x0, x1, tol);
        }
        x0 = x1;
        f0 = f1;
    }
    Err(CoreError::SolverFailure(format!(
        "no sign change found scanning [{lo}, {hi}] with {n} points"
    )))
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` with relative tolerance
/// `rel_tol` (floored by a small absolute tolerance for near-zero integrals).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    let eps = rel_tol * whole.abs().max(1e-3);
    sign * simpson_step(&f, lo, hi, flo, fmid, fhi, whole, eps, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
}
