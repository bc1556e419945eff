//! Brute-force numerical routines owned by the oracle.
//!
//! Deliberately separate implementations from `crate::numeric`: the solver
//! paths use recursive adaptive Simpson and bracketed bisection, the oracle
//! uses panel-doubling composite Simpson, Richardson-extrapolated central
//! differences, and grid-plus-golden-section minimization. Shared code here
//! would defeat the cross-checks.

/// Richardson-extrapolated central difference of `f` at `x`.
///
/// Combines the two step sizes `h` and `h/2`; exact for cubics, so it
/// recovers derivatives of linear demand to machine precision.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    assert!(h > 0.0, "step must be positive");
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let coarse = d(h);
    let fine = d(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Richardson-extrapolated central second difference of `f` at `x`.
pub fn second_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    assert!(h > 0.0, "step must be positive");
    let d2 = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let coarse = d2(h);
    let fine = d2(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Composite Simpson quadrature with panel doubling until two successive
/// refinements agree to `tol` (relative, floored absolutely), returning the
/// Richardson-extrapolated value.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut n = 16usize;
    let mut prev = composite_simpson(&f, a, b, n);
    loop {
        n *= 2;
        let cur = composite_simpson(&f, a, b, n);
        let extrapolated = cur + (cur - prev) / 15.0;
        if (cur - prev).abs() <= tol * extrapolated.abs().max(1.0) || n >= (1 << 20) {
            return extrapolated;
        }
        prev = cur;
    }
}

fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        sum += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    sum * h / 3.0
}

/// Minimize `f` on `[lo, hi]`: coarse uniform grid scan, then one
/// golden-section refinement pass around the best cell. Returns the
/// refined argmin.
pub fn grid_golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid_points: usize) -> f64 {
    let n = grid_points.max(4);
    let h = (hi - lo) / n as f64;
    let mut best_i = 0usize;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let x = lo + h * i as f64;
        let v = f(x);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let a = lo + h * best_i.saturating_sub(1) as f64;
    let b = (lo + h * (best_i + 1) as f64).min(hi);
    golden_min(&f, a, b, 1e-9 * (hi - lo).max(1.0))
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Plain interval-halving root search on a bracketing interval; the
/// oracle's own inverse for demand curves.
pub fn halve_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let mut flo = f(lo);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
