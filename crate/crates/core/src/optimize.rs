//! One-dimensional root bracketing and minimisation.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bisection for a non-decreasing `g` with `g(lo) < 0 <= g(hi)`.
///
/// Stops once the bracket stops shrinking in floating point or after
/// `max_iter` halvings; returns the endpoint with the smaller residual.
pub fn bisect_increasing<T: Real, G: FnMut(T) -> T>(mut g: G, mut lo: T, mut hi: T, max_iter: usize) -> T {
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    for _ in 0..max_iter {
        let mid = lo + (hi - lo) * T::half();
        if !(mid > lo && mid < hi) {
            break;
        }
        let gm = g(mid);
        if gm < T::zero() {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }
    if g_lo.abs() < g_hi.abs() {
        lo
    } else {
        hi
    }
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section_min<T: Real, F: FnMut(T) -> T>(mut f: F, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Scans `points` equally spaced abscissae on `[a, b]` and refines the best
/// one with golden-section search on its neighbouring cells.
pub fn grid_then_golden<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, points: usize, tol: T) -> Result<(T, T)> {
    if points < 2 || !(b > a) {
        return Err(Error::argument("grid search needs b > a and at least two points"));
    }
    let step = (b - a) / T::from_usize(points - 1).unwrap();
    let mut best_i = 0;
    let mut best_v = T::infinity();
    for i in 0..points {
        let x = if i + 1 == points { b } else { a + step * T::from_usize(i).unwrap() };
        let v = f(x);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { a } else { a + step * T::from_usize(best_i - 1).unwrap() };
    let hi = if best_i + 1 >= points { b } else { a + step * T::from_usize(best_i + 1).unwrap() };
    let (x, v) = golden_section_min(&mut f, lo, hi, tol);
    if v <= best_v {
        Ok((x, v))
    } else {
        let x = if best_i + 1 == points { b } else { a + step * T::from_usize(best_i).unwrap() };
        Ok((x, best_v))
    }
}
