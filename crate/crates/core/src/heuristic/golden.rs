//! Golden-section search for one-dimensional convex minimization.

/// Minimizes a convex `f` on `[lo, hi]`; returns `(argmin, min)`.
/// Stops when the bracket shrinks below `tol` or after `max_iter` shrink
/// steps.
pub fn golden_section_min(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    debug_assert!(lo <= hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    if hi - lo <= tol {
        let x = 0.5 * (lo + hi);
        return (x, f(x));
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    // evaluate the midpoint as the reported minimizer
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    if f1 < fx && f1 <= f2 {
        (x1, f1)
    } else if f2 < fx {
        (x2, f2)
    } else {
        (x, fx)
    }
}
