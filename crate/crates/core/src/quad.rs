//! Adaptive composite Simpson quadrature.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default recursion cap for [`adaptive_simpson`].
pub const MAX_DEPTH: usize = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The tolerance is split in half at each bisection and the accepted panels get the usual
/// Richardson correction. Fails with [`Error::QuadratureFailure`] when a panel still misses its
/// share of the tolerance at `max_depth`.
pub fn adaptive_simpson<T, F>(f: &mut F, a: T, b: T, tol: T, max_depth: usize) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if a == b {
        return Ok(T::zero());
    }
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) / T::lit(2.0);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut failed = false;
    let value = refine(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut failed);
    if failed || !value.is_finite() {
        return Err(Error::QuadratureFailure {
            a: a.f64(),
            b: b.f64(),
            tol: tol.f64(),
        });
    }
    Ok(value)
}

#[inline]
fn simpson<T: Scalar>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<T, F>(f: &mut F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: usize, failed: &mut bool) -> T
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    let fifteen = T::lit(15.0);
    if delta.abs() <= fifteen * tol {
        return left + right + delta / fifteen;
    }
    // interval no longer resolvable in this precision
    if depth == 0 || m <= a || m >= b {
        *failed = true;
        return left + right + delta / fifteen;
    }
    let half = tol / two;
    refine(f, a, m, fa, flm, fm, left, half, depth - 1, failed)
        + refine(f, m, b, fm, frm, fb, right, half, depth - 1, failed)
}
