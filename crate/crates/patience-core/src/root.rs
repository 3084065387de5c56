//! Safeguarded scalar root finding for monotone rate equations.

use alloc::format;

use crate::math;
use crate::{Error, Result};

/// Find the root of a continuous, eventually-negative function `f` with
/// `f(lo) > 0`, by doubling `hi` from `hi0` until the sign changes (up to
/// `max_hi`), then Brent-style safeguarded iteration to relative tolerance
/// `rel_tol`.
pub fn solve_positive_to_negative<F>(
    mut f: F,
    lo0: f64,
    hi0: f64,
    max_hi: f64,
    rel_tol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut lo = lo0;
    let flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    if flo < 0.0 {
        return Err(Error::numerical(format!(
            "root bracketing failed: f({lo:e}) = {flo:e} is already negative"
        )));
    }
    let mut hi = hi0;
    let mut fhi = f(hi);
    while fhi > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > max_hi {
            return Err(Error::numerical(format!(
                "root bracketing failed: no sign change up to {max_hi:e} (f({lo:e}) = {:e})",
                f(lo)
            )));
        }
        fhi = f(hi);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }

    brent(&mut f, lo, hi, rel_tol)
}

/// Brent's method on a bracketing interval [a, b] with f(a)·f(b) < 0.
fn brent<F>(f: &mut F, mut a: f64, mut b: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let mut fb = f(b);
    debug_assert!(fa * fb < 0.0);

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if math::abs(fc) < math::abs(fb) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * math::abs(b) + rel_tol * math::abs(b).max(1e-300);
        let m = 0.5 * (c - b);
        if math::abs(m) <= tol || fb == 0.0 {
            return Ok(b);
        }
        if math::abs(e) < tol || math::abs(fa) <= math::abs(fb) {
            // Bisection.
            d = m;
            e = m;
        } else {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                // Secant.
                (2.0 * m * s, 1.0 - s)
            } else {
                // Inverse quadratic interpolation.
                let qq = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0)),
                    (qq - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = math::abs(p);
            if 2.0 * p < (3.0 * m * q - math::abs(tol * q)).min(math::abs(e * q)) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        }
        a = b;
        fa = fb;
        b += if math::abs(d) > tol { d } else { tol * m.signum() };
        fb = f(b);
    }
    Err(Error::numerical("root refinement did not converge in 200 iterations"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_root() {
        // f(x) = 2 - x, decreasing, root at 2.
        let r = solve_positive_to_negative(|x| 2.0 - x, 1e-12, 1.0, 1e6, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-9);
    }

    #[test]
    fn expands_bracket() {
        let r = solve_positive_to_negative(|x| 1e5 - x, 1e-12, 1.0, 1e9, 1e-12).unwrap();
        assert!((r - 1e5).abs() / 1e5 < 1e-9);
    }

    #[test]
    fn reports_bracketing_failure() {
        assert!(solve_positive_to_negative(|_| 1.0, 1e-12, 1.0, 1e6, 1e-10).is_err());
    }
}
