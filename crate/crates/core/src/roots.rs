//! Scalar root finding: Brent's method on a bracketing interval.

use core::fmt;

use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum RootError {
    /// `f(a)` and `f(b)` have the same sign.
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    /// The iteration budget ran out before the tolerance was met.
    NoConvergence { best: f64 },
}

impl fmt::Display for RootError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RootError::NotBracketed { a, b, fa, fb } => write!(
                f,
                "root not bracketed on [{a:e}, {b:e}]: f(a)={fa:e}, f(b)={fb:e}"
            ),
            RootError::NoConvergence { best } => {
                write!(
                    f,
                    "root iteration did not converge (best estimate {best:e})"
                )
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RootError {}

/// Find a root of `f` in `[a, b]` with Brent's method.
///
/// `rel_tol` is relative to the magnitude of the abscissa; an absolute floor
/// of `f64::MIN_POSITIVE` guards the origin. Requires `f(a)·f(b) ≤ 0`.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, RootError> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { a, b, fa, fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
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
        let tol = 2.0 * f64::EPSILON * math::abs(b) + 0.5 * rel_tol * math::abs(b).max(1e-300);
        let m = 0.5 * (c - b);
        if math::abs(m) <= tol || fb == 0.0 {
            return Ok(b);
        }
        if math::abs(e) < tol || math::abs(fa) <= math::abs(fb) {
            d = m;
            e = m;
        } else {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic interpolation
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
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
        b += if math::abs(d) > tol {
            d
        } else if m > 0.0 {
            tol
        } else {
            -tol
        };
        fb = f(b);
    }
    Err(RootError::NoConvergence { best: b })
}
