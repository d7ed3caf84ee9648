//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

/// Root of `f` in `[a, b]`. Requires a sign change on the bracket.
/// Converges to `xtol` on the argument or when `f` hits exactly zero.
pub fn brent(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut xa = a;
    let mut xb = b;
    let mut fa = f(xa)?;
    let mut fb = f(xb)?;
    if fa == 0.0 {
        return Ok(xa);
    }
    if fb == 0.0 {
        return Ok(xb);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketFailure(format!(
            "no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}"
        )));
    }
    let mut xc = xa;
    let mut fc = fa;
    let mut d = xb - xa;
    let mut e = d;

    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            xc = xa;
            fc = fa;
            d = xb - xa;
            e = d;
        }
        if fc.abs() < fb.abs() {
            xa = xb;
            xb = xc;
            xc = xa;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * xb.abs() + 0.5 * xtol;
        let xm = 0.5 * (xc - xb);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(xb);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, falling back to secant
            let s = fb / fa;
            let (mut p, mut q) = if xa == xc {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * qq * (qq - r) - (xb - xa) * (r - 1.0)),
                    (qq - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        xa = xb;
        fa = fb;
        xb += if d.abs() > tol1 {
            d
        } else {
            tol1 * xm.signum()
        };
        fb = f(xb)?;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: fb.abs(),
        last_weights: vec![xb],
        last_residuals: vec![fb],
    })
}

/// Expand `[lo, hi]` geometrically until `f` changes sign, then hand off.
pub fn brent_auto_bracket(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    cap: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    let flo = f(lo)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    let mut b = hi;
    for _ in 0..64 {
        let fb = f(b)?;
        if fb == 0.0 {
            return Ok(b);
        }
        if fb.signum() != flo.signum() {
            return brent(f, lo, b, xtol, max_iter);
        }
        if b >= cap {
            break;
        }
        b = (b * 2.0).min(cap);
    }
    Err(Error::BracketFailure(format!(
        "no sign change found on [{lo}, {cap}]"
    )))
}
