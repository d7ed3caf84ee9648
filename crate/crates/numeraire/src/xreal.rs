//! Nonnegative extended reals with the betting-score arithmetic conventions.
//!
//! Wealth ratios like X/X* must be defined everywhere, including where the
//! denominator vanishes or both sides are infinite. The conventions are
//!
//! * `0 * x = 0` for every `x`, including `x = inf`,
//! * `x / inf = 0` and `inf / x = inf` for finite `x >= 0`,
//! * `inf / inf = 1`,
//! * `log 0 = -inf` and `log inf = +inf`.
//!
//! `XReal` values are always nonnegative and never NaN; logarithms leave the
//! type and come back as plain `f64` in `[-inf, +inf]`.

use crate::error::{Error, Result};
use std::fmt;
use std::ops::{Add, Mul};

/// A value in `[0, +inf]`.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct XReal(f64);

impl XReal {
    pub const ZERO: XReal = XReal(0.0);
    pub const ONE: XReal = XReal(1.0);
    pub const INFINITY: XReal = XReal(f64::INFINITY);

    /// Wraps a finite or infinite nonnegative float. NaN and negatives are rejected.
    pub fn new(v: f64) -> Result<XReal> {
        if v.is_nan() || v < 0.0 {
            return Err(Error::Precondition(format!(
                "extended real must be in [0, inf], got {v}"
            )));
        }
        Ok(XReal(v))
    }

    /// `new` for values already known to be valid; panics otherwise.
    pub fn from(v: f64) -> XReal {
        XReal::new(v).expect("nonnegative extended real")
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    /// Total ratio `self / den` under the conventions above.
    ///
    /// `0 / 0` is taken as `0`, consistent with reading `x / y` as
    /// `x * (1/y)` and applying `0 * anything = 0`.
    pub fn ratio(self, den: XReal) -> XReal {
        if self.0 == 0.0 {
            return XReal::ZERO;
        }
        if self.is_infinite() {
            if den.is_infinite() {
                return XReal::ONE;
            }
            return XReal::INFINITY;
        }
        if den.is_infinite() {
            return XReal::ZERO;
        }
        if den.0 == 0.0 {
            return XReal::INFINITY;
        }
        XReal(self.0 / den.0)
    }

    /// `log` with `log 0 = -inf`, `log inf = +inf`.
    pub fn ln(self) -> f64 {
        if self.0 == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.0.ln()
        }
    }

    /// `exp` of an extended real in `[-inf, inf]`, clamped into `[0, inf]`.
    /// Exponents past the overflow guard saturate to `+inf`.
    pub fn exp(log_v: f64) -> XReal {
        if log_v.is_nan() {
            return XReal::ZERO;
        }
        if log_v > OVERFLOW_GUARD_LOG {
            return XReal::INFINITY;
        }
        XReal(log_v.exp())
    }

    /// Power with the limits `0^e = 0`, `inf^e = inf` for `e > 0`,
    /// `0^e = inf`, `inf^e = 0` for `e < 0`, and `x^0 = 1`.
    pub fn powf(self, e: f64) -> XReal {
        if e == 0.0 {
            return XReal::ONE;
        }
        if self.0 == 0.0 {
            return if e > 0.0 { XReal::ZERO } else { XReal::INFINITY };
        }
        if self.is_infinite() {
            return if e > 0.0 { XReal::INFINITY } else { XReal::ZERO };
        }
        XReal::exp(e * self.0.ln())
    }

    pub fn min(self, other: XReal) -> XReal {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: XReal) -> XReal {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }
}

/// Exponent above which products are treated as infinite (e^700 guard).
pub const OVERFLOW_GUARD_LOG: f64 = 700.0;

impl Add for XReal {
    type Output = XReal;
    fn add(self, rhs: XReal) -> XReal {
        XReal(self.0 + rhs.0)
    }
}

impl Mul for XReal {
    type Output = XReal;
    /// Product with `0 * inf = 0`.
    fn mul(self, rhs: XReal) -> XReal {
        if self.0 == 0.0 || rhs.0 == 0.0 {
            return XReal::ZERO;
        }
        XReal(self.0 * rhs.0)
    }
}

/// Scales by a nonnegative weight with the `0 * inf = 0` convention.
/// This is the rule that makes sums like `sum_i w_i x_i` ignore infinite
/// values carried by zero-mass atoms.
pub fn weighted(w: f64, x: XReal) -> XReal {
    debug_assert!(w >= 0.0 && !w.is_nan());
    if w == 0.0 {
        return XReal::ZERO;
    }
    x * XReal(w)
}

/// Total log-ratio `log(num/den)` computed from logs, with
/// `log(0/0) = log 0 = -inf` matching `XReal::ratio`.
pub fn log_ratio(log_num: f64, log_den: f64) -> f64 {
    if log_num == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if log_num == f64::INFINITY {
        if log_den == f64::INFINITY {
            return 0.0;
        }
        return f64::INFINITY;
    }
    if log_den == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if log_den == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    log_num - log_den
}

impl fmt::Debug for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn convention_table() {
        // 0 * x = 0 for all x, including inf
        assert_eq!((XReal::ZERO * XReal::INFINITY).value(), 0.0);
        assert_eq!((XReal::INFINITY * XReal::ZERO).value(), 0.0);
        assert_eq!(weighted(0.0, XReal::INFINITY).value(), 0.0);

        // x / inf = 0 for finite x
        assert_eq!(XReal::from(3.0).ratio(XReal::INFINITY).value(), 0.0);
        assert_eq!(XReal::ZERO.ratio(XReal::INFINITY).value(), 0.0);

        // inf / x = inf for finite x >= 0
        assert_eq!(XReal::INFINITY.ratio(XReal::from(2.0)).value(), INF);
        assert_eq!(XReal::INFINITY.ratio(XReal::ZERO).value(), INF);

        // inf / inf = 1
        assert_eq!(XReal::INFINITY.ratio(XReal::INFINITY).value(), 1.0);

        // log 0 = -inf, log inf = +inf
        assert_eq!(XReal::ZERO.ln(), f64::NEG_INFINITY);
        assert_eq!(XReal::INFINITY.ln(), INF);

        // finite / 0 = inf, 0 / 0 = 0
        assert_eq!(XReal::from(1.5).ratio(XReal::ZERO).value(), INF);
        assert_eq!(XReal::ZERO.ratio(XReal::ZERO).value(), 0.0);
    }

    #[test]
    fn rejects_nan_and_negative() {
        assert!(XReal::new(f64::NAN).is_err());
        assert!(XReal::new(-1e-300).is_err());
        assert!(XReal::new(0.0).is_ok());
        assert!(XReal::new(INF).is_ok());
    }

    #[test]
    fn log_ratio_conventions() {
        assert_eq!(log_ratio(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(log_ratio(0.0, f64::NEG_INFINITY), INF);
        assert_eq!(log_ratio(INF, INF), 0.0);
        assert_eq!(log_ratio(0.0, INF), f64::NEG_INFINITY);
        assert_eq!(log_ratio(2.0, 1.0), 1.0);
    }

    #[test]
    fn overflow_guard_saturates() {
        assert!(XReal::exp(700.5).is_infinite());
        assert!(XReal::exp(699.0).is_finite());
        assert_eq!(XReal::exp(f64::NEG_INFINITY).value(), 0.0);
    }

    fn any_xreal() -> impl Strategy<Value = XReal> {
        prop_oneof![
            Just(XReal::ZERO),
            Just(XReal::INFINITY),
            (1e-300_f64..1e300).prop_map(XReal::from),
        ]
    }

    proptest! {
        // Ratios of extended reals are total: never NaN, never negative.
        #[test]
        fn ratio_is_total(a in any_xreal(), b in any_xreal()) {
            let r = a.ratio(b);
            prop_assert!(!r.value().is_nan());
            prop_assert!(r.value() >= 0.0);
        }

        #[test]
        fn mul_is_total(a in any_xreal(), b in any_xreal()) {
            let r = a * b;
            prop_assert!(!r.value().is_nan());
            prop_assert!(r.value() >= 0.0);
        }

        // exp(ln x) = x for finite positive x, up to rounding
        #[test]
        fn exp_ln_roundtrip(x in 1e-150_f64..1e150) {
            let r = XReal::exp(XReal::from(x).ln());
            prop_assert!((r.value() / x - 1.0).abs() < 1e-12);
        }
    }
}
