//! Relative entropy and Renyi divergence between measures.
//!
//! `relative_entropy(q, p)` is `E_Q[-log(dP^a/dQ)]` where `P^a` is the part
//! of `P` absolutely continuous with respect to `Q`. No renormalisation is
//! applied when `P` is a strict sub-probability, so leaked mass shows up as
//! extra entropy. The value is `+inf` whenever `P` puts no mass on a
//! `Q`-positive region.

use crate::error::{Error, Result};
use crate::measure::{ExpectOpts, Measure};
use crate::xreal::{log_ratio, XReal};

/// `H(Q|P)` in `[0, +inf]` (tiny negative values are clipped to 0).
pub fn relative_entropy(q: &Measure, p: &Measure, opts: &ExpectOpts) -> Result<f64> {
    match (q, p) {
        (Measure::Discrete(qd), Measure::Discrete(_)) => {
            let mut h = 0.0;
            for (&z, &m) in qd.support().iter().zip(qd.masses()) {
                if m == 0.0 {
                    continue;
                }
                let pm = p.mass_at(z);
                if pm == 0.0 {
                    return Ok(f64::INFINITY);
                }
                h += m * (m / pm).ln();
            }
            Ok(h.max(0.0))
        }
        (Measure::Density(qd), Measure::Density(_)) => {
            let f = |z: f64| qd.log_pdf(z) - p.log_pdf(z);
            let e = q.expect_signed(&f, opts)?;
            Ok(if e.value.is_finite() {
                e.value.max(0.0)
            } else {
                e.value
            })
        }
        // an atom list and a density share no mass in either direction
        _ => Ok(if q.total_mass() > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }),
    }
}

/// Renyi divergence `D_gamma(Q||P)` for `gamma` in `(0,1)` or `(1, 1e4]`.
pub fn renyi_divergence(q: &Measure, p: &Measure, gamma: f64, opts: &ExpectOpts) -> Result<f64> {
    if !(gamma > 0.0 && gamma != 1.0 && gamma <= 1e4) {
        return Err(Error::Precondition(format!(
            "renyi order must lie in (0,1) or (1, 1e4], got {gamma}"
        )));
    }
    let carrier_mismatch = !matches!(
        (q, p),
        (Measure::Discrete(_), Measure::Discrete(_)) | (Measure::Density(_), Measure::Density(_))
    );
    if carrier_mismatch {
        return Ok(if q.total_mass() > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
    }

    // E_Q[(q/p)^(gamma-1)] for gamma > 1, E_Q[(p/q)^(1-gamma)] for gamma < 1
    let moment: XReal = match q {
        Measure::Discrete(qd) => {
            let mut acc = XReal::ZERO;
            for (&z, &m) in qd.support().iter().zip(qd.masses()) {
                if m == 0.0 {
                    continue;
                }
                let pm = p.mass_at(z);
                let lr = if gamma > 1.0 {
                    (gamma - 1.0) * log_ratio(m.ln(), pm.ln())
                } else {
                    (1.0 - gamma) * log_ratio(pm.ln(), m.ln())
                };
                acc = acc + crate::xreal::weighted(m, XReal::exp(lr));
                if acc.is_infinite() {
                    break;
                }
            }
            acc
        }
        Measure::Density(qd) => {
            let qd = qd.clone();
            let pb = p.clone();
            let f = move |z: f64| {
                let lq = qd.log_pdf(z);
                let lp = pb.log_pdf(z);
                let lr = if gamma > 1.0 {
                    (gamma - 1.0) * log_ratio(lq, lp)
                } else {
                    (1.0 - gamma) * log_ratio(lp, lq)
                };
                XReal::exp(lr)
            };
            q.expect_with(&f, opts)?.value
        }
    };

    Ok(moment.ln() / (gamma - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Family;
    use approx::assert_abs_diff_eq;

    fn normal(mean: f64) -> Measure {
        Measure::family(Family::Normal { mean, sd: 1.0 }).unwrap()
    }

    #[test]
    fn gaussian_shift_entropy() {
        // H(N(a,1)|N(b,1)) = (a-b)^2/2
        let h = relative_entropy(&normal(1.0), &normal(-1.0), &ExpectOpts::default()).unwrap();
        assert_abs_diff_eq!(h, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn self_entropy_is_zero() {
        let h = relative_entropy(&normal(0.3), &normal(0.3), &ExpectOpts::default()).unwrap();
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-9);
        let q = Measure::discrete(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(
            relative_entropy(&q, &q, &ExpectOpts::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn missing_mass_gives_infinity() {
        let q = Measure::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let p = Measure::dirac(0.0);
        assert_eq!(
            relative_entropy(&q, &p, &ExpectOpts::default()).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn sub_probability_adds_entropy() {
        // target has half the mass everywhere: extra log 2
        let q = Measure::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let p = Measure::discrete(vec![0.0, 1.0], vec![0.25, 0.25]).unwrap();
        let h = relative_entropy(&q, &p, &ExpectOpts::default()).unwrap();
        assert_abs_diff_eq!(h, std::f64::consts::LN_2, epsilon = 1e-14);
    }

    #[test]
    fn point_mass_against_scaled_atom() {
        // Q = delta_0, P = (1/3) delta_0: H = log 3, matching E_Q[log X*]
        // for the worked coin example
        let q = Measure::dirac(0.0);
        let p = Measure::discrete(vec![0.0], vec![1.0 / 3.0]).unwrap();
        let h = relative_entropy(&q, &p, &ExpectOpts::default()).unwrap();
        assert_abs_diff_eq!(h, 3.0f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn cauchy_against_gaussian_is_infinite() {
        let q = Measure::family(Family::Cauchy {
            location: 0.0,
            scale: 1.0,
        })
        .unwrap();
        let h = relative_entropy(&q, &normal(0.0), &ExpectOpts::default()).unwrap();
        assert_eq!(h, f64::INFINITY);
    }

    #[test]
    fn renyi_gaussian_closed_form() {
        // D_gamma(N(a,1)||N(b,1)) = gamma (a-b)^2 / 2 for equal variances
        for gamma in [0.5, 2.0, 8.0] {
            let d =
                renyi_divergence(&normal(0.7), &normal(0.0), gamma, &ExpectOpts::default())
                    .unwrap();
            assert_abs_diff_eq!(d, gamma * 0.49 / 2.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn renyi_self_is_zero_and_disjoint_is_infinite() {
        let d = renyi_divergence(&normal(0.0), &normal(0.0), 2.0, &ExpectOpts::default()).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-9);
        let a = Measure::dirac(0.0);
        let b = Measure::dirac(1.0);
        for gamma in [0.5, 2.0] {
            assert_eq!(
                renyi_divergence(&a, &b, gamma, &ExpectOpts::default()).unwrap(),
                f64::INFINITY
            );
        }
    }

    #[test]
    fn renyi_rejects_bad_order() {
        let q = normal(0.0);
        assert!(renyi_divergence(&q, &q, 1.0, &ExpectOpts::default()).is_err());
        assert!(renyi_divergence(&q, &q, 0.0, &ExpectOpts::default()).is_err());
        assert!(renyi_divergence(&q, &q, 2e4, &ExpectOpts::default()).is_err());
    }

    #[test]
    fn discrete_renyi_matches_direct_sum() {
        let q = Measure::discrete(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
        let p = Measure::discrete(vec![0.0, 1.0], vec![0.6, 0.4]).unwrap();
        let gamma = 2.0;
        let direct: f64 = (0.3f64.powi(2) / 0.6 + 0.7f64.powi(2) / 0.4).ln();
        let d = renyi_divergence(&q, &p, gamma, &ExpectOpts::default()).unwrap();
        assert_abs_diff_eq!(d, direct, epsilon = 1e-12);
    }
}
