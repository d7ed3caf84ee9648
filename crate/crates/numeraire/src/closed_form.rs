//! Closed-form optimal wealth for two structured nulls.
//!
//! Symmetric null: the best payoff at `z` is `2 q(z) / (q(z) + q(-z))`,
//! the share of the alternative's density on this side of the fold. The
//! projection is the symmetrisation of `Q`, restricted to `Q`'s support.
//! Discrete alternatives go through the finite solver on the symmetrised
//! support instead (see the crate facade).
//!
//! Exponential family with a one-sided parameter set `theta >= theta_star`:
//! the best payoff against an alternative at `theta1 < theta_star` is the
//! likelihood ratio to the boundary member, and the projection is that
//! boundary member. The first-order condition reduces to a four-term
//! log-partition identity, checked on a grid by `expfam_foc_certificate`.

use crate::divergence::relative_entropy;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::finite::log_sum_exp;
use crate::measure::{ExpectOpts, Measure, PdfFn};
use crate::nullspec::{expfam_member, geomspace, linspace, NullHypothesis};
use crate::solution::{GrowthReport, Numeraire, NumeraireSolution, SolverOptions};
use crate::verify::{Certificate, CheckResult};
use std::sync::Arc;

const LN_2: f64 = std::f64::consts::LN_2;

fn softplus(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return f64::INFINITY;
    }
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Optimal wealth against all distributions symmetric about 0, for an
/// alternative given by a density.
pub fn symmetric_numeraire(q: &Measure, opts: &SolverOptions) -> Result<NumeraireSolution> {
    let qd = match q {
        Measure::Density(d) => d.clone(),
        Measure::Discrete(_) => {
            return Err(Error::UnsupportedNull(
                "the symmetric closed form needs a density; discrete alternatives \
                 are solved on the symmetrised support by the finite solver"
                    .into(),
            ))
        }
    };
    if !q.is_probability(1e-6) {
        return Err(Error::InvalidMeasure(format!(
            "alternative has mass {}",
            q.total_mass()
        )));
    }
    // log X*(z) = log 2 - softplus(log q(-z) - log q(z)); zero off support
    let qa = qd.clone();
    let log_eval = Arc::new(move |z: f64| {
        let lq = qa.log_pdf(z);
        if lq == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        LN_2 - softplus(qa.log_pdf(-z) - lq)
    });
    let numeraire = Numeraire::from_log(log_eval);

    let ripr = symmetric_ripr(q)?;
    let knots = mirrored_knots(q);
    let eopts = ExpectOpts {
        acc: opts.acc,
        budget: opts.budget,
        knots,
        ..ExpectOpts::default()
    };
    let n = numeraire.clone();
    let lw = q.expect_signed(&move |z: f64| n.log_value(z), &eopts)?.value;
    let h = relative_entropy(q, &ripr, &eopts)?;

    Ok(NumeraireSolution {
        numeraire,
        ripr,
        lambda_star: q.total_mass(),
        mixture_weights: None,
        growth: GrowthReport {
            log_wealth: lw,
            entropy: h,
            conditional_log_wealth: lw,
            conditional_entropy: h,
        },
        iterations: 0,
        residual: 0.0,
        residuals: vec![],
        parameter: None,
        notes: vec!["folded closed form".into()],
    })
}

fn symmetric_ripr(q: &Measure) -> Result<Measure> {
    match q {
        Measure::Discrete(qd) => {
            let support = qd.support().to_vec();
            let mass: Vec<f64> = support
                .iter()
                .zip(qd.masses())
                .map(|(&z, &m)| {
                    if m > 0.0 {
                        0.5 * (m + q.mass_at(-z))
                    } else {
                        0.0
                    }
                })
                .collect();
            Measure::discrete(support, mass)
        }
        Measure::Density(qd) => {
            let qa = qd.clone();
            let pdf: PdfFn = Arc::new(move |z| {
                let qv = qa.pdf(z);
                if qv > 0.0 {
                    0.5 * (qv + qa.pdf(-z))
                } else {
                    0.0
                }
            });
            let qb = qd.clone();
            let log_pdf: PdfFn = Arc::new(move |z| {
                if qb.pdf(z) > 0.0 {
                    log_sum_exp(&[qb.log_pdf(z), qb.log_pdf(-z)]) - LN_2
                } else {
                    f64::NEG_INFINITY
                }
            });
            Measure::density_fn(pdf, Some(log_pdf), qd.domain(), &mirrored_knots(q))
        }
    }
}

fn mirrored_knots(q: &Measure) -> Vec<f64> {
    let mut knots = crate::finite::component_knots(std::slice::from_ref(q));
    let mirror: Vec<f64> = knots.iter().map(|k| -k).collect();
    knots.extend(mirror);
    knots.push(0.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
}

fn expfam_parts(null: &NullHypothesis) -> Result<(&Expr, &Expr, f64, &Measure)> {
    match null {
        NullHypothesis::ExpFamily {
            log_partition,
            sufficient_stat,
            theta_star,
            reference,
        } => Ok((log_partition, sufficient_stat, *theta_star, reference)),
        other => Err(Error::UnsupportedNull(format!(
            "expected an exponential-family null, got: {}",
            other.describe()
        ))),
    }
}

/// Second differences of the log partition must be nonnegative on the
/// stretch the solution touches.
fn convexity_spot_check(a: &Expr, lo: f64, hi: f64) -> Result<()> {
    let h = 1e-4 * (hi - lo).max(1.0);
    for theta in linspace(lo, hi, 9) {
        let (l, c, r) = (a.eval(theta - h), a.eval(theta), a.eval(theta + h));
        if !(l.is_finite() && c.is_finite() && r.is_finite()) {
            continue;
        }
        let second = l - 2.0 * c + r;
        if second < -1e-6 * h * h * c.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "log partition is not convex near theta = {theta}: \
                 second difference {second:.3e}"
            )));
        }
    }
    Ok(())
}

/// Optimal wealth of the family member at `theta1` against the one-sided
/// family `theta >= theta_star`, with `theta1` strictly below the boundary:
/// the likelihood ratio to the boundary member.
pub fn expfam_numeraire(
    null: &NullHypothesis,
    theta1: f64,
    opts: &SolverOptions,
) -> Result<NumeraireSolution> {
    null.validate()?;
    let (a, t, theta_star, reference) = expfam_parts(null)?;
    if !theta1.is_finite() || theta1 >= theta_star {
        return Err(Error::Precondition(format!(
            "the alternative parameter must sit strictly below the boundary \
             ({theta1} vs {theta_star}); at equality the wealth degenerates to 1"
        )));
    }
    convexity_spot_check(a, theta1 - 0.5, theta_star + 0.5)?;

    let q = expfam_member(a, t, reference, theta1)?;
    let ripr = expfam_member(a, t, reference, theta_star)?;

    let a1 = a.eval(theta1);
    let a0 = a.eval(theta_star);
    if !(a1.is_finite() && a0.is_finite()) {
        return Err(Error::Precondition(format!(
            "log partition must be finite at {theta1} and {theta_star}"
        )));
    }
    let tilt = theta1 - theta_star;
    let stat = t.clone();
    let log_eval = Arc::new(move |z: f64| tilt * stat.eval(z) - a1 + a0);
    let numeraire = Numeraire::from_log(log_eval);

    let eopts = ExpectOpts {
        acc: opts.acc,
        budget: opts.budget,
        knots: vec![],
        ..ExpectOpts::default()
    };
    let n = numeraire.clone();
    let lw = q.expect_signed(&move |z: f64| n.log_value(z), &eopts)?.value;
    let h = relative_entropy(&q, &ripr, &eopts)?;

    Ok(NumeraireSolution {
        numeraire,
        ripr,
        lambda_star: 1.0,
        mixture_weights: None,
        growth: GrowthReport {
            log_wealth: lw,
            entropy: h,
            conditional_log_wealth: lw,
            conditional_entropy: h,
        },
        iterations: 0,
        residual: 0.0,
        residuals: vec![],
        parameter: Some(theta1),
        notes: vec![format!(
            "likelihood ratio against the boundary member at {theta_star}"
        )],
    })
}

/// Moment bound `E_Q[p_theta / p_theta_star] <= 1` for null parameters on a
/// geometric grid above the boundary. The expectation collapses to the
/// four-term log-partition identity
/// `A(theta1 + theta - theta_star) - A(theta1) - A(theta) + A(theta_star)`,
/// nonpositive whenever the log partition is convex and `theta1` is below
/// the boundary.
pub fn expfam_foc_certificate(
    null: &NullHypothesis,
    theta1: f64,
    tol: f64,
) -> Result<Certificate> {
    let (a, _, theta_star, _) = expfam_parts(null)?;
    let a1 = a.eval(theta1);
    let a0 = a.eval(theta_star);
    if !(a1.is_finite() && a0.is_finite()) {
        return Err(Error::Precondition(
            "log partition must be finite at theta1 and theta_star".into(),
        ));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_theta = theta_star;
    let mut skipped = 0usize;
    let mut used = 0usize;
    for d in geomspace(1e-6, 20.0, 128) {
        let theta = theta_star + d;
        let shifted = a.eval(theta1 + d);
        let at = a.eval(theta);
        if !(shifted.is_finite() && at.is_finite()) {
            skipped += 1;
            continue;
        }
        used += 1;
        let excess = (shifted - a1 - at + a0).exp_m1();
        if excess > worst {
            worst = excess;
            worst_theta = theta;
        }
    }
    let check = CheckResult {
        name: "moment bound: E_Q[p_theta/p_theta_star] <= 1 over the null".into(),
        residual: worst,
        tol,
        pass: used > 0 && worst <= tol,
        witness: format!(
            "worst at theta = {worst_theta}; {used} grid points, {skipped} outside the domain"
        ),
    };
    Ok(Certificate::from_checks(vec![check]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Family;
    use crate::xreal::XReal;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_family(theta_star: f64) -> NullHypothesis {
        NullHypothesis::ExpFamily {
            log_partition: Expr::parse("z^2/2").unwrap(),
            sufficient_stat: Expr::parse("z").unwrap(),
            theta_star,
            reference: Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap(),
        }
    }

    fn bernoulli_family(theta_star: f64) -> NullHypothesis {
        NullHypothesis::ExpFamily {
            log_partition: Expr::parse("log((1 + e^z) / 2)").unwrap(),
            sufficient_stat: Expr::parse("z").unwrap(),
            theta_star,
            reference: Measure::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(),
        }
    }

    #[test]
    fn gaussian_alternative_fold() {
        let q = Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap();
        let sol = symmetric_numeraire(&q, &SolverOptions::default()).unwrap();

        // direct form 2q/(q + q mirrored) on a grid
        let fam = Family::Normal { mean: 1.0, sd: 1.0 };
        for z in [-3.0, -0.7, 0.0, 0.4, 2.5] {
            let direct = 2.0 * fam.pdf(z) / (fam.pdf(z) + fam.pdf(-z));
            assert_abs_diff_eq!(sol.numeraire.value(z).value(), direct, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sol.numeraire.value(0.0).value(), 1.0, epsilon = 1e-15);
        // the fold simplifies to a logistic curve in the gaussian case
        for z in [-2.0, 0.3, 1.7] {
            assert_abs_diff_eq!(
                sol.numeraire.value(z).value(),
                2.0 / (1.0 + (-2.0 * z).exp()),
                epsilon = 1e-12
            );
        }

        assert_abs_diff_eq!(sol.ripr.total_mass(), 1.0, epsilon = 1e-8);
        assert!(sol.growth.log_wealth > 0.0);
        assert_abs_diff_eq!(
            sol.growth.log_wealth,
            sol.growth.entropy,
            epsilon = 1e-8
        );
    }

    #[test]
    fn wealth_minus_one_is_odd() {
        let q = Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap();
        let sol = symmetric_numeraire(&q, &SolverOptions::default()).unwrap();
        let mut z = 0.05;
        while z <= 6.0 {
            let here = sol.numeraire.value(z).value() - 1.0;
            let there = sol.numeraire.value(-z).value() - 1.0;
            assert!((here + there).abs() <= 1e-12, "not odd at {z}");
            z += 0.05;
        }
    }

    #[test]
    fn random_symmetric_pairs_price_at_most_one() {
        let alternatives = [
            Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap(),
            Measure::family(Family::Exponential { rate: 1.0 }).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for q in &alternatives {
            let sol = symmetric_numeraire(q, &SolverOptions::default()).unwrap();
            for _ in 0..200 {
                let z: f64 = rng.random_range(1e-3..8.0);
                let e = 0.5 * (sol.numeraire.value(z).value() + sol.numeraire.value(-z).value());
                assert!(e <= 1.0 + 1e-9, "pair at {z} prices {e}");
            }
        }
    }

    #[test]
    fn one_sided_support_doubles_and_leaks_half() {
        let q = Measure::family(Family::Exponential { rate: 1.0 }).unwrap();
        let sol = symmetric_numeraire(&q, &SolverOptions::default()).unwrap();
        for z in [0.1, 1.0, 7.0] {
            assert_abs_diff_eq!(sol.numeraire.value(z).value(), 2.0, epsilon = 1e-12);
        }
        assert_eq!(sol.numeraire.value(-1.0), XReal::ZERO);
        assert_abs_diff_eq!(sol.ripr.total_mass(), 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.growth.log_wealth, LN_2, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.growth.entropy, LN_2, epsilon = 1e-8);
    }

    #[test]
    fn symmetric_alternative_is_a_member() {
        let q = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let sol = symmetric_numeraire(&q, &SolverOptions::default()).unwrap();
        for z in [-1.0, 0.2, 3.0] {
            assert_abs_diff_eq!(sol.numeraire.value(z).value(), 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(sol.growth.log_wealth, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn discrete_alternatives_are_routed_elsewhere() {
        let q = Measure::discrete(vec![-1.0, 1.0], vec![0.25, 0.75]).unwrap();
        assert!(matches!(
            symmetric_numeraire(&q, &SolverOptions::default()),
            Err(Error::UnsupportedNull(_))
        ));
    }

    #[test]
    fn gaussian_shift_boundary_ratio() {
        let null = gaussian_family(0.0);
        let sol = expfam_numeraire(&null, -1.0, &SolverOptions::default()).unwrap();
        for z in [-1.0, 0.0, 2.0] {
            assert_abs_diff_eq!(sol.numeraire.log_value(z), -z - 0.5, epsilon = 1e-15);
        }
        // growth equals the squared shift over two, on both routes
        assert_abs_diff_eq!(sol.growth.log_wealth, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.growth.entropy, 0.5, epsilon = 1e-8);

        // boundary member prices the wealth at exactly 1
        let payoff = sol.numeraire.payoff();
        let e = sol.ripr.expect(payoff.as_ref(), 1e-10).unwrap();
        assert_abs_diff_eq!(e.value.value(), 1.0, epsilon = 1e-10);

        // and the projected mass under Q is 1: E_Q[1/X*] = 1
        let n = sol.numeraire.clone();
        let q = Measure::family(Family::Normal { mean: -1.0, sd: 1.0 }).unwrap();
        let inv = q
            .expect(&move |z: f64| XReal::exp(-n.log_value(z)), 1e-10)
            .unwrap();
        assert_abs_diff_eq!(inv.value.value(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn boundary_parameter_is_rejected() {
        let null = gaussian_family(0.0);
        for theta1 in [0.0, 0.5] {
            match expfam_numeraire(&null, theta1, &SolverOptions::default()) {
                Err(Error::Precondition(msg)) => assert!(msg.contains("strictly below"), "{msg}"),
                other => panic!("expected a precondition error, got {other:?}"),
            }
        }
    }

    #[test]
    fn concave_log_partition_is_rejected() {
        let null = NullHypothesis::ExpFamily {
            log_partition: Expr::parse("-(z^2)/2").unwrap(),
            sufficient_stat: Expr::parse("z").unwrap(),
            theta_star: 0.0,
            reference: Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap(),
        };
        assert!(matches!(
            expfam_numeraire(&null, -1.0, &SolverOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn bernoulli_boundary_binds_and_interior_slackens() {
        let null = bernoulli_family(0.0);
        let sol = expfam_numeraire(&null, -1.0, &SolverOptions::default()).unwrap();

        // X*(z) = e^{-z} (1 + e^0) / (1 + e^{-1}), spelled via the log
        // partition difference
        let scale = 2.0 / (1.0 + (-1.0f64).exp());
        assert_abs_diff_eq!(sol.numeraire.value(0.0).value(), scale, epsilon = 1e-12);
        assert_abs_diff_eq!(
            sol.numeraire.value(1.0).value(),
            scale * (-1.0f64).exp(),
            epsilon = 1e-12
        );

        let (a, t, _, reference) = expfam_parts(&null).unwrap();
        for theta in [0.0, 0.5, 1.0, 2.0] {
            let member = expfam_member(a, t, reference, theta).unwrap();
            let payoff = sol.numeraire.payoff();
            let e = member.expect(payoff.as_ref(), 1e-12).unwrap().value.value();
            if theta == 0.0 {
                assert_abs_diff_eq!(e, 1.0, epsilon = 1e-12);
            } else {
                assert!(e < 1.0, "member at {theta} prices {e}");
            }
        }
    }

    #[test]
    fn foc_certificate_exponent_stays_nonpositive() {
        for null in [gaussian_family(0.0), bernoulli_family(0.3)] {
            let cert = expfam_foc_certificate(&null, -1.0, 1e-9).unwrap();
            assert!(cert.overall_pass, "{cert:?}");
            assert!(cert.checks[0].residual <= 0.0 + 1e-12);
        }
    }

    #[test]
    fn two_member_hull_reduces_to_the_boundary() {
        // solving against the hull of two null members must land on the
        // boundary member and reproduce the closed-form wealth
        let null = bernoulli_family(0.0);
        let (a, t, _, reference) = expfam_parts(&null).unwrap();
        let q = expfam_member(a, t, reference, -1.0).unwrap();
        let comps = vec![
            expfam_member(a, t, reference, 0.0).unwrap(),
            expfam_member(a, t, reference, 1.0).unwrap(),
        ];
        let hull = NullHypothesis::FiniteMixture { components: comps };
        let fin = crate::finite::solve_finite_null(&q, &hull, &SolverOptions::default()).unwrap();
        let w = fin.mixture_weights.clone().unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-7);

        let closed = expfam_numeraire(&null, -1.0, &SolverOptions::default()).unwrap();
        for z in [0.0, 1.0] {
            assert_abs_diff_eq!(
                fin.numeraire.value(z).value(),
                closed.numeraire.value(z).value(),
                epsilon = 1e-7
            );
        }
    }
}
