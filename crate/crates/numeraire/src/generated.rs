//! Solvers for nulls described by constraints rather than component lists.
//!
//! Bounded mean on `[0,1]`: the optimal wealth is linear, `1 + lam (z - mu)`,
//! with the slope picked by a one-dimensional first-order condition (solved
//! by bracketed root finding). Sub-Gaussian: the optimal wealth is the
//! exponential tilt matching the alternative's mean, in closed form.
//!
//! `certify_generated` closes the loop: a candidate is the optimal wealth
//! for a generated null exactly when its inverse prices to one under the
//! alternative and every generator is priced at most one. The check needs
//! no solver and works for hand-built candidates too.

use crate::divergence::relative_entropy;
use crate::error::{Error, Result};
use crate::measure::{ExpectOpts, Family, Measure, PdfFn};
use crate::nullspec::{geomspace, EVariable, GeneratedTag};
use crate::rootfind::brent;
use crate::solution::{GrowthReport, Numeraire, NumeraireSolution, SolverOptions};
use crate::verify::{Certificate, CheckResult};
use crate::xreal::XReal;
use std::sync::Arc;

fn check_unit_interval(q: &Measure) -> Result<()> {
    let ok = match q {
        Measure::Discrete(d) => d
            .support()
            .iter()
            .all(|&z| (-1e-12..=1.0 + 1e-12).contains(&z)),
        Measure::Density(d) => {
            let dom = d.domain();
            dom.lo >= -1e-12 && dom.hi <= 1.0 + 1e-12
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::DomainMismatch(
            "bounded-mean problems live on [0,1]".into(),
        ))
    }
}

fn foc_estimate(
    q: &Measure,
    mu: f64,
    lam: f64,
    opts: &SolverOptions,
) -> Result<crate::measure::SignedEstimate> {
    // The denominator is assembled as (1 - lam*mu) + lam*z: both addends are
    // nonnegative on [0,1], while the textbook 1 + lam*(z - mu) cancels
    // catastrophically as lam approaches 1/mu and drowns the quadrature in
    // rounding noise.
    let c = 1.0 - lam * mu;
    let f = move |z: f64| (z - mu) / (c + lam * z);
    q.expect_signed(
        &f,
        &ExpectOpts {
            acc: opts.acc,
            budget: opts.budget,
            knots: vec![0.0, mu, 1.0],
            ..ExpectOpts::default()
        },
    )
}

/// First-order condition value `E_Q[(Z - mu) / (1 + lam (Z - mu))]`.
pub fn bounded_mean_foc(q: &Measure, mu: f64, lam: f64, opts: &SolverOptions) -> Result<f64> {
    Ok(foc_estimate(q, mu, lam, opts)?.value)
}

/// Optimal wealth against all distributions on `[0,1]` with mean at most
/// `mu`. The slope solves the first-order condition; the optimum is
/// interior whenever the alternative mean exceeds the cap but not so
/// violently that the condition never crosses zero.
pub fn solve_bounded_mean(q: &Measure, mu: f64, opts: &SolverOptions) -> Result<NumeraireSolution> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(Error::UnsupportedNull(format!(
            "mean cap must lie in (0, 1/2), got {mu}"
        )));
    }
    check_unit_interval(q)?;
    if !q.is_probability(1e-6) {
        return Err(Error::InvalidMeasure(format!(
            "alternative has mass {}",
            q.total_mass()
        )));
    }

    let q_mean = q
        .expect(&|z| XReal::from(z.max(0.0)), opts.acc)?
        .value
        .value();

    let mut evals = 0usize;
    let mut lam_star = 0.0;
    let mut residual = 0.0;
    let mut notes = Vec::new();

    if q_mean <= mu + 1e-12 {
        // the alternative satisfies the null constraint itself
        notes.push(format!(
            "alternative mean {q_mean} within the cap; wealth is flat"
        ));
    } else {
        let hi = (1.0 / mu) * (1.0 - 1e-9);
        let mut foc = |lam: f64| {
            evals += 1;
            bounded_mean_foc(q, mu, lam, opts)
        };
        lam_star = brent(&mut foc, 0.0, hi, 1e-12, 200)?;
        let est = foc_estimate(q, mu, lam_star, opts)?;
        residual = est.value.abs();
        if est.abs_err * 10.0 >= opts.tol_foc {
            notes.push(format!(
                "quadrature error {:.2e} is within an order of magnitude of the \
                 target tolerance {:.2e}",
                est.abs_err, opts.tol_foc
            ));
        }
        if residual > opts.tol_foc {
            return Err(Error::NotConverged {
                iterations: evals,
                residual,
                last_weights: vec![lam_star],
                last_residuals: vec![residual],
            });
        }
    }
    if lam_star < 0.0 {
        lam_star = 0.0;
        residual = 0.0;
    }

    let lam = lam_star;
    let c = 1.0 - lam * mu;
    let payoff = move |z: f64| {
        if !(0.0..=1.0).contains(&z) {
            return f64::NEG_INFINITY;
        }
        let v = c + lam * z;
        if v > 0.0 {
            v.ln()
        } else {
            f64::NEG_INFINITY
        }
    };
    let numeraire = Numeraire::from_log(Arc::new(payoff));

    let ripr = bounded_mean_ripr(q, mu, lam)?;
    let eopts = ExpectOpts {
        acc: opts.acc,
        budget: opts.budget,
        knots: vec![0.0, mu, 1.0],
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
        iterations: evals,
        residual,
        residuals: vec![],
        parameter: Some(lam_star),
        notes,
    })
}

fn bounded_mean_ripr(q: &Measure, mu: f64, lam: f64) -> Result<Measure> {
    let c = 1.0 - lam * mu;
    let x = move |z: f64| c + lam * z;
    match q {
        Measure::Discrete(qd) => {
            let support = qd.support().to_vec();
            let mass: Vec<f64> = support
                .iter()
                .zip(qd.masses())
                .map(|(&z, &m)| {
                    let xv = x(z);
                    if m > 0.0 && xv > 0.0 {
                        m / xv
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
                let xv = x(z);
                let qv = qa.pdf(z);
                if qv > 0.0 && xv > 0.0 {
                    qv / xv
                } else {
                    0.0
                }
            });
            let qb = qd.clone();
            let log_pdf: PdfFn = Arc::new(move |z| {
                let xv = x(z);
                if xv > 0.0 {
                    qb.log_pdf(z) - xv.ln()
                } else {
                    f64::NEG_INFINITY
                }
            });
            Measure::density_fn(pdf, Some(log_pdf), qd.domain(), &[0.0, mu, 1.0])
        }
    }
}

/// Optimal wealth of `N(m, sigma^2)` against the sub-Gaussian class with
/// scale `sigma`: the exponential tilt `exp(t z - t^2 sigma^2 / 2)` with
/// `t = m / sigma^2`. The projection is exactly `N(0, sigma^2)`.
pub fn solve_subgaussian(q: &Measure, sigma: f64, opts: &SolverOptions) -> Result<NumeraireSolution> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::UnsupportedNull(format!("bad scale {sigma}")));
    }
    let (m, sd) = match q.as_density().and_then(|d| d.family()) {
        Some(Family::Normal { mean, sd }) => (mean, sd),
        _ => {
            return Err(Error::UnsupportedNull(
                "the sub-gaussian solver needs a gaussian alternative".into(),
            ))
        }
    };
    if (sd - sigma).abs() > 1e-12 {
        return Err(Error::UnsupportedNull(format!(
            "alternative scale {sd} must match the class scale {sigma}"
        )));
    }

    let t = m / (sigma * sigma);
    let shift = 0.5 * t * t * sigma * sigma;
    let payoff = move |z: f64| t * z - shift;
    let numeraire = Numeraire::from_log(Arc::new(payoff));

    let ripr = Measure::family(Family::Normal {
        mean: 0.0,
        sd: sigma,
    })?;

    let eopts = ExpectOpts {
        acc: opts.acc,
        budget: opts.budget,
        knots: vec![0.0, m, t * sigma * sigma],
        ..ExpectOpts::default()
    };
    let n = numeraire.clone();
    let lw = q.expect_signed(&move |z: f64| n.log_value(z), &eopts)?.value;
    let h = relative_entropy(q, &ripr, &eopts)?;

    let mut notes = vec![format!("closed-form tilt t = {t}")];
    if m == 0.0 {
        notes.push("alternative is the class center; wealth is flat".into());
    }

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
        parameter: Some(t),
        notes,
    })
}

/// Log payoff of the generator at parameter `lam` for a generated null.
fn generator_log(tag: &GeneratedTag, lam: f64) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    match tag {
        GeneratedTag::BoundedMean { mu } => {
            let c = 1.0 - lam * mu;
            Arc::new(move |z: f64| {
                if !(0.0..=1.0).contains(&z) {
                    return f64::NEG_INFINITY;
                }
                let v = c + lam * z;
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
        }
        GeneratedTag::SubGaussian { sigma } => {
            let s2 = sigma * sigma;
            Arc::new(move |z: f64| lam * z - 0.5 * lam * lam * s2)
        }
        GeneratedTag::Custom { .. } => unreachable!("custom generators carry their own payoffs"),
    }
}

/// Check a candidate wealth function against a generated null: the inverse
/// must price to one under the alternative, and every generator must be
/// priced at most one. Passing certifies optimality up to the coverage of
/// the parameter grid, which the certificate reports.
pub fn certify_generated(
    x: &EVariable,
    tag: &GeneratedTag,
    q: &Measure,
    grid: &[f64],
    tol: f64,
) -> Result<Certificate> {
    let mut checks = Vec::new();

    // the candidate must be strictly positive where the alternative lives
    let probe_points: Vec<f64> = match q {
        Measure::Discrete(d) => d
            .support()
            .iter()
            .zip(d.masses())
            .filter(|(_, &m)| m > 0.0)
            .map(|(&z, _)| z)
            .collect(),
        Measure::Density(_) => {
            let mut pts = Vec::new();
            for i in 0..41 {
                let u = 1e-6 + (1.0 - 2e-6) * i as f64 / 40.0;
                if let Some(z) = q.quantile(u) {
                    pts.push(z);
                }
            }
            pts
        }
    };
    let mut dead = None;
    for &z in &probe_points {
        if x.value(z) == XReal::ZERO {
            dead = Some(z);
            break;
        }
    }
    checks.push(CheckResult {
        name: format!("positivity: {} > 0 on the evaluation grid", x.label),
        residual: if dead.is_some() { 1.0 } else { 0.0 },
        tol,
        pass: dead.is_none(),
        witness: match dead {
            Some(z) => format!("vanishes at z = {z}"),
            None => format!("{} points checked", probe_points.len()),
        },
    });

    let eopts = ExpectOpts {
        knots: x.knots.clone(),
        ..ExpectOpts::default()
    };
    let lx = x.log_payoff();
    let inv = q.expect_log(&|z: f64| -lx(z), &eopts)?;
    let inv_v = if inv.value.is_infinite() {
        f64::INFINITY
    } else {
        inv.value.value()
    };
    checks.push(CheckResult {
        name: format!("unit price of the inverse: E_Q[1/{}] = 1", x.label),
        residual: (inv_v - 1.0).abs(),
        tol,
        pass: (inv_v - 1.0).abs() <= tol,
        witness: format!("E_Q[1/X] = {inv_v}"),
    });

    // every generator priced at most one
    let default_grid;
    let lams: &[f64] = if grid.is_empty() {
        default_grid = geomspace(1e-4, 50.0, 64);
        &default_grid
    } else {
        grid
    };
    let (gens, coverage): (Vec<(String, Arc<dyn Fn(f64) -> f64 + Send + Sync>, Vec<f64>)>, String) =
        match tag {
            GeneratedTag::Custom { generators } => (
                generators
                    .iter()
                    .map(|g| (g.label.clone(), g.log_payoff(), g.knots.clone()))
                    .collect(),
                format!("{} explicit generators", generators.len()),
            ),
            GeneratedTag::BoundedMean { mu } => {
                let cap = 1.0 / mu;
                let mut ls: Vec<f64> = lams.iter().copied().filter(|&l| l < cap).collect();
                ls.push(cap);
                let n = ls.len();
                (
                    ls.iter()
                        .map(|&l| {
                            (
                                format!("1 + {l:.6}(Z - mu)"),
                                generator_log(tag, l),
                                vec![0.0, *mu, 1.0],
                            )
                        })
                        .collect(),
                    format!("{n} slopes in (0, {cap:.6}]"),
                )
            }
            GeneratedTag::SubGaussian { sigma } => (
                lams.iter()
                    .map(|&l| {
                        (
                            format!("tilt {l:.6}"),
                            generator_log(tag, l),
                            vec![0.0, l * sigma * sigma],
                        )
                    })
                    .collect(),
                format!(
                    "{} tilts in [{:.3e}, {:.3e}]",
                    lams.len(),
                    lams.iter().copied().fold(f64::INFINITY, f64::min),
                    lams.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                ),
            ),
        };

    let mut worst = f64::NEG_INFINITY;
    let mut worst_label = String::new();
    for (label, lgen, knots) in &gens {
        let mut k = x.knots.clone();
        k.extend_from_slice(knots);
        let eopts = ExpectOpts {
            knots: k,
            ..ExpectOpts::default()
        };
        let lg = Arc::clone(lgen);
        let lx = x.log_payoff();
        let e = q.expect_log(
            &move |z: f64| {
                let a = lg(z);
                if a == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                a - lx(z)
            },
            &eopts,
        )?;
        let v = if e.value.is_infinite() {
            f64::INFINITY
        } else {
            e.value.value()
        };
        if v - 1.0 > worst {
            worst = v - 1.0;
            worst_label = label.clone();
        }
    }
    checks.push(CheckResult {
        name: format!("generators priced at most 1 through {}", x.label),
        residual: worst,
        tol,
        pass: worst <= tol,
        witness: format!("worst: {worst_label}; coverage: {coverage}"),
    });

    Ok(Certificate::from_checks(checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Closed-form first-order condition for the uniform alternative:
    /// log((1 + (1-mu) lam) / (1 - mu lam)) = lam, solved by bisection.
    fn uniform_slope_oracle(mu: f64) -> f64 {
        // g ~ -0.2 lam^2 near zero, then climbs to +inf at the mass cap
        let g = |lam: f64| ((1.0 + (1.0 - mu) * lam) / (1.0 - mu * lam)).ln() - lam;
        let mut lo = 1e-3;
        let mut hi = (1.0 / mu) * (1.0 - 1e-12);
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn uniform_solution() -> (Measure, NumeraireSolution) {
        let q = Measure::family(Family::Uniform { a: 0.0, b: 1.0 }).unwrap();
        let sol = solve_bounded_mean(&q, 0.3, &SolverOptions::default()).unwrap();
        (q, sol)
    }

    #[test]
    fn uniform_alternative_matches_transcendental_root() {
        let (q, sol) = uniform_solution();
        let lam = sol.parameter.unwrap();
        let oracle = uniform_slope_oracle(0.3);
        assert_abs_diff_eq!(lam, oracle, epsilon = 1e-8);
        assert_abs_diff_eq!(lam, 2.67, epsilon = 0.01);

        // interior optimum: the projected mass is exactly 1
        assert_abs_diff_eq!(sol.ripr.total_mass(), 1.0, epsilon = 1e-8);
        let inv = q
            .expect(
                &|z| XReal::from(1.0 / (1.0 + lam * (z - 0.3))),
                1e-10,
            )
            .unwrap();
        assert_abs_diff_eq!(inv.value.value(), 1.0, epsilon = 1e-9);

        assert_abs_diff_eq!(
            sol.growth.log_wealth,
            sol.growth.entropy,
            epsilon = 1e-8
        );
        assert!(sol.growth.log_wealth > 0.0);
        assert_abs_diff_eq!(
            sol.numeraire.value(1.0).value(),
            1.0 + lam * 0.7,
            epsilon = 1e-12
        );
    }

    #[test]
    fn compliant_alternative_needs_no_bet() {
        let q = Measure::family(Family::Uniform { a: 0.0, b: 0.5 }).unwrap();
        let sol = solve_bounded_mean(&q, 0.3, &SolverOptions::default()).unwrap();
        assert_eq!(sol.parameter.unwrap(), 0.0);
        assert_abs_diff_eq!(sol.numeraire.value(0.25).value(), 1.0);
        assert_abs_diff_eq!(sol.growth.log_wealth, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn no_interior_root_is_a_bracket_failure() {
        // all mass sits above the cap, so the first-order condition is
        // positive on the whole bracket
        let q = Measure::discrete(vec![0.9, 1.0], vec![0.5, 0.5]).unwrap();
        match solve_bounded_mean(&q, 0.3, &SolverOptions::default()) {
            Err(Error::BracketFailure(msg)) => assert!(msg.contains("no sign change"), "{msg}"),
            other => panic!("expected a bracket failure, got {other:?}"),
        }
    }

    #[test]
    fn mean_cap_range_is_enforced() {
        let q = Measure::family(Family::Uniform { a: 0.0, b: 1.0 }).unwrap();
        for mu in [0.0, 0.5, 0.6, -0.1] {
            assert!(matches!(
                solve_bounded_mean(&q, mu, &SolverOptions::default()),
                Err(Error::UnsupportedNull(_))
            ));
        }
    }

    #[test]
    fn discrete_alternative_interior_root() {
        let q = Measure::discrete(vec![0.0, 1.0], vec![0.4, 0.6]).unwrap();
        let mu = 0.3;
        let sol = solve_bounded_mean(&q, mu, &SolverOptions::default()).unwrap();
        let lam = sol.parameter.unwrap();
        // E[(Z-mu)/(1+lam(Z-mu))] = 0 has an explicit solution here
        let foc =
            0.4 * (-mu) / (1.0 - lam * mu) + 0.6 * (1.0 - mu) / (1.0 + lam * (1.0 - mu));
        assert_abs_diff_eq!(foc, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.ripr.total_mass(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_off_interval_alternatives() {
        let q = Measure::family(Family::Normal { mean: 0.5, sd: 1.0 }).unwrap();
        assert!(matches!(
            solve_bounded_mean(&q, 0.3, &SolverOptions::default()),
            Err(Error::DomainMismatch(_))
        ));
    }

    #[test]
    fn expected_log_wealth_peaks_at_the_solved_slope() {
        let (q, sol) = uniform_solution();
        let lam = sol.parameter.unwrap();
        let growth = |l: f64| {
            q.expect_signed(
                &move |z: f64| (1.0 + l * (z - 0.3)).ln(),
                &ExpectOpts {
                    knots: vec![0.0, 0.3, 1.0],
                    ..ExpectOpts::default()
                },
            )
            .unwrap()
            .value
        };
        let at = growth(lam);
        assert!(growth(lam - 1e-3) < at);
        assert!(growth(lam + 1e-3) < at);
    }

    #[test]
    fn every_intermediate_slope_prices_to_one() {
        let (q, sol) = uniform_solution();
        let mu = 0.3;
        for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let n = sol.numeraire.clone();
            let l = frac / mu;
            let e = q
                .expect_log(
                    &move |z: f64| {
                        let v = 1.0 + l * (z - mu);
                        if v > 0.0 {
                            v.ln() - n.log_value(z)
                        } else {
                            f64::NEG_INFINITY
                        }
                    },
                    &ExpectOpts {
                        knots: vec![0.0, mu, 1.0],
                        ..ExpectOpts::default()
                    },
                )
                .unwrap();
            assert_abs_diff_eq!(e.value.value(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn projection_obeys_the_mean_cap() {
        let (_, sol) = uniform_solution();
        let mu = 0.3;
        // every generator is priced at most one by the projection; the
        // steepest one, Z/mu, pins the projected mean at the cap
        let mean = sol
            .ripr
            .expect(&|z: f64| XReal::from(z.max(0.0)), 1e-10)
            .unwrap()
            .value
            .value();
        assert!(mean <= mu + 1e-8, "projected mean {mean} above {mu}");
        assert_abs_diff_eq!(mean, mu, epsilon = 1e-6);
    }

    #[test]
    fn certificate_accepts_the_bounded_mean_solution() {
        let (q, sol) = uniform_solution();
        let x = EVariable::from_numeraire("X*", &sol.numeraire, vec![0.0, 0.3, 1.0]);
        let tag = GeneratedTag::BoundedMean { mu: 0.3 };
        let cert = certify_generated(&x, &tag, &q, &[], 1e-7).unwrap();
        assert!(cert.overall_pass, "{cert:?}");
    }

    #[test]
    fn certificate_rejects_the_half_coin_candidate() {
        // a candidate worth 2 at 0 and 1/2 at 1 under a point alternative:
        // its inverse prices to 1/2, not 1, so it cannot be optimal
        let x = EVariable::from_fn(
            "X0",
            Arc::new(|z: f64| {
                if z == 0.0 {
                    XReal::from(2.0)
                } else {
                    XReal::from(0.5)
                }
            }),
            vec![0.0, 1.0],
        );
        let q = Measure::dirac(0.0);
        let tag = GeneratedTag::Custom {
            generators: vec![x.clone()],
        };
        let cert = certify_generated(&x, &tag, &q, &[], 1e-7).unwrap();
        assert!(!cert.overall_pass);
        let inv_check = &cert.checks[1];
        assert_abs_diff_eq!(inv_check.residual, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tilt_solution_is_exact() {
        let m = 0.7;
        let q = Measure::family(Family::Normal { mean: m, sd: 1.0 }).unwrap();
        let sol = solve_subgaussian(&q, 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(sol.parameter.unwrap(), m);

        for z in [-2.0, 0.0, 1.5] {
            assert_abs_diff_eq!(
                sol.numeraire.log_value(z),
                m * z - m * m / 2.0,
                epsilon = 1e-15
            );
        }

        // growth and entropy both equal m^2/2
        assert_abs_diff_eq!(sol.growth.log_wealth, m * m / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.growth.entropy, m * m / 2.0, epsilon = 1e-8);

        // the projection is the class center and prices the wealth at 1
        let payoff = sol.numeraire.payoff();
        let e = sol.ripr.expect(payoff.as_ref(), 1e-10).unwrap();
        assert_abs_diff_eq!(e.value.value(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn every_tilt_prices_to_one_through_the_solution() {
        let q = Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap();
        let sol = solve_subgaussian(&q, 1.0, &SolverOptions::default()).unwrap();
        for lam in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let n = sol.numeraire.clone();
            let e = q
                .expect_log(
                    &move |z: f64| lam * z - 0.5 * lam * lam - n.log_value(z),
                    &ExpectOpts {
                        knots: vec![0.0, lam, 1.0],
                        ..ExpectOpts::default()
                    },
                )
                .unwrap();
            assert_abs_diff_eq!(e.value.value(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn certificate_accepts_the_tilt_on_the_default_grid() {
        let q = Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap();
        let sol = solve_subgaussian(&q, 1.0, &SolverOptions::default()).unwrap();
        let x = EVariable::from_numeraire("tilt", &sol.numeraire, vec![0.0, 1.0]);
        let tag = GeneratedTag::SubGaussian { sigma: 1.0 };
        let cert = certify_generated(&x, &tag, &q, &[], 1e-7).unwrap();
        assert!(cert.overall_pass, "{cert:?}");
    }

    #[test]
    fn tilt_scales_with_variance() {
        let q = Measure::family(Family::Normal { mean: 1.0, sd: 2.0 }).unwrap();
        let sol = solve_subgaussian(&q, 2.0, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.parameter.unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.growth.log_wealth, 1.0 / 8.0, epsilon = 1e-9);
    }

    #[test]
    fn subgaussian_rejects_mismatched_alternatives() {
        let cauchy = Measure::family(Family::Cauchy {
            location: 0.0,
            scale: 1.0,
        })
        .unwrap();
        assert!(solve_subgaussian(&cauchy, 1.0, &SolverOptions::default()).is_err());
        let wrong_scale = Measure::family(Family::Normal { mean: 0.5, sd: 2.0 }).unwrap();
        assert!(solve_subgaussian(&wrong_scale, 1.0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn centered_alternative_is_flat() {
        let q = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let sol = solve_subgaussian(&q, 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(sol.numeraire.value(3.0), XReal::ONE);
        assert_abs_diff_eq!(sol.growth.log_wealth, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn vanishing_mean_approaches_flat_wealth() {
        let q = Measure::family(Family::Normal { mean: 1e-8, sd: 1.0 }).unwrap();
        let sol = solve_subgaussian(&q, 1.0, &SolverOptions::default()).unwrap();
        let mut z = -10.0;
        while z <= 10.0 {
            assert!((sol.numeraire.value(z).value() - 1.0).abs() <= 1.05e-7);
            z += 0.25;
        }
    }
}
