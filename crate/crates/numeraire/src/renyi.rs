//! Power-utility optimal wealth and the order-`1/gamma` projection.
//!
//! For gamma in (1, 1e4], the target functional is
//! `g(w) = E_Q[(p_w / q)^(1 - 1/gamma)]`, concave in the mixture weights.
//! It is maximised by projected gradient ascent with Armijo backtracking;
//! the Frank-Wolfe gap `max_i grad_i - <grad, w>` certifies first-order
//! optimality on the simplex. Everything else follows in closed form from
//! the maximising mixture `p_w` and the attained power mean `m`:
//! the optimal wealth is `(q/p_w)^(1/gamma) / m`, the projection is `p_w`
//! restricted to the alternative's support, and the normalizer is `m^gamma`.
//!
//! The alternative must be dominated by the null hull: the power mean is an
//! integral against `Q`, so mass outside every component is invisible to it
//! and would silently bias the optimum. Such instances are rejected.

use crate::divergence::renyi_divergence;
use crate::error::{Error, Result};
use crate::finite::{component_knots, MixtureEval};
use crate::measure::{ExpectOpts, Measure, PdfFn};
use crate::nullspec::{is_evariable, EVariable, EvarOpts, NullHypothesis};
use crate::simplex::project_to_simplex;
use crate::solution::{RenyiSolution, SolverOptions};
use crate::verify::{Certificate, CheckResult};
use crate::xreal::{log_ratio, XReal};
use std::sync::Arc;

pub const GAMMA_MAX: f64 = 1e4;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 1.0 && gamma <= GAMMA_MAX && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "order must lie in (1, {GAMMA_MAX:.0}], got {gamma}"
        )))
    }
}

fn finite_components(null: &NullHypothesis) -> Result<&[Measure]> {
    match null {
        NullHypothesis::FiniteMixture { components } => Ok(components),
        other => Err(Error::UnsupportedNull(format!(
            "the power-utility solver needs an explicit component list, got: {}",
            other.describe()
        ))),
    }
}

/// The alternative must put no mass where every component vanishes.
fn check_absolute_continuity(q: &Measure, components: &[Measure]) -> Result<()> {
    match q {
        Measure::Discrete(qd) => {
            for (&z, &m) in qd.support().iter().zip(qd.masses()) {
                if m > 0.0 && !components.iter().any(|c| c.mass_at(z) > 0.0) {
                    return Err(Error::NotAbsolutelyContinuous(format!(
                        "alternative atom at {z} (mass {m}) is outside every null component"
                    )));
                }
            }
            Ok(())
        }
        Measure::Density(_) => {
            let dens: Vec<Measure> = components
                .iter()
                .filter(|c| matches!(c, Measure::Density(_)))
                .cloned()
                .collect();
            if dens.is_empty() {
                return Err(Error::NotAbsolutelyContinuous(
                    "a density alternative cannot be dominated by atoms".into(),
                ));
            }
            let (covered, holes) = crate::lebesgue::density_coverage(q, &dens)?;
            if covered < q.total_mass() - 1e-6 {
                return Err(Error::NotAbsolutelyContinuous(format!(
                    "alternative mass {:.3e} escapes every component (uncovered: {})",
                    q.total_mass() - covered,
                    holes
                        .iter()
                        .map(|s| format!("({}, {})", s.lo, s.hi))
                        .collect::<Vec<_>>()
                        .join(" u ")
                )));
            }
            Ok(())
        }
    }
}

struct Objective<'a> {
    q: &'a Measure,
    components: &'a [Measure],
    alpha: f64, // 1 - 1/gamma
    discrete: bool,
    knots: Vec<f64>,
    eopts: ExpectOpts,
}

impl<'a> Objective<'a> {
    fn new(q: &'a Measure, components: &'a [Measure], gamma: f64, opts: &SolverOptions) -> Self {
        let mut knots = component_knots(components);
        knots.extend(component_knots(std::slice::from_ref(q)));
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let eopts = ExpectOpts {
            acc: opts.acc,
            budget: opts.budget,
            knots: knots.clone(),
            ..ExpectOpts::default()
        };
        Objective {
            q,
            components,
            alpha: 1.0 - 1.0 / gamma,
            discrete: matches!(q, Measure::Discrete(_)),
            knots,
            eopts,
        }
    }

    /// `g(w) = E_Q[(p_w/q)^alpha]`, always in `[0, 1]`.
    fn value(&self, w: &[f64]) -> Result<f64> {
        let mix = MixtureEval::new(self.components, w, self.discrete);
        let alpha = self.alpha;
        let discrete = self.discrete;
        let qc = self.q.clone();
        let f = move |z: f64| {
            let lq = log_q(&qc, discrete, z);
            if lq == f64::NEG_INFINITY {
                return XReal::ZERO;
            }
            XReal::exp(alpha * (mix.log_value(z) - lq))
        };
        let e = self.q.expect_with(&f, &self.eopts)?;
        Ok(e.value.value().min(1.0 + 1e-9))
    }

    /// Gradient `alpha E_Q[(p_w/q)^(alpha-1) p_i/q]`. Entries may be huge
    /// at the simplex boundary; they are capped so the ascent direction
    /// stays usable.
    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mix = MixtureEval::new(self.components, w, self.discrete);
        let mut out = Vec::with_capacity(self.components.len());
        for c in self.components {
            let alpha = self.alpha;
            let discrete = self.discrete;
            let qc = self.q.clone();
            let cc = c.clone();
            let mixc = mix.clone();
            let f = move |z: f64| {
                let lq = log_q(&qc, discrete, z);
                if lq == f64::NEG_INFINITY {
                    return XReal::ZERO;
                }
                let lpi = log_q(&cc, discrete, z);
                if lpi == f64::NEG_INFINITY {
                    return XReal::ZERO;
                }
                XReal::exp((alpha - 1.0) * (mixc.log_value(z) - lq) + lpi - lq)
            };
            let e = self.q.expect_with(&f, &self.eopts)?;
            let gi = if e.value.is_infinite() {
                1e50
            } else {
                self.alpha * e.value.value()
            };
            out.push(gi);
        }
        Ok(out)
    }
}

fn log_q(m: &Measure, discrete: bool, z: f64) -> f64 {
    if discrete {
        let v = m.mass_at(z);
        if v > 0.0 {
            v.ln()
        } else {
            f64::NEG_INFINITY
        }
    } else {
        m.log_pdf(z)
    }
}

fn fw_gap(grad: &[f64], w: &[f64]) -> f64 {
    let best = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cur: f64 = grad.iter().zip(w).map(|(g, x)| g * x).sum();
    best - cur
}

/// `E_Q[(p_w/q)^(1-1/gamma)]` at arbitrary weights: the quantity the
/// solver ascends, exposed for oracle checks.
pub fn power_mean_at(
    q: &Measure,
    null: &NullHypothesis,
    gamma: f64,
    weights: &[f64],
    opts: &SolverOptions,
) -> Result<f64> {
    check_gamma(gamma)?;
    let components = finite_components(null)?;
    if weights.len() != components.len() {
        return Err(Error::Precondition(format!(
            "{} weights for {} components",
            weights.len(),
            components.len()
        )));
    }
    Objective::new(q, components, gamma, opts).value(weights)
}

/// Optimal power-utility wealth against a single null distribution.
pub fn renyi_point_null(
    q: &Measure,
    p0: &Measure,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<RenyiSolution> {
    check_gamma(gamma)?;
    if !q.is_probability(1e-6) || !p0.is_probability(1e-6) {
        return Err(Error::InvalidMeasure(
            "both the alternative and the null member must be probabilities".into(),
        ));
    }
    let components = std::slice::from_ref(p0);
    check_absolute_continuity(q, components)?;
    let obj = Objective::new(q, components, gamma, opts);
    let m = obj.value(&[1.0])?;
    assemble(q, components, vec![1.0], gamma, m, 0, 0.0, vec![], opts)
}

/// Optimal power-utility wealth against the hull of a finite null.
pub fn solve_renyi_finite(
    q: &Measure,
    null: &NullHypothesis,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<RenyiSolution> {
    check_gamma(gamma)?;
    null.validate()?;
    let components = finite_components(null)?;
    if !q.is_probability(1e-6) {
        return Err(Error::InvalidMeasure(format!(
            "alternative has mass {}",
            q.total_mass()
        )));
    }
    check_absolute_continuity(q, components)?;

    let obj = Objective::new(q, components, gamma, opts);
    let k = components.len();
    let mut w = match &opts.init_weights {
        Some(init) if init.len() == k => project_to_simplex(init),
        _ => vec![1.0 / k as f64; k],
    };

    let mut iterations = 0usize;
    let mut gap = 0.0;
    let mut notes = Vec::new();

    if k == 1 {
        w = vec![1.0];
    } else {
        let mut g_cur = obj.value(&w)?;
        let cap = opts.max_iter.min(20_000);
        let mut converged = false;
        let mut step = 1.0f64;
        for it in 0..cap {
            let grad = obj.gradient(&w)?;
            gap = fw_gap(&grad, &w);
            iterations = it;
            if gap <= opts.tol_foc {
                converged = true;
                break;
            }
            // Armijo backtracking on the projected step
            let mut accepted = false;
            let mut s = (step * 4.0).min(1e6);
            for _ in 0..60 {
                let cand: Vec<f64> = w
                    .iter()
                    .zip(&grad)
                    .map(|(&wi, &gi)| wi + s * gi)
                    .collect();
                let cand = project_to_simplex(&cand);
                let lin: f64 = cand
                    .iter()
                    .zip(&w)
                    .zip(&grad)
                    .map(|((c, x), g)| (c - x) * g)
                    .sum();
                if lin <= 0.0 {
                    s *= 0.5;
                    continue;
                }
                let g_cand = obj.value(&cand)?;
                if g_cand >= g_cur + 1e-4 * lin {
                    w = cand;
                    g_cur = g_cand;
                    step = s;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                // no ascent step left at this resolution
                if gap <= opts.tol_foc * 100.0 {
                    converged = true;
                    notes.push(format!("stopped on stalled line search, gap {gap:.3e}"));
                    break;
                }
                return Err(Error::NotConverged {
                    iterations: it,
                    residual: gap,
                    last_weights: w,
                    last_residuals: grad,
                });
            }
        }
        if !converged {
            let grad = obj.gradient(&w)?;
            return Err(Error::NotConverged {
                iterations: cap,
                residual: fw_gap(&grad, &w),
                last_weights: w,
                last_residuals: grad,
            });
        }
    }

    let m = obj.value(&w)?;
    assemble(q, components, w, gamma, m, iterations, gap, notes, opts)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    q: &Measure,
    components: &[Measure],
    w: Vec<f64>,
    gamma: f64,
    m: f64,
    iterations: usize,
    gap: f64,
    notes: Vec<String>,
    opts: &SolverOptions,
) -> Result<RenyiSolution> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Precondition(format!(
            "power mean degenerated to {m} despite the domination check"
        )));
    }
    let discrete = matches!(q, Measure::Discrete(_));
    let mix = MixtureEval::new(components, &w, discrete);

    let mut knots = component_knots(components);
    knots.extend(component_knots(std::slice::from_ref(q)));
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let qc = q.clone();
    let mix_x = mix.clone();
    let inv_gamma = 1.0 / gamma;
    let log_m = m.ln();
    let log_eval = Arc::new(move |z: f64| {
        let lq = log_q(&qc, discrete, z);
        if lq == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        inv_gamma * log_ratio(lq, mix_x.log_value(z)) - log_m
    });
    let evariable = EVariable::from_log("X*_gamma", log_eval, knots.clone());

    let projection = match q {
        Measure::Discrete(qd) => {
            let support = qd.support().to_vec();
            let mass: Vec<f64> = support
                .iter()
                .zip(qd.masses())
                .map(|(&z, &mq)| if mq > 0.0 { mix.value(z) } else { 0.0 })
                .collect();
            Measure::discrete(support, mass)?
        }
        Measure::Density(qd) => {
            let qa = qd.clone();
            let mix1 = mix.clone();
            let pdf: PdfFn = Arc::new(move |z| {
                if qa.pdf(z) > 0.0 {
                    mix1.value(z)
                } else {
                    0.0
                }
            });
            let qb = qd.clone();
            let mix2 = mix.clone();
            let log_pdf: PdfFn = Arc::new(move |z| {
                if qb.pdf(z) > 0.0 {
                    mix2.log_value(z)
                } else {
                    f64::NEG_INFINITY
                }
            });
            Measure::density_fn(pdf, Some(log_pdf), qd.domain(), &knots)?
        }
    };

    let eopts = ExpectOpts {
        acc: opts.acc,
        budget: opts.budget,
        knots,
        ..ExpectOpts::default()
    };
    let le = evariable.log_payoff();
    let normalizer = q
        .expect_log(&move |z: f64| (1.0 - gamma) * le(z), &eopts)?
        .value
        .value();
    let utility_value = normalizer / (1.0 - gamma);
    let divergence_value = renyi_divergence(q, &projection, 1.0 / gamma, &eopts)?;

    Ok(RenyiSolution {
        gamma,
        evariable,
        projection,
        mixture_weights: w,
        power_mean: m,
        normalizer,
        utility_value,
        divergence_value,
        iterations,
        fw_gap: gap,
        notes,
    })
}

/// First-order and duality checks for a power-utility solution. Probes for
/// the pricing inequality are the constant 1 and each component-to-mixture
/// ratio; a probe enters only after passing its own e-variable
/// certification, and rejected probes are reported, not failed.
pub fn renyi_certificate(
    sol: &RenyiSolution,
    q: &Measure,
    null: &NullHypothesis,
    tol: f64,
) -> Result<Certificate> {
    let components = finite_components(null)?;
    let gamma = sol.gamma;
    let discrete = matches!(q, Measure::Discrete(_));
    let mut checks = Vec::new();

    let evopts = EvarOpts {
        tol,
        knots: sol.evariable.knots.clone(),
        ..EvarOpts::default()
    };

    // the wealth itself must be fair against every null member
    let own = is_evariable(&sol.evariable, null, &evopts)?;
    let own_worst = own
        .checks
        .iter()
        .map(|c| c.residual)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(CheckResult {
        name: "the wealth is an e-variable for the null".into(),
        residual: own_worst,
        tol,
        pass: own.overall_pass,
        witness: own
            .checks
            .first()
            .map(|c| c.witness.clone())
            .unwrap_or_default(),
    });

    // pricing bound E_Q[(X*)^-gamma X] <= E_Q[(X*)^(1-gamma)] per probe
    let eopts = ExpectOpts {
        knots: sol.evariable.knots.clone(),
        ..ExpectOpts::default()
    };
    let lx = sol.evariable.log_payoff();
    let rhs = q
        .expect_log(&move |z: f64| (1.0 - gamma) * lx(z), &eopts)?
        .value
        .value();

    let mix = MixtureEval::new(components, &sol.mixture_weights, discrete);
    let mut probes: Vec<(String, Arc<dyn Fn(f64) -> f64 + Send + Sync>)> =
        vec![("1".into(), Arc::new(|_| 0.0))];
    let mut rejected = 0usize;
    for (i, c) in components.iter().enumerate() {
        let cc = c.clone();
        let mixc = mix.clone();
        let lp: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |z: f64| {
            let num = log_q(&cc, discrete, z);
            if num == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            num - mixc.log_value(z)
        });
        let probe = EVariable::from_log(
            format!("p_{i}/p_w"),
            Arc::clone(&lp),
            sol.evariable.knots.clone(),
        );
        match is_evariable(&probe, null, &evopts) {
            Ok(cert) if cert.overall_pass => probes.push((probe.label.clone(), lp)),
            _ => rejected += 1,
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_probe = String::new();
    for (label, lp) in &probes {
        let lx = sol.evariable.log_payoff();
        let lpc = Arc::clone(lp);
        let lhs = q
            .expect_log(
                &move |z: f64| {
                    let p = lpc(z);
                    if p == f64::NEG_INFINITY {
                        return f64::NEG_INFINITY;
                    }
                    -gamma * lx(z) + p
                },
                &eopts,
            )?
            .value
            .value();
        if lhs - rhs > worst {
            worst = lhs - rhs;
            worst_probe = label.clone();
        }
    }
    checks.push(CheckResult {
        name: "pricing bound E_Q[(X*)^-g X] <= E_Q[(X*)^(1-g)]".into(),
        residual: worst,
        tol,
        pass: worst <= tol,
        witness: format!(
            "worst probe: {worst_probe}; {} probes, {rejected} rejected as non-e-variables",
            probes.len()
        ),
    });

    // pointwise first-order identity dP*/dQ = (X*)^-gamma / normalizer
    let grid: Vec<f64> = match q {
        Measure::Discrete(d) => d
            .support()
            .iter()
            .zip(d.masses())
            .filter(|(_, &m)| m > 0.0)
            .map(|(&z, _)| z)
            .collect(),
        Measure::Density(_) => (0..101)
            .filter_map(|i| q.quantile(1e-6 + (1.0 - 2e-6) * i as f64 / 100.0))
            .collect(),
    };
    let mut worst_fo = 0.0f64;
    let mut worst_fo_z = f64::NAN;
    let mut worst_rec = 0.0f64;
    let mut worst_rec_z = f64::NAN;
    for &z in &grid {
        let qv = if discrete { q.mass_at(z) } else { q.pdf(z) };
        if qv <= 0.0 {
            continue;
        }
        let pv = if discrete {
            sol.projection.mass_at(z)
        } else {
            sol.projection.pdf(z)
        };
        let lxz = sol.evariable.log_value(z);
        let lhs = pv / qv;
        let rhs_fo = (-gamma * lxz).exp() / sol.normalizer;
        let d = (lhs - rhs_fo).abs();
        if d > worst_fo {
            worst_fo = d;
            worst_fo_z = z;
        }
        // recovery of the wealth from the projection
        if pv > 0.0 {
            let rec = (sol.normalizer * pv / qv).powf(-1.0 / gamma);
            let d2 = (sol.evariable.value(z).value() - rec).abs();
            if d2 > worst_rec {
                worst_rec = d2;
                worst_rec_z = z;
            }
        }
    }
    checks.push(CheckResult {
        name: "projection density matches (X*)^-gamma / normalizer".into(),
        residual: worst_fo,
        tol,
        pass: worst_fo <= tol,
        witness: format!("worst at z = {worst_fo_z}; {} grid points", grid.len()),
    });
    checks.push(CheckResult {
        name: "wealth recovered from the projection".into(),
        residual: worst_rec,
        tol,
        pass: worst_rec <= tol,
        witness: format!("worst at z = {worst_rec_z}"),
    });

    // duality: utility = (1/(1-g)) exp((1-g) divergence)
    let dual = (1.0 / (1.0 - gamma)) * ((1.0 - gamma) * sol.divergence_value).exp();
    let d21 = (sol.utility_value - dual).abs();
    checks.push(CheckResult {
        name: "power utility equals the divergence dual".into(),
        residual: d21,
        tol,
        pass: d21 <= tol,
        witness: format!("utility {}, dual {dual}", sol.utility_value),
    });

    checks.push(CheckResult {
        name: "normalizer at most 1".into(),
        residual: sol.normalizer - 1.0,
        tol,
        pass: sol.normalizer <= 1.0 + tol,
        witness: format!("E_Q[(X*)^(1-gamma)] = {}", sol.normalizer),
    });

    Ok(Certificate::from_checks(checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Family;
    use approx::assert_abs_diff_eq;

    fn finite(components: Vec<Measure>) -> NullHypothesis {
        NullHypothesis::FiniteMixture { components }
    }

    fn three_atom_q() -> Measure {
        Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.5, 0.3, 0.2]).unwrap()
    }

    fn three_atom_p0() -> Measure {
        Measure::discrete(vec![0.0, 1.0, 2.0], vec![1.0 / 3.0; 3]).unwrap()
    }

    /// Maximize `E_Q[U(X)]` over `X >= 0` on three atoms with
    /// `E_{P0}[X] = 1`, by scanning the two free coordinates; one nested
    /// refinement pass sharpens the winner.
    fn constrained_grid_oracle(q: &[f64], p0: &[f64], gamma: f64, step: f64) -> Vec<f64> {
        let util = |x: &[f64; 3]| -> f64 {
            // log-space: E_Q[U(x)] = -exp(LSE(ln q + (1-gamma) ln x)) / (gamma-1)
            let mut terms = [0.0f64; 3];
            for i in 0..3 {
                terms[i] = q[i].ln() + (1.0 - gamma) * x[i].ln();
            }
            let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
            -(mx + s.ln()).exp() / (gamma - 1.0)
        };
        let cap1 = 1.0 / p0[0];
        let cap2 = 1.0 / p0[1];
        let scan = |lo1: f64, hi1: f64, lo2: f64, hi2: f64, step: f64| -> [f64; 3] {
            let mut best = f64::NEG_INFINITY;
            let mut best_x = [1.0, 1.0, 1.0];
            let mut x1 = lo1.max(step);
            while x1 < hi1 {
                let mut x2 = lo2.max(step);
                while x2 < hi2 {
                    let rest = 1.0 - p0[0] * x1 - p0[1] * x2;
                    if rest > 0.0 {
                        let x3 = rest / p0[2];
                        let x = [x1, x2, x3];
                        let u = util(&x);
                        if u > best {
                            best = u;
                            best_x = x;
                        }
                    }
                    x2 += step;
                }
                x1 += step;
            }
            best_x
        };
        let coarse = scan(0.0, cap1, 0.0, cap2, step);
        scan(
            (coarse[0] - 2.0 * step).max(0.0),
            coarse[0] + 2.0 * step,
            (coarse[1] - 2.0 * step).max(0.0),
            coarse[1] + 2.0 * step,
            step / 100.0,
        )
        .to_vec()
    }

    #[test]
    fn point_null_gaussian_closed_form() {
        // m = int sqrt(q p0) = exp(-1/8) for unit shift; wealth is the
        // square-rooted likelihood ratio scaled back by m
        let q = Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap();
        let p0 = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let sol = renyi_point_null(&q, &p0, 2.0, &SolverOptions::default()).unwrap();

        let m_want = (-0.125f64).exp();
        assert_abs_diff_eq!(sol.power_mean, m_want, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.normalizer, m_want * m_want, epsilon = 1e-9);
        for z in [-1.0, 0.0, 2.0] {
            assert_abs_diff_eq!(
                sol.evariable.log_value(z),
                0.5 * z - 0.125,
                epsilon = 1e-9
            );
        }

        // order-1/2 divergence between unit-shifted gaussians is alpha/2 = 1/4
        assert_abs_diff_eq!(sol.divergence_value, 0.25, epsilon = 1e-7);
        let dual = -((1.0 - 2.0) * sol.divergence_value).exp();
        assert_abs_diff_eq!(sol.utility_value, dual, epsilon = 1e-8);
    }

    #[test]
    fn identical_pair_needs_no_bet() {
        let q = three_atom_q();
        let sol = renyi_point_null(&q, &q, 3.0, &SolverOptions::default()).unwrap();
        for z in [0.0, 1.0, 2.0] {
            assert_abs_diff_eq!(sol.evariable.value(z).value(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sol.divergence_value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.normalizer, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn three_atom_point_null_matches_the_constraint_scan() {
        let q = three_atom_q();
        let p0 = three_atom_p0();
        let sol = renyi_point_null(&q, &p0, 2.0, &SolverOptions::default()).unwrap();

        // closed form: X* = sqrt(q/p0) / E_P0[sqrt(q/p0)]
        let r = [1.5f64, 0.9, 0.6];
        let m: f64 = r.iter().map(|x| x.sqrt()).sum::<f64>() / 3.0;
        for (i, &z) in [0.0, 1.0, 2.0].iter().enumerate() {
            assert_abs_diff_eq!(
                sol.evariable.value(z).value(),
                r[i].sqrt() / m,
                epsilon = 1e-12
            );
        }

        let oracle = constrained_grid_oracle(&[0.5, 0.3, 0.2], &[1.0 / 3.0; 3], 2.0, 1e-3);
        for (i, &z) in [0.0, 1.0, 2.0].iter().enumerate() {
            assert_abs_diff_eq!(sol.evariable.value(z).value(), oracle[i], epsilon = 1e-3);
        }
    }

    #[test]
    fn huge_order_flattens_toward_the_constant_bet() {
        let q = three_atom_q();
        let p0 = three_atom_p0();
        let gamma = 1e3;
        let sol = renyi_point_null(&q, &p0, gamma, &SolverOptions::default()).unwrap();

        let oracle = constrained_grid_oracle(&[0.5, 0.3, 0.2], &[1.0 / 3.0; 3], gamma, 1e-3);
        let mut l1 = 0.0;
        for (i, (&z, &mq)) in [0.0, 1.0, 2.0].iter().zip(&[0.5, 0.3, 0.2]).enumerate() {
            let x = sol.evariable.value(z).value();
            assert_abs_diff_eq!(x, oracle[i], epsilon = 2e-3);
            l1 += mq * (x - 1.0).abs();
        }
        assert!(l1 <= 1e-2, "L1 distance to the flat bet is {l1}");
    }

    #[test]
    fn singleton_hull_agrees_with_the_point_null() {
        let q = three_atom_q();
        let p0 = Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let a = renyi_point_null(&q, &p0, 2.5, &SolverOptions::default()).unwrap();
        let b = solve_renyi_finite(&q, &finite(vec![p0]), 2.5, &SolverOptions::default()).unwrap();
        for z in [0.0, 1.0, 2.0] {
            assert_abs_diff_eq!(
                a.evariable.value(z).value(),
                b.evariable.value(z).value(),
                epsilon = 1e-8
            );
        }
        assert_abs_diff_eq!(a.utility_value, b.utility_value, epsilon = 1e-8);
    }

    #[test]
    fn member_alternative_is_flat_with_tight_pricing() {
        let comps = vec![Measure::dirac(0.0), Measure::dirac(1.0)];
        let q = Measure::discrete(vec![0.0, 1.0], vec![0.8, 0.2]).unwrap();
        let null = finite(comps);
        let sol = solve_renyi_finite(&q, &null, 2.0, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.power_mean, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.normalizer, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.mixture_weights[0], 0.8, epsilon = 1e-4);
        for z in [0.0, 1.0] {
            assert_abs_diff_eq!(sol.evariable.value(z).value(), 1.0, epsilon = 1e-4);
        }

        // both sides of the pricing bound sit at 1
        let gamma = sol.gamma;
        let lx = sol.evariable.log_payoff();
        let lhs = q
            .expect_log(&move |z: f64| -gamma * lx(z), &ExpectOpts::default())
            .unwrap()
            .value
            .value();
        let lx2 = sol.evariable.log_payoff();
        let rhs = q
            .expect_log(&move |z: f64| (1.0 - gamma) * lx2(z), &ExpectOpts::default())
            .unwrap()
            .value
            .value();
        assert_abs_diff_eq!(lhs, 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(rhs, 1.0, epsilon = 1e-4);

        let cert = renyi_certificate(&sol, &q, &null, 1e-4).unwrap();
        assert!(cert.overall_pass, "{cert:?}");
    }

    #[test]
    fn duality_identity_holds_off_the_hull() {
        let comps = vec![
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.7, 0.2, 0.1]).unwrap(),
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.1, 0.3, 0.6]).unwrap(),
        ];
        for gamma in [1.5, 2.0, 5.0] {
            let sol =
                solve_renyi_finite(&three_atom_q(), &finite(comps.clone()), gamma, &SolverOptions::default())
                    .unwrap();
            let dual = (1.0 / (1.0 - gamma)) * ((1.0 - gamma) * sol.divergence_value).exp();
            assert_abs_diff_eq!(sol.utility_value, dual, epsilon = 1e-8);
            assert!(
                sol.normalizer < 1.0 - 1e-6,
                "normalizer {} should be strictly inside",
                sol.normalizer
            );
            // utility can never beat the constant bet by less than it
            assert!(sol.utility_value >= 1.0 / (1.0 - gamma));
        }
    }

    #[test]
    fn ascent_is_monotone_along_accepted_steps() {
        let comps = vec![
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.7, 0.2, 0.1]).unwrap(),
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.1, 0.3, 0.6]).unwrap(),
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.3, 0.5, 0.2]).unwrap(),
        ];
        let q = three_atom_q();
        let null = finite(comps);
        let opts = SolverOptions::default();
        let mut prev = f64::NEG_INFINITY;
        for cap in 1..=10 {
            let capped = SolverOptions {
                max_iter: cap,
                ..SolverOptions::default()
            };
            let w = match solve_renyi_finite(&q, &null, 2.0, &capped) {
                Ok(sol) => sol.mixture_weights,
                Err(Error::NotConverged { last_weights, .. }) => last_weights,
                Err(e) => panic!("{e}"),
            };
            let g = power_mean_at(&q, &null, 2.0, &w, &opts).unwrap();
            assert!(g >= prev - 1e-12, "power mean fell from {prev} to {g}");
            prev = g;
        }
    }

    #[test]
    fn wealth_dominates_the_projection_ratio_when_strict() {
        let comps = vec![
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.7, 0.2, 0.1]).unwrap(),
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.1, 0.3, 0.6]).unwrap(),
        ];
        let q = three_atom_q();
        let sol =
            solve_renyi_finite(&q, &finite(comps), 2.0, &SolverOptions::default()).unwrap();
        assert!(sol.normalizer < 1.0);
        for z in [0.0, 1.0, 2.0] {
            let x = sol.evariable.value(z).value();
            let ratio = sol.projection.mass_at(z) / q.mass_at(z);
            let literature = ratio.powf(-1.0 / sol.gamma);
            assert!(x >= literature - 1e-12);
            assert!(x > literature + 1e-6, "should be strict at {z}");
        }
    }

    #[test]
    fn certificate_passes_at_the_optimum() {
        let comps = vec![
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.7, 0.2, 0.1]).unwrap(),
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.1, 0.3, 0.6]).unwrap(),
        ];
        let q = three_atom_q();
        let null = finite(comps);
        let sol = solve_renyi_finite(&q, &null, 2.0, &SolverOptions::default()).unwrap();
        let cert = renyi_certificate(&sol, &q, &null, 1e-5).unwrap();
        assert!(cert.overall_pass, "{cert:?}");

        // assembly identities hold far below the row tolerance
        let row = |prefix: &str| {
            cert.checks
                .iter()
                .find(|c| c.name.starts_with(prefix))
                .unwrap()
                .residual
        };
        assert!(row("projection density") <= 1e-10);
        assert!(row("wealth recovered") <= 1e-9);
        assert!(row("power utility") <= 1e-8);
    }

    #[test]
    fn certificate_rejects_a_stale_perturbation() {
        let comps = vec![
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.7, 0.2, 0.1]).unwrap(),
            Measure::discrete(vec![0.0, 1.0, 2.0], vec![0.1, 0.3, 0.6]).unwrap(),
        ];
        let q = three_atom_q();
        let null = finite(comps.clone());
        let base = solve_renyi_finite(&q, &null, 2.0, &SolverOptions::default()).unwrap();

        // bend the weights but keep the old power mean in the wealth and
        // normalizer: every internal identity still holds, yet the pricing
        // bound with the constant probe must now fail
        let mut w = base.mixture_weights.clone();
        let shift = 0.1f64.min(w[0]).min(1.0 - w[1]);
        w[0] -= shift;
        w[1] += shift;
        let mix = MixtureEval::new(&comps, &w, true);
        let qc = q.clone();
        let stale_m = base.power_mean;
        let log_m = stale_m.ln();
        let log_eval = Arc::new(move |z: f64| {
            let lq = log_q(&qc, true, z);
            if lq == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            0.5 * log_ratio(lq, mix.log_value(z)) - log_m
        });
        let mix2 = MixtureEval::new(&comps, &w, true);
        let projection = Measure::discrete(
            vec![0.0, 1.0, 2.0],
            vec![mix2.value(0.0), mix2.value(1.0), mix2.value(2.0)],
        )
        .unwrap();
        let bent = RenyiSolution {
            evariable: EVariable::from_log("bent", log_eval, base.evariable.knots.clone()),
            projection,
            mixture_weights: w,
            ..base
        };
        let cert = renyi_certificate(&bent, &q, &null, 1e-6).unwrap();
        assert!(!cert.overall_pass);
        let pricing = cert
            .checks
            .iter()
            .find(|c| c.name.starts_with("pricing bound"))
            .unwrap();
        assert!(!pricing.pass, "pricing bound unexpectedly held: {pricing:?}");
    }

    #[test]
    fn two_gaussians_under_cauchy_order_two() {
        let q = Measure::family(Family::Cauchy {
            location: 0.0,
            scale: 1.0,
        })
        .unwrap();
        let comps = vec![
            Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap(),
            Measure::family(Family::Normal { mean: -1.0, sd: 1.0 }).unwrap(),
        ];
        let sol =
            solve_renyi_finite(&q, &finite(comps), 2.0, &SolverOptions::default()).unwrap();
        // symmetry forces equal weights
        assert_abs_diff_eq!(sol.mixture_weights[0], 0.5, epsilon = 1e-5);
        assert!(sol.power_mean < 1.0);
        assert!(sol.power_mean > 0.0);
        assert!(sol.fw_gap <= 1e-7);

        // the wealth stays finite and positive on the whole line
        for z in [-20.0, -1.0, 0.0, 3.0, 20.0] {
            let v = sol.evariable.value(z);
            assert!(v.value() > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn rejects_bad_orders() {
        let q = Measure::dirac(0.0);
        let null = finite(vec![Measure::dirac(0.0)]);
        for gamma in [1.0, 0.5, 1e4 + 1.0, f64::INFINITY] {
            assert!(solve_renyi_finite(&q, &null, gamma, &SolverOptions::default()).is_err());
            assert!(
                renyi_point_null(&q, &Measure::dirac(0.0), gamma, &SolverOptions::default())
                    .is_err()
            );
        }
    }

    #[test]
    fn escaping_mass_is_rejected() {
        // an uncovered atom
        let q = Measure::dirac(1.0);
        let r = renyi_point_null(&q, &Measure::dirac(0.0), 2.0, &SolverOptions::default());
        assert!(matches!(r, Err(Error::NotAbsolutelyContinuous(_))));
        // a density against atoms
        let q = Measure::family(Family::Uniform { a: 0.0, b: 1.0 }).unwrap();
        let null = finite(vec![Measure::dirac(0.5)]);
        let r = solve_renyi_finite(&q, &null, 2.0, &SolverOptions::default());
        assert!(matches!(r, Err(Error::NotAbsolutelyContinuous(_))));
        // a density spilling past a boxed component
        let q = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let null = finite(vec![Measure::family(Family::Uniform { a: 0.0, b: 1.0 }).unwrap()]);
        let r = solve_renyi_finite(&q, &null, 2.0, &SolverOptions::default());
        assert!(matches!(r, Err(Error::NotAbsolutelyContinuous(_))));
    }

    #[test]
    fn large_order_approaches_sup_ratio_shape() {
        // as gamma grows the wealth flattens toward a bounded ratio
        let q = Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap();
        let p0 = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let sol = renyi_point_null(&q, &p0, 1e4, &SolverOptions::default()).unwrap();
        // log X* = (z - 1/2)/gamma - log m: nearly flat
        let spread = sol.evariable.log_value(3.0) - sol.evariable.log_value(-3.0);
        assert!(spread < 1e-3, "spread {spread}");
        assert!(sol.power_mean <= 1.0);
    }
}
