//! Optimal wealth against a finite set of null components.
//!
//! A discrete alternative is split first (see [`crate::lebesgue`]): wealth
//! is infinite on the part the null cannot reach, and the finite action
//! happens under the conditioned alternative. On the reachable part the
//! best mixture weights solve a concave problem attacked by a
//! multiplicative fixed point: each weight is scaled by the expected ratio
//! of its component to the current mixture. The update is monotone in the
//! objective, keeps the simplex invariant, and its fixed points are
//! exactly the first-order optima.
//!
//! `brute_force_numeraire` is an intentionally different algorithm (grid
//! scan plus pairwise golden-section descent on the entropy objective)
//! kept as an oracle for tests; it shares no iteration logic with the
//! fixed point.

use crate::error::{Error, Result};
use crate::lebesgue::{self, LebesgueDecomposition};
use crate::measure::{log_density_diff, ExpectOpts, Measure, PdfFn};
use crate::nullspec::NullHypothesis;
use crate::solution::{GrowthReport, Numeraire, NumeraireSolution, SolverOptions};
use crate::verify::{Certificate, CheckResult};
use crate::xreal::{log_ratio, XReal};
use std::sync::Arc;

/// Ratios are capped here before entering a multiplicative update.
const RATIO_CAP: f64 = 1e300;
/// Weights below this count as off the support for optimality checks.
const ACTIVE_FLOOR: f64 = 1e-12;

/// Weighted evaluation of a component list on a fixed carrier.
#[derive(Clone)]
pub struct MixtureEval {
    components: Vec<Measure>,
    weights: Vec<f64>,
    discrete: bool,
}

impl MixtureEval {
    pub fn new(components: &[Measure], weights: &[f64], discrete: bool) -> MixtureEval {
        assert_eq!(components.len(), weights.len());
        MixtureEval {
            components: components.to_vec(),
            weights: weights.to_vec(),
            discrete,
        }
    }

    /// Mixture mass (discrete carrier) or density (continuous carrier).
    pub fn value(&self, z: f64) -> f64 {
        let mut acc = 0.0;
        for (c, &w) in self.components.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            acc += w * if self.discrete { c.mass_at(z) } else { c.pdf(z) };
        }
        acc
    }

    /// Log of `value`, computed by log-sum-exp so tails do not underflow.
    pub fn log_value(&self, z: f64) -> f64 {
        let mut terms: Vec<f64> = Vec::with_capacity(self.weights.len());
        for (c, &w) in self.components.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let lv = if self.discrete {
                let m = c.mass_at(z);
                if m > 0.0 {
                    m.ln()
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                c.log_pdf(z)
            };
            if lv > f64::NEG_INFINITY {
                terms.push(w.ln() + lv);
            }
        }
        log_sum_exp(&terms)
    }

    /// `log(p_w(z) / p_i(z))`, each term cancelled pairwise against
    /// component `i` so the result stays finite and exact far beyond the
    /// point where the individual log-densities lose integer precision.
    /// `+inf` when component `i` puts no mass at `z`.
    pub fn log_over(&self, i: usize, z: f64) -> f64 {
        let mut terms: Vec<f64> = Vec::with_capacity(self.weights.len());
        for (c, &w) in self.components.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            terms.push(w.ln() + log_density_diff(c, &self.components[i], z));
        }
        log_sum_exp(&terms)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
    mx + s.ln()
}

/// Quadrature seed points taken from component shapes.
pub fn component_knots(components: &[Measure]) -> Vec<f64> {
    const LEVELS: [f64; 13] = [
        1e-9, 1e-6, 1e-3, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0 - 1e-3, 1.0 - 1e-6,
        1.0 - 1e-9,
    ];
    let mut out = Vec::new();
    for c in components {
        match c {
            Measure::Discrete(d) => out.extend_from_slice(d.support()),
            Measure::Density(d) => {
                if let Some(f) = d.family() {
                    out.extend(LEVELS.iter().map(|&u| f.quantile(u)));
                } else {
                    let dom = d.domain();
                    for v in [dom.lo, dom.hi] {
                        if v.is_finite() {
                            out.push(v);
                        }
                    }
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn is_discrete(m: &Measure) -> bool {
    matches!(m, Measure::Discrete(_))
}

fn finite_components(null: &NullHypothesis) -> Result<&[Measure]> {
    match null {
        NullHypothesis::FiniteMixture { components } => Ok(components),
        other => Err(Error::UnsupportedNull(format!(
            "the finite-null solver needs an explicit component list, got: {}",
            other.describe()
        ))),
    }
}

fn normalized_init(k: usize, opts: &SolverOptions) -> Result<Vec<f64>> {
    match &opts.init_weights {
        None => Ok(vec![1.0 / k as f64; k]),
        Some(w) => {
            if w.len() != k {
                return Err(Error::Precondition(format!(
                    "init weights have length {}, need {k}",
                    w.len()
                )));
            }
            if w.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                return Err(Error::Precondition("init weights must be >= 0".into()));
            }
            let s: f64 = w.iter().sum();
            if s <= 0.0 {
                return Err(Error::Precondition("init weights sum to zero".into()));
            }
            Ok(w.iter().map(|x| x / s).collect())
        }
    }
}

/// Expected component-to-mixture ratios `E_Q[p_i / p_w]` under `q`.
pub fn component_ratios(
    q: &Measure,
    components: &[Measure],
    weights: &[f64],
    knots: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let discrete = is_discrete(q);
    let mix = MixtureEval::new(components, weights, discrete);
    let eopts = ExpectOpts {
        acc: opts.acc,
        budget: opts.budget,
        knots: knots.to_vec(),
        ..ExpectOpts::default()
    };
    let mut out = Vec::with_capacity(components.len());
    for (i, c) in components.iter().enumerate() {
        let c = c.clone();
        let mixc = mix.clone();
        // Ratios are assembled in log space with pairwise cancellation: far
        // in the tails the linear densities underflow one after the other,
        // and past |z| ~ 1e8 even the log-densities of a gaussian round too
        // coarsely for the direct difference to mean anything.
        let f = move |z: f64| {
            if discrete {
                let num = c.mass_at(z);
                if num == 0.0 {
                    return XReal::ZERO;
                }
                return XReal::from(num).ratio(XReal::from(mixc.value(z)));
            }
            if c.log_pdf(z) == f64::NEG_INFINITY {
                return XReal::ZERO;
            }
            XReal::exp(-mixc.log_over(i, z))
        };
        let e = q.expect_with(&f, &eopts)?;
        out.push(if e.value.is_infinite() {
            f64::INFINITY
        } else {
            e.value.value()
        });
    }
    Ok(out)
}

/// Worst first-order violation: excess of any ratio above 1, plus distance
/// from equality on the active support.
fn optimality_residual(ratios: &[f64], weights: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (&r, &w) in ratios.iter().zip(weights) {
        let dev = if w > ACTIVE_FLOOR {
            (r - 1.0).abs()
        } else {
            (r - 1.0).max(0.0)
        };
        worst = worst.max(dev);
    }
    worst
}

/// Covered alternative and its mass. Discrete alternatives are split by
/// the point-wise decomposition; density alternatives must be dominated.
fn reachable_part(
    q: &Measure,
    null: &NullHypothesis,
    components: &[Measure],
) -> Result<(Option<Measure>, f64, LebesgueDecomposition)> {
    if is_discrete(q) {
        let decomp = lebesgue::lebesgue_decompose(q, null)?;
        let q_star = decomp.conditional();
        Ok((q_star, decomp.lambda_star, decomp))
    } else {
        let (covered, holes) = lebesgue::density_coverage(q, components)?;
        if covered < q.total_mass() - 1e-6 {
            let gap = q.total_mass() - covered;
            return Err(Error::NoCommonReference(format!(
                "a density alternative must be dominated by the null mixture: \
                 mass {gap:.3e} escapes every component (uncovered regions: {}); \
                 wealth against it is not bounded in probability",
                holes
                    .iter()
                    .map(|s| format!("({}, {})", s.lo, s.hi))
                    .collect::<Vec<_>>()
                    .join(" u ")
            )));
        }
        let decomp = LebesgueDecomposition {
            regular: q.clone(),
            singular: Measure::discrete(vec![], vec![])?,
            negligible_set: vec![],
            lambda_star: q.total_mass(),
        };
        Ok((Some(q.clone()), q.total_mass(), decomp))
    }
}

/// Solve for the optimal wealth against an explicit finite null.
pub fn solve_finite_null(
    q: &Measure,
    null: &NullHypothesis,
    opts: &SolverOptions,
) -> Result<NumeraireSolution> {
    null.validate()?;
    let components = finite_components(null)?;
    if !q.is_probability(1e-6) {
        return Err(Error::InvalidMeasure(format!(
            "alternative has mass {}, expected 1",
            q.total_mass()
        )));
    }
    let (q_star, lambda, decomp) = reachable_part(q, null, components)?;
    let q_star = match q_star {
        None => return Ok(degenerate_solution(q, components, &decomp)),
        Some(m) => m,
    };
    let _ = lambda;

    let knots = solver_knots(q, components);
    let k = components.len();
    let mut w = normalized_init(k, opts)?;
    let mut residual = f64::INFINITY;
    let mut iterations = opts.max_iter;
    let mut converged = false;
    let mut last_ratios = vec![0.0; k];
    for it in 0..opts.max_iter {
        let r = component_ratios(&q_star, components, &w, &knots, opts)?;
        residual = optimality_residual(&r, &w);
        last_ratios = r.clone();
        if residual <= opts.tol_foc {
            iterations = it;
            converged = true;
            break;
        }
        let hit_cap = r.iter().any(|x| !x.is_finite() || *x > RATIO_CAP);
        let mut next: Vec<f64> = w
            .iter()
            .zip(&r)
            .map(|(&wi, &ri)| wi * ri.min(RATIO_CAP))
            .collect();
        let s: f64 = next.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NotConverged {
                iterations: it,
                residual,
                last_weights: w,
                last_residuals: r.iter().map(|x| x - 1.0).collect(),
            });
        }
        for x in &mut next {
            *x /= s;
        }
        if hit_cap {
            // a component the mixture misses entirely: step halfway toward
            // the capped target instead of trusting the full jump
            for (n, &ow) in next.iter_mut().zip(&w) {
                *n = 0.5 * (*n + ow);
            }
        }
        w = next;
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations: opts.max_iter,
            residual,
            last_weights: w,
            last_residuals: last_ratios.iter().map(|r| r - 1.0).collect(),
        });
    }

    assemble_solution(q, components, &decomp, w, last_ratios, iterations, residual, opts)
}

fn solver_knots(q: &Measure, components: &[Measure]) -> Vec<f64> {
    let mut knots = component_knots(components);
    let qdom = q.domain();
    for v in [qdom.lo, qdom.hi] {
        if v.is_finite() {
            knots.push(v);
        }
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
}

#[allow(clippy::too_many_arguments)]
fn assemble_solution(
    q: &Measure,
    components: &[Measure],
    decomp: &LebesgueDecomposition,
    w: Vec<f64>,
    ratios: Vec<f64>,
    iterations: usize,
    residual: f64,
    opts: &SolverOptions,
) -> Result<NumeraireSolution> {
    let lambda = decomp.lambda_star;
    let q_star = if is_discrete(q) {
        decomp.conditional().expect("non-degenerate")
    } else {
        q.clone()
    };
    let knots = solver_knots(q, components);
    let discrete = is_discrete(q);
    let mix = MixtureEval::new(components, &w, discrete);

    let numeraire = build_numeraire(q, components, &w, lambda);
    let ripr = build_ripr(q, &mix, lambda, &knots)?;

    let eopts = ExpectOpts {
        acc: opts.acc,
        budget: opts.budget,
        knots: knots.clone(),
        ..ExpectOpts::default()
    };
    let log_x = {
        let n = numeraire.clone();
        move |z: f64| n.log_value(z)
    };
    let cond_lw = q_star.expect_signed(&log_x, &eopts)?.value;
    let cond_h = conditional_entropy(&q_star, components, &w, &eopts)?;

    let partial = lambda < q.total_mass() - 1e-15;
    let growth = GrowthReport {
        log_wealth: if partial { f64::INFINITY } else { cond_lw },
        entropy: if partial { f64::INFINITY } else { cond_h },
        conditional_log_wealth: cond_lw,
        conditional_entropy: cond_h,
    };

    let mut notes = Vec::new();
    if partial {
        notes.push(format!(
            "alternative only partially reachable: lambda = {lambda}, dead region {}",
            decomp.describe_n()
        ));
    }

    Ok(NumeraireSolution {
        numeraire,
        ripr,
        lambda_star: lambda,
        mixture_weights: Some(w),
        growth,
        iterations,
        residual,
        residuals: ratios.iter().map(|r| r - 1.0).collect(),
        parameter: None,
        notes,
    })
}

fn build_numeraire(
    q: &Measure,
    components: &[Measure],
    weights: &[f64],
    lambda: f64,
) -> Numeraire {
    let discrete = is_discrete(q);
    let mix = MixtureEval::new(components, weights, discrete);
    let qc = q.clone();
    let log_eval = Arc::new(move |z: f64| {
        let lq = if discrete {
            let m = qc.mass_at(z);
            if m > 0.0 {
                m.ln()
            } else {
                f64::NEG_INFINITY
            }
        } else {
            qc.log_pdf(z)
        };
        log_ratio(lq, lambda.ln() + mix.log_value(z))
    });
    Numeraire::from_log(log_eval)
}

fn build_ripr(q: &Measure, mix: &MixtureEval, lambda: f64, knots: &[f64]) -> Result<Measure> {
    match q {
        Measure::Discrete(qd) => {
            let mut support = Vec::new();
            let mut mass = Vec::new();
            for (&z, &m) in qd.support().iter().zip(qd.masses()) {
                support.push(z);
                mass.push(if m > 0.0 { lambda * mix.value(z) } else { 0.0 });
            }
            Measure::discrete(support, mass)
        }
        Measure::Density(qd) => {
            let qc = qd.clone();
            let mix1 = mix.clone();
            let pdf: PdfFn = Arc::new(move |z| {
                if qc.pdf(z) > 0.0 {
                    lambda * mix1.value(z)
                } else {
                    0.0
                }
            });
            let qc2 = qd.clone();
            let mix2 = mix.clone();
            let log_pdf: PdfFn = Arc::new(move |z| {
                if qc2.pdf(z) > 0.0 {
                    lambda.ln() + mix2.log_value(z)
                } else {
                    f64::NEG_INFINITY
                }
            });
            Measure::density_fn(pdf, Some(log_pdf), qd.domain(), knots)
        }
    }
}

/// `H(Q* | sum_i w_i P_i)` through the divergence module: the mixture is
/// materialised as a measure, rather than reusing the solver's evaluator.
fn conditional_entropy(
    q_star: &Measure,
    components: &[Measure],
    weights: &[f64],
    eopts: &ExpectOpts,
) -> Result<f64> {
    let discrete = is_discrete(q_star);
    let mut comps = Vec::new();
    let mut ws = Vec::new();
    for (c, &w) in components.iter().zip(weights) {
        if w > 0.0 && is_discrete(c) == discrete {
            comps.push(c.clone());
            ws.push(w);
        }
    }
    if comps.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mixture = Measure::mixture(&comps, &ws)?;
    crate::divergence::relative_entropy(q_star, &mixture, eopts)
}

fn degenerate_solution(
    q: &Measure,
    components: &[Measure],
    decomp: &LebesgueDecomposition,
) -> NumeraireSolution {
    let discrete = is_discrete(q);
    let qc = q.clone();
    let numeraire = Numeraire::from_log(Arc::new(move |z: f64| {
        let alive = if discrete {
            qc.mass_at(z) > 0.0
        } else {
            qc.pdf(z) > 0.0
        };
        if alive {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }));
    let ripr = match q {
        Measure::Discrete(qd) => {
            Measure::discrete(qd.support().to_vec(), vec![0.0; qd.support().len()])
                .expect("zero measure")
        }
        Measure::Density(qd) => {
            let zero: PdfFn = Arc::new(|_| 0.0);
            Measure::density_fn(zero, None, qd.domain(), &[]).expect("zero measure")
        }
    };
    NumeraireSolution {
        numeraire,
        ripr,
        lambda_star: 0.0,
        mixture_weights: None,
        growth: GrowthReport {
            log_wealth: f64::INFINITY,
            entropy: f64::INFINITY,
            conditional_log_wealth: f64::INFINITY,
            conditional_entropy: f64::INFINITY,
        },
        iterations: 0,
        residual: 0.0,
        residuals: vec![],
        parameter: None,
        notes: vec![format!(
            "no null component reaches the alternative ({} components, dead region {})",
            components.len(),
            decomp.describe_n()
        )],
    }
}

/// Entropy objective `H(Q | p_w)` used by the oracle search.
pub fn mixture_objective(
    q: &Measure,
    components: &[Measure],
    weights: &[f64],
    opts: &SolverOptions,
) -> Result<f64> {
    let discrete = is_discrete(q);
    let mix = MixtureEval::new(components, weights, discrete);
    let knots = component_knots(components);
    let qc = q.clone();
    let f = move |z: f64| {
        let lq = if discrete {
            let m = qc.mass_at(z);
            if m > 0.0 {
                m.ln()
            } else {
                f64::NEG_INFINITY
            }
        } else {
            qc.log_pdf(z)
        };
        // contributes only where q > 0; -log of the mixture-to-q ratio
        if lq == f64::NEG_INFINITY {
            0.0
        } else {
            lq - mix.log_value(z)
        }
    };
    let e = q.expect_signed(
        &f,
        &ExpectOpts {
            acc: opts.acc,
            budget: opts.budget,
            knots,
            ..ExpectOpts::default()
        },
    )?;
    Ok(e.value)
}

/// Oracle: exhaustive simplex scan at `step` resolution followed by
/// pairwise golden-section descent, then the usual assembly. Restricted to
/// tiny discrete instances; intentionally shares no logic with the
/// fixed-point solver.
pub fn brute_force_numeraire(
    q: &Measure,
    null: &NullHypothesis,
    step: f64,
    opts: &SolverOptions,
) -> Result<NumeraireSolution> {
    null.validate()?;
    let components = finite_components(null)?;
    let qd = q
        .as_discrete()
        .ok_or_else(|| Error::InstanceTooLarge("the oracle only scans discrete alternatives".into()))?;
    if qd.support().len() > 4 {
        return Err(Error::InstanceTooLarge(format!(
            "oracle limit is 4 atoms, got {}",
            qd.support().len()
        )));
    }
    if components.iter().any(|c| !is_discrete(c)) {
        return Err(Error::InstanceTooLarge(
            "the oracle only scans discrete null components".into(),
        ));
    }

    let (q_star, _, decomp) = reachable_part(q, null, components)?;
    let q_star = match q_star {
        None => return Ok(degenerate_solution(q, components, &decomp)),
        Some(m) => m,
    };
    let (w, _) = brute_force_weights(&q_star, components, step, opts)?;
    let knots = solver_knots(q, components);
    let ratios = component_ratios(&q_star, components, &w, &knots, opts)?;
    let residual = optimality_residual(&ratios, &w);
    assemble_solution(q, components, &decomp, w, ratios, 0, residual, opts)
}

/// Grid scan plus pairwise golden-section descent on the entropy
/// objective. Returns the best weights and the attained objective.
pub fn brute_force_weights(
    q: &Measure,
    components: &[Measure],
    grid_step: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let k = components.len();
    if k == 0 {
        return Err(Error::UnsupportedNull("no components".into()));
    }
    let levels = (1.0 / grid_step).round() as usize;
    let count = simplex_grid_count(levels, k);
    if count > 2_000_000 {
        return Err(Error::InstanceTooLarge(format!(
            "simplex grid would hold {count} points; coarsen the step"
        )));
    }

    let mut best_w = vec![1.0 / k as f64; k];
    let mut best = mixture_objective(q, components, &best_w, opts)?;
    let mut stack = vec![(Vec::<usize>::new(), levels)];
    while let Some((prefix, left)) = stack.pop() {
        if prefix.len() == k - 1 {
            let mut counts = prefix.clone();
            counts.push(left);
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / levels as f64).collect();
            let obj = mixture_objective(q, components, &w, opts)?;
            if obj < best {
                best = obj;
                best_w = w;
            }
        } else {
            for c in 0..=left {
                let mut p = prefix.clone();
                p.push(c);
                stack.push((p, left - c));
            }
        }
    }

    // pairwise mass transfers, golden section on each line segment
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _sweep in 0..200 {
        let before = best;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                // move t of mass from i to j, t in [0, w_i]
                let cap = best_w[i];
                if cap <= 0.0 {
                    continue;
                }
                let eval = |t: f64, w: &[f64]| -> Result<f64> {
                    let mut cand = w.to_vec();
                    cand[i] -= t;
                    cand[j] += t;
                    mixture_objective(q, components, &cand, opts)
                };
                let mut lo = 0.0;
                let mut hi = cap;
                let mut x1 = hi - phi * (hi - lo);
                let mut x2 = lo + phi * (hi - lo);
                let mut f1 = eval(x1, &best_w)?;
                let mut f2 = eval(x2, &best_w)?;
                for _ in 0..80 {
                    if hi - lo < 1e-12 {
                        break;
                    }
                    if f1 <= f2 {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - phi * (hi - lo);
                        f1 = eval(x1, &best_w)?;
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + phi * (hi - lo);
                        f2 = eval(x2, &best_w)?;
                    }
                }
                let t = 0.5 * (lo + hi);
                let cand_obj = eval(t, &best_w)?;
                if cand_obj < best {
                    best = cand_obj;
                    best_w[i] -= t;
                    best_w[j] += t;
                }
            }
        }
        if before - best < 1e-14 {
            break;
        }
    }
    Ok((best_w, best))
}

fn simplex_grid_count(levels: usize, k: usize) -> usize {
    // C(levels + k - 1, k - 1)
    let mut num = 1usize;
    for i in 0..(k - 1) {
        num = num.saturating_mul(levels + 1 + i);
    }
    let mut den = 1usize;
    for i in 1..k {
        den *= i;
    }
    num / den
}

/// First-order optimality checks for a finite-null solution: the ratio
/// bound `E[p_i/p_w] <= 1` with equality on the active support, and the
/// log-gain along every segment from the optimal mixture toward a
/// component. Both run under the conditioned alternative when part of `Q`
/// is out of reach.
pub fn first_order_certificate(
    sol: &NumeraireSolution,
    q: &Measure,
    null: &NullHypothesis,
    tol: f64,
) -> Result<Certificate> {
    let components = finite_components(null)?;
    let opts = SolverOptions::default();
    let (q_star, _, _) = reachable_part(q, null, components)?;
    let mut checks = Vec::new();

    let w = match &sol.mixture_weights {
        Some(w) => w.clone(),
        None => {
            // nothing is reachable: the only claim to check is emptiness
            checks.push(CheckResult {
                name: "degenerate: nothing reachable".into(),
                residual: sol.lambda_star,
                tol,
                pass: sol.lambda_star == 0.0,
                witness: "no mixture weights in the solution".into(),
            });
            return Ok(Certificate::from_checks(checks));
        }
    };
    let q_star = q_star.expect("weights exist, so the regular part does");
    let knots = solver_knots(q, components);
    let ratios = component_ratios(&q_star, components, &w, &knots, &opts)?;

    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_bound_i = 0;
    let mut worst_eq = 0.0f64;
    let mut worst_eq_i = None;
    for (i, (&r, &wi)) in ratios.iter().zip(&w).enumerate() {
        let excess = r - 1.0;
        if excess > worst_bound {
            worst_bound = excess;
            worst_bound_i = i;
        }
        if wi > ACTIVE_FLOOR && excess.abs() > worst_eq {
            worst_eq = excess.abs();
            worst_eq_i = Some(i);
        }
    }
    checks.push(CheckResult {
        name: "first order: E[p_i/p_w] <= 1 for every component".into(),
        residual: worst_bound,
        tol,
        pass: worst_bound <= tol,
        witness: format!("component {worst_bound_i}"),
    });
    checks.push(CheckResult {
        name: "first order: equality on the active support".into(),
        residual: worst_eq,
        tol,
        pass: worst_eq <= tol,
        witness: match worst_eq_i {
            Some(i) => format!("component {i}, weight {}", w[i]),
            None => "no active components".into(),
        },
    });

    // moving any mass toward a single component must not increase the
    // expected log payoff
    let discrete = is_discrete(&q_star);
    let mix = MixtureEval::new(components, &w, discrete);
    let eopts = ExpectOpts {
        knots: knots.clone(),
        ..ExpectOpts::default()
    };
    let mut worst_gain = f64::NEG_INFINITY;
    let mut worst_at = (0usize, 0.0f64);
    for (i, c) in components.iter().enumerate() {
        for t in [0.01f64, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
            let ci = c.clone();
            let mixc = mix.clone();
            let f = move |z: f64| {
                let base = mixc.log_value(z);
                if base == f64::NEG_INFINITY {
                    return 0.0;
                }
                let lv = if discrete {
                    let m = ci.mass_at(z);
                    if m > 0.0 {
                        m.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    ci.log_pdf(z)
                };
                let blended = log_sum_exp(&[(1.0 - t).ln() + base, t.ln() + lv]);
                blended - base
            };
            let gain = q_star.expect_signed(&f, &eopts)?.value;
            if gain > worst_gain {
                worst_gain = gain;
                worst_at = (i, t);
            }
        }
    }
    checks.push(CheckResult {
        name: "first order: no log gain along mixture segments".into(),
        residual: worst_gain,
        tol,
        pass: worst_gain <= tol,
        witness: format!("component {}, t = {}", worst_at.0, worst_at.1),
    });

    Ok(Certificate::from_checks(checks))
}
