//! Cross-cutting certification: probe-based numeraire checks, the strong
//! duality gap, description gain, the key log inequality, a comparison
//! against universal inference, and finiteness bookkeeping.
//!
//! "For every e-variable" is not checkable, so certificates are probe-based
//! and report exactly which probes they ran. A probe is admitted only after
//! passing its own e-variable certification; rejected probes are reported,
//! never counted as failures of the candidate under test.

use crate::divergence::relative_entropy;
use crate::error::{Error, Result};
use crate::finite::{component_knots, MixtureEval};
use crate::measure::{ExpectOpts, Measure, PdfFn};
use crate::nullspec::{
    effective_null_membership, generators, is_evariable, EVariable, EvarOpts, NullHypothesis,
};
use crate::xreal::XReal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

/// Answer to a question that may be undecidable for continuous carriers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    Yes,
    No,
    Undetermined,
}

/// One named check: how far it strayed and whether that is acceptable.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub witness: String,
}

/// Finiteness pattern of a solved instance. The first four entries are
/// equivalent for a correct numeraire (finite wealth iff the alternative
/// is dominated by the hull iff it is dominated by the projection); the
/// entropy can be infinite even when they all hold.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AppendixBFlags {
    pub q_ac_wrt_null: TriState,
    pub numeraire_finite: TriState,
    pub ripr_ac_wrt_q: bool,
    pub q_ac_wrt_ripr: TriState,
    pub entropy_finite: TriState,
}

impl Default for AppendixBFlags {
    fn default() -> Self {
        AppendixBFlags {
            q_ac_wrt_null: TriState::Undetermined,
            numeraire_finite: TriState::Undetermined,
            ripr_ac_wrt_q: true,
            q_ac_wrt_ripr: TriState::Undetermined,
            entropy_finite: TriState::Undetermined,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub checks: Vec<CheckResult>,
    pub overall_pass: bool,
    pub appendix_b_flags: AppendixBFlags,
}

impl Certificate {
    pub fn single(check: CheckResult) -> Certificate {
        Certificate::from_checks(vec![check])
    }

    pub fn from_checks(checks: Vec<CheckResult>) -> Certificate {
        let overall_pass = checks.iter().all(|c| c.pass);
        Certificate {
            checks,
            overall_pass,
            appendix_b_flags: AppendixBFlags::default(),
        }
    }
}

fn log_density(m: &Measure, z: f64) -> f64 {
    match m {
        Measure::Discrete(_) => {
            let v = m.mass_at(z);
            if v > 0.0 {
                v.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        Measure::Density(_) => m.log_pdf(z),
    }
}

/// `log(a/b)` from logs, with the ratio conventions: `0/x = 0` (even at
/// `x = 0`), `inf/inf = 1`, `finite/0 = inf`.
fn ratio_log(la: f64, lb: f64) -> f64 {
    if la == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if lb == f64::INFINITY {
        if la == f64::INFINITY {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else if lb == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        la - lb
    }
}

/// Checks that a candidate wealth prices every admitted probe at 1 or
/// less under the alternative, prices the constant at 1 or less, and, on
/// discrete finite nulls, that the implied projection `(1/X) dQ` is
/// dominated by the hull. Probes failing their own e-variable test are
/// reported as rejections.
pub fn numeraire_certificate(
    x: &EVariable,
    q: &Measure,
    null: &NullHypothesis,
    probes: &[EVariable],
    tol: f64,
) -> Certificate {
    let mut checks = Vec::new();
    let mut rejected: Vec<String> = Vec::new();

    let evopts = EvarOpts {
        tol,
        knots: x.knots.clone(),
        ..EvarOpts::default()
    };

    for probe in probes {
        let admitted = matches!(
            is_evariable(probe, null, &evopts),
            Ok(cert) if cert.overall_pass
        );
        if !admitted {
            rejected.push(probe.label.clone());
            continue;
        }
        let mut knots = x.knots.clone();
        knots.extend_from_slice(&probe.knots);
        let eopts = ExpectOpts {
            knots,
            ..ExpectOpts::default()
        };
        let lx = x.log_payoff();
        let lp = probe.log_payoff();
        let name = format!("probe {} prices at most 1", probe.label);
        checks.push(
            match q.expect_log(&move |z: f64| ratio_log(lp(z), lx(z)), &eopts) {
                Ok(e) => {
                    let residual = if e.value.is_infinite() {
                        f64::INFINITY
                    } else {
                        e.value.value() - 1.0
                    };
                    CheckResult {
                        name,
                        residual,
                        tol,
                        pass: residual <= tol,
                        witness: format!(
                            "E_Q[probe/X] = {}, quadrature error {:.1e}",
                            e.value.value(),
                            e.abs_err
                        ),
                    }
                }
                Err(err) => CheckResult {
                    name,
                    residual: f64::INFINITY,
                    tol,
                    pass: false,
                    witness: format!("evaluation failed: {err}"),
                },
            },
        );
    }

    // the constant bet must not beat the candidate
    let eopts = ExpectOpts {
        knots: x.knots.clone(),
        ..ExpectOpts::default()
    };
    let lx = x.log_payoff();
    let mut inverse_price = f64::INFINITY;
    checks.push(
        match q.expect_log(&move |z: f64| ratio_log(0.0, lx(z)), &eopts) {
            Ok(e) => {
                let v = if e.value.is_infinite() {
                    f64::INFINITY
                } else {
                    e.value.value()
                };
                inverse_price = v;
                CheckResult {
                    name: "unit inverse price E_Q[1/X] at most 1".into(),
                    residual: v - 1.0,
                    tol,
                    pass: v - 1.0 <= tol,
                    witness: format!("E_Q[1/X] = {v}"),
                }
            }
            Err(err) => CheckResult {
                name: "unit inverse price E_Q[1/X] at most 1".into(),
                residual: f64::INFINITY,
                tol,
                pass: false,
                witness: format!("evaluation failed: {err}"),
            },
        },
    );

    let mut flags = AppendixBFlags::default();

    let discrete_finite = matches!(null, NullHypothesis::FiniteMixture { components }
        if matches!(q, Measure::Discrete(_))
            && components.iter().all(|c| matches!(c, Measure::Discrete(_))));

    if discrete_finite {
        let components = match null {
            NullHypothesis::FiniteMixture { components } => components,
            _ => unreachable!(),
        };
        let qd = q.as_discrete().expect("checked discrete");

        // implied projection, dominated by the hull iff X is a numeraire
        let support = qd.support().to_vec();
        let mass: Vec<f64> = support
            .iter()
            .zip(qd.masses())
            .map(|(&z, &m)| {
                if m > 0.0 {
                    m * (-x.log_value(z)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        checks.push(match Measure::discrete(support, mass) {
            Ok(pstar) => match effective_null_membership(&pstar, null, tol.max(1e-9)) {
                Ok(mem) => CheckResult {
                    name: "implied projection (1/X)dQ lies in the effective null".into(),
                    residual: mem.shortfall,
                    tol: tol.max(1e-9),
                    pass: mem.member,
                    witness: match (&mem.weights, mem.separating_point) {
                        (Some(w), _) => format!("dominated at weights {w:?}"),
                        (None, Some(z)) => format!("separated at z = {z}"),
                        _ => String::new(),
                    },
                },
                Err(err) => CheckResult {
                    name: "implied projection (1/X)dQ lies in the effective null".into(),
                    residual: f64::INFINITY,
                    tol,
                    pass: false,
                    witness: format!("membership test failed: {err}"),
                },
            },
            Err(err) => CheckResult {
                name: "implied projection (1/X)dQ lies in the effective null".into(),
                residual: f64::INFINITY,
                tol,
                pass: false,
                witness: format!("projection is not a measure: {err}"),
            },
        });

        let mut covered_all = true;
        let mut finite_all = true;
        for (&z, &m) in qd.support().iter().zip(qd.masses()) {
            if m <= 0.0 {
                continue;
            }
            if !components.iter().any(|c| c.mass_at(z) > 0.0) {
                covered_all = false;
            }
            if x.log_value(z) == f64::INFINITY {
                finite_all = false;
            }
        }
        let tri = |b: bool| if b { TriState::Yes } else { TriState::No };
        flags.q_ac_wrt_null = tri(covered_all);
        if covered_all == finite_all {
            flags.numeraire_finite = tri(finite_all);
            flags.q_ac_wrt_ripr = tri(finite_all);
            flags.entropy_finite = tri(finite_all);
        } else {
            // the pattern contradicts the finiteness equivalences, so the
            // candidate cannot be the numeraire; flags stay undetermined
            checks.push(CheckResult {
                name: "finiteness pattern consistent across the equivalences".into(),
                residual: f64::INFINITY,
                tol,
                pass: false,
                witness: format!(
                    "alternative dominated by the hull: {covered_all}; wealth finite on it: {finite_all}"
                ),
            });
        }
    } else {
        // continuous carriers: decide what coverage analysis can reach
        if let (Measure::Density(_), NullHypothesis::FiniteMixture { components }) = (q, null) {
            let dens: Vec<Measure> = components
                .iter()
                .filter(|c| matches!(c, Measure::Density(_)))
                .cloned()
                .collect();
            if !dens.is_empty() {
                if let Ok((covered, _)) = crate::lebesgue::density_coverage(q, &dens) {
                    flags.q_ac_wrt_null = if covered >= q.total_mass() - 1e-6 {
                        TriState::Yes
                    } else {
                        TriState::No
                    };
                }
            }
        }
        let mut saw_infinite = false;
        for &z in &x.knots {
            if x.log_value(z) == f64::INFINITY {
                saw_infinite = true;
            }
        }
        flags.numeraire_finite = if saw_infinite {
            TriState::No
        } else {
            flags.q_ac_wrt_null
        };
        flags.q_ac_wrt_ripr = flags.numeraire_finite;
        flags.entropy_finite = if inverse_price.is_finite() && flags.numeraire_finite == TriState::Yes
        {
            let lx = x.log_payoff();
            match q.expect_signed(&move |z: f64| lx(z).clamp(-700.0, 700.0), &eopts) {
                Ok(e) if e.value.is_finite() => TriState::Yes,
                _ => TriState::Undetermined,
            }
        } else {
            TriState::Undetermined
        };
    }

    if !rejected.is_empty() {
        checks.push(CheckResult {
            name: "probes rejected as non-e-variables (informational)".into(),
            residual: rejected.len() as f64,
            tol: f64::INFINITY,
            pass: true,
            witness: rejected.join("; "),
        });
    }

    let overall_pass = checks.iter().all(|c| c.pass);
    Certificate {
        checks,
        overall_pass,
        appendix_b_flags: flags,
    }
}

/// Two sides of the growth/entropy duality and their mismatch.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DualityReport {
    pub gap: f64,
    /// `E[log X]` under the reachable part of the alternative.
    pub growth: f64,
    /// Relative entropy to the (conditionally renormalized) projection.
    pub entropy: f64,
    pub lambda_star: f64,
    pub conditional: bool,
    /// Both sides diverge; the gap is reported as 0.
    pub both_infinite: bool,
}

/// `|E_Q[log X] - H(Q|ripr)|`, switching to the conditional pair
/// (`Q* = Q(.|X < inf)` against `ripr/lambda*`) when the wealth explodes
/// on part of the alternative; with nothing reachable at all, both sides
/// are infinite and the gap is 0 by convention.
pub fn duality_gap(x: &EVariable, ripr: &Measure, q: &Measure) -> DualityReport {
    let mut knots = x.knots.clone();
    knots.extend(component_knots(std::slice::from_ref(q)));
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let eopts = ExpectOpts {
        knots: knots.clone(),
        ..ExpectOpts::default()
    };

    let total = q.total_mass();
    let lambda = match q {
        Measure::Discrete(d) => {
            let mut live = 0.0;
            for (&z, &m) in d.support().iter().zip(d.masses()) {
                if m > 0.0 && x.log_value(z) < f64::INFINITY {
                    live += m;
                }
            }
            live
        }
        Measure::Density(_) => {
            let lx = x.log_payoff();
            q.expect_with(
                &move |z: f64| {
                    if lx(z) < f64::INFINITY {
                        XReal::ONE
                    } else {
                        XReal::ZERO
                    }
                },
                &eopts,
            )
            .map(|e| e.value.value().min(total))
            .unwrap_or(total)
        }
    };

    if lambda <= 1e-12 {
        return DualityReport {
            gap: 0.0,
            growth: f64::INFINITY,
            entropy: f64::INFINITY,
            lambda_star: 0.0,
            conditional: true,
            both_infinite: true,
        };
    }

    let conditional = lambda < total - 1e-9;
    let (q_eff, p_eff) = if conditional {
        match (
            conditional_part(q, x, lambda, &knots),
            scale_measure(ripr, 1.0 / lambda, &knots),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                return DualityReport {
                    gap: f64::INFINITY,
                    growth: f64::NAN,
                    entropy: f64::NAN,
                    lambda_star: lambda,
                    conditional: true,
                    both_infinite: false,
                }
            }
        }
    } else {
        (q.clone(), ripr.clone())
    };

    let lx = x.log_payoff();
    let growth = q_eff
        .expect_signed(
            &move |z: f64| {
                let l = lx(z);
                if l == f64::INFINITY {
                    0.0 // dead region, carries no q_eff mass
                } else {
                    l.max(-700.0)
                }
            },
            &eopts,
        )
        .map(|e| e.value)
        .unwrap_or(f64::INFINITY);
    let entropy = relative_entropy(&q_eff, &p_eff, &eopts).unwrap_or(f64::INFINITY);

    if growth.is_infinite() && entropy.is_infinite() {
        return DualityReport {
            gap: 0.0,
            growth,
            entropy,
            lambda_star: lambda,
            conditional,
            both_infinite: true,
        };
    }
    DualityReport {
        gap: (growth - entropy).abs(),
        growth,
        entropy,
        lambda_star: lambda,
        conditional,
        both_infinite: false,
    }
}

fn conditional_part(q: &Measure, x: &EVariable, lambda: f64, knots: &[f64]) -> Result<Measure> {
    match q {
        Measure::Discrete(d) => {
            let support = d.support().to_vec();
            let mass: Vec<f64> = support
                .iter()
                .zip(d.masses())
                .map(|(&z, &m)| {
                    if m > 0.0 && x.log_value(z) < f64::INFINITY {
                        m / lambda
                    } else {
                        0.0
                    }
                })
                .collect();
            Measure::discrete(support, mass)
        }
        Measure::Density(d) => {
            let d1 = d.clone();
            let x1 = x.clone();
            let pdf: PdfFn = Arc::new(move |z| {
                if x1.log_value(z) < f64::INFINITY {
                    d1.pdf(z) / lambda
                } else {
                    0.0
                }
            });
            let d2 = d.clone();
            let x2 = x.clone();
            let ll = lambda.ln();
            let log_pdf: PdfFn = Arc::new(move |z| {
                if x2.log_value(z) < f64::INFINITY {
                    d2.log_pdf(z) - ll
                } else {
                    f64::NEG_INFINITY
                }
            });
            Measure::density_fn(pdf, Some(log_pdf), d.domain(), knots)
        }
    }
}

fn scale_measure(m: &Measure, c: f64, knots: &[f64]) -> Result<Measure> {
    match m {
        Measure::Discrete(d) => Measure::discrete(
            d.support().to_vec(),
            d.masses().iter().map(|&x| x * c).collect(),
        ),
        Measure::Density(d) => {
            let d1 = d.clone();
            let pdf: PdfFn = Arc::new(move |z| c * d1.pdf(z));
            let d2 = d.clone();
            let lc = c.ln();
            let log_pdf: PdfFn = Arc::new(move |z| lc + d2.log_pdf(z));
            Measure::density_fn(pdf, Some(log_pdf), d.domain(), knots)
        }
    }
}

/// One blend's expected log gain over the reference projection.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GainRow {
    pub component: usize,
    pub t: f64,
    pub value: f64,
}

/// `E_Q[log(((1-t) p* + t p)/p*)]` for each candidate `p` and blend
/// weight `t`. Every value is nonpositive exactly when `p*` is the
/// projection; a positive entry names a profitable direction.
pub fn description_gain(
    q: &Measure,
    p_star: &Measure,
    others: &[Measure],
    t_grid: &[f64],
) -> Result<Vec<GainRow>> {
    for &t in t_grid {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Precondition(format!(
                "blend weights must lie in (0,1), got {t}"
            )));
        }
    }
    let mut knots = component_knots(others);
    knots.extend(component_knots(std::slice::from_ref(q)));
    knots.extend(component_knots(std::slice::from_ref(p_star)));
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let eopts = ExpectOpts {
        knots,
        ..ExpectOpts::default()
    };

    let mut rows = Vec::with_capacity(others.len() * t_grid.len());
    for (i, p) in others.iter().enumerate() {
        for &t in t_grid {
            let pc = p.clone();
            let psc = p_star.clone();
            let f = move |z: f64| {
                let lp = log_density(&pc, z);
                let lps = log_density(&psc, z);
                if lps == f64::NEG_INFINITY {
                    if lp == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    return f64::INFINITY;
                }
                // log((1-t) + t p/p*) via a two-term log-sum-exp
                let a = (1.0 - t).ln();
                let b = t.ln() + lp - lps;
                let mx = a.max(b);
                mx + ((a - mx).exp() + (b - mx).exp()).ln()
            };
            let value = q.expect_signed(&f, &eopts)?.value;
            rows.push(GainRow {
                component: i,
                t,
                value,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogTCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// The key inequality `(1/9)(|log t| ^ |log t|^2) <= log((2+t+1/t)/4)`
/// behind the L1 Cauchy-sequence argument. `^` is the minimum.
pub fn log_t_inequality(t: f64) -> Result<LogTCheck> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("t must be positive, got {t}")));
    }
    let a = t.ln().abs();
    let lhs = a.min(a * a) / 9.0;
    let rhs = ((2.0 + t + 1.0 / t) / 4.0).ln();
    Ok(LogTCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
    })
}

/// Pointwise and in-expectation comparison against the universal
/// inference wealth `X^UI = q / max_i p_i`.
#[derive(Clone, Debug, Serialize)]
pub struct UiComparison {
    pub grid: Vec<f64>,
    pub x_star: Vec<f64>,
    pub x_ui: Vec<f64>,
    /// `X* - X^UI` per grid point.
    pub gap: Vec<f64>,
    pub min_gap: f64,
    /// Q-mass of the region where the candidate is strictly better
    /// than universal inference by more than `tol`.
    pub strict_mass: f64,
    /// `E_Q[log X*] - E_Q[log X^UI]`.
    pub log_wealth_gain: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn universal_inference_compare(
    q: &Measure,
    null: &NullHypothesis,
    x_star: &EVariable,
    grid: &[f64],
    tol: f64,
) -> Result<UiComparison> {
    let components = match null {
        NullHypothesis::FiniteMixture { components } => components.clone(),
        other => {
            return Err(Error::UnsupportedNull(format!(
                "universal inference needs an explicit component list, got: {}",
                other.describe()
            )))
        }
    };
    let discrete = matches!(q, Measure::Discrete(_));
    if components
        .iter()
        .any(|c| matches!(c, Measure::Discrete(_)) != discrete)
    {
        return Err(Error::Precondition(
            "the alternative and all components must share a carrier so both \
             wealth processes are evaluable"
                .into(),
        ));
    }

    let qc = q.clone();
    let comps = components.clone();
    let log_ui = Arc::new(move |z: f64| {
        let lq = log_density(&qc, z);
        let lmax = comps
            .iter()
            .map(|c| log_density(c, z))
            .fold(f64::NEG_INFINITY, f64::max);
        ratio_log(lq, lmax)
    });

    let mut xs = Vec::with_capacity(grid.len());
    let mut xu = Vec::with_capacity(grid.len());
    let mut gaps = Vec::with_capacity(grid.len());
    let mut min_gap = f64::INFINITY;
    for &z in grid {
        let ls = x_star.log_value(z);
        let lu = log_ui(z);
        let vs = XReal::exp(ls).value();
        let vu = XReal::exp(lu).value();
        let gap = if vs.is_infinite() && vu.is_infinite() {
            0.0
        } else {
            vs - vu
        };
        xs.push(vs);
        xu.push(vu);
        gaps.push(gap);
        if gap < min_gap {
            min_gap = gap;
        }
    }

    let mut knots = x_star.knots.clone();
    knots.extend_from_slice(grid);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let eopts = ExpectOpts {
        knots,
        ..ExpectOpts::default()
    };

    let lsx = x_star.log_payoff();
    let lui = Arc::clone(&log_ui);
    let strict_mass = q
        .expect_with(
            &move |z: f64| {
                let ls = lsx(z);
                let lu = lui(z);
                let vs = XReal::exp(ls).value();
                let vu = XReal::exp(lu).value();
                let gap = if vs.is_infinite() && vu.is_infinite() {
                    0.0
                } else {
                    vs - vu
                };
                if gap > tol {
                    XReal::ONE
                } else {
                    XReal::ZERO
                }
            },
            &eopts,
        )?
        .value
        .value();

    let lsx = x_star.log_payoff();
    let lui = Arc::clone(&log_ui);
    let log_wealth_gain = q
        .expect_signed(
            &move |z: f64| {
                let ls = lsx(z);
                let lu = lui(z);
                if ls == lu {
                    0.0 // covers the doubly infinite and doubly zero cases
                } else {
                    (ls - lu).clamp(-700.0, 700.0)
                }
            },
            &eopts,
        )?
        .value;

    let pass = min_gap >= -tol && log_wealth_gain >= -tol;
    Ok(UiComparison {
        grid: grid.to_vec(),
        x_star: xs,
        x_ui: xu,
        gap: gaps,
        min_gap,
        strict_mass,
        log_wealth_gain,
        tol,
        pass,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeqStep {
    pub entropy: f64,
    pub l1_log_distance_to_last: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimizingDiagnostic {
    pub steps: Vec<SeqStep>,
    /// The L1 log distances shrink toward 0 along the sequence.
    pub trending_to_zero: bool,
}

/// Entropy along a candidate minimizing sequence, plus each step's L1 log
/// distance to the final element. A sequence that converges in the
/// entropy sense must have the distances trend to zero.
pub fn minimizing_sequence_diagnostic(
    q: &Measure,
    seq: &[Measure],
) -> Result<MinimizingDiagnostic> {
    if seq.is_empty() {
        return Err(Error::Precondition("empty sequence".into()));
    }
    let mut knots = component_knots(seq);
    knots.extend(component_knots(std::slice::from_ref(q)));
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let eopts = ExpectOpts {
        knots,
        ..ExpectOpts::default()
    };
    let last = seq.last().expect("nonempty");
    let mut steps = Vec::with_capacity(seq.len());
    for p in seq {
        let entropy = relative_entropy(q, p, &eopts)?;
        let pc = p.clone();
        let lc = last.clone();
        let dist = q
            .expect_signed(
                &move |z: f64| {
                    let a = log_density(&pc, z);
                    let b = log_density(&lc, z);
                    if a == b {
                        0.0
                    } else {
                        (a - b).abs().min(1e300)
                    }
                },
                &eopts,
            )?
            .value;
        steps.push(SeqStep {
            entropy,
            l1_log_distance_to_last: dist,
        });
    }
    let nontrivial = &steps[..steps.len().saturating_sub(1)];
    let trending_to_zero = match nontrivial.last() {
        None => true,
        Some(tail) => {
            let dmax = nontrivial
                .iter()
                .map(|s| s.l1_log_distance_to_last)
                .fold(0.0f64, f64::max);
            tail.l1_log_distance_to_last <= 0.25 * dmax + 1e-12
        }
    };
    Ok(MinimizingDiagnostic {
        steps,
        trending_to_zero,
    })
}

/// The standard probe set: the constant bet, each component against the
/// reference projection, the generating family where the null has one,
/// and 32 seeded random convex blends. Every probe still has to pass its
/// own e-variable check before a certificate will price it.
pub fn default_probes(
    null: &NullHypothesis,
    p_star: &Measure,
    knots: &[f64],
    seed: u64,
) -> Result<Vec<EVariable>> {
    let mut out = vec![EVariable::from_log("1", Arc::new(|_| 0.0), vec![])];
    match null {
        NullHypothesis::FiniteMixture { components } => {
            let discrete = components
                .iter()
                .all(|c| matches!(c, Measure::Discrete(_)));
            for (i, c) in components.iter().enumerate() {
                let cc = c.clone();
                let ps = p_star.clone();
                out.push(EVariable::from_log(
                    format!("p_{i}/p*"),
                    Arc::new(move |z: f64| ratio_log(log_density(&cc, z), log_density(&ps, z))),
                    knots.to_vec(),
                ));
            }
            let k = components.len();
            for j in 0..32u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j + 1);
                let mut w: Vec<f64> = (0..k)
                    .map(|_| -rng.random::<f64>().max(1e-12).ln())
                    .collect();
                let s: f64 = w.iter().sum();
                for wi in &mut w {
                    *wi /= s;
                }
                let mix = MixtureEval::new(components, &w, discrete);
                let ps = p_star.clone();
                out.push(EVariable::from_log(
                    format!("mix_{j}/p*"),
                    Arc::new(move |z: f64| ratio_log(mix.log_value(z), log_density(&ps, z))),
                    knots.to_vec(),
                ));
            }
        }
        _ => {
            let gens = generators(null, 16)?;
            out.extend(gens.iter().cloned());
            if !gens.is_empty() {
                let mut gen_knots: Vec<f64> = knots.to_vec();
                for g in &gens {
                    gen_knots.extend_from_slice(&g.knots);
                }
                gen_knots.sort_by(f64::total_cmp);
                gen_knots.dedup();
                for j in 0..32u64 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(j + 1);
                    let mut a: Vec<f64> = (0..gens.len())
                        .map(|_| -rng.random::<f64>().max(1e-12).ln())
                        .collect();
                    let s: f64 = a.iter().sum();
                    for ai in &mut a {
                        *ai /= s;
                    }
                    let parts: Vec<EVariable> = gens.clone();
                    out.push(EVariable::from_fn(
                        format!("blend_{j}"),
                        Arc::new(move |z: f64| {
                            let mut acc = 0.0f64;
                            for (g, &ai) in parts.iter().zip(&a) {
                                acc += ai * g.value(z).value();
                            }
                            XReal::from(acc)
                        }),
                        gen_knots.clone(),
                    ));
                }
            }
        }
    }
    Ok(out)
}
