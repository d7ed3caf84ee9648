//! Null hypothesis descriptions and checks against them.
//!
//! A null is a set of probability measures. Finite sets are explicit;
//! the structured nulls (generated by e-variable families, symmetric,
//! one-sided exponential family) are infinite sets represented by their
//! defining constraint. Checks against infinite nulls run over
//! representative member grids that include the binding extreme points,
//! so a violation anywhere realistic is caught while a pass stays honest
//! about being grid-based.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::measure::{ExpectOpts, Family, Measure};
use crate::quad::Span;
use crate::simplex::dominating_weights;
use crate::verify::{Certificate, CheckResult};
use crate::xreal::XReal;
use std::fmt;
use std::sync::Arc;

pub const MAX_COMPONENTS: usize = 256;

/// A named nonnegative payoff, carried in both linear and log form. The log
/// form matters: tilted payoffs overflow pointwise long before their
/// expectations do, so every integration against a density goes through
/// `log_value`.
#[derive(Clone)]
pub struct EVariable {
    pub label: String,
    eval: Arc<dyn Fn(f64) -> XReal + Send + Sync>,
    log_eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Payoff peak locations, forwarded to quadrature as panel seeds.
    pub knots: Vec<f64>,
}

impl EVariable {
    pub fn new(
        label: impl Into<String>,
        eval: Arc<dyn Fn(f64) -> XReal + Send + Sync>,
        log_eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        knots: Vec<f64>,
    ) -> EVariable {
        EVariable {
            label: label.into(),
            eval,
            log_eval,
            knots,
        }
    }

    pub fn from_log(
        label: impl Into<String>,
        log_eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        knots: Vec<f64>,
    ) -> EVariable {
        let le = Arc::clone(&log_eval);
        EVariable {
            label: label.into(),
            eval: Arc::new(move |z| XReal::exp(le(z))),
            log_eval,
            knots,
        }
    }

    pub fn from_fn(
        label: impl Into<String>,
        eval: Arc<dyn Fn(f64) -> XReal + Send + Sync>,
        knots: Vec<f64>,
    ) -> EVariable {
        let ev = Arc::clone(&eval);
        EVariable {
            label: label.into(),
            eval,
            log_eval: Arc::new(move |z| ev(z).ln()),
            knots,
        }
    }

    pub fn from_numeraire(
        label: impl Into<String>,
        n: &crate::solution::Numeraire,
        knots: Vec<f64>,
    ) -> EVariable {
        let n1 = n.clone();
        let n2 = n.clone();
        EVariable {
            label: label.into(),
            eval: Arc::new(move |z| n1.value(z)),
            log_eval: Arc::new(move |z| n2.log_value(z)),
            knots,
        }
    }

    pub fn value(&self, z: f64) -> XReal {
        (self.eval)(z)
    }

    pub fn log_value(&self, z: f64) -> f64 {
        (self.log_eval)(z)
    }

    pub fn payoff(&self) -> Arc<dyn Fn(f64) -> XReal + Send + Sync> {
        Arc::clone(&self.eval)
    }

    pub fn log_payoff(&self) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        Arc::clone(&self.log_eval)
    }
}

impl fmt::Debug for EVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EVariable({})", self.label)
    }
}

/// How a generated null is cut out of the space of probability measures.
#[derive(Clone, Debug)]
pub enum GeneratedTag {
    /// All distributions on `[0,1]` with mean at most `mu`, `mu` in (0, 1/2).
    /// Generated by the linear payoffs `1 + lam (Z - mu)`, `lam <= 1/mu`.
    BoundedMean { mu: f64 },
    /// All `P` with `E_P[exp(t Z)] <= exp(t^2 sigma^2 / 2)` for every `t`.
    SubGaussian { sigma: f64 },
    /// Cut out by an explicit list of generating payoffs. Membership of a
    /// given measure is checkable; enumerating members is not.
    Custom { generators: Vec<EVariable> },
}

#[derive(Clone, Debug)]
pub enum NullHypothesis {
    /// An explicit finite set `{P_1, ..., P_k}`.
    FiniteMixture { components: Vec<Measure> },
    /// The set of all laws passing a family of generating e-variables.
    Generated { tag: GeneratedTag },
    /// All distributions symmetric about the origin.
    Symmetric,
    /// One-sided natural exponential family `{p_theta : theta <= theta_star}`
    /// over the carrier `reference`:
    /// `p_theta(z) = r(z) exp(theta T(z) - A(theta))`.
    /// Both `A` and `T` are expressions in one variable.
    ExpFamily {
        log_partition: Expr,
        sufficient_stat: Expr,
        theta_star: f64,
        reference: Measure,
    },
}

impl NullHypothesis {
    pub fn validate(&self) -> Result<()> {
        match self {
            NullHypothesis::FiniteMixture { components } => {
                if components.is_empty() {
                    return Err(Error::UnsupportedNull("empty component list".into()));
                }
                if components.len() > MAX_COMPONENTS {
                    return Err(Error::InstanceTooLarge(format!(
                        "{} components exceeds the supported {MAX_COMPONENTS}",
                        components.len()
                    )));
                }
                for (i, c) in components.iter().enumerate() {
                    if !c.is_probability(1e-6) {
                        return Err(Error::InvalidMeasure(format!(
                            "null component {i} has mass {}, expected 1",
                            c.total_mass()
                        )));
                    }
                }
                Ok(())
            }
            NullHypothesis::Generated { tag } => match tag {
                GeneratedTag::BoundedMean { mu } => {
                    if *mu > 0.0 && *mu < 0.5 {
                        Ok(())
                    } else {
                        Err(Error::UnsupportedNull(format!(
                            "bounded-mean level must lie in (0, 1/2), got {mu}"
                        )))
                    }
                }
                GeneratedTag::SubGaussian { sigma } => {
                    if *sigma > 0.0 && sigma.is_finite() {
                        Ok(())
                    } else {
                        Err(Error::UnsupportedNull(format!(
                            "sub-gaussian scale must be positive, got {sigma}"
                        )))
                    }
                }
                GeneratedTag::Custom { generators } => {
                    if generators.is_empty() {
                        Err(Error::UnsupportedNull(
                            "custom generated null needs at least one generator".into(),
                        ))
                    } else {
                        Ok(())
                    }
                }
            },
            NullHypothesis::Symmetric => Ok(()),
            NullHypothesis::ExpFamily {
                log_partition,
                theta_star,
                reference,
                ..
            } => {
                if !theta_star.is_finite() {
                    return Err(Error::UnsupportedNull("non-finite threshold".into()));
                }
                if !log_partition.eval(*theta_star).is_finite() {
                    return Err(Error::UnsupportedNull(format!(
                        "log-partition is not finite at theta = {theta_star}"
                    )));
                }
                if reference.total_mass() > 1.0 + 1e-8 {
                    return Err(Error::InvalidMeasure(format!(
                        "exponential-family reference has mass {}",
                        reference.total_mass()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NullHypothesis::FiniteMixture { components } => {
                format!("finite set of {} measures", components.len())
            }
            NullHypothesis::Generated { tag } => match tag {
                GeneratedTag::BoundedMean { mu } => format!("mean at most {mu} on [0,1]"),
                GeneratedTag::SubGaussian { sigma } => format!("sub-gaussian, scale {sigma}"),
                GeneratedTag::Custom { generators } => {
                    format!("generated by {} payoffs", generators.len())
                }
            },
            NullHypothesis::Symmetric => "symmetric about 0".into(),
            NullHypothesis::ExpFamily { theta_star, .. } => {
                format!("exponential family with theta <= {theta_star}")
            }
        }
    }
}

/// A representative null member with a human-readable label.
pub struct Member {
    pub label: String,
    pub measure: Measure,
}

/// Controls for grid-based null checks.
#[derive(Clone, Debug)]
pub struct EvarOpts {
    /// Excess above 1 tolerated before a member counts as violated.
    pub tol: f64,
    /// Quadrature accuracy for density members.
    pub acc: f64,
    /// Base resolution of member grids.
    pub grid: usize,
    /// Range of the symmetric member grid; defaults to [-20, 20]. Callers
    /// holding an alternative should pass its small-quantile span.
    pub z_hint: Option<Span>,
    /// Integrand features forwarded to quadrature.
    pub knots: Vec<f64>,
}

impl Default for EvarOpts {
    fn default() -> Self {
        EvarOpts {
            tol: 1e-8,
            acc: 1e-10,
            grid: 512,
            z_hint: None,
            knots: Vec::new(),
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a);
    if n == 1 {
        return vec![(a * b).sqrt()];
    }
    let la = a.ln();
    let lb = b.ln();
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn two_point(a: f64, wa: f64, b: f64, wb: f64) -> Measure {
    Measure::discrete(vec![a, b], vec![wa, wb]).expect("two-point member")
}

/// The member `p_theta(z) = r(z) exp(theta T(z) - A(theta))` of an
/// exponential family over the carrier `reference`. Normalization is
/// enforced: a log-partition that does not integrate the tilt back to unit
/// mass is an input error, not a quirk to propagate.
pub fn expfam_member(
    log_partition: &Expr,
    sufficient_stat: &Expr,
    reference: &Measure,
    theta: f64,
) -> Result<Measure> {
    let a = log_partition.eval(theta);
    if !a.is_finite() {
        return Err(Error::UnsupportedNull(format!(
            "log-partition is not finite at theta = {theta}"
        )));
    }
    match reference {
        Measure::Discrete(d) => {
            let support = d.support().to_vec();
            let mass: Vec<f64> = support
                .iter()
                .zip(d.masses())
                .map(|(&z, &m)| m * (theta * sufficient_stat.eval(z) - a).exp())
                .collect();
            let total: f64 = mass.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidMeasure(format!(
                    "log-partition does not normalize the tilted reference at \
                     theta = {theta}: mass {total}"
                )));
            }
            Measure::discrete(support, mass)
        }
        Measure::Density(dm) => {
            let t1 = sufficient_stat.clone();
            let t2 = sufficient_stat.clone();
            let r_pdf = dm.clone();
            let r_log = dm.clone();
            let pdf: crate::measure::PdfFn = Arc::new(move |z| {
                let l = r_pdf.log_pdf(z) + theta * t1.eval(z) - a;
                if l.is_finite() {
                    l.exp()
                } else if l == f64::NEG_INFINITY {
                    0.0
                } else {
                    f64::NAN
                }
            });
            let log_pdf: crate::measure::PdfFn =
                Arc::new(move |z| r_log.log_pdf(z) + theta * t2.eval(z) - a);
            let span = reference.quantile_span(0.05);
            let knots = if span.lo.is_finite() && span.hi.is_finite() {
                let mid = 0.5 * (span.lo + span.hi);
                vec![mid, mid + theta * 0.5 * (span.hi - span.lo)]
            } else {
                Vec::new()
            };
            let m = Measure::density_fn(pdf, Some(log_pdf), dm.domain(), &knots)?;
            if m.total_mass() < 1.0 - 1e-6 {
                return Err(Error::InvalidMeasure(format!(
                    "log-partition does not normalize the tilted reference at \
                     theta = {theta}: mass {}",
                    m.total_mass()
                )));
            }
            Ok(m)
        }
    }
}

/// Representative members of the null. For finite nulls these are the
/// components themselves; for structured nulls, grids of extreme points
/// (which is where suprema of linear functionals live) plus the natural
/// binding members.
pub fn representative_members(null: &NullHypothesis, opts: &EvarOpts) -> Result<Vec<Member>> {
    null.validate()?;
    let g = opts.grid.max(4);
    let mut out = Vec::new();
    match null {
        NullHypothesis::FiniteMixture { components } => {
            for (i, c) in components.iter().enumerate() {
                out.push(Member {
                    label: format!("component {i}"),
                    measure: c.clone(),
                });
            }
        }
        NullHypothesis::Generated { tag } => match tag {
            GeneratedTag::BoundedMean { mu } => {
                for z in linspace(0.0, *mu, g) {
                    out.push(Member {
                        label: format!("point mass at {z:.6}"),
                        measure: Measure::dirac(z),
                    });
                }
                // two-point measures with mean exactly mu: the binding face
                let pairs = (g / 4).max(4);
                for a in linspace(0.0, mu * (1.0 - 1e-3), pairs) {
                    for b in linspace(mu + (1.0 - mu) * 1e-3, 1.0, pairs) {
                        let w = (b - mu) / (b - a);
                        out.push(Member {
                            label: format!("pair ({a:.4},{b:.4}) at mean {mu}"),
                            measure: two_point(a, w, b, 1.0 - w),
                        });
                    }
                }
            }
            GeneratedTag::SubGaussian { sigma } => {
                out.push(Member {
                    label: "point mass at 0".into(),
                    measure: Measure::dirac(0.0),
                });
                for s in geomspace(sigma / 64.0, *sigma, (g / 4).max(4)) {
                    out.push(Member {
                        label: format!("centered gaussian, sd {s:.6}"),
                        measure: Measure::family(Family::Normal { mean: 0.0, sd: s })?,
                    });
                }
                for a in linspace(sigma / 16.0, *sigma, (g / 4).max(4)) {
                    out.push(Member {
                        label: format!("symmetric pair +-{a:.6}"),
                        measure: two_point(-a, 0.5, a, 0.5),
                    });
                }
            }
            GeneratedTag::Custom { .. } => {
                return Err(Error::UnsupportedNull(
                    "custom generated nulls carry no member oracle".into(),
                ))
            }
        },
        NullHypothesis::Symmetric => {
            out.push(Member {
                label: "point mass at 0".into(),
                measure: Measure::dirac(0.0),
            });
            let span = opts.z_hint.unwrap_or(Span::new(-20.0, 20.0));
            let zmax = span.hi.abs().max(span.lo.abs()).max(1e-3);
            let mut zs = geomspace(zmax * 1e-4, zmax, g / 2);
            zs.extend(linspace(zmax / g as f64, zmax, g / 2));
            zs.sort_by(f64::total_cmp);
            zs.dedup();
            for z in zs {
                out.push(Member {
                    label: format!("symmetric pair +-{z:.6}"),
                    measure: two_point(-z, 0.5, z, 0.5),
                });
            }
        }
        NullHypothesis::ExpFamily {
            log_partition,
            sufficient_stat,
            theta_star,
            reference,
        } => {
            out.push(Member {
                label: format!("family member at theta = {theta_star} (boundary)"),
                measure: expfam_member(log_partition, sufficient_stat, reference, *theta_star)?,
            });
            for d in geomspace(1e-6, 10.0, (g / 4).max(8)) {
                let th = theta_star - d;
                match expfam_member(log_partition, sufficient_stat, reference, th) {
                    Ok(m) => out.push(Member {
                        label: format!("family member at theta = {th:.6}"),
                        measure: m,
                    }),
                    // a finite theta range is fine; grid points past it are skipped
                    Err(Error::UnsupportedNull(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(out)
}

/// Does `sup_P E_P[X] <= 1` hold across the member grid? Passes iff the
/// worst measured excess stays within `opts.tol`; the worst member is
/// recorded as the witness either way.
pub fn is_evariable(x: &EVariable, null: &NullHypothesis, opts: &EvarOpts) -> Result<Certificate> {
    let members = representative_members(null, opts)?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_member = String::new();
    let mut knots = x.knots.clone();
    knots.extend_from_slice(&opts.knots);
    let eopts = ExpectOpts {
        acc: opts.acc,
        knots,
        ..ExpectOpts::default()
    };
    for m in &members {
        let e = match &m.measure {
            Measure::Discrete(_) => m.measure.expect_with(&|z| x.value(z), &eopts)?,
            Measure::Density(_) => m.measure.expect_log(&|z| x.log_value(z), &eopts)?,
        };
        let excess = if e.value.is_infinite() {
            f64::INFINITY
        } else {
            e.value.value() - 1.0
        };
        if excess > worst {
            worst = excess;
            worst_member = m.label.clone();
        }
    }
    let check = CheckResult {
        name: format!("e-variable: sup E_P[{}] <= 1", x.label),
        residual: worst,
        tol: opts.tol,
        pass: worst <= opts.tol,
        witness: format!(
            "worst of {} members: {worst_member}, excess {worst:.3e}",
            members.len()
        ),
    };
    Ok(Certificate::single(check))
}

/// Payoffs with `E_P[X] <= 1` for every member `P`, by the structure of the
/// null rather than by measurement. Empty for finite nulls (their natural
/// probes are ratios against candidate mixtures, built by the caller).
pub fn generators(null: &NullHypothesis, grid: usize) -> Result<Vec<EVariable>> {
    null.validate()?;
    let g = grid.max(4);
    let mut out: Vec<EVariable> = Vec::new();
    match null {
        NullHypothesis::FiniteMixture { .. } => {}
        NullHypothesis::Generated { tag } => match tag {
            GeneratedTag::BoundedMean { mu } => {
                let mu = *mu;
                // 1 + lam (z - mu) stays nonnegative on [0,1] for lam <= 1/mu
                for lam in linspace(0.0, 1.0 / mu, g) {
                    out.push(EVariable::new(
                        format!("linear payoff, slope {lam:.6}"),
                        Arc::new(move |z| XReal::from((1.0 + lam * (z - mu)).max(0.0))),
                        Arc::new(move |z| (1.0 + lam * (z - mu)).max(0.0).ln()),
                        vec![0.0, mu, 1.0],
                    ));
                }
            }
            GeneratedTag::SubGaussian { sigma } => {
                let s2 = sigma * sigma;
                let mut ts = geomspace(1e-4, 50.0, g / 2);
                let negs: Vec<f64> = ts.iter().map(|t| -t).collect();
                ts.extend(negs);
                for t in ts {
                    out.push(EVariable::from_log(
                        format!("exp payoff, t={t:.6}"),
                        Arc::new(move |z| t * z - 0.5 * t * t * s2),
                        // the integrand against N(0, v) peaks near t v
                        vec![t * s2, 0.0],
                    ));
                }
            }
            GeneratedTag::Custom { generators } => out.extend(generators.iter().cloned()),
        },
        NullHypothesis::Symmetric => {
            // 2 g / (g + g~) has unit mean under any symmetric P
            for m in linspace(0.25, 6.0, g) {
                out.push(EVariable::new(
                    format!("fold payoff, shift {m:.4}"),
                    // 2 phi(z-m) / (phi(z-m) + phi(z+m)) in stable form
                    Arc::new(move |z| XReal::from(2.0 / (1.0 + (-2.0 * m * z).exp()))),
                    Arc::new(move |z| {
                        std::f64::consts::LN_2 - (-2.0 * m * z).exp().ln_1p()
                    }),
                    vec![-m, 0.0, m],
                ));
            }
        }
        NullHypothesis::ExpFamily {
            log_partition,
            sufficient_stat,
            theta_star,
            ..
        } => {
            let ts = *theta_star;
            let a_star = log_partition.eval(ts);
            // exp(t T(z) - (A(ts + t) - A(ts))): unit mean at the boundary
            // member, below 1 for every theta < ts by convexity of A
            for t in geomspace(1e-3, 20.0, g) {
                let a_t = log_partition.eval(ts + t);
                if !a_t.is_finite() {
                    continue;
                }
                let shift = a_t - a_star;
                let stat = sufficient_stat.clone();
                out.push(EVariable::from_log(
                    format!("tilt payoff, t={t:.6}"),
                    Arc::new(move |z| t * stat.eval(z) - shift),
                    vec![ts + t, ts],
                ));
            }
        }
    }
    Ok(out)
}

/// Outcome of a set-wise domination test against a finite null.
#[derive(Clone, Debug)]
pub struct Membership {
    pub member: bool,
    /// Simplex weights whose mixture dominates the candidate, when member.
    pub weights: Option<Vec<f64>>,
    /// A support point every mixture falls short at, when not a member.
    pub separating_point: Option<f64>,
    /// Largest shortfall `candidate({z}) - mixture({z})` at the best
    /// weights found (0 when dominated).
    pub shortfall: f64,
    pub grid_points: usize,
}

/// Is `candidate` set-wise dominated by some convex combination of the null
/// components? Decided exactly on the union support: feasibility of
/// `candidate({z}) <= sum_i lam_i P_i({z}) + tol` over simplex weights.
/// Only discrete instances are decidable this way; anything else is
/// rejected rather than approximated.
pub fn effective_null_membership(
    candidate: &Measure,
    null: &NullHypothesis,
    tol: f64,
) -> Result<Membership> {
    let components = match null {
        NullHypothesis::FiniteMixture { components } => components,
        other => {
            return Err(Error::UnsupportedNull(format!(
                "membership by domination needs a finite null, got: {}",
                other.describe()
            )))
        }
    };
    null.validate()?;

    let mut parts: Vec<&crate::measure::DiscreteMeasure> = Vec::new();
    for m in components.iter().chain(std::iter::once(candidate)) {
        match m.as_discrete() {
            Some(d) => parts.push(d),
            None => {
                return Err(Error::UnsupportedNull(
                    "domination is decided point-wise on atoms; continuous \
                     instances are rejected"
                        .into(),
                ))
            }
        }
    }
    let support = crate::measure::union_support(&parts);
    let rows: Vec<Vec<f64>> = support
        .iter()
        .map(|&z| components.iter().map(|c| c.mass_at(z)).collect())
        .collect();
    let c: Vec<f64> = support.iter().map(|&z| candidate.mass_at(z)).collect();

    match dominating_weights(&rows, &c, tol, 50_000) {
        Ok(weights) => {
            let shortfall = rows
                .iter()
                .zip(&c)
                .map(|(row, &cj)| {
                    cj - row.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>()
                })
                .fold(0.0f64, f64::max);
            Ok(Membership {
                member: true,
                weights: Some(weights),
                separating_point: None,
                shortfall,
                grid_points: support.len(),
            })
        }
        Err((j, gap)) => Ok(Membership {
            member: false,
            weights: None,
            separating_point: Some(support[j]),
            shortfall: gap,
            grid_points: support.len(),
        }),
    }
}
