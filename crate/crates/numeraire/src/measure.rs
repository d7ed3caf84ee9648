//! Sub-probability measures on the real line and their expectations.
//!
//! Two carriers: finite atom lists and Lebesgue densities. Densities may be
//! named families (normal, Cauchy, uniform, exponential), which unlocks
//! closed-form log densities, quantiles and good quadrature folds, or plain
//! closures with an explicit domain.
//!
//! Expectations of `[0, inf]`-valued integrands follow the arithmetic of
//! [`crate::xreal`]: zero-mass atoms absorb infinite values, and a density
//! expectation is `+inf` exactly when the quadrature layer detects a
//! non-integrable contribution on a region of positive mass.

use crate::error::{Error, Result};
use crate::quad::{self, QuadOutcome, Span, DEFAULT_QUAD_BUDGET, DEFAULT_QUAD_TOL};
use crate::xreal::{weighted, XReal, OVERFLOW_GUARD_LOG};
use std::fmt;
use std::sync::Arc;

/// Atom masses must sum to at most `1 + DISCRETE_MASS_TOL`.
pub const DISCRETE_MASS_TOL: f64 = 1e-12;
/// Density masses are verified by quadrature to at most `1 + DENSITY_MASS_TOL`.
pub const DENSITY_MASS_TOL: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Named density families with closed-form evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Normal { mean: f64, sd: f64 },
    Cauchy { location: f64, scale: f64 },
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Family::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && *sd > 0.0,
            Family::Cauchy { location, scale } => {
                location.is_finite() && scale.is_finite() && *scale > 0.0
            }
            Family::Uniform { a, b } => a.is_finite() && b.is_finite() && a < b,
            Family::Exponential { rate } => rate.is_finite() && *rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMeasure(format!("bad family parameters: {self:?}")))
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        match *self {
            Family::Normal { mean, sd } => {
                let t = (z - mean) / sd;
                (-0.5 * t * t).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Family::Cauchy { location, scale } => {
                let t = (z - location) / scale;
                1.0 / (std::f64::consts::PI * scale * (1.0 + t * t))
            }
            Family::Uniform { a, b } => {
                if z >= a && z <= b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Family::Exponential { rate } => {
                if z >= 0.0 {
                    rate * (-rate * z).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Log density; `-inf` off the support. Never overflows for finite `z`.
    pub fn log_pdf(&self, z: f64) -> f64 {
        match *self {
            Family::Normal { mean, sd } => {
                let t = (z - mean) / sd;
                -0.5 * t * t - sd.ln() - 0.5 * LN_2PI
            }
            Family::Cauchy { location, scale } => {
                let t = (z - location) / scale;
                -(std::f64::consts::PI * scale).ln() - (1.0 + t * t).ln()
            }
            Family::Uniform { a, b } => {
                if z >= a && z <= b {
                    -(b - a).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Exponential { rate } => {
                if z >= 0.0 {
                    rate.ln() - rate * z
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            Family::Normal { mean, sd } => normal_cdf((z - mean) / sd),
            Family::Cauchy { location, scale } => {
                0.5 + ((z - location) / scale).atan() / std::f64::consts::PI
            }
            Family::Uniform { a, b } => ((z - a) / (b - a)).clamp(0.0, 1.0),
            Family::Exponential { rate } => {
                if z <= 0.0 {
                    0.0
                } else {
                    -(-rate * z).exp_m1()
                }
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(1e-300, 1.0 - 1e-16);
        match *self {
            Family::Normal { mean, sd } => mean + sd * normal_quantile(u),
            Family::Cauchy { location, scale } => {
                location + scale * (std::f64::consts::PI * (u - 0.5)).tan()
            }
            Family::Uniform { a, b } => a + u * (b - a),
            Family::Exponential { rate } => -(-u).ln_1p() / rate,
        }
    }

    pub fn domain(&self) -> Span {
        match *self {
            Family::Normal { .. } | Family::Cauchy { .. } => {
                Span::new(f64::NEG_INFINITY, f64::INFINITY)
            }
            Family::Uniform { a, b } => Span::new(a, b),
            Family::Exponential { .. } => Span::new(0.0, f64::INFINITY),
        }
    }

    /// Fold center for the tangent substitution.
    pub fn center(&self) -> f64 {
        match *self {
            Family::Normal { mean, .. } => mean,
            Family::Cauchy { location, .. } => location,
            Family::Uniform { a, b } => 0.5 * (a + b),
            Family::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Family::Normal { sd, .. } => sd,
            Family::Cauchy { scale, .. } => scale,
            Family::Uniform { a, b } => 0.25 * (b - a),
            Family::Exponential { rate } => 1.0 / rate,
        }
    }
}

/// Standard normal CDF via a Chebyshev fit to erfc. Relative error about
/// 1.2e-7; used for grid spans and mass diagnostics, never inside certified
/// residuals.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc_approx(-t / std::f64::consts::SQRT_2)
}

fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 2.0 / (2.0 + z);
    let ty = 4.0 * t - 2.0;
    const COF: [f64; 28] = [
        -1.3026537197817094,
        6.419_697_923_564_902e-1,
        1.9476473204185836e-2,
        -9.561_514_786_808_63e-3,
        -9.46595344482036e-4,
        3.66839497852761e-4,
        4.2523324806907e-5,
        -2.0278578112534e-5,
        -1.624290004647e-6,
        1.303655835580e-6,
        1.5626441722e-8,
        -8.5238095915e-8,
        6.529054439e-9,
        5.059343495e-9,
        -9.91364156e-10,
        -2.27365122e-10,
        9.6467911e-11,
        2.394038e-12,
        -6.886027e-12,
        8.94487e-13,
        3.13092e-13,
        -1.12708e-13,
        3.81e-16,
        7.106e-15,
        -1.523e-15,
        -9.4e-17,
        1.21e-16,
        -2.8e-17,
    ];
    let mut d = 0.0f64;
    let mut dd = 0.0f64;
    for j in (1..COF.len()).rev() {
        let tmp = d;
        d = ty * d - dd + COF[j];
        dd = tmp;
    }
    let ans = t * (-z * z + 0.5 * (COF[0] + ty * d) - dd).exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Acklam's rational approximation to the standard normal quantile.
/// Absolute error below 1.2e-9 across (0, 1); used only for grid layout.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0,1)");
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

pub type PdfFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Finitely supported measure. Support is strictly increasing; alignment
/// between measures uses exact `f64` equality of support points (atoms that
/// should coincide must come from the same parse or literal).
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    support: Vec<f64>,
    mass: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<f64>, mass: Vec<f64>) -> Result<DiscreteMeasure> {
        if support.len() != mass.len() {
            return Err(Error::InvalidMeasure(format!(
                "support has {} points but {} masses",
                support.len(),
                mass.len()
            )));
        }
        // empty lists are legal: they are the zero measure (decomposition
        // parts can vanish)
        for w in support.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidMeasure(format!(
                    "support must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let mut total = 0.0;
        for (&z, &m) in support.iter().zip(&mass) {
            if !z.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite atom {z}")));
            }
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::InvalidMeasure(format!("mass {m} at {z} invalid")));
            }
            total += m;
        }
        if total > 1.0 + DISCRETE_MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "total mass {total} exceeds 1 beyond tolerance"
            )));
        }
        Ok(DiscreteMeasure { support, mass })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_at(&self, z: f64) -> f64 {
        match self
            .support
            .binary_search_by(|probe| probe.total_cmp(&z))
        {
            Ok(i) => self.mass[i],
            Err(_) => 0.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Lebesgue-density measure over a single (possibly unbounded) interval.
pub struct DensityMeasure {
    pdf: PdfFn,
    log_pdf: PdfFn,
    domain: Span,
    family: Option<Family>,
    mass: f64,
}

impl Clone for DensityMeasure {
    fn clone(&self) -> Self {
        DensityMeasure {
            pdf: Arc::clone(&self.pdf),
            log_pdf: Arc::clone(&self.log_pdf),
            domain: self.domain,
            family: self.family,
            mass: self.mass,
        }
    }
}

impl fmt::Debug for DensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMeasure")
            .field("domain", &self.domain)
            .field("family", &self.family)
            .field("mass", &self.mass)
            .finish()
    }
}

impl DensityMeasure {
    pub fn pdf(&self, z: f64) -> f64 {
        if !self.domain.contains(z) {
            return 0.0;
        }
        let v = (self.pdf)(z);
        if v.is_nan() || v < 0.0 {
            0.0
        } else {
            v
        }
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        if !self.domain.contains(z) {
            return f64::NEG_INFINITY;
        }
        let v = (self.log_pdf)(z);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    pub fn domain(&self) -> Span {
        self.domain
    }

    pub fn family(&self) -> Option<Family> {
        self.family
    }

    pub fn total_mass(&self) -> f64 {
        self.mass
    }
}

/// A measure is either a finite atom list or a density.
#[derive(Clone, Debug)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Density(DensityMeasure),
}

/// Expectation controls. `knots` are integrand features in z coordinates
/// (bump centers and the like) that seed the quadrature panelling.
#[derive(Clone, Debug)]
pub struct ExpectOpts {
    pub acc: f64,
    pub budget: usize,
    pub knots: Vec<f64>,
    pub center: Option<f64>,
    pub scale: Option<f64>,
}

impl Default for ExpectOpts {
    fn default() -> Self {
        ExpectOpts {
            acc: DEFAULT_QUAD_TOL,
            budget: DEFAULT_QUAD_BUDGET,
            knots: Vec::new(),
            center: None,
            scale: None,
        }
    }
}

impl ExpectOpts {
    pub fn with_acc(acc: f64) -> ExpectOpts {
        ExpectOpts {
            acc,
            ..ExpectOpts::default()
        }
    }
}

/// A computed expectation: value in `[0, inf]` plus an absolute error bound
/// (zero for exact finite sums, irrelevant when the value is infinite).
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: XReal,
    pub abs_err: f64,
}

/// A signed expectation in `[-inf, +inf]`. Follows the convention that the
/// value is `-inf` whenever the negative part diverges, regardless of the
/// positive part.
#[derive(Clone, Copy, Debug)]
pub struct SignedEstimate {
    pub value: f64,
    pub abs_err: f64,
}

impl Measure {
    pub fn discrete(support: Vec<f64>, mass: Vec<f64>) -> Result<Measure> {
        Ok(Measure::Discrete(DiscreteMeasure::new(support, mass)?))
    }

    pub fn dirac(z: f64) -> Measure {
        Measure::Discrete(DiscreteMeasure::new(vec![z], vec![1.0]).expect("dirac"))
    }

    pub fn family(f: Family) -> Result<Measure> {
        f.validate()?;
        Ok(Measure::Density(DensityMeasure {
            pdf: Arc::new(move |z| f.pdf(z)),
            log_pdf: Arc::new(move |z| f.log_pdf(z)),
            domain: f.domain(),
            family: Some(f),
            mass: 1.0,
        }))
    }

    /// Density from closures. The mass is computed by quadrature and must
    /// not exceed `1 + DENSITY_MASS_TOL`. `log_pdf` falls back to
    /// `ln(pdf)` when not supplied.
    pub fn density_fn(
        pdf: PdfFn,
        log_pdf: Option<PdfFn>,
        domain: Span,
        knots: &[f64],
    ) -> Result<Measure> {
        let log_pdf = log_pdf.unwrap_or_else(|| {
            let p = Arc::clone(&pdf);
            Arc::new(move |z| {
                let v = p(z);
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
        });
        let dm = DensityMeasure {
            pdf,
            log_pdf,
            domain,
            family: None,
            mass: 0.0,
        };
        let probe = Measure::Density(dm.clone());
        let mass = probe.expect_with(
            &|_| XReal::ONE,
            &ExpectOpts {
                acc: 1e-10,
                knots: knots.to_vec(),
                ..ExpectOpts::default()
            },
        )?;
        let mass_v = mass.value.value();
        if !mass_v.is_finite() || mass_v > 1.0 + DENSITY_MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "density mass {mass_v} exceeds 1 beyond tolerance"
            )));
        }
        Ok(Measure::Density(DensityMeasure { mass: mass_v, ..dm }))
    }

    /// Finite mixture `sum_i w_i P_i`. Weights must be nonnegative and sum
    /// to at most 1 + tol. All components must share a carrier type.
    pub fn mixture(components: &[Measure], weights: &[f64]) -> Result<Measure> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::Precondition(
                "mixture needs matching nonempty components and weights".into(),
            ));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Precondition("mixture weights must be >= 0".into()));
        }
        let all_discrete = components.iter().all(|m| matches!(m, Measure::Discrete(_)));
        let all_density = components.iter().all(|m| matches!(m, Measure::Density(_)));
        if all_discrete {
            let parts: Vec<&DiscreteMeasure> = components
                .iter()
                .map(|m| match m {
                    Measure::Discrete(d) => d,
                    _ => unreachable!(),
                })
                .collect();
            let support = union_support(&parts);
            let mass: Vec<f64> = support
                .iter()
                .map(|&z| {
                    parts
                        .iter()
                        .zip(weights)
                        .map(|(p, w)| w * p.mass_at(z))
                        .sum()
                })
                .collect();
            Measure::discrete(support, mass)
        } else if all_density {
            let parts: Vec<DensityMeasure> = components
                .iter()
                .map(|m| match m {
                    Measure::Density(d) => d.clone(),
                    _ => unreachable!(),
                })
                .collect();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut mass = 0.0;
            for (p, w) in parts.iter().zip(weights) {
                if *w > 0.0 {
                    lo = lo.min(p.domain.lo);
                    hi = hi.max(p.domain.hi);
                    mass += w * p.mass;
                }
            }
            if lo >= hi {
                return Err(Error::Precondition("mixture has empty support".into()));
            }
            if mass > 1.0 + DENSITY_MASS_TOL {
                return Err(Error::InvalidMeasure(format!(
                    "mixture mass {mass} exceeds 1 beyond tolerance"
                )));
            }
            let ws = weights.to_vec();
            let parts2 = parts.clone();
            let pdf: PdfFn = Arc::new(move |z| {
                parts2
                    .iter()
                    .zip(&ws)
                    .map(|(p, w)| w * p.pdf(z))
                    .sum::<f64>()
            });
            let p3 = Arc::clone(&pdf);
            let log_pdf: PdfFn = Arc::new(move |z| {
                let v = p3(z);
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            });
            Ok(Measure::Density(DensityMeasure {
                pdf,
                log_pdf,
                domain: Span::new(lo, hi),
                family: None,
                mass,
            }))
        } else {
            Err(Error::NoCommonReference(
                "cannot mix atom lists with densities".into(),
            ))
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Measure::Discrete(d) => d.total_mass(),
            Measure::Density(d) => d.total_mass(),
        }
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total_mass() - 1.0).abs() <= tol
    }

    /// Density value at `z`; atom lists report 0 everywhere (points carry
    /// mass, not density).
    pub fn pdf(&self, z: f64) -> f64 {
        match self {
            Measure::Discrete(_) => 0.0,
            Measure::Density(d) => d.pdf(z),
        }
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        match self {
            Measure::Discrete(_) => f64::NEG_INFINITY,
            Measure::Density(d) => d.log_pdf(z),
        }
    }

    pub fn mass_at(&self, z: f64) -> f64 {
        match self {
            Measure::Discrete(d) => d.mass_at(z),
            Measure::Density(_) => 0.0,
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteMeasure> {
        match self {
            Measure::Discrete(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_density(&self) -> Option<&DensityMeasure> {
        match self {
            Measure::Density(d) => Some(d),
            _ => None,
        }
    }

    pub fn domain(&self) -> Span {
        match self {
            Measure::Discrete(d) => match (d.support.first(), d.support.last()) {
                (Some(&lo), Some(&hi)) => Span::new(lo, hi),
                _ => Span::new(0.0, 0.0),
            },
            Measure::Density(d) => d.domain,
        }
    }

    /// Interval holding all but `eps` of the mass on each side, used for
    /// grid layout. Falls back to a density scan when no family is tagged.
    pub fn quantile_span(&self, eps: f64) -> Span {
        match self {
            Measure::Discrete(_) => self.domain(),
            Measure::Density(d) => {
                if let Some(f) = d.family {
                    Span::new(f.quantile(eps), f.quantile(1.0 - eps))
                } else {
                    scan_span(d)
                }
            }
        }
    }

    pub fn quantile(&self, u: f64) -> Option<f64> {
        match self {
            Measure::Density(d) => d.family.map(|f| f.quantile(u)),
            Measure::Discrete(d) => {
                let mut acc = 0.0;
                let total = d.total_mass();
                for (&z, &m) in d.support.iter().zip(&d.mass) {
                    acc += m;
                    if acc >= u * total {
                        return Some(z);
                    }
                }
                d.support.last().copied()
            }
        }
    }

    fn fold_center(&self) -> f64 {
        match self {
            Measure::Discrete(d) => {
                if d.support.is_empty() {
                    0.0
                } else {
                    0.5 * (d.support[0] + d.support[d.support.len() - 1])
                }
            }
            Measure::Density(d) => match d.family {
                Some(f) => f.center(),
                None => {
                    if d.domain.is_finite() {
                        0.5 * (d.domain.lo + d.domain.hi)
                    } else {
                        0.0
                    }
                }
            },
        }
    }

    fn fold_scale(&self) -> f64 {
        match self {
            Measure::Discrete(_) => 1.0,
            Measure::Density(d) => match d.family {
                Some(f) => f.scale(),
                None => {
                    if d.domain.is_finite() {
                        0.25 * (d.domain.hi - d.domain.lo).max(1e-8)
                    } else {
                        1.0
                    }
                }
            },
        }
    }

    fn default_knots(&self) -> Vec<f64> {
        match self {
            Measure::Discrete(_) => Vec::new(),
            Measure::Density(d) => match d.family {
                Some(f) => [1e-12, 1e-9, 1e-6, 1e-3, 0.01, 0.1, 0.5, 0.9, 0.99, 1.0 - 1e-3,
                    1.0 - 1e-6, 1.0 - 1e-9, 1.0 - 1e-12]
                    .iter()
                    .map(|&u| f.quantile(u))
                    .collect(),
                None => Vec::new(),
            },
        }
    }

    /// Expectation of a `[0, inf]`-valued integrand.
    pub fn expect(&self, f: &dyn Fn(f64) -> XReal, acc: f64) -> Result<Estimate> {
        self.expect_with(f, &ExpectOpts::with_acc(acc))
    }

    pub fn expect_with(&self, f: &dyn Fn(f64) -> XReal, opts: &ExpectOpts) -> Result<Estimate> {
        match self {
            Measure::Discrete(d) => {
                let mut acc = XReal::ZERO;
                for (&z, &m) in d.support.iter().zip(&d.mass) {
                    acc = acc + weighted(m, f(z));
                    if acc.is_infinite() {
                        return Ok(Estimate {
                            value: XReal::INFINITY,
                            abs_err: 0.0,
                        });
                    }
                }
                Ok(Estimate {
                    value: acc,
                    abs_err: 0.0,
                })
            }
            Measure::Density(d) => {
                let mut integrand = |z: f64| {
                    let q = d.pdf(z);
                    if q == 0.0 {
                        return 0.0;
                    }
                    let v = f(z);
                    if v.is_infinite() {
                        return quad::SATURATION;
                    }
                    let prod = q * v.value();
                    if prod.is_finite() {
                        prod
                    } else {
                        quad::SATURATION
                    }
                };
                let out = self.run_quad(&mut integrand, d, opts);
                finish_nonneg(out, opts)
            }
        }
    }

    /// Expectation of `exp(log_f)`. For densities the integrand exponent is
    /// assembled as `log q + log_f` before a single `exp`, so factors that
    /// individually under- or overflow (sharp exponential tilts) still
    /// integrate correctly. `log_f = -inf` means the integrand vanishes.
    pub fn expect_log(&self, log_f: &dyn Fn(f64) -> f64, opts: &ExpectOpts) -> Result<Estimate> {
        match self {
            Measure::Discrete(d) => {
                let mut acc = XReal::ZERO;
                for (&z, &m) in d.support.iter().zip(&d.mass) {
                    if m == 0.0 {
                        continue;
                    }
                    acc = acc + weighted(m, XReal::exp(log_f(z)));
                    if acc.is_infinite() {
                        return Ok(Estimate {
                            value: XReal::INFINITY,
                            abs_err: 0.0,
                        });
                    }
                }
                Ok(Estimate {
                    value: acc,
                    abs_err: 0.0,
                })
            }
            Measure::Density(d) => {
                let mut integrand = |z: f64| {
                    let lq = d.log_pdf(z);
                    if lq == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    let e = lq + log_f(z);
                    if e.is_nan() || e == f64::NEG_INFINITY {
                        0.0
                    } else if e >= OVERFLOW_GUARD_LOG {
                        quad::SATURATION
                    } else {
                        e.exp()
                    }
                };
                let out = self.run_quad(&mut integrand, d, opts);
                finish_nonneg(out, opts)
            }
        }
    }

    /// Signed expectation `E[f]` with values in `[-inf, inf]`, computed as
    /// `E[f^+] - E[f^-]`. A divergent negative part wins and yields `-inf`.
    pub fn expect_signed(
        &self,
        f: &dyn Fn(f64) -> f64,
        opts: &ExpectOpts,
    ) -> Result<SignedEstimate> {
        match self {
            Measure::Discrete(d) => {
                let mut pos = XReal::ZERO;
                let mut neg = XReal::ZERO;
                for (&z, &m) in d.support.iter().zip(&d.mass) {
                    if m == 0.0 {
                        continue;
                    }
                    let v = f(z);
                    if v.is_nan() {
                        return Err(Error::DomainMismatch(format!(
                            "signed integrand is NaN at {z}"
                        )));
                    }
                    if v >= 0.0 {
                        pos = pos + weighted(m, XReal::from(v));
                    } else {
                        neg = neg + weighted(m, XReal::from(-v));
                    }
                }
                let value = if neg.is_infinite() {
                    f64::NEG_INFINITY
                } else if pos.is_infinite() {
                    f64::INFINITY
                } else {
                    pos.value() - neg.value()
                };
                Ok(SignedEstimate {
                    value,
                    abs_err: 0.0,
                })
            }
            Measure::Density(d) => {
                let mut pos_int = |z: f64| {
                    let q = d.pdf(z);
                    if q == 0.0 {
                        return 0.0;
                    }
                    let v = f(z);
                    if v <= 0.0 || v.is_nan() {
                        return 0.0;
                    }
                    let prod = q * v;
                    if prod.is_finite() {
                        prod
                    } else {
                        quad::SATURATION
                    }
                };
                let pos = self.run_quad(&mut pos_int, d, opts);
                let mut neg_int = |z: f64| {
                    let q = d.pdf(z);
                    if q == 0.0 {
                        return 0.0;
                    }
                    let v = f(z);
                    if v >= 0.0 || v.is_nan() {
                        return 0.0;
                    }
                    let prod = q * (-v);
                    if prod.is_finite() {
                        prod
                    } else {
                        quad::SATURATION
                    }
                };
                let neg = self.run_quad(&mut neg_int, d, opts);

                if neg.divergent_at.is_some() {
                    return Ok(SignedEstimate {
                        value: f64::NEG_INFINITY,
                        abs_err: 0.0,
                    });
                }
                if pos.divergent_at.is_some() {
                    return Ok(SignedEstimate {
                        value: f64::INFINITY,
                        abs_err: 0.0,
                    });
                }
                let pos = require_converged(pos, opts)?;
                let neg = require_converged(neg, opts)?;
                Ok(SignedEstimate {
                    value: pos.0 - neg.0,
                    abs_err: pos.1 + neg.1,
                })
            }
        }
    }

    fn run_quad(
        &self,
        integrand: &mut dyn FnMut(f64) -> f64,
        d: &DensityMeasure,
        opts: &ExpectOpts,
    ) -> QuadOutcome {
        let mut knots = self.default_knots();
        knots.extend_from_slice(&opts.knots);
        quad::integrate_span(
            integrand,
            d.domain,
            opts.center.unwrap_or_else(|| self.fold_center()),
            opts.scale.unwrap_or_else(|| self.fold_scale()),
            &knots,
            opts.acc,
            opts.budget,
        )
    }
}

/// Stable `log a(z) - log b(z)` across the support. Gaussian pairs cancel
/// their quadratic terms analytically: the individual log-densities round
/// to multiples of thousands once `z*z/2` outgrows 2^53 ulp granularity,
/// while the difference itself stays moderate. Other combinations fall back
/// to the direct difference under the usual zero conventions.
pub fn log_density_diff(a: &Measure, b: &Measure, z: f64) -> f64 {
    if let (Measure::Density(da), Measure::Density(db)) = (a, b) {
        if let (
            Some(Family::Normal { mean: ma, sd: sa }),
            Some(Family::Normal { mean: mb, sd: sb }),
        ) = (da.family(), db.family())
        {
            let xa = (z - ma) / sa;
            let xb = (z - mb) / sb;
            // xb - xa without the cancellation of two near-equal quotients
            let dx = (z * (sa - sb) + (sb * ma - sa * mb)) / (sa * sb);
            return (sb / sa).ln() + 0.5 * dx * (xb + xa);
        }
    }
    crate::xreal::log_ratio(log_point_weight(a, z), log_point_weight(b, z))
}

fn log_point_weight(m: &Measure, z: f64) -> f64 {
    match m {
        Measure::Discrete(_) => {
            let w = m.mass_at(z);
            if w > 0.0 {
                w.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        Measure::Density(_) => m.log_pdf(z),
    }
}

fn finish_nonneg(out: QuadOutcome, opts: &ExpectOpts) -> Result<Estimate> {
    if out.divergent_at.is_some() {
        return Ok(Estimate {
            value: XReal::INFINITY,
            abs_err: 0.0,
        });
    }
    if !out.converged {
        return Err(Error::AccuracyNotMet {
            requested: opts.acc,
            achieved: out.abs_err,
            evals: out.evals,
        });
    }
    Ok(Estimate {
        value: XReal::from(out.value.max(0.0)),
        abs_err: out.abs_err,
    })
}

fn require_converged(out: QuadOutcome, opts: &ExpectOpts) -> Result<(f64, f64)> {
    if !out.converged {
        return Err(Error::AccuracyNotMet {
            requested: opts.acc,
            achieved: out.abs_err,
            evals: out.evals,
        });
    }
    Ok((out.value, out.abs_err))
}

/// Union of supports across atom lists, sorted, deduplicated by exact
/// equality.
pub fn union_support(parts: &[&DiscreteMeasure]) -> Vec<f64> {
    let mut all: Vec<f64> = parts.iter().flat_map(|p| p.support.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

fn scan_span(d: &DensityMeasure) -> Span {
    let dom = d.domain;
    if dom.is_finite() {
        return dom;
    }
    let c = if dom.lo.is_finite() {
        dom.lo
    } else if dom.hi.is_finite() {
        dom.hi
    } else {
        0.0
    };
    let peak = d.pdf(c).max(d.pdf(c + 1.0)).max(d.pdf(c - 1.0)).max(1e-300);
    let mut lo = c - 1.0;
    let mut hi = c + 1.0;
    if dom.lo.is_infinite() {
        while d.pdf(lo) > peak * 1e-16 && lo > -1e12 {
            lo = c + (lo - c) * 2.0;
        }
    } else {
        lo = dom.lo;
    }
    if dom.hi.is_infinite() {
        while d.pdf(hi) > peak * 1e-16 && hi < 1e12 {
            hi = c + (hi - c) * 2.0;
        }
    } else {
        hi = dom.hi;
    }
    Span::new(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_mean() {
        let q = Measure::family(Family::Uniform { a: 0.0, b: 1.0 }).unwrap();
        let e = q.expect(&|z| XReal::from(z), 1e-10).unwrap();
        assert_abs_diff_eq!(e.value.value(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn discrete_expectation_matches_hand_value() {
        //atoms (0,1) with masses (1/3, 2/3); integrand X(0)=3, X(1)=0
        let q = Measure::discrete(vec![0.0, 1.0], vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let e = q
            .expect(&|z| if z == 0.0 { XReal::from(3.0) } else { XReal::ZERO }, 1e-12)
            .unwrap();
        assert_abs_diff_eq!(e.value.value(), 1.0, epsilon = 1e-12);
        assert_eq!(e.abs_err, 0.0);
    }

    #[test]
    fn zero_mass_atom_absorbs_infinity() {
        let q = Measure::discrete(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let e = q
            .expect(
                &|z| if z == 1.0 { XReal::INFINITY } else { XReal::ONE },
                1e-12,
            )
            .unwrap();
        assert_eq!(e.value.value(), 1.0);
    }

    #[test]
    fn positive_mass_at_infinite_value_diverges() {
        let q = Measure::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let e = q
            .expect(
                &|z| if z == 1.0 { XReal::INFINITY } else { XReal::ONE },
                1e-12,
            )
            .unwrap();
        assert!(e.value.is_infinite());
    }

    #[test]
    fn mixture_ratio_under_cauchy_has_unit_mean() {
        // E_Q[p_1/p*] = 1 for p* the equal mixture of N(1,1), N(-1,1).
        // The ratio is assembled in log space: past |z| ~ 39 the linear pdfs
        // underflow and their quotient turns into denormal-boundary garbage.
        let q = Measure::family(Family::Cauchy {
            location: 0.0,
            scale: 1.0,
        })
        .unwrap();
        let p1 = Family::Normal { mean: 1.0, sd: 1.0 };
        let p2 = Family::Normal { mean: -1.0, sd: 1.0 };
        let f = move |z: f64| {
            let la = p1.log_pdf(z);
            let lb = p2.log_pdf(z);
            let lmix = crate::finite::log_sum_exp(&[la, lb]) - std::f64::consts::LN_2;
            XReal::exp(la - lmix)
        };
        let e = q.expect(&f, 1e-10).unwrap();
        assert_abs_diff_eq!(e.value.value(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn cauchy_second_moment_diverges() {
        let q = Measure::family(Family::Cauchy {
            location: 0.0,
            scale: 1.0,
        })
        .unwrap();
        let e = q.expect(&|z| XReal::from(z * z), 1e-10).unwrap();
        assert!(e.value.is_infinite());
    }

    #[test]
    fn signed_log_expectation_gaussian() {
        // E[log phi(Z)] = -0.5 log(2 pi) - 0.5 for Z ~ N(0,1)
        let q = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let fam = Family::Normal { mean: 0.0, sd: 1.0 };
        let e = q
            .expect_signed(&|z| fam.log_pdf(z), &ExpectOpts::with_acc(1e-11))
            .unwrap();
        assert_abs_diff_eq!(e.value, -0.5 * LN_2PI - 0.5, epsilon = 1e-9);
    }

    #[test]
    fn log_space_expectation_survives_extreme_tilts() {
        // E_{N(1,1)}[e^{(l-1)Z - l^2/2 + 1/2}] = 1 for every l; at l = 50 the
        // two exponential factors under/overflow separately
        let q = Measure::family(Family::Normal { mean: 1.0, sd: 1.0 }).unwrap();
        for l in [0.5, 5.0, 50.0] {
            let e = q
                .expect_log(
                    &|z| (l - 1.0) * z - 0.5 * l * l + 0.5,
                    &ExpectOpts {
                        acc: 1e-11,
                        knots: vec![l - 8.0, l, l + 8.0],
                        ..ExpectOpts::default()
                    },
                )
                .unwrap();
            assert_abs_diff_eq!(e.value.value(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_space_expectation_detects_divergence() {
        // quadratic exponent beats the gaussian weight
        let q = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let e = q
            .expect_log(&|z| z * z, &ExpectOpts::default())
            .unwrap();
        assert!(e.value.is_infinite());
    }

    #[test]
    fn negative_part_divergence_wins() {
        // f = -z^2 under Cauchy: negative part diverges
        let q = Measure::family(Family::Cauchy {
            location: 0.0,
            scale: 1.0,
        })
        .unwrap();
        let e = q
            .expect_signed(&|z| -z * z, &ExpectOpts::default())
            .unwrap();
        assert_eq!(e.value, f64::NEG_INFINITY);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(Measure::discrete(vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(Measure::discrete(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(Measure::discrete(vec![0.0], vec![-0.1]).is_err());
        assert!(Measure::discrete(vec![0.0, 1.0], vec![0.7, 0.7]).is_err());
        assert!(Family::Normal { mean: 0.0, sd: 0.0 }.validate().is_err());
        assert!(Family::Uniform { a: 1.0, b: 1.0 }.validate().is_err());
    }

    #[test]
    fn sub_probability_allowed() {
        let m = Measure::discrete(vec![0.0, 2.0], vec![0.25, 0.25]).unwrap();
        assert_abs_diff_eq!(m.total_mass(), 0.5);
        assert!(!m.is_probability(1e-9));
    }

    #[test]
    fn density_mass_check_rejects_overweight() {
        let pdf: PdfFn = Arc::new(|_z| 2.0);
        let r = Measure::density_fn(pdf, None, Span::new(0.0, 1.0), &[]);
        assert!(r.is_err());
    }

    #[test]
    fn budget_exhaustion_reports_accuracy_failure() {
        let q = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let r = q.expect_with(
            &|z| XReal::from(1.0 + (1e4 * z).sin().abs()),
            &ExpectOpts {
                acc: 1e-13,
                budget: 600,
                ..ExpectOpts::default()
            },
        );
        match r {
            Err(Error::AccuracyNotMet { .. }) => {}
            other => panic!("expected accuracy failure, got {other:?}"),
        }
    }

    #[test]
    fn family_quantiles_invert_cdf() {
        for fam in [
            Family::Normal { mean: 1.0, sd: 2.0 },
            Family::Cauchy {
                location: -1.0,
                scale: 0.5,
            },
            Family::Uniform { a: -2.0, b: 3.0 },
            Family::Exponential { rate: 1.5 },
        ] {
            for u in [1e-6, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-6] {
                let z = fam.quantile(u);
                assert_abs_diff_eq!(fam.cdf(z), u, epsilon = 2e-7);
            }
        }
    }

    #[test]
    fn mixture_combines_atoms() {
        let a = Measure::dirac(1.0);
        let b = Measure::discrete(vec![0.0, 1.0], vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let m = Measure::mixture(&[a, b], &[0.25, 0.75]).unwrap();
        let d = m.as_discrete().unwrap();
        assert_eq!(d.support(), &[0.0, 1.0]);
        assert_abs_diff_eq!(d.mass_at(0.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mass_at(1.0), 0.75, epsilon = 1e-15);
    }

    proptest! {
        // expectation is linear on atom lists
        #[test]
        fn discrete_linearity(
            masses in proptest::collection::vec(0.0f64..0.2, 2..6),
            alpha in 0.0f64..3.0,
        ) {
            let n = masses.len();
            let support: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let q = Measure::discrete(support, masses).unwrap();
            let f = |z: f64| XReal::from(z + 1.0);
            let g = |z: f64| XReal::from((z - 1.0).abs());
            let ef = q.expect(&f, 1e-12).unwrap().value.value();
            let eg = q.expect(&g, 1e-12).unwrap().value.value();
            let combo = |z: f64| XReal::from(alpha * (z + 1.0) + (z - 1.0).abs());
            let ec = q.expect(&combo, 1e-12).unwrap().value.value();
            prop_assert!((ec - (alpha * ef + eg)).abs() < 1e-9);
        }

        // quadrature expectation of a bounded smooth integrand matches the
        // closed form within the reported error
        #[test]
        fn gaussian_poly_moments(mean in -2.0f64..2.0, sd in 0.5f64..2.0) {
            let q = Measure::family(Family::Normal { mean, sd }).unwrap();
            let e = q.expect(&|z| XReal::from(z * z), 1e-10).unwrap();
            let want = mean * mean + sd * sd;
            prop_assert!((e.value.value() - want).abs() < 1e-7 + e.abs_err * 10.0);
        }
    }
}
