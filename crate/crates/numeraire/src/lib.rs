//! Log-optimal betting against composite nulls.
//!
//! Given an alternative `Q` and a null hypothesis (an explicit finite set
//! of distributions, a moment- or tail-generated family, the symmetric
//! family, or a one-dimensional exponential family), this crate computes
//! the numeraire `X*`: the wealth function with `E_Q[X/X*] <= 1` for every
//! e-variable `X`, equivalently the maximizer of expected log wealth. Its
//! reciprocal tilts `Q` onto the reverse information projection, whose
//! relative entropy equals the optimal growth rate.
//!
//! Solvers return [`solution::NumeraireSolution`] (or
//! [`solution::RenyiSolution`] for power utilities); everything a solver
//! claims can be re-checked through the probe-based certificates in
//! [`verify`], [`finite`], [`generated`], [`closed_form`], and [`renyi`].
//!
//! The `numeraire` binary wraps all of this behind JSON problem
//! specifications and report files.

pub mod closed_form;
pub mod divergence;
pub mod error;
pub mod expr;
pub mod finite;
pub mod generated;
pub mod lebesgue;
pub mod measure;
pub mod nullspec;
pub mod problem;
pub mod quad;
pub mod renyi;
pub mod report;
pub mod rootfind;
pub mod simplex;
pub mod solution;
pub mod verify;
pub mod xreal;

pub use error::{Error, Result};
pub use measure::Measure;
pub use nullspec::{EVariable, NullHypothesis};
pub use solution::{NumeraireSolution, RenyiSolution, SolverOptions};

use measure::ExpectOpts;

/// Routes an alternative/null pair to the solver that fits the null's
/// structure. Exponential-family nulls are parametric (the alternative is
/// a member, named by its parameter) and go through
/// [`closed_form::expfam_numeraire`] instead.
pub fn solve(
    q: &Measure,
    null: &NullHypothesis,
    opts: &SolverOptions,
) -> Result<NumeraireSolution> {
    null.validate()?;
    match null {
        NullHypothesis::FiniteMixture { .. } => finite::solve_finite_null(q, null, opts),
        NullHypothesis::Generated { tag } => match tag {
            nullspec::GeneratedTag::BoundedMean { mu } => {
                generated::solve_bounded_mean(q, *mu, opts)
            }
            nullspec::GeneratedTag::SubGaussian { sigma } => {
                generated::solve_subgaussian(q, *sigma, opts)
            }
            nullspec::GeneratedTag::Custom { .. } => Err(Error::UnsupportedNull(
                "custom generated nulls carry payoffs only, so they support \
                 certification but not solving"
                    .into(),
            )),
        },
        NullHypothesis::Symmetric => match q {
            Measure::Density(_) => closed_form::symmetric_numeraire(q, opts),
            Measure::Discrete(_) => {
                // the projection onto the symmetric family is the fold of Q,
                // so the instance collapses to a singleton explicit null
                let folded = symmetrize_discrete(q)?;
                let singleton = NullHypothesis::FiniteMixture {
                    components: vec![folded],
                };
                finite::solve_finite_null(q, &singleton, opts)
            }
        },
        NullHypothesis::ExpFamily { .. } => Err(Error::UnsupportedNull(
            "exponential-family nulls are solved parametrically; call \
             expfam_numeraire with the alternative's parameter"
                .into(),
        )),
    }
}

/// `(Q + Q~)/2` where `Q~` is the reflection of `Q` through 0.
fn symmetrize_discrete(q: &Measure) -> Result<Measure> {
    let d = q.as_discrete().ok_or_else(|| {
        Error::Precondition("symmetrization fold is built for atoms".into())
    })?;
    let mut support: Vec<f64> = Vec::new();
    for &z in d.support() {
        support.push(z);
        support.push(-z);
    }
    support.sort_by(f64::total_cmp);
    support.dedup();
    let masses: Vec<f64> = support
        .iter()
        .map(|&z| 0.5 * (d.mass_at(z) + d.mass_at(-z)))
        .collect();
    Measure::discrete(support, masses)
}

/// Expected log wealth `E_Q[log X]` of an arbitrary payoff, for quick
/// comparisons against a solution's growth report.
pub fn expected_log_wealth(q: &Measure, x: &EVariable, opts: &SolverOptions) -> Result<f64> {
    let eopts = ExpectOpts {
        acc: opts.acc,
        budget: opts.budget,
        knots: x.knots.clone(),
        ..ExpectOpts::default()
    };
    let lx = x.log_payoff();
    Ok(q.expect_signed(&move |z: f64| lx(z).clamp(-700.0, 700.0), &eopts)?
        .value)
}
