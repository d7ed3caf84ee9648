//! Lebesgue decomposition of the alternative against the null's reach.
//!
//! Support points that every null member misses form the negligible set
//! `N`: payoffs there are unconstrained, so optimal wealth is infinite on
//! `N` and all finite action happens conditionally on the complement. The
//! split is computed atom by atom from per-point null mass bounds, before
//! and independently of any numeraire computation.
//!
//! Carrier rules: an atom is reachable only by null members with mass at
//! that exact point; a density region only by members with positive
//! density there. Atoms and densities never cover each other.

use crate::error::{Error, Result};
use crate::measure::{ExpectOpts, Measure};
use crate::nullspec::{GeneratedTag, NullHypothesis};
use crate::quad::Span;
use crate::xreal::XReal;

/// The split `Q = Q^r + Q^s` of a discrete alternative, with `Q^s` carried
/// by the null-negligible points and `Q^r` by the rest. Both parts are
/// unnormalized restrictions of `Q`, so they reassemble it exactly.
#[derive(Clone, Debug)]
pub struct LebesgueDecomposition {
    /// Restriction of `Q` to points the null can reach. Mass `lambda_star`.
    pub regular: Measure,
    /// Restriction of `Q` to the negligible set.
    pub singular: Measure,
    /// Support points carrying zero mass under every null member.
    pub negligible_set: Vec<f64>,
    /// `Q(N^c)`, the mass the null competes for.
    pub lambda_star: f64,
}

impl LebesgueDecomposition {
    pub fn fully_degenerate(&self) -> bool {
        self.lambda_star == 0.0
    }

    /// `Q* = Q( . | N^c)`: the regular part rescaled to a probability.
    pub fn conditional(&self) -> Option<Measure> {
        if self.lambda_star <= 0.0 {
            return None;
        }
        let d = self.regular.as_discrete()?;
        let mass: Vec<f64> = d.masses().iter().map(|m| m / self.lambda_star).collect();
        Measure::discrete(d.support().to_vec(), mass).ok()
    }

    pub fn describe_n(&self) -> String {
        if self.negligible_set.is_empty() {
            "empty".into()
        } else {
            format!("atoms {:?}", self.negligible_set)
        }
    }
}

/// Mass some null member places on the single point `z`. Zero iff every
/// member gives `z` mass zero; positive returns are witness masses or
/// lower bounds, not suprema.
pub fn null_point_mass(null: &NullHypothesis, z: f64) -> Result<f64> {
    match null {
        NullHypothesis::FiniteMixture { components } => Ok(components
            .iter()
            .map(|c| c.mass_at(z))
            .fold(0.0f64, f64::max)),
        NullHypothesis::Generated { tag } => match tag {
            GeneratedTag::BoundedMean { mu } => {
                if z >= 0.0 && z <= *mu {
                    Ok(1.0)
                } else if z > *mu && z <= 1.0 {
                    // best member with an atom at z pays the mean budget
                    // there and parks the rest at 0
                    Ok(mu / z)
                } else {
                    Ok(0.0)
                }
            }
            GeneratedTag::SubGaussian { sigma } => {
                if z == 0.0 {
                    Ok(1.0)
                } else {
                    // a two-point law with a small atom at z and its mean
                    // compensated near 0 stays sub-gaussian for any z, so
                    // no point is negligible; the bound may underflow but
                    // the mathematical mass is positive
                    let e = (-z * z / (2.0 * sigma * sigma)).exp() / 4.0;
                    Ok(e.max(f64::MIN_POSITIVE))
                }
            }
            GeneratedTag::Custom { .. } => Err(Error::UnsupportedNull(
                "per-point masses of a custom generated null are not computable".into(),
            )),
        },
        NullHypothesis::Symmetric => Ok(if z == 0.0 { 1.0 } else { 0.5 }),
        NullHypothesis::ExpFamily {
            log_partition,
            sufficient_stat,
            theta_star,
            reference,
        } => match reference {
            Measure::Discrete(d) => {
                let a = log_partition.eval(*theta_star);
                Ok(d.mass_at(z) * (theta_star * sufficient_stat.eval(z) - a).exp())
            }
            // continuous members carry no atoms at all
            Measure::Density(_) => Ok(0.0),
        },
    }
}

/// Splits a discrete alternative into the part the null can see and the
/// part it cannot. Errors on density alternatives (the split is atom-wise)
/// and on nulls whose per-point masses cannot be computed.
pub fn lebesgue_decompose(q: &Measure, null: &NullHypothesis) -> Result<LebesgueDecomposition> {
    null.validate()?;
    let qd = q.as_discrete().ok_or_else(|| {
        Error::Precondition(
            "the decomposition is computed atom by atom; density alternatives \
             must be dominated by the null instead"
                .into(),
        )
    })?;

    let mut reg_support = Vec::new();
    let mut reg_mass = Vec::new();
    let mut sing_support = Vec::new();
    let mut sing_mass = Vec::new();
    let mut singular_total = 0.0f64;
    for (&z, &m) in qd.support().iter().zip(qd.masses()) {
        if null_point_mass(null, z)? > 0.0 {
            reg_support.push(z);
            reg_mass.push(m);
        } else {
            sing_support.push(z);
            sing_mass.push(m);
            singular_total += m;
        }
    }
    let negligible_set = sing_support.clone();
    let regular = Measure::discrete(reg_support, reg_mass)?;
    let singular = Measure::discrete(sing_support, sing_mass)?;
    let lambda_star = (qd.total_mass() - singular_total).clamp(0.0, qd.total_mass());
    Ok(LebesgueDecomposition {
        regular,
        singular,
        negligible_set,
        lambda_star,
    })
}

/// Log-space test so far tails count as covered even where the linear
/// density has underflowed to zero.
pub fn covered_density(components: &[Measure], z: f64) -> bool {
    components.iter().any(|c| c.log_pdf(z) > f64::NEG_INFINITY)
}

/// Mass of a density alternative reachable through the components' density
/// regions, with the leftover intervals of its domain. Used to enforce
/// absolute continuity on continuous instances: coverage below the full
/// mass means part of the alternative escapes every mixture.
pub fn density_coverage(q: &Measure, components: &[Measure]) -> Result<(f64, Vec<Span>)> {
    let qd = match q.as_density() {
        Some(d) => d,
        None => {
            return Err(Error::Precondition(
                "coverage by density regions needs a density alternative".into(),
            ))
        }
    };
    let density_spans: Vec<Span> = components
        .iter()
        .filter_map(|c| c.as_density().map(|d| d.domain()))
        .collect();
    if density_spans.is_empty() {
        return Ok((0.0, vec![qd.domain()]));
    }
    let mut knots: Vec<f64> = density_spans
        .iter()
        .flat_map(|s| [s.lo, s.hi])
        .filter(|v| v.is_finite())
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let comps: Vec<Measure> = components.to_vec();
    let indicator = move |z: f64| {
        if covered_density(&comps, z) {
            XReal::ONE
        } else {
            XReal::ZERO
        }
    };
    let est = q.expect_with(
        &indicator,
        &ExpectOpts {
            acc: 1e-11,
            knots,
            ..ExpectOpts::default()
        },
    )?;
    let covered = est.value.value().clamp(0.0, q.total_mass());
    Ok((covered, uncovered_spans(qd.domain(), &density_spans)))
}

/// `domain` minus the union of `covers`, as a list of leftover intervals.
pub fn uncovered_spans(domain: Span, covers: &[Span]) -> Vec<Span> {
    let mut merged: Vec<Span> = Vec::new();
    let mut sorted: Vec<Span> = covers.to_vec();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    for s in sorted {
        match merged.last_mut() {
            Some(last) if s.lo <= last.hi => {
                last.hi = last.hi.max(s.hi);
            }
            _ => merged.push(s),
        }
    }
    let mut out = Vec::new();
    let mut cursor = domain.lo;
    for s in &merged {
        if s.lo > cursor && s.lo > domain.lo {
            let hi = s.lo.min(domain.hi);
            if hi > cursor {
                out.push(Span::new(cursor, hi));
            }
        }
        cursor = cursor.max(s.hi);
        if cursor >= domain.hi {
            break;
        }
    }
    if cursor < domain.hi {
        out.push(Span::new(cursor, domain.hi));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::measure::Family;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn finite(components: Vec<Measure>) -> NullHypothesis {
        NullHypothesis::FiniteMixture { components }
    }

    #[test]
    fn fully_covered_point_mass() {
        let q = Measure::dirac(0.0);
        let bern = Measure::discrete(vec![0.0, 1.0], vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let d = lebesgue_decompose(&q, &finite(vec![bern])).unwrap();
        assert!(d.negligible_set.is_empty());
        assert_eq!(d.lambda_star, 1.0);
        assert_eq!(d.regular.mass_at(0.0), 1.0);
        assert_eq!(d.singular.total_mass(), 0.0);
    }

    #[test]
    fn uniform_alternative_loses_its_third_point() {
        let third = 1.0 / 3.0;
        let q = Measure::discrete(vec![0.0, 1.0, 2.0], vec![third, third, third]).unwrap();
        let d = lebesgue_decompose(
            &q,
            &finite(vec![Measure::dirac(0.0), Measure::dirac(1.0)]),
        )
        .unwrap();
        assert_eq!(d.negligible_set, vec![2.0]);
        assert_abs_diff_eq!(d.singular.mass_at(2.0), third, epsilon = 1e-15);
        assert_abs_diff_eq!(d.lambda_star, 2.0 * third, epsilon = 1e-15);
        let qs = d.conditional().unwrap();
        assert_abs_diff_eq!(qs.mass_at(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(qs.mass_at(1.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn half_covered_coin() {
        let q = Measure::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let d = lebesgue_decompose(&q, &finite(vec![Measure::dirac(0.0)])).unwrap();
        assert_eq!(d.negligible_set, vec![1.0]);
        assert_abs_diff_eq!(d.lambda_star, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fully_degenerate_when_nothing_is_covered() {
        let q = Measure::dirac(5.0);
        let d = lebesgue_decompose(&q, &finite(vec![Measure::dirac(0.0)])).unwrap();
        assert_eq!(d.lambda_star, 0.0);
        assert!(d.fully_degenerate());
        assert!(d.conditional().is_none());
        assert_eq!(d.negligible_set, vec![5.0]);
    }

    #[test]
    fn density_components_cover_no_atoms() {
        let q = Measure::dirac(0.0);
        let normal = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let d = lebesgue_decompose(&q, &finite(vec![normal])).unwrap();
        assert_eq!(d.lambda_star, 0.0);
        assert_eq!(d.negligible_set, vec![0.0]);
    }

    #[test]
    fn bounded_mean_point_masses() {
        let null = NullHypothesis::Generated {
            tag: GeneratedTag::BoundedMean { mu: 0.3 },
        };
        assert_eq!(null_point_mass(&null, 0.2).unwrap(), 1.0);
        assert_abs_diff_eq!(null_point_mass(&null, 0.5).unwrap(), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(null_point_mass(&null, 1.0).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(null_point_mass(&null, 1.2).unwrap(), 0.0);
        assert_eq!(null_point_mass(&null, -0.1).unwrap(), 0.0);

        let q = Measure::discrete(vec![0.1, 0.6, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        let d = lebesgue_decompose(&q, &null).unwrap();
        assert_eq!(d.negligible_set, vec![2.0]);
        assert_abs_diff_eq!(d.lambda_star, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn subgaussian_reaches_every_point() {
        let null = NullHypothesis::Generated {
            tag: GeneratedTag::SubGaussian { sigma: 1.0 },
        };
        for z in [-100.0, -3.0, 0.0, 0.5, 7.0, 250.0] {
            assert!(null_point_mass(&null, z).unwrap() > 0.0, "z = {z}");
        }
        let q = Measure::discrete(vec![-40.0, 0.0, 55.0], vec![0.3, 0.3, 0.4]).unwrap();
        let d = lebesgue_decompose(&q, &null).unwrap();
        assert!(d.negligible_set.is_empty());
        assert_eq!(d.lambda_star, 1.0);
    }

    #[test]
    fn subgaussian_two_point_witness_is_a_member() {
        // the construction behind the positivity claim: a small atom at z,
        // mean compensated at y, passes every generating payoff
        for (z, sigma) in [(3.0f64, 1.0f64), (0.5, 2.0), (10.0, 1.0)] {
            let eps = (-z * z / (2.0 * sigma * sigma)).exp() / 4.0;
            let y = -eps * z / (1.0 - eps);
            let worst = (0..4001)
                .map(|i| -30.0 + 60.0 * i as f64 / 4000.0)
                .map(|t| {
                    let m = eps * (t * z).exp() + (1.0 - eps) * (t * y).exp();
                    m.ln() - 0.5 * t * t * sigma * sigma
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(worst <= 1e-9, "z={z} sigma={sigma} excess {worst:e}");
        }
    }

    #[test]
    fn symmetric_reaches_every_point() {
        let q = Measure::discrete(vec![-2.0, 0.0, 3.0], vec![0.25, 0.5, 0.25]).unwrap();
        let d = lebesgue_decompose(&q, &NullHypothesis::Symmetric).unwrap();
        assert!(d.negligible_set.is_empty());
        assert_eq!(d.lambda_star, 1.0);
        assert_eq!(null_point_mass(&NullHypothesis::Symmetric, 0.0).unwrap(), 1.0);
        assert_eq!(null_point_mass(&NullHypothesis::Symmetric, 9.0).unwrap(), 0.5);
    }

    #[test]
    fn expfam_follows_its_reference_carrier() {
        let bern = NullHypothesis::ExpFamily {
            log_partition: Expr::parse("log((1 + exp(z)) / 2)").unwrap(),
            sufficient_stat: Expr::parse("z").unwrap(),
            theta_star: 0.5,
            reference: Measure::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(),
        };
        let q = Measure::discrete(vec![0.0, 0.5, 1.0], vec![0.2, 0.3, 0.5]).unwrap();
        let d = lebesgue_decompose(&q, &bern).unwrap();
        assert_eq!(d.negligible_set, vec![0.5]);
        assert_abs_diff_eq!(d.lambda_star, 0.7, epsilon = 1e-15);

        let gaussian = NullHypothesis::ExpFamily {
            log_partition: Expr::parse("z^2 / 2").unwrap(),
            sufficient_stat: Expr::parse("z").unwrap(),
            theta_star: 0.0,
            reference: Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap(),
        };
        let d = lebesgue_decompose(&Measure::dirac(0.0), &gaussian).unwrap();
        assert!(d.fully_degenerate());
    }

    #[test]
    fn custom_nulls_are_rejected() {
        let gen = crate::nullspec::EVariable::from_log(
            "tilt",
            std::sync::Arc::new(|z: f64| z - 0.5),
            vec![],
        );
        let null = NullHypothesis::Generated {
            tag: GeneratedTag::Custom {
                generators: vec![gen],
            },
        };
        let r = lebesgue_decompose(&Measure::dirac(0.0), &null);
        assert!(matches!(r, Err(Error::UnsupportedNull(_))));
    }

    #[test]
    fn density_alternatives_are_rejected() {
        let q = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let r = lebesgue_decompose(&q, &finite(vec![Measure::dirac(0.0)]));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn density_coverage_of_window_component() {
        // Q = N(0,1), component lives on [0,1]: covered mass is Phi(1)-Phi(0)
        let q = Measure::family(Family::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let comps = vec![Measure::family(Family::Uniform { a: 0.0, b: 1.0 }).unwrap()];
        let (covered, spans) = density_coverage(&q, &comps).unwrap();
        assert_abs_diff_eq!(covered, 0.341344746068543, epsilon = 1e-9);
        assert_eq!(spans.len(), 2);

        let (covered, spans) = density_coverage(&q, &[Measure::dirac(0.5)]).unwrap();
        assert_eq!(covered, 0.0);
        assert_eq!(spans.len(), 1);
    }

    #[test]
    fn span_subtraction() {
        let dom = Span::new(f64::NEG_INFINITY, f64::INFINITY);
        let out = uncovered_spans(dom, &[Span::new(0.0, 1.0), Span::new(0.5, 2.0)]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].hi, 0.0);
        assert_eq!(out[1].lo, 2.0);
        let out = uncovered_spans(Span::new(0.0, 1.0), &[Span::new(-1.0, 2.0)]);
        assert!(out.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn split_reassembles_q_exactly(
            masses in proptest::collection::vec(0.01f64..0.4, 4),
            comp_points in proptest::collection::vec(0usize..4, 2),
        ) {
            let support = vec![0.0, 1.0, 2.0, 3.0];
            let total: f64 = masses.iter().sum();
            let q_mass: Vec<f64> = masses.iter().map(|m| m / total).collect();
            let q = Measure::discrete(support.clone(), q_mass).unwrap();
            let comps: Vec<Measure> = comp_points
                .iter()
                .map(|&i| Measure::dirac(support[i]))
                .collect();
            let null = finite(comps);
            let d = lebesgue_decompose(&q, &null).unwrap();
            for &z in &support {
                // restriction masses are moved, never recomputed
                prop_assert_eq!(
                    d.regular.mass_at(z) + d.singular.mass_at(z),
                    q.mass_at(z)
                );
                let covered = null_point_mass(&null, z).unwrap() > 0.0;
                prop_assert_eq!(d.negligible_set.contains(&z), !covered);
            }
            prop_assert!((d.lambda_star - d.regular.total_mass()).abs() < 1e-12);
        }
    }
}
