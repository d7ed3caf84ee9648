//! JSON problem specifications: what to test, against which null, and how.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::measure::{Family, Measure};
use crate::nullspec::{expfam_member, EVariable, GeneratedTag, NullHypothesis};
use crate::solution::SolverOptions;
use crate::xreal::XReal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeasureSpec {
    Normal { mean: f64, sd: f64 },
    Cauchy { location: f64, scale: f64 },
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    Dirac { at: f64 },
    Discrete { support: Vec<f64>, masses: Vec<f64> },
    Mixture { components: Vec<MeasureSpec>, weights: Vec<f64> },
    /// Member of the problem's exponential-family null, named by parameter.
    ExpFamilyMember { theta: f64 },
}

impl MeasureSpec {
    /// Materializes the measure; family members resolve against the null.
    pub fn build(&self, null: Option<&NullHypothesis>) -> Result<Measure> {
        match self {
            MeasureSpec::Normal { mean, sd } => Measure::family(Family::Normal {
                mean: *mean,
                sd: *sd,
            }),
            MeasureSpec::Cauchy { location, scale } => Measure::family(Family::Cauchy {
                location: *location,
                scale: *scale,
            }),
            MeasureSpec::Uniform { a, b } => Measure::family(Family::Uniform { a: *a, b: *b }),
            MeasureSpec::Exponential { rate } => {
                Measure::family(Family::Exponential { rate: *rate })
            }
            MeasureSpec::Dirac { at } => Ok(Measure::dirac(*at)),
            MeasureSpec::Discrete { support, masses } => {
                Measure::discrete(support.clone(), masses.clone())
            }
            MeasureSpec::Mixture {
                components,
                weights,
            } => {
                let built: Result<Vec<Measure>> =
                    components.iter().map(|c| c.build(null)).collect();
                Measure::mixture(&built?, weights)
            }
            MeasureSpec::ExpFamilyMember { theta } => match null {
                Some(NullHypothesis::ExpFamily {
                    log_partition,
                    sufficient_stat,
                    reference,
                    ..
                }) => expfam_member(log_partition, sufficient_stat, reference, *theta),
                _ => Err(Error::InvalidSpec(
                    "exp_family_member needs an exp_family null to resolve against".into(),
                )),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NullSpec {
    FiniteMixture {
        components: Vec<MeasureSpec>,
    },
    BoundedMean {
        mu: f64,
    },
    SubGaussian {
        sigma: f64,
    },
    Symmetric,
    ExpFamily {
        log_partition: String,
        sufficient_stat: String,
        theta_star: f64,
        reference: Box<MeasureSpec>,
    },
}

impl NullSpec {
    pub fn build(&self) -> Result<NullHypothesis> {
        let null = match self {
            NullSpec::FiniteMixture { components } => {
                let built: Result<Vec<Measure>> =
                    components.iter().map(|c| c.build(None)).collect();
                NullHypothesis::FiniteMixture { components: built? }
            }
            NullSpec::BoundedMean { mu } => NullHypothesis::Generated {
                tag: GeneratedTag::BoundedMean { mu: *mu },
            },
            NullSpec::SubGaussian { sigma } => NullHypothesis::Generated {
                tag: GeneratedTag::SubGaussian { sigma: *sigma },
            },
            NullSpec::Symmetric => NullHypothesis::Symmetric,
            NullSpec::ExpFamily {
                log_partition,
                sufficient_stat,
                theta_star,
                reference,
            } => NullHypothesis::ExpFamily {
                log_partition: Expr::parse(log_partition)?,
                sufficient_stat: Expr::parse(sufficient_stat)?,
                theta_star: *theta_star,
                reference: reference.build(None)?,
            },
        };
        null.validate()?;
        Ok(null)
    }
}

/// Wealth candidates for the verify task.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CandidateSpec {
    Constant {
        value: f64,
    },
    /// `(intercept + slope (z - center))+`.
    Linear {
        intercept: f64,
        slope: f64,
        center: f64,
    },
    LikelihoodRatio {
        numerator: Box<MeasureSpec>,
        denominator: Box<MeasureSpec>,
    },
}

impl CandidateSpec {
    pub fn build(&self, null: Option<&NullHypothesis>) -> Result<EVariable> {
        match self {
            CandidateSpec::Constant { value } => {
                if !(*value >= 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "a wealth candidate cannot be negative, got {value}"
                    )));
                }
                let v = *value;
                Ok(EVariable::from_fn(
                    format!("constant {v}"),
                    Arc::new(move |_| XReal::from(v)),
                    vec![],
                ))
            }
            CandidateSpec::Linear {
                intercept,
                slope,
                center,
            } => {
                let (a, b, c) = (*intercept, *slope, *center);
                Ok(EVariable::from_fn(
                    format!("linear {a} + {b} (z - {c})"),
                    Arc::new(move |z: f64| XReal::from((a + b * (z - c)).max(0.0))),
                    vec![c, if b != 0.0 { c - a / b } else { c }],
                ))
            }
            CandidateSpec::LikelihoodRatio {
                numerator,
                denominator,
            } => {
                let num = numerator.build(null)?;
                let den = denominator.build(null)?;
                let knots = crate::finite::component_knots(&[num.clone(), den.clone()]);
                let log_eval = Arc::new(move |z: f64| {
                    let ln = log_density(&num, z);
                    let ld = log_density(&den, z);
                    if ln == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else if ld == f64::NEG_INFINITY {
                        f64::INFINITY
                    } else {
                        ln - ld
                    }
                });
                Ok(EVariable::from_log("likelihood ratio", log_eval, knots))
            }
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

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Solve,
    Renyi { gamma: f64 },
    Verify { candidate: CandidateSpec },
    CompareUi,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Renyi { .. } => "renyi",
            Task::Verify { .. } => "verify",
            Task::CompareUi => "compare-ui",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub grid: usize,
    pub seed: u64,
}

impl Default for SpecOptions {
    fn default() -> Self {
        SpecOptions {
            tol: 1e-9,
            max_iter: 100_000,
            grid: 1001,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub alternative: MeasureSpec,
    pub null: NullSpec,
    pub task: Task,
    #[serde(default)]
    pub options: SpecOptions,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<ProblemSpec> {
        let spec: ProblemSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Task/null compatibility, before any measure is materialized.
    pub fn validate(&self) -> Result<()> {
        match (&self.task, &self.null) {
            (Task::Renyi { gamma }, NullSpec::FiniteMixture { .. }) => {
                if !(*gamma > 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "renyi order must exceed 1, got {gamma}"
                    )));
                }
                Ok(())
            }
            (Task::Renyi { .. }, _) => Err(Error::InvalidSpec(
                "the renyi task needs a finite (or singleton) null with explicit \
                 components"
                    .into(),
            )),
            (Task::CompareUi, NullSpec::FiniteMixture { .. }) => Ok(()),
            (Task::CompareUi, _) => Err(Error::InvalidSpec(
                "compare_ui needs explicit components whose densities can be \
                 evaluated on a grid"
                    .into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol_foc: self.options.tol,
            max_iter: self.options.max_iter,
            seed: self.options.seed,
            ..SolverOptions::default()
        }
    }
}

/// The specs behind the acceptance suite, by name.
pub fn preset(name: &str) -> Result<ProblemSpec> {
    let spec = match name {
        "coin_toss_4_1" => ProblemSpec {
            alternative: MeasureSpec::Dirac { at: 0.0 },
            null: NullSpec::FiniteMixture {
                components: vec![
                    MeasureSpec::Dirac { at: 1.0 },
                    MeasureSpec::Discrete {
                        support: vec![0.0, 1.0],
                        masses: vec![1.0 / 3.0, 2.0 / 3.0],
                    },
                ],
            },
            task: Task::Solve,
            options: SpecOptions::default(),
        },
        "two_gaussians_cauchy" => ProblemSpec {
            alternative: MeasureSpec::Cauchy {
                location: 0.0,
                scale: 1.0,
            },
            null: two_gaussian_null(),
            task: Task::Solve,
            options: SpecOptions::default(),
        },
        "bounded_mean_uniform" => ProblemSpec {
            alternative: MeasureSpec::Uniform { a: 0.0, b: 1.0 },
            null: NullSpec::BoundedMean { mu: 0.3 },
            task: Task::Solve,
            options: SpecOptions::default(),
        },
        "subgaussian" => ProblemSpec {
            alternative: MeasureSpec::Normal { mean: 1.0, sd: 1.0 },
            null: NullSpec::SubGaussian { sigma: 1.0 },
            task: Task::Solve,
            options: SpecOptions::default(),
        },
        "symmetric_normal" => ProblemSpec {
            alternative: MeasureSpec::Normal { mean: 1.0, sd: 1.0 },
            null: NullSpec::Symmetric,
            task: Task::Solve,
            options: SpecOptions::default(),
        },
        "symmetric_exponential" => ProblemSpec {
            alternative: MeasureSpec::Exponential { rate: 1.0 },
            null: NullSpec::Symmetric,
            task: Task::Solve,
            options: SpecOptions::default(),
        },
        "expfam_gaussian" => ProblemSpec {
            alternative: MeasureSpec::ExpFamilyMember { theta: -1.0 },
            null: NullSpec::ExpFamily {
                log_partition: "z^2/2".into(),
                sufficient_stat: "z".into(),
                theta_star: 0.0,
                reference: Box::new(MeasureSpec::Normal { mean: 0.0, sd: 1.0 }),
            },
            task: Task::Solve,
            options: SpecOptions::default(),
        },
        "ui_compare" => ProblemSpec {
            alternative: MeasureSpec::Cauchy {
                location: 0.0,
                scale: 1.0,
            },
            null: two_gaussian_null(),
            task: Task::CompareUi,
            options: SpecOptions::default(),
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(spec)
}

fn two_gaussian_null() -> NullSpec {
    NullSpec::FiniteMixture {
        components: vec![
            MeasureSpec::Normal { mean: 1.0, sd: 1.0 },
            MeasureSpec::Normal {
                mean: -1.0,
                sd: 1.0,
            },
        ],
    }
}
