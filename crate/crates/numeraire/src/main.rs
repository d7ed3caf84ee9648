use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use numeraire::error::{Error, Result};
use numeraire::finite::{component_knots, first_order_certificate};
use numeraire::generated::certify_generated;
use numeraire::measure::Measure;
use numeraire::nullspec::{linspace, EVariable, EvarOpts, NullHypothesis};
use numeraire::problem::{preset, MeasureSpec, NullSpec, ProblemSpec, Task};
use numeraire::renyi::{renyi_certificate, solve_renyi_finite};
use numeraire::report::{GridRow, Provenance, Report, SolutionSummary, TOOL_VERSION};
use numeraire::solution::NumeraireSolution;
use numeraire::verify::{
    default_probes, duality_gap, numeraire_certificate, universal_inference_compare, Certificate,
    CheckResult,
};

#[derive(Parser)]
#[command(name = "numeraire", version, about = "Numeraire and projection solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the log-optimal wealth and its projection.
    Solve(RunArgs),
    /// Solve the power-utility problem of the given order.
    Renyi(RunArgs),
    /// Check a candidate wealth against the null and the solved optimum.
    Verify(RunArgs),
    /// Compare the solved wealth with the universal inference baseline.
    CompareUi(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Problem spec: a JSON file path, or `preset:<name>`.
    #[arg(long)]
    problem: String,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid override as `a:b:n`.
    #[arg(long)]
    grid: Option<String>,
    /// Solver tolerance override.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed override for randomized certificate probes.
    #[arg(long)]
    seed: Option<u64>,
    /// `csv` additionally writes the grid dump next to the report.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("NUMERAIRE_LOG")).init();
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Renyi(a) => ("renyi", a),
        Command::Verify(a) => ("verify", a),
        Command::CompareUi(a) => ("compare-ui", a),
    };
    match execute(name, args) {
        Ok(report) => match write_outputs(&report, args.out.as_deref(), args.format) {
            Ok(()) => {
                if report.overall_pass {
                    0
                } else {
                    2
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn write_outputs(report: &Report, out: Option<&Path>, format: Format) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, report.to_json())?;
            if format == Format::Csv {
                std::fs::write(path.with_extension("csv"), report.grid_csv())?;
            }
            Ok(())
        }
        None => {
            if format == Format::Csv {
                return Err(Error::InvalidSpec(
                    "--format csv needs --out to place the grid dump".into(),
                ));
            }
            print!("{}", report.to_json());
            Ok(())
        }
    }
}

fn load_spec(args: &RunArgs, subcommand: &str) -> Result<ProblemSpec> {
    let mut spec = if let Some(name) = args.problem.strip_prefix("preset:") {
        preset(name)?
    } else {
        let text = std::fs::read_to_string(&args.problem)?;
        ProblemSpec::from_json(&text)?
    };
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidSpec(format!("bad tolerance {tol}")));
        }
        spec.options.tol = tol;
    }
    if let Some(seed) = args.seed {
        spec.options.seed = seed;
    }
    if spec.task.name() != subcommand {
        return Err(Error::InvalidSpec(format!(
            "the spec asks for task {} but the command line says {}",
            spec.task.name(),
            subcommand
        )));
    }
    spec.validate()?;
    Ok(spec)
}

fn parse_grid_flag(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidSpec(format!("grid must look like a:b:n, got {s}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite() && a < b && n >= 2) {
        return Err(bad());
    }
    Ok((a, b, n))
}

/// Report grid: the override when given, atoms for discrete alternatives,
/// otherwise an even grid over the small-quantile span.
fn grid_points(q: &Measure, args: &RunArgs, n_default: usize) -> Result<Vec<f64>> {
    if let Some(flag) = &args.grid {
        let (a, b, n) = parse_grid_flag(flag)?;
        return Ok(linspace(a, b, n));
    }
    match q {
        Measure::Discrete(d) => Ok(d.support().to_vec()),
        Measure::Density(_) => {
            let span = q.quantile_span(1e-9);
            Ok(linspace(span.lo, span.hi, n_default.max(2)))
        }
    }
}

fn certification_tol(tol: f64) -> f64 {
    (100.0 * tol).max(1e-8)
}

/// Density-or-mass value of a measure at a point.
fn density_at(m: &Measure, z: f64) -> f64 {
    match m {
        Measure::Discrete(d) => d.mass_at(z),
        Measure::Density(_) => m.pdf(z),
    }
}

fn solve_rows(x: &EVariable, ripr: &Measure, grid: &[f64]) -> Vec<GridRow> {
    grid.iter()
        .map(|&z| {
            let xv = x.value(z).value();
            let dpstar_dq = if xv.is_finite() && xv > 0.0 {
                1.0 / xv
            } else if xv == 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            GridRow {
                z,
                x_star: xv,
                dpstar_dq,
                ripr_density: density_at(ripr, z),
                x_ui: None,
            }
        })
        .collect()
}

fn solution_summary(sol: &NumeraireSolution) -> SolutionSummary {
    SolutionSummary {
        lambda_star: Some(sol.lambda_star),
        log_wealth: Some(sol.growth.log_wealth),
        entropy: Some(sol.growth.entropy),
        conditional_log_wealth: Some(sol.growth.conditional_log_wealth),
        conditional_entropy: Some(sol.growth.conditional_entropy),
        weights: sol.mixture_weights.clone(),
        parameter: sol.parameter,
        iterations: Some(sol.iterations as u64),
        residual: Some(sol.residual),
        notes: sol.notes.clone(),
        ..SolutionSummary::default()
    }
}

fn duality_certificate(x: &EVariable, sol: &NumeraireSolution, q: &Measure, tol: f64) -> Certificate {
    let d = duality_gap(x, &sol.ripr, q);
    let witness = if d.both_infinite {
        "growth and entropy both diverge; the gap is 0 by convention".to_string()
    } else if d.conditional {
        format!(
            "conditional pairing at lambda* = {:.6}: growth {:.6} vs entropy {:.6}",
            d.lambda_star, d.growth, d.entropy
        )
    } else {
        format!("growth {:.6} vs entropy {:.6}", d.growth, d.entropy)
    };
    Certificate::single(CheckResult {
        name: "log-wealth equals the relative entropy to the projection".into(),
        residual: d.gap,
        tol,
        pass: d.gap.abs() <= tol,
        witness,
    })
}

/// Knots shared by quadrature-heavy certificates: the alternative plus any
/// explicit null components.
fn instance_knots(q: &Measure, null: &NullHypothesis) -> Vec<f64> {
    let mut all = vec![q.clone()];
    if let NullHypothesis::FiniteMixture { components } = null {
        all.extend(components.iter().cloned());
    }
    component_knots(&all)
}

/// The mixture the ratio probes divide by: the solved weights when
/// available, uniform otherwise.
fn probe_reference(null: &NullHypothesis, sol: Option<&NumeraireSolution>, q: &Measure) -> Result<Measure> {
    if let NullHypothesis::FiniteMixture { components } = null {
        let weights = sol
            .and_then(|s| s.mixture_weights.clone())
            .unwrap_or_else(|| vec![1.0 / components.len() as f64; components.len()]);
        return Measure::mixture(components, &weights);
    }
    match sol {
        Some(s) => Ok(s.ripr.clone()),
        None => Ok(q.clone()),
    }
}

fn execute(subcommand: &str, args: &RunArgs) -> Result<Report> {
    let spec = load_spec(args, subcommand)?;
    let null = spec.null.build()?;
    let q = spec.alternative.build(Some(&null))?;
    let opts = spec.solver_options();
    let cert_tol = certification_tol(spec.options.tol);
    let knots = instance_knots(&q, &null);
    log::info!(
        "task {} with tol {:.3e}, cert tol {:.3e}, seed {}",
        spec.task.name(),
        spec.options.tol,
        cert_tol,
        spec.options.seed
    );

    let mut certificates: Vec<(String, Certificate)> = Vec::new();
    let summary;
    let grid_rows;

    match &spec.task {
        Task::Solve => {
            let sol = solve_dispatch(&spec, &q, &null, &opts)?;
            let x = EVariable::from_numeraire("X*", &sol.numeraire, knots.clone());
            let grid = grid_points(&q, args, spec.options.grid)?;

            match &spec.null {
                NullSpec::FiniteMixture { .. } => {
                    certificates.push((
                        "first_order".into(),
                        first_order_certificate(&sol, &q, &null, cert_tol)?,
                    ));
                }
                NullSpec::BoundedMean { .. } | NullSpec::SubGaussian { .. } => {
                    if let NullHypothesis::Generated { tag } = &null {
                        certificates.push((
                            "generated".into(),
                            certify_generated(&x, tag, &q, &grid, cert_tol)?,
                        ));
                    }
                }
                NullSpec::Symmetric => {}
                NullSpec::ExpFamily { .. } => {
                    let theta1 = sol.parameter.ok_or_else(|| {
                        Error::Precondition("exp-family solution lost its parameter".into())
                    })?;
                    certificates.push((
                        "first_order".into(),
                        numeraire::closed_form::expfam_foc_certificate(&null, theta1, cert_tol)?,
                    ));
                }
            }

            let reference = probe_reference(&null, Some(&sol), &q)?;
            let probes = default_probes(&null, &reference, &knots, spec.options.seed)?;
            certificates.push((
                "numeraire".into(),
                numeraire_certificate(&x, &q, &null, &probes, cert_tol),
            ));
            certificates.push(("duality".into(), duality_certificate(&x, &sol, &q, cert_tol)));

            let d = duality_gap(&x, &sol.ripr, &q);
            let mut s = solution_summary(&sol);
            s.duality_gap = Some(d.gap);
            summary = s;
            grid_rows = solve_rows(&x, &sol.ripr, &grid);
        }
        Task::Renyi { gamma } => {
            let sol = solve_renyi_finite(&q, &null, *gamma, &opts)?;
            certificates.push((
                "renyi".into(),
                renyi_certificate(&sol, &q, &null, cert_tol)?,
            ));
            summary = SolutionSummary {
                gamma: Some(sol.gamma),
                weights: Some(sol.mixture_weights.clone()),
                power_mean: Some(sol.power_mean),
                normalizer: Some(sol.normalizer),
                utility: Some(sol.utility_value),
                divergence: Some(sol.divergence_value),
                iterations: Some(sol.iterations as u64),
                residual: Some(sol.fw_gap),
                notes: sol.notes.clone(),
                ..SolutionSummary::default()
            };
            let grid = grid_points(&q, args, spec.options.grid)?;
            grid_rows = grid
                .iter()
                .map(|&z| {
                    let xv = sol.evariable.value(z).value();
                    let pv = density_at(&sol.projection, z);
                    let qv = density_at(&q, z);
                    GridRow {
                        z,
                        x_star: xv,
                        dpstar_dq: if qv > 0.0 { pv / qv } else { 0.0 },
                        ripr_density: pv,
                        x_ui: None,
                    }
                })
                .collect();
        }
        Task::Verify { candidate } => {
            let x = candidate.build(Some(&null))?;
            let evopts = EvarOpts {
                tol: cert_tol,
                knots: knots.clone(),
                z_hint: Some(q.quantile_span(1e-9)),
                ..EvarOpts::default()
            };
            let own = numeraire::nullspec::is_evariable(&x, &null, &evopts)?;
            let is_evar = own.overall_pass;
            certificates.push(("is_evariable".into(), own));

            let solved = solve_dispatch(&spec, &q, &null, &opts).ok();
            let reference = probe_reference(&null, solved.as_ref(), &q)?;
            let mut probes = default_probes(&null, &reference, &knots, spec.options.seed)?;
            if let Some(sol) = &solved {
                probes.push(EVariable::from_numeraire(
                    "solved X*",
                    &sol.numeraire,
                    knots.clone(),
                ));
            }
            certificates.push((
                "numeraire".into(),
                numeraire_certificate(&x, &q, &null, &probes, cert_tol),
            ));

            summary = SolutionSummary {
                candidate: Some(x.label.clone()),
                is_evariable: Some(is_evar),
                notes: vec![],
                ..SolutionSummary::default()
            };
            let grid = grid_points(&q, args, spec.options.grid)?;
            grid_rows = grid
                .iter()
                .map(|&z| {
                    let xv = x.value(z).value();
                    let qv = density_at(&q, z);
                    let (dp, rd) = if xv.is_finite() && xv > 0.0 {
                        (1.0 / xv, qv / xv)
                    } else if xv == 0.0 {
                        (f64::INFINITY, if qv > 0.0 { f64::INFINITY } else { 0.0 })
                    } else {
                        (0.0, 0.0)
                    };
                    GridRow {
                        z,
                        x_star: xv,
                        dpstar_dq: dp,
                        ripr_density: rd,
                        x_ui: None,
                    }
                })
                .collect();
        }
        Task::CompareUi => {
            let sol = solve_dispatch(&spec, &q, &null, &opts)?;
            let x = EVariable::from_numeraire("X*", &sol.numeraire, knots.clone());
            let grid = grid_points(&q, args, spec.options.grid)?;
            let ui = universal_inference_compare(&q, &null, &x, &grid, cert_tol)?;

            let reference = probe_reference(&null, Some(&sol), &q)?;
            let probes = default_probes(&null, &reference, &knots, spec.options.seed)?;
            certificates.push((
                "numeraire".into(),
                numeraire_certificate(&x, &q, &null, &probes, cert_tol),
            ));
            certificates.push((
                "universal_inference".into(),
                Certificate::single(CheckResult {
                    name: "wealth dominates the universal inference baseline".into(),
                    residual: (-ui.min_gap).max(0.0),
                    tol: cert_tol,
                    pass: ui.pass,
                    witness: format!(
                        "strict mass {:.6}, log-wealth gain {:.6}",
                        ui.strict_mass, ui.log_wealth_gain
                    ),
                }),
            ));

            let mut s = solution_summary(&sol);
            s.min_gap = Some(ui.min_gap);
            s.strict_mass = Some(ui.strict_mass);
            s.log_wealth_gain = Some(ui.log_wealth_gain);
            summary = s;
            grid_rows = grid
                .iter()
                .enumerate()
                .map(|(i, &z)| {
                    let mut row = solve_rows(&x, &sol.ripr, std::slice::from_ref(&z))
                        .pop()
                        .expect("one row");
                    row.x_ui = Some(ui.x_ui[i]);
                    row
                })
                .collect();
        }
    }

    let overall_pass = certificates.iter().all(|(_, c)| c.overall_pass);
    let appendix_b_flags = certificates
        .iter()
        .find(|(name, _)| name == "numeraire")
        .map(|(_, c)| c.appendix_b_flags);
    Ok(Report {
        task: spec.task.name().into(),
        summary,
        grid: grid_rows,
        certificates,
        appendix_b_flags,
        overall_pass,
        provenance: Provenance {
            version: TOOL_VERSION.into(),
            seed: spec.options.seed,
            tol: spec.options.tol,
            cert_tol,
            grid_points: spec.options.grid as u64,
        },
    })
}

/// Routes solve requests, resolving exp-family instances to the tilt
/// solver since they are parametrized rather than mixed.
fn solve_dispatch(
    spec: &ProblemSpec,
    q: &Measure,
    null: &NullHypothesis,
    opts: &numeraire::solution::SolverOptions,
) -> Result<NumeraireSolution> {
    match (&spec.null, &spec.alternative) {
        (NullSpec::ExpFamily { .. }, MeasureSpec::ExpFamilyMember { theta }) => {
            numeraire::closed_form::expfam_numeraire(null, *theta, opts)
        }
        (NullSpec::ExpFamily { .. }, _) => Err(Error::InvalidSpec(
            "solving an exp-family null needs an exp_family_member alternative \
             so the tilt parameter is known"
                .into(),
        )),
        _ => numeraire::solve(q, null, opts),
    }
}
