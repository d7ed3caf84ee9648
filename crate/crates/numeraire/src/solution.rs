//! Common result and option types shared by the solvers.

use crate::xreal::XReal;
use std::fmt;
use std::sync::Arc;

/// The optimal wealth as a function, carried in both linear and log form.
/// Log form matters: comparisons in the far tails must not pass through
/// numbers that underflow to zero.
#[derive(Clone)]
pub struct Numeraire {
    eval: Arc<dyn Fn(f64) -> XReal + Send + Sync>,
    log_eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Numeraire {
    pub fn new(
        eval: Arc<dyn Fn(f64) -> XReal + Send + Sync>,
        log_eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Numeraire {
        Numeraire { eval, log_eval }
    }

    /// Build from a log-space evaluator alone.
    pub fn from_log(log_eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Numeraire {
        let le = Arc::clone(&log_eval);
        Numeraire {
            eval: Arc::new(move |z| XReal::exp(le(z))),
            log_eval,
        }
    }

    pub fn value(&self, z: f64) -> XReal {
        (self.eval)(z)
    }

    /// `log X(z)` with `-inf` for zero and `+inf` past the overflow guard.
    pub fn log_value(&self, z: f64) -> f64 {
        (self.log_eval)(z)
    }

    pub fn payoff(&self) -> Arc<dyn Fn(f64) -> XReal + Send + Sync> {
        Arc::clone(&self.eval)
    }
}

impl fmt::Debug for Numeraire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Numeraire(..)")
    }
}

/// Iteration and accuracy controls. Defaults match the documented contract:
/// first-order residuals driven to 1e-9, quadrature to 1e-10.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// First-order / fixed-point residual target.
    pub tol_foc: f64,
    pub max_iter: usize,
    /// Quadrature accuracy for inner expectations.
    pub acc: f64,
    /// Quadrature evaluation budget per expectation.
    pub budget: usize,
    /// Generic grid resolution for certification sweeps.
    pub grid: usize,
    /// Step for scalar-parameter oracle scans (brute-force cross-checks).
    pub oracle_grid_step: f64,
    /// Starting weights for mixture iterations (uniform when absent).
    pub init_weights: Option<Vec<f64>>,
    /// Seed for randomised probe mixtures in certificates.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_foc: 1e-9,
            max_iter: 100_000,
            acc: 1e-10,
            budget: 1_000_000,
            grid: 512,
            oracle_grid_step: 1e-3,
            init_weights: None,
            seed: 0,
        }
    }
}

/// Wealth growth and entropy numbers attached to a solution. Any of these
/// may be `+inf`; the conditional pair is the finite core when the
/// decomposition is partial.
#[derive(Clone, Copy, Debug)]
pub struct GrowthReport {
    /// `E_Q[log X*]`.
    pub log_wealth: f64,
    /// `H(Q | P*)`, unnormalised.
    pub entropy: f64,
    /// `E_{Q*}[log X**]` for the conditioned problem.
    pub conditional_log_wealth: f64,
    /// `H(Q* | P**)`.
    pub conditional_entropy: f64,
}

#[derive(Clone, Debug)]
pub struct NumeraireSolution {
    pub numeraire: Numeraire,
    /// The projection as a measure dominated by the alternative:
    /// its density against `Q` is `1/X*`. Mass `E_Q[1/X*] <= lambda_star`.
    pub ripr: crate::measure::Measure,
    /// Mass of the alternative reachable by the null.
    pub lambda_star: f64,
    /// Optimal mixture weights over finite null components.
    pub mixture_weights: Option<Vec<f64>>,
    pub growth: GrowthReport,
    pub iterations: usize,
    /// Final fixed-point / first-order residual.
    pub residual: f64,
    /// Per-component first-order residuals `E[p_i/p_w] - 1` at the returned
    /// weights (finite mixtures only; empty otherwise). At the optimum these
    /// are `<= 0` up to tolerance, and zero on the active support.
    pub residuals: Vec<f64>,
    /// Solved scalar parameter where the family has one (slope, tilt).
    pub parameter: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RenyiSolution {
    pub gamma: f64,
    /// The optimal power-utility wealth `X*_gamma`.
    pub evariable: crate::nullspec::EVariable,
    /// The projection `P*`: the optimal null mixture restricted to `{q > 0}`.
    pub projection: crate::measure::Measure,
    /// Projection weights over the finite null components.
    pub mixture_weights: Vec<f64>,
    /// `m = E_Q[(dP*/dQ)^(1 - 1/gamma)]`, the attained power-mean value.
    pub power_mean: f64,
    /// `E_Q[(X*)^(1-gamma)] = m^gamma`; strictly below 1 iff the
    /// alternative sits outside the convex hull of the null.
    pub normalizer: f64,
    /// Optimal expected utility `E_Q[U_gamma(X*)] = m^gamma / (1-gamma)`.
    pub utility_value: f64,
    /// Renyi divergence of order `1/gamma` from `Q` to the projection.
    pub divergence_value: f64,
    pub iterations: usize,
    /// Final Frank-Wolfe optimality gap of the weight search.
    pub fw_gap: f64,
    pub notes: Vec<String>,
}
