//! Local refinement: quasi-Newton BFGS, Nelder-Mead simplex, and a dogleg
//! trust-region least-squares solver.
//!
//! All three run unconstrained in scaled coordinates. Bound handling happens
//! at reporting time: [`clamp_to_bounds`] projects a final iterate back into
//! the box and flags whether that projection actually moved it.

mod bfgs;
mod nelder_mead;
mod trust_region;

pub use bfgs::{bfgs_minimize, bfgs_update, BfgsState};
pub use nelder_mead::nelder_mead_minimize;
pub use trust_region::trust_region_lsq;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::objective::Objective;

/// Default convergence tolerance shared by the three refiners.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default iteration cap shared by the three refiners.
pub const DEFAULT_MAX_ITER: u64 = 1000;

/// Why a local minimization stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalStatus {
    /// Gradient-norm, function-spread, or step criterion met.
    Converged,
    /// Iteration cap reached (or an externally capped evaluation budget ran
    /// out mid-search).
    MaxIter,
    /// Backtracking found no decrease after the halving limit.
    LineSearchFailed,
    /// No further progress possible: degenerate geometry or repeated
    /// evaluation failures.
    Stalled,
}

impl LocalStatus {
    /// Stable snake_case name used in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            LocalStatus::Converged => "converged",
            LocalStatus::MaxIter => "max_iter",
            LocalStatus::LineSearchFailed => "line_search_failed",
            LocalStatus::Stalled => "stalled",
        }
    }
}

/// Outcome of one local minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub iterations: u64,
    pub status: LocalStatus,
    /// (iteration, best f so far); f_final is the minimum of this series.
    pub trace: Vec<(u64, f64)>,
}

/// Which local refiner to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalAlgo {
    Bfgs,
    NelderMead,
    TrustRegion,
}

impl LocalAlgo {
    pub fn name(&self) -> &'static str {
        match self {
            LocalAlgo::Bfgs => "bfgs",
            LocalAlgo::NelderMead => "nelder_mead",
            LocalAlgo::TrustRegion => "trust_region",
        }
    }
}

/// Runs the chosen refiner. Trust region requires the objective to expose
/// residual structure.
pub fn run_local<O: Objective + ?Sized>(
    algo: LocalAlgo,
    obj: &O,
    x0: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<LocalResult> {
    match algo {
        LocalAlgo::Bfgs => bfgs_minimize(obj, x0, tol, max_iter),
        LocalAlgo::NelderMead => nelder_mead_minimize(obj, x0, tol, max_iter),
        LocalAlgo::TrustRegion => trust_region_lsq(obj, x0, tol, max_iter),
    }
}

/// Projects `x` into the box. The flag reports whether any component moved
/// by more than 1e-6, i.e. whether the unconstrained refiner actually left
/// the feasible region rather than just grazing its edge.
pub fn clamp_to_bounds(x: &[f64], bounds: &[(f64, f64)]) -> (Vec<f64>, bool) {
    let mut moved = false;
    let clamped = x
        .iter()
        .zip(bounds)
        .map(|(&xi, &(lo, hi))| {
            let c = xi.clamp(lo, hi);
            if (c - xi).abs() > 1e-6 {
                moved = true;
            }
            c
        })
        .collect();
    (clamped, moved)
}

/// Shared helper: treats evaluation failures and non-finite values as +inf
/// so line searches and simplex moves back away from bad regions instead of
/// aborting.
pub(crate) fn eval_lenient<O: Objective + ?Sized>(obj: &O, x: &[f64]) -> f64 {
    match obj.eval(x) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}
