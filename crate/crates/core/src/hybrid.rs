//! Two-stage hybrid optimization: a budgeted global explorer hands its best
//! candidate to a local refiner, and the better of the two stages wins.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::global::{run_global, Budget, GlobalAlgo, RunResult};
use crate::local::{run_local, LocalAlgo, LocalResult, LocalStatus, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::objective::{CountingObjective, Objective};
use crate::param_space::ParameterSpace;

/// A global stage, a hand-off point, and a local stage.
///
/// `switch` is the global stage's budget; the local stage then runs to its
/// own convergence test, bounded by `local_max_iter` iterations and, when
/// set, `local_max_evals` objective evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub global_alg: GlobalAlgo,
    pub local_alg: LocalAlgo,
    pub switch: Budget,
    pub local_tol: f64,
    pub local_max_iter: u64,
    pub local_max_evals: Option<u64>,
}

impl HybridConfig {
    pub fn new(global_alg: GlobalAlgo, local_alg: LocalAlgo, switch: Budget) -> Self {
        HybridConfig {
            global_alg,
            local_alg,
            switch,
            local_tol: DEFAULT_TOL,
            local_max_iter: DEFAULT_MAX_ITER,
            local_max_evals: None,
        }
    }

    /// Short name like "pso+bfgs" for reports.
    pub fn name(&self) -> String {
        format!("{}+{}", self.global_alg.name(), self.local_alg.name())
    }
}

/// Both stage outcomes plus the combined verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub global_part: RunResult,
    pub local_part: LocalResult,
    /// Global evaluations plus every local objective or residual call.
    pub total_evals: u64,
    /// Never above the global stage's best: a local stage that wanders off
    /// is outvoted.
    pub f_final: f64,
}

impl HybridResult {
    /// The candidate behind `f_final`.
    pub fn best_x(&self) -> &[f64] {
        if self.local_part.f_final <= self.global_part.best_f {
            &self.local_part.x_final
        } else {
            &self.global_part.best_x
        }
    }
}

/// Runs the global stage under its budget, then polishes the global best
/// with the local stage.
///
/// The local stage sees the objective through an evaluation counter. When a
/// `local_max_evals` cap trips, the refiner winds down on its best point so
/// far and the status is reported as `MaxIter`; a cap hit before the very
/// first local evaluation degenerates to an empty local stage at the global
/// best. Local failures with no cap involved propagate as errors.
pub fn run_hybrid(
    cfg: &HybridConfig,
    obj: &dyn Objective,
    space: &ParameterSpace,
    seed: u64,
) -> Result<HybridResult> {
    let global_part = run_global(&cfg.global_alg, obj, space, &cfg.switch, seed)?;
    let counting = CountingObjective::new(obj, cfg.local_max_evals);
    let local_part = match run_local(
        cfg.local_alg,
        &counting,
        &global_part.best_x,
        cfg.local_tol,
        cfg.local_max_iter,
    ) {
        Ok(mut res) => {
            if counting.tripped() && res.status != LocalStatus::Converged {
                res.status = LocalStatus::MaxIter;
            }
            res
        }
        Err(err) => {
            if counting.tripped() {
                LocalResult {
                    x_final: global_part.best_x.clone(),
                    f_final: global_part.best_f,
                    iterations: 0,
                    status: LocalStatus::MaxIter,
                    trace: Vec::new(),
                }
            } else {
                return Err(err);
            }
        }
    };
    let f_final = local_part.f_final.min(global_part.best_f);
    Ok(HybridResult {
        total_evals: global_part.evals + counting.used(),
        global_part,
        local_part,
        f_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{benchmark_space, y_problem, z_problem};
    use crate::objective::ShiftedResiduals;

    fn hpso(switch_evals: u64) -> HybridConfig {
        HybridConfig::new(GlobalAlgo::pso(), LocalAlgo::Bfgs, Budget::evals(switch_evals))
    }

    /// The combined result never loses to its own global stage, and the
    /// reported candidate reproduces the reported fitness.
    #[test]
    fn local_stage_only_improves() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        for seed in 0..5 {
            let res = run_hybrid(&hpso(1_500), &problem.evaluator, &space, seed).unwrap();
            assert!(res.f_final <= res.global_part.best_f);
            assert!(res.total_evals > res.global_part.evals);
            let replay = (problem.evaluator)(res.best_x());
            assert!((replay - res.f_final).abs() < 1e-12);
        }
    }

    /// A short global stage plus the quasi-Newton polish pins the sine
    /// benchmark minimum to local-converged accuracy.
    #[test]
    fn polish_reaches_true_minimum() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        let res = run_hybrid(&hpso(5_010), &problem.evaluator, &space, 42).unwrap();
        assert_eq!(res.local_part.status, LocalStatus::Converged);
        assert!(res.f_final < -17.6502, "f_final = {}", res.f_final);
        let (x, f) = problem.known_min.as_ref().unwrap();
        assert!((res.f_final - f).abs() < 1e-3);
        assert!((res.best_x()[0] - x[0]).abs() < 1e-3);
        assert!((res.best_x()[1] - x[1]).abs() < 1e-3);
    }

    /// An evaluation cap that trips mid-polish reports MaxIter and keeps
    /// the global best.
    #[test]
    fn tripped_cap_degrades_gracefully() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        for cap in [0, 3] {
            let mut cfg = hpso(600);
            cfg.local_max_evals = Some(cap);
            let res = run_hybrid(&cfg, &problem.evaluator, &space, 9).unwrap();
            assert_eq!(res.local_part.status, LocalStatus::MaxIter, "cap {cap}");
            assert!(res.f_final <= res.global_part.best_f);
            assert_eq!(res.total_evals, res.global_part.evals + cap);
        }
    }

    /// The least-squares refiner plugs in through the residual interface.
    #[test]
    fn trust_region_stage_works_on_residual_objective() {
        let problem = z_problem(5.0);
        let shifted = ShiftedResiduals {
            inner: problem.evaluator,
            floor: -1.5,
        };
        let space = benchmark_space(&problem);
        let cfg = HybridConfig::new(
            GlobalAlgo::fwa(),
            LocalAlgo::TrustRegion,
            Budget::evals(2_000),
        );
        let res = run_hybrid(&cfg, &shifted, &space, 0).unwrap();
        // Shifted objective: subtract the floor back out to compare with
        // the surface's absolute minimum of -1 at the origin.
        let absolute = res.f_final + (-1.5);
        assert!(absolute <= res.global_part.best_f - 1.5 + 1e-12);
        assert!(absolute < -0.99, "absolute = {absolute}");
    }
}
