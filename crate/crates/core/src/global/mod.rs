//! Population-based global search: PSO, binary GA, quantum-inspired GA, and
//! the fireworks algorithm, behind one budgeted run interface.
//!
//! All four work in scaled coordinates, archive their best-ever candidate,
//! and advance in whole generations. The run loop never starts a generation
//! that would overshoot an evaluation budget; the initial population is the
//! minimal unit of work and always evaluates in full.

mod fwa;
mod ga;
mod pso;
mod qga;

pub use fwa::{fwa_generation, FireworkPopulation, FwaConfig};
pub use ga::{ga_generation, GaConfig, GaPopulation};
pub use pso::{pso_step, PsoConfig, SwarmState};
pub use qga::{adaptive_angle, qga_generation, rotate_qubit, steer_direction, QgaConfig, QuantumPopulation};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::objective::Objective;
use crate::param_space::ParameterSpace;

/// Stopping rules for a global run. At least one of `max_evals` and
/// `max_seconds` must be present (a target alone could never terminate).
///
/// Evaluation budgets stop at generation granularity: a generation that
/// would exceed `max_evals` is not started. The initial population is exempt,
/// so a budget smaller than one population still evaluates that population.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Budget {
    pub max_evals: Option<u64>,
    pub max_seconds: Option<f64>,
    pub target_fitness: Option<f64>,
}

impl Budget {
    /// Budget of `n` objective evaluations.
    pub fn evals(n: u64) -> Self {
        Budget {
            max_evals: Some(n),
            ..Budget::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evals == Some(0) {
            return Err(CoreError::InvalidBudget("empty budget".into()));
        }
        if let Some(s) = self.max_seconds {
            if !(s > 0.0) {
                return Err(CoreError::InvalidBudget(format!(
                    "max_seconds must be positive, got {s}"
                )));
            }
        }
        if self.max_evals.is_none() && self.max_seconds.is_none() {
            return Err(CoreError::InvalidBudget(
                "need max_evals or max_seconds; a fitness target alone cannot terminate".into(),
            ));
        }
        Ok(())
    }
}

/// Which stopping rule ended a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Evals,
    Time,
    Target,
}

impl TerminationReason {
    /// Stable snake_case name used in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Evals => "evals",
            TerminationReason::Time => "time",
            TerminationReason::Target => "target",
        }
    }
}

/// Outcome of one global run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub evals: u64,
    /// (cumulative evaluations, best fitness so far), one entry per
    /// generation; non-increasing in the second component.
    pub trace: Vec<(u64, f64)>,
    pub terminated_by: TerminationReason,
}

/// A global algorithm with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlobalAlgo {
    Pso(PsoConfig),
    Ga(GaConfig),
    Qga(QgaConfig),
    Fwa(FwaConfig),
}

impl GlobalAlgo {
    pub fn pso() -> Self {
        GlobalAlgo::Pso(PsoConfig::default())
    }

    pub fn ga() -> Self {
        GlobalAlgo::Ga(GaConfig::default())
    }

    pub fn qga() -> Self {
        GlobalAlgo::Qga(QgaConfig::default())
    }

    pub fn fwa() -> Self {
        GlobalAlgo::Fwa(FwaConfig::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            GlobalAlgo::Pso(_) => "pso",
            GlobalAlgo::Ga(_) => "ga",
            GlobalAlgo::Qga(_) => "qga",
            GlobalAlgo::Fwa(_) => "fwa",
        }
    }
}

/// Evaluates a batch of candidates, in parallel when workers are available.
/// Results come back in input order, so scheduling cannot change outcomes.
pub(crate) fn eval_batch(obj: &dyn Objective, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    xs.par_iter().map(|x| obj.eval(x)).collect()
}

enum Driver {
    Pso(SwarmState),
    Ga(GaPopulation),
    Qga(QuantumPopulation),
    Fwa(FireworkPopulation),
}

impl Driver {
    fn new(
        alg: &GlobalAlgo,
        space: &ParameterSpace,
        obj: &dyn Objective,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Self, u64)> {
        Ok(match alg {
            GlobalAlgo::Pso(cfg) => {
                let state = SwarmState::init(cfg, space, obj, rng)?;
                let cost = state.positions.len() as u64;
                (Driver::Pso(state), cost)
            }
            GlobalAlgo::Ga(cfg) => {
                let pop = GaPopulation::init(cfg, space, obj, rng)?;
                let cost = pop.chromosomes.len() as u64;
                (Driver::Ga(pop), cost)
            }
            GlobalAlgo::Qga(cfg) => (Driver::Qga(QuantumPopulation::init(cfg, space)?), 0),
            GlobalAlgo::Fwa(cfg) => {
                let pop = FireworkPopulation::init(cfg, space, obj, rng)?;
                let cost = pop.fireworks.len() as u64;
                (Driver::Fwa(pop), cost)
            }
        })
    }

    fn step_cost(&self) -> u64 {
        match self {
            Driver::Pso(s) => s.positions.len() as u64,
            Driver::Ga(p) => (p.chromosomes.len() - p.elite) as u64,
            Driver::Qga(p) => p.qubits.len() as u64,
            Driver::Fwa(p) => p.step_cost(),
        }
    }

    fn step(&mut self, obj: &dyn Objective, rng: &mut ChaCha8Rng) -> Result<()> {
        match self {
            Driver::Pso(s) => pso_step(s, obj, rng),
            Driver::Ga(p) => ga_generation(p, obj, rng),
            Driver::Qga(p) => qga_generation(p, obj, rng),
            Driver::Fwa(p) => fwa_generation(p, obj, rng),
        }
    }

    fn best(&self) -> Option<(&[f64], f64)> {
        match self {
            Driver::Pso(s) => Some((&s.global_best, s.global_best_f)),
            Driver::Ga(p) => Some((&p.best_x, p.best_f)),
            Driver::Qga(p) => {
                if p.best_f.is_finite() {
                    Some((&p.best_x, p.best_f))
                } else {
                    None
                }
            }
            Driver::Fwa(p) => Some((&p.best_x, p.best_f)),
        }
    }
}

/// Runs `alg` on `obj` until a stopping rule of `budget` fires; returns the
/// best candidate ever evaluated.
///
/// Deterministic for a fixed (algorithm, seed, problem) when `max_seconds`
/// is unset.
pub fn run_global(
    alg: &GlobalAlgo,
    obj: &dyn Objective,
    space: &ParameterSpace,
    budget: &Budget,
    seed: u64,
) -> Result<RunResult> {
    budget.validate()?;
    if space.dim() == 0 {
        return Err(CoreError::InvalidConfig(
            "search space has no free parameters".into(),
        ));
    }
    let start = Instant::now();
    let time_up = |start: &Instant| {
        budget
            .max_seconds
            .is_some_and(|s| start.elapsed().as_secs_f64() >= s)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut driver, mut evals) = Driver::new(alg, space, obj, &mut rng)?;
    let mut trace = Vec::new();
    if let Some((_, f)) = driver.best() {
        trace.push((evals, f));
    }

    let target_met = |driver: &Driver| {
        budget
            .target_fitness
            .is_some_and(|t| driver.best().is_some_and(|(_, f)| f <= t))
    };

    let terminated_by = loop {
        if target_met(&driver) {
            break TerminationReason::Target;
        }
        if time_up(&start) {
            break TerminationReason::Time;
        }
        if let Some(m) = budget.max_evals {
            if evals + driver.step_cost() > m {
                break TerminationReason::Evals;
            }
        }
        let cost = driver.step_cost();
        driver.step(obj, &mut rng)?;
        evals += cost;
        if let Some((_, f)) = driver.best() {
            trace.push((evals, f));
        }
    };

    let (best_x, best_f) = driver
        .best()
        .map(|(x, f)| (x.to_vec(), f))
        .ok_or_else(|| CoreError::InvalidBudget(
            "budget exhausted before any candidate was evaluated".into(),
        ))?;
    Ok(RunResult {
        best_x,
        best_f,
        evals,
        trace,
        terminated_by,
    })
}
