//! Particle swarm optimization with inertia weight, synchronous updates, and
//! reflecting bounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::global::eval_batch;
use crate::objective::Objective;
use crate::param_space::{ConstraintMode, ParameterSpace};

/// Swarm hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub particles: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            particles: 30,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
        }
    }
}

/// Full swarm state, advanced in place by [`pso_step`].
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best: Vec<Vec<f64>>,
    pub personal_best_f: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_best_f: f64,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub space: ParameterSpace,
}

impl SwarmState {
    /// Uniform random positions, zero velocities, and one evaluation per
    /// particle to seed the personal and global bests.
    pub fn init<R: Rng>(
        cfg: &PsoConfig,
        space: &ParameterSpace,
        obj: &dyn Objective,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.particles == 0 {
            return Err(CoreError::InvalidConfig("swarm needs at least one particle".into()));
        }
        let dim = space.dim();
        let positions: Vec<Vec<f64>> =
            (0..cfg.particles).map(|_| space.sample_uniform(rng)).collect();
        let fitnesses = eval_batch(obj, &positions)?;
        let mut state = SwarmState {
            velocities: vec![vec![0.0; dim]; cfg.particles],
            personal_best: positions.clone(),
            personal_best_f: fitnesses,
            positions,
            global_best: Vec::new(),
            global_best_f: f64::INFINITY,
            inertia: cfg.inertia,
            cognitive: cfg.cognitive,
            social: cfg.social,
            space: space.clone(),
        };
        state.refresh_global_best();
        Ok(state)
    }

    /// Sets the global best to the lowest personal best.
    fn refresh_global_best(&mut self) {
        let (idx, _) = self
            .personal_best_f
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("swarm is non-empty");
        self.global_best_f = self.personal_best_f[idx];
        self.global_best = self.personal_best[idx].clone();
    }
}

/// One synchronous swarm step: velocity and position updates for every
/// particle against the previous global best, then a batched re-evaluation
/// and a joint best refresh.
///
/// Random coefficients are drawn per particle in index order, and per
/// dimension within a particle as (cognitive, social); fixing the draw order
/// keeps runs reproducible. Bounds act as billiard walls: an overshooting
/// component is folded back into the box and its velocity is negated, so the
/// particle rebounds instead of pressing against the wall. Without the
/// rebound, particles attracted past a bound stall there with an outward
/// velocity, which starves exploration near edge-adjacent minima.
pub fn pso_step<R: Rng>(state: &mut SwarmState, obj: &dyn Objective, rng: &mut R) -> Result<()> {
    let dim = state.space.dim();
    for i in 0..state.positions.len() {
        for d in 0..dim {
            let r1 = rng.random::<f64>();
            let r2 = rng.random::<f64>();
            let v = state.inertia * state.velocities[i][d]
                + state.cognitive * r1 * (state.personal_best[i][d] - state.positions[i][d])
                + state.social * r2 * (state.global_best[d] - state.positions[i][d]);
            state.velocities[i][d] = v;
            state.positions[i][d] += v;
        }
        let folded = state.space.constrain(&state.positions[i], ConstraintMode::Reflect);
        for d in 0..dim {
            if folded[d] != state.positions[i][d] {
                state.velocities[i][d] = -state.velocities[i][d];
            }
        }
        state.positions[i] = folded;
    }
    let fitnesses = eval_batch(obj, &state.positions)?;
    for (i, f) in fitnesses.into_iter().enumerate() {
        if f < state.personal_best_f[i] {
            state.personal_best_f[i] = f;
            state.personal_best[i] = state.positions[i].clone();
        }
    }
    state.refresh_global_best();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{benchmark_space, y_problem};
    use crate::global::{run_global, Budget, GlobalAlgo};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_space() -> ParameterSpace {
        use crate::param_space::ParamDef;
        ParameterSpace::new(vec![
            ParamDef::fit("a", -100.0, 100.0, crate::param_space::Scale::Linear),
            ParamDef::fit("b", -100.0, 100.0, crate::param_space::Scale::Linear),
        ])
        .unwrap()
    }

    /// With unit inertia and zero attraction the particle coasts: position
    /// advances by the velocity and the velocity never changes.
    #[test]
    fn pure_inertia_coasts() {
        let space = tiny_space();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obj = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let mut state = SwarmState::init(
            &PsoConfig {
                particles: 1,
                inertia: 1.0,
                cognitive: 0.0,
                social: 0.0,
            },
            &space,
            &obj,
            &mut rng,
        )
        .unwrap();
        state.positions[0] = vec![0.0, 0.0];
        state.velocities[0] = vec![1.0, 0.0];
        for step in 1..=3 {
            pso_step(&mut state, &obj, &mut rng).unwrap();
            assert_eq!(state.positions[0], vec![step as f64, 0.0]);
            assert_eq!(state.velocities[0], vec![1.0, 0.0]);
        }
    }

    /// A particle sitting on both its personal best and the global best
    /// feels no attraction, so the update reduces to velocity scaling.
    #[test]
    fn coincident_bests_scale_velocity_only() {
        let space = tiny_space();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obj = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let mut state = SwarmState::init(
            &PsoConfig {
                particles: 1,
                inertia: 0.7,
                cognitive: 1.5,
                social: 1.5,
            },
            &space,
            &obj,
            &mut rng,
        )
        .unwrap();
        let at = vec![2.0, -3.0];
        state.positions[0] = at.clone();
        state.personal_best[0] = at.clone();
        state.personal_best_f[0] = 13.0;
        state.global_best = at.clone();
        state.global_best_f = 13.0;
        state.velocities[0] = vec![4.0, -2.0];
        pso_step(&mut state, &obj, &mut rng).unwrap();
        assert!((state.velocities[0][0] - 0.7 * 4.0).abs() < 1e-15);
        assert!((state.velocities[0][1] - 0.7 * (-2.0)).abs() < 1e-15);
    }

    /// A particle coasting through a wall is folded back inside and its
    /// velocity component flips sign, like a billiard rebound.
    #[test]
    fn wall_overshoot_rebounds() {
        let space = tiny_space();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let obj = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let mut state = SwarmState::init(
            &PsoConfig {
                particles: 1,
                inertia: 1.0,
                cognitive: 0.0,
                social: 0.0,
            },
            &space,
            &obj,
            &mut rng,
        )
        .unwrap();
        state.positions[0] = vec![99.0, 0.0];
        state.velocities[0] = vec![5.0, 0.0];
        pso_step(&mut state, &obj, &mut rng).unwrap();
        assert_eq!(state.positions[0], vec![96.0, 0.0]);
        assert_eq!(state.velocities[0], vec![-5.0, 0.0]);
    }

    /// Global best tracks the minimum personal best after every step.
    #[test]
    fn global_best_is_min_of_personal_bests() {
        let space = tiny_space();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obj = |x: &[f64]| (x[0] - 3.0).powi(2) + x[1] * x[1];
        let mut state =
            SwarmState::init(&PsoConfig::default(), &space, &obj, &mut rng).unwrap();
        for _ in 0..10 {
            pso_step(&mut state, &obj, &mut rng).unwrap();
            let min = state.personal_best_f.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(state.global_best_f, min);
        }
    }

    /// Default swarm on the two-dimensional sine benchmark: 200 steps from a
    /// fixed seed land within 1e-3 of the known minimum value.
    #[test]
    fn seeded_run_finds_sine_benchmark_minimum() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        let budget = Budget::evals(30 * 201);
        let res = run_global(&GlobalAlgo::pso(), &problem.evaluator, &space, &budget, 42).unwrap();
        assert_eq!(res.evals, 30 * 201);
        assert!(
            (res.best_f - (-17.65)).abs() < 1e-3,
            "best_f = {}",
            res.best_f
        );
    }
}
