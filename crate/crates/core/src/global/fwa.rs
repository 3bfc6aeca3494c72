//! Fireworks algorithm: each generation detonates every firework into a
//! fitness-dependent shower of uniform sparks, adds a few Gaussian sparks
//! scaled along the line to the current best, and reselects the next
//! fireworks from the combined pool by elitism plus distance-weighted
//! roulette.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::global::eval_batch;
use crate::objective::Objective;
use crate::param_space::{ConstraintMode, ParameterSpace};

/// Tie-breaking epsilon in the spark-count and amplitude shares.
const EPS: f64 = 1e-12;

/// Fireworks hyperparameters. `spark_budget` is the nominal number of
/// uniform sparks per generation, shared across fireworks by fitness;
/// per-firework counts are clamped to [s_min, floor(s_max_frac * budget)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FwaConfig {
    pub fireworks: usize,
    pub spark_budget: usize,
    /// Maximum blast amplitude as a fraction of each axis range.
    pub amplitude_frac: f64,
    pub gaussian_sparks: usize,
    pub s_min: usize,
    pub s_max_frac: f64,
}

impl Default for FwaConfig {
    fn default() -> Self {
        FwaConfig {
            fireworks: 5,
            spark_budget: 50,
            amplitude_frac: 0.4,
            gaussian_sparks: 5,
            s_min: 2,
            s_max_frac: 0.8,
        }
    }
}

/// Current fireworks and bookkeeping, advanced in place by
/// [`fwa_generation`].
#[derive(Debug, Clone)]
pub struct FireworkPopulation {
    pub fireworks: Vec<Vec<f64>>,
    pub fitnesses: Vec<f64>,
    pub spark_budget: usize,
    /// Per-axis maximum blast amplitude in scaled coordinates.
    pub amplitude_max: Vec<f64>,
    pub gaussian_sparks: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub space: ParameterSpace,
}

impl FireworkPopulation {
    pub fn init<R: Rng>(
        cfg: &FwaConfig,
        space: &ParameterSpace,
        obj: &dyn Objective,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.fireworks == 0 {
            return Err(CoreError::InvalidConfig("need at least one firework".into()));
        }
        if !(cfg.amplitude_frac > 0.0 && cfg.amplitude_frac.is_finite()) {
            return Err(CoreError::InvalidConfig(
                "amplitude_frac must be positive and finite".into(),
            ));
        }
        let s_max = (cfg.s_max_frac * cfg.spark_budget as f64).floor() as usize;
        if s_max < cfg.s_min {
            return Err(CoreError::InvalidConfig(
                "spark count ceiling falls below the floor".into(),
            ));
        }
        if cfg.spark_budget < cfg.fireworks * cfg.s_min {
            return Err(CoreError::InvalidConfig(
                "spark budget cannot cover the per-firework minimum".into(),
            ));
        }
        let fireworks: Vec<Vec<f64>> =
            (0..cfg.fireworks).map(|_| space.sample_uniform(rng)).collect();
        let fitnesses = eval_batch(obj, &fireworks)?;
        let best = argmin(&fitnesses);
        let amplitude_max = space
            .scaled_bounds()
            .iter()
            .map(|&(lo, hi)| cfg.amplitude_frac * (hi - lo))
            .collect();
        Ok(FireworkPopulation {
            best_x: fireworks[best].clone(),
            best_f: fitnesses[best],
            fireworks,
            fitnesses,
            spark_budget: cfg.spark_budget,
            amplitude_max,
            gaussian_sparks: cfg.gaussian_sparks,
            s_min: cfg.s_min,
            s_max,
            space: space.clone(),
        })
    }

    /// Uniform-spark allocation for the current fitnesses: proportional to
    /// distance from the worst firework, rounded, clamped to
    /// [s_min, s_max], then trimmed from the largest counts until the total
    /// fits the budget. Deterministic given the fitnesses.
    pub fn spark_counts(&self) -> Vec<usize> {
        let worst = self
            .fitnesses
            .iter()
            .cloned()
            .max_by(f64::total_cmp)
            .expect("population is non-empty");
        let denom: f64 = self.fitnesses.iter().map(|f| worst - f + EPS).sum();
        let mut counts: Vec<usize> = self
            .fitnesses
            .iter()
            .map(|f| {
                let raw = self.spark_budget as f64 * (worst - f + EPS) / denom;
                (raw.round() as i64).clamp(self.s_min as i64, self.s_max as i64) as usize
            })
            .collect();
        let mut total: usize = counts.iter().sum();
        while total > self.spark_budget {
            let i = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > self.s_min)
                .max_by_key(|(_, &c)| c)
                .map(|(i, _)| i)
                .expect("budget covers the per-firework minimum");
            counts[i] -= 1;
            total -= 1;
        }
        counts
    }

    /// Per-firework, per-axis blast amplitudes: the axis maximum scaled by
    /// each firework's share of the distance-from-best total, so better
    /// fireworks explode more tightly.
    pub fn spark_amplitudes(&self) -> Vec<Vec<f64>> {
        let best = self
            .fitnesses
            .iter()
            .cloned()
            .min_by(f64::total_cmp)
            .expect("population is non-empty");
        let denom: f64 = self.fitnesses.iter().map(|f| f - best + EPS).sum();
        self.fitnesses
            .iter()
            .map(|f| {
                let share = (f - best + EPS) / denom;
                self.amplitude_max.iter().map(|a| a * share).collect()
            })
            .collect()
    }

    /// Evaluations one generation will spend: all uniform sparks plus the
    /// Gaussian sparks.
    pub fn step_cost(&self) -> u64 {
        (self.spark_counts().iter().sum::<usize>() + self.gaussian_sparks) as u64
    }
}

fn argmin(fitnesses: &[f64]) -> usize {
    let mut best = 0;
    for (i, f) in fitnesses.iter().enumerate().skip(1) {
        if f.total_cmp(&fitnesses[best]).is_lt() {
            best = i;
        }
    }
    best
}

/// Draws a random axis subset with probability one half per axis, forcing
/// one uniformly chosen axis in when the draw comes up empty.
fn axis_mask<R: Rng>(dim: usize, rng: &mut R) -> Vec<bool> {
    let mut mask: Vec<bool> = (0..dim).map(|_| rng.random_bool(0.5)).collect();
    if !mask.iter().any(|&m| m) {
        mask[rng.random_range(0..dim)] = true;
    }
    mask
}

/// One generation: uniform sparks around every firework, Gaussian sparks
/// whose offset from the best firework is stretched or contracted by a
/// normal factor, one batched evaluation, then selection
/// of the next fireworks from the pool (best kept, rest by distance
/// roulette without replacement).
pub fn fwa_generation<R: Rng>(
    pop: &mut FireworkPopulation,
    obj: &dyn Objective,
    rng: &mut R,
) -> Result<()> {
    let dim = pop.space.dim();
    let n = pop.fireworks.len();
    let counts = pop.spark_counts();
    let amplitudes = pop.spark_amplitudes();
    let best_now = argmin(&pop.fitnesses);
    let best_pos = pop.fireworks[best_now].clone();

    let mut sparks: Vec<Vec<f64>> =
        Vec::with_capacity(counts.iter().sum::<usize>() + pop.gaussian_sparks);
    for (i, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let mut x = pop.fireworks[i].clone();
            let mask = axis_mask(dim, rng);
            for (d, &on) in mask.iter().enumerate() {
                if on {
                    x[d] += (2.0 * rng.random::<f64>() - 1.0) * amplitudes[i][d];
                }
            }
            sparks.push(pop.space.constrain(&x, ConstraintMode::Reflect));
        }
    }
    for _ in 0..pop.gaussian_sparks {
        let i = rng.random_range(0..n);
        let mut x = pop.fireworks[i].clone();
        let mask = axis_mask(dim, rng);
        let g: f64 = 1.0 + rng.sample::<f64, _>(StandardNormal);
        for (d, &on) in mask.iter().enumerate() {
            if on {
                x[d] = best_pos[d] + g * (x[d] - best_pos[d]);
            }
        }
        sparks.push(pop.space.constrain(&x, ConstraintMode::Reflect));
    }
    let spark_fs = eval_batch(obj, &sparks)?;

    // Selection pool: current fireworks plus every spark.
    let mut pool_x = pop.fireworks.clone();
    pool_x.extend(sparks);
    let mut pool_f = pop.fitnesses.clone();
    pool_f.extend(spark_fs);

    let keep = argmin(&pool_f);
    if pool_f[keep] < pop.best_f {
        pop.best_f = pool_f[keep];
        pop.best_x = pool_x[keep].clone();
    }

    // Crowding scores: total distance to the rest of the pool, so isolated
    // candidates are favored and diversity survives selection.
    let p = pool_x.len();
    let mut weight = vec![0.0f64; p];
    for i in 0..p {
        for j in (i + 1)..p {
            let d: f64 = pool_x[i]
                .iter()
                .zip(&pool_x[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            weight[i] += d;
            weight[j] += d;
        }
    }

    let mut available: Vec<usize> = (0..p).filter(|&i| i != keep).collect();
    let mut selected = vec![keep];
    while selected.len() < n {
        let total: f64 = available.iter().map(|&i| weight[i]).sum();
        let pick_pos = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = available.len() - 1;
            for (pos, &i) in available.iter().enumerate() {
                acc += weight[i];
                if u < acc {
                    chosen = pos;
                    break;
                }
            }
            chosen
        } else {
            // Degenerate pool with zero spread: fall back to a uniform draw.
            rng.random_range(0..available.len())
        };
        selected.push(available.swap_remove(pick_pos));
    }

    pop.fireworks = selected.iter().map(|&i| pool_x[i].clone()).collect();
    pop.fitnesses = selected.iter().map(|&i| pool_f[i]).collect();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{benchmark_space, y_problem};
    use crate::global::{run_global, Budget, GlobalAlgo};
    use crate::objective::CountingObjective;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn population_with(fitnesses: Vec<f64>) -> FireworkPopulation {
        use crate::param_space::{ParamDef, Scale};
        let space = ParameterSpace::new(vec![
            ParamDef::fit("a", 0.0, 1.0, Scale::Linear),
            ParamDef::fit("b", 0.0, 1.0, Scale::Linear),
        ])
        .unwrap();
        let n = fitnesses.len();
        FireworkPopulation {
            fireworks: vec![vec![0.5, 0.5]; n],
            fitnesses,
            spark_budget: 50,
            amplitude_max: vec![0.4, 0.4],
            gaussian_sparks: 5,
            s_min: 2,
            s_max: 40,
            best_x: vec![0.5, 0.5],
            best_f: 0.0,
            space,
        }
    }

    /// A lone firework receives the whole spark budget, cut down only by
    /// the per-firework ceiling.
    #[test]
    fn single_firework_takes_capped_budget() {
        let pop = population_with(vec![1.0]);
        assert_eq!(pop.spark_counts(), vec![40]);
    }

    /// Fireworks with identical fitness get identical spark counts and
    /// identical amplitudes.
    #[test]
    fn equal_fitness_splits_evenly() {
        let pop = population_with(vec![2.0; 5]);
        assert_eq!(pop.spark_counts(), vec![10; 5]);
        let amps = pop.spark_amplitudes();
        for a in &amps[1..] {
            assert_eq!(a, &amps[0]);
        }
    }

    /// Clamping at the floor can push the raw total over the budget; the
    /// trim then takes the excess back from the largest allocation.
    #[test]
    fn count_total_never_exceeds_budget() {
        let pop = population_with(vec![0.0, 0.9, 1.0, 1.0, 1.0]);
        let counts = pop.spark_counts();
        assert_eq!(counts, vec![39, 5, 2, 2, 2]);
        assert!(counts.iter().sum::<usize>() <= 50);
    }

    /// The advertised step cost is exactly what a generation spends.
    #[test]
    fn step_cost_matches_actual_evaluations() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        let counted = CountingObjective::new(&problem.evaluator, None);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut pop =
            FireworkPopulation::init(&FwaConfig::default(), &space, &counted, &mut rng).unwrap();
        for _ in 0..5 {
            let before = counted.used();
            let promised = pop.step_cost();
            fwa_generation(&mut pop, &counted, &mut rng).unwrap();
            assert_eq!(counted.used() - before, promised);
        }
    }

    /// Selection is elitist, so the population best never worsens, and
    /// every firework stays inside the bounds.
    #[test]
    fn best_never_worsens_and_stays_bounded() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        let bounds = space.scaled_bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pop =
            FireworkPopulation::init(&FwaConfig::default(), &space, &problem.evaluator, &mut rng)
                .unwrap();
        let mut last = pop.best_f;
        for _ in 0..20 {
            fwa_generation(&mut pop, &problem.evaluator, &mut rng).unwrap();
            assert!(pop.best_f <= last);
            last = pop.best_f;
            for fw in &pop.fireworks {
                for (x, &(lo, hi)) in fw.iter().zip(&bounds) {
                    assert!(*x >= lo && *x <= hi);
                }
            }
        }
    }

    /// Seeded 200-generation run on the sine benchmark reaches the deep
    /// basin.
    #[test]
    fn seeded_run_reaches_deep_basin() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        let budget = Budget::evals(11_100);
        let res = run_global(&GlobalAlgo::fwa(), &problem.evaluator, &space, &budget, 8).unwrap();
        assert!(res.best_f <= -17.0, "best_f = {}", res.best_f);
    }
}
