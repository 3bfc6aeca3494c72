//! Binary-coded genetic algorithm: tournament selection, single-point
//! crossover, bit-flip mutation, and elitism.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::global::eval_batch;
use crate::objective::Objective;
use crate::param_space::ParameterSpace;

/// Genetic algorithm hyperparameters. `p_mutation` of `None` resolves to
/// one expected flip per chromosome, 1 / (dim * bits_per_param).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub bits_per_param: usize,
    pub p_crossover: f64,
    pub p_mutation: Option<f64>,
    pub elite: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 100,
            bits_per_param: 20,
            p_crossover: 0.8,
            p_mutation: None,
            elite: 1,
        }
    }
}

/// Population of bit strings plus their fitnesses, advanced in place by
/// [`ga_generation`].
#[derive(Debug, Clone)]
pub struct GaPopulation {
    pub chromosomes: Vec<Vec<bool>>,
    pub fitnesses: Vec<f64>,
    pub bits_per_param: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub elite: usize,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub space: ParameterSpace,
}

/// Index of the lowest fitness, preferring the earliest on ties.
fn argmin(fitnesses: &[f64]) -> usize {
    let mut best = 0;
    for (i, f) in fitnesses.iter().enumerate().skip(1) {
        if f.total_cmp(&fitnesses[best]).is_lt() {
            best = i;
        }
    }
    best
}

/// Winner of a binary tournament: the strictly fitter contestant, or the
/// first one on a tie.
fn tournament_winner(i: usize, j: usize, fitnesses: &[f64]) -> usize {
    if fitnesses[j].total_cmp(&fitnesses[i]).is_lt() {
        j
    } else {
        i
    }
}

fn tournament2<R: Rng>(fitnesses: &[f64], rng: &mut R) -> usize {
    let i = rng.random_range(0..fitnesses.len());
    let j = rng.random_range(0..fitnesses.len());
    tournament_winner(i, j, fitnesses)
}

impl GaPopulation {
    pub fn init<R: Rng>(
        cfg: &GaConfig,
        space: &ParameterSpace,
        obj: &dyn Objective,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.population < 2 {
            return Err(CoreError::InvalidConfig("population must be at least 2".into()));
        }
        if cfg.elite >= cfg.population {
            return Err(CoreError::InvalidConfig(
                "elite count must be smaller than the population".into(),
            ));
        }
        if cfg.bits_per_param == 0 || cfg.bits_per_param > 63 {
            return Err(CoreError::InvalidConfig(
                "bits_per_param must be between 1 and 63".into(),
            ));
        }
        if !(0.0..=1.0).contains(&cfg.p_crossover) {
            return Err(CoreError::InvalidConfig("p_crossover must lie in [0, 1]".into()));
        }
        let genome_len = space.dim() * cfg.bits_per_param;
        let p_mutation = cfg.p_mutation.unwrap_or(1.0 / genome_len as f64);
        if !(0.0..=1.0).contains(&p_mutation) {
            return Err(CoreError::InvalidConfig("p_mutation must lie in [0, 1]".into()));
        }
        let chromosomes: Vec<Vec<bool>> = (0..cfg.population)
            .map(|_| (0..genome_len).map(|_| rng.random_bool(0.5)).collect())
            .collect();
        let decoded: Vec<Vec<f64>> = chromosomes
            .iter()
            .map(|c| space.decode_bits(c, cfg.bits_per_param))
            .collect::<Result<_>>()?;
        let fitnesses = eval_batch(obj, &decoded)?;
        let best = argmin(&fitnesses);
        Ok(GaPopulation {
            best_x: decoded[best].clone(),
            best_f: fitnesses[best],
            chromosomes,
            fitnesses,
            bits_per_param: cfg.bits_per_param,
            p_crossover: cfg.p_crossover,
            p_mutation,
            elite: cfg.elite,
            space: space.clone(),
        })
    }
}

/// One generation: elites carry over verbatim with their stored fitness, the
/// rest of the population is rebuilt from tournament winners via crossover
/// and mutation, and only the rebuilt individuals are evaluated.
pub fn ga_generation<R: Rng>(
    pop: &mut GaPopulation,
    obj: &dyn Objective,
    rng: &mut R,
) -> Result<()> {
    let n = pop.chromosomes.len();
    let genome_len = pop.chromosomes[0].len();

    // Elites by fitness rank, earliest index first on ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pop.fitnesses[a].total_cmp(&pop.fitnesses[b]).then(a.cmp(&b)));
    let mut next_chromosomes: Vec<Vec<bool>> = Vec::with_capacity(n);
    let mut next_fitnesses: Vec<f64> = Vec::with_capacity(n);
    for &e in order.iter().take(pop.elite) {
        next_chromosomes.push(pop.chromosomes[e].clone());
        next_fitnesses.push(pop.fitnesses[e]);
    }

    let mut fresh: Vec<Vec<bool>> = Vec::with_capacity(n - pop.elite);
    while fresh.len() < n - pop.elite {
        let p1 = tournament2(&pop.fitnesses, rng);
        let p2 = tournament2(&pop.fitnesses, rng);
        let mut c1 = pop.chromosomes[p1].clone();
        let mut c2 = pop.chromosomes[p2].clone();
        if rng.random::<f64>() < pop.p_crossover {
            let cut = rng.random_range(1..genome_len);
            for k in cut..genome_len {
                std::mem::swap(&mut c1[k], &mut c2[k]);
            }
        }
        for child in [&mut c1, &mut c2] {
            for bit in child.iter_mut() {
                if rng.random_bool(pop.p_mutation) {
                    *bit = !*bit;
                }
            }
        }
        fresh.push(c1);
        if fresh.len() < n - pop.elite {
            fresh.push(c2);
        }
    }

    let decoded: Vec<Vec<f64>> = fresh
        .iter()
        .map(|c| pop.space.decode_bits(c, pop.bits_per_param))
        .collect::<Result<_>>()?;
    let fitnesses = eval_batch(obj, &decoded)?;
    for ((c, x), f) in fresh.into_iter().zip(decoded).zip(fitnesses) {
        if f < pop.best_f {
            pop.best_f = f;
            pop.best_x = x;
        }
        next_chromosomes.push(c);
        next_fitnesses.push(f);
    }
    pop.chromosomes = next_chromosomes;
    pop.fitnesses = next_fitnesses;
    Ok(())
}
