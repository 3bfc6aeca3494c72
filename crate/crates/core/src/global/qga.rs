//! Quantum-inspired genetic algorithm: each bit is a two-amplitude qubit,
//! generations measure the qubits into classical bit strings, and rotation
//! gates steer the amplitudes toward the best string seen so far.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::global::eval_batch;
use crate::objective::Objective;
use crate::param_space::ParameterSpace;

/// Fitness-ratio ceiling for the adaptive rotation angle.
const ANGLE_RATIO_CAP: f64 = 10.0;
/// Floor on |best fitness| when forming the fitness ratio.
const BEST_FLOOR: f64 = 1e-12;

/// Quantum GA hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QgaConfig {
    pub population: usize,
    pub bits_per_param: usize,
    /// Base rotation angle in radians.
    pub theta: f64,
}

impl Default for QgaConfig {
    fn default() -> Self {
        QgaConfig {
            population: 40,
            bits_per_param: 20,
            theta: 0.01 * PI,
        }
    }
}

/// Population of qubit registers, advanced in place by [`qga_generation`].
/// `best_f` starts at infinity; the first generation's measurements seed it.
#[derive(Debug, Clone)]
pub struct QuantumPopulation {
    /// One (alpha, beta) amplitude pair per bit per individual.
    pub qubits: Vec<Vec<(f64, f64)>>,
    pub theta: f64,
    pub bits_per_param: usize,
    pub best_bits: Vec<bool>,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub space: ParameterSpace,
}

impl QuantumPopulation {
    /// Every qubit starts in the balanced superposition (1/sqrt2, 1/sqrt2),
    /// so the first measurement draws each bit fairly. No evaluations yet.
    pub fn init(cfg: &QgaConfig, space: &ParameterSpace) -> Result<Self> {
        if cfg.population == 0 {
            return Err(CoreError::InvalidConfig(
                "population must be at least 1".into(),
            ));
        }
        if cfg.bits_per_param == 0 || cfg.bits_per_param > 63 {
            return Err(CoreError::InvalidConfig(
                "bits_per_param must be between 1 and 63".into(),
            ));
        }
        if !(cfg.theta > 0.0 && cfg.theta.is_finite()) {
            return Err(CoreError::InvalidConfig(
                "rotation angle must be positive and finite".into(),
            ));
        }
        let genome_len = space.dim() * cfg.bits_per_param;
        Ok(QuantumPopulation {
            qubits: vec![vec![(FRAC_1_SQRT_2, FRAC_1_SQRT_2); genome_len]; cfg.population],
            theta: cfg.theta,
            bits_per_param: cfg.bits_per_param,
            best_bits: Vec::new(),
            best_x: Vec::new(),
            best_f: f64::INFINITY,
            space: space.clone(),
        })
    }
}

/// Plane rotation of one amplitude pair by `t` radians. Orthogonal, so the
/// norm survives any number of applications.
pub fn rotate_qubit(q: (f64, f64), t: f64) -> (f64, f64) {
    let (alpha, beta) = q;
    let (sin, cos) = t.sin_cos();
    (alpha * cos - beta * sin, alpha * sin + beta * cos)
}

/// Sign of the rotation that grows the amplitude of `target_bit`: +1 rotates
/// (alpha, beta) toward the beta axis, -1 toward the alpha axis, with the
/// quadrant of the pair deciding which way around.
pub fn steer_direction(alpha: f64, beta: f64, target_bit: bool) -> f64 {
    let same_sign = alpha * beta >= 0.0;
    match (target_bit, same_sign) {
        (true, true) => 1.0,
        (true, false) => -1.0,
        (false, true) => -1.0,
        (false, false) => 1.0,
    }
}

/// Rotation angle for an individual with fitness `f` against the population
/// best: theta scaled by the fitness ratio, capped at ten.
pub fn adaptive_angle(theta: f64, f: f64, f_best: f64) -> f64 {
    let ratio = (f.abs() / f_best.abs().max(BEST_FLOOR)).min(ANGLE_RATIO_CAP);
    theta * ratio
}

/// One generation: measure every register (P(bit = 1) is beta squared),
/// evaluate the measured candidates, refresh the best string, then rotate
/// each register toward the best string. Bits that already match the best
/// are left alone.
pub fn qga_generation<R: Rng>(
    pop: &mut QuantumPopulation,
    obj: &dyn Objective,
    rng: &mut R,
) -> Result<()> {
    let measured: Vec<Vec<bool>> = pop
        .qubits
        .iter()
        .map(|reg| {
            reg.iter()
                .map(|&(_, beta)| rng.random::<f64>() < beta * beta)
                .collect()
        })
        .collect();
    let decoded: Vec<Vec<f64>> = measured
        .iter()
        .map(|bits| pop.space.decode_bits(bits, pop.bits_per_param))
        .collect::<Result<_>>()?;
    let fitnesses = eval_batch(obj, &decoded)?;

    for (i, &f) in fitnesses.iter().enumerate() {
        if f < pop.best_f {
            pop.best_f = f;
            pop.best_bits = measured[i].clone();
            pop.best_x = decoded[i].clone();
        }
    }

    for (reg, (bits, &f)) in pop
        .qubits
        .iter_mut()
        .zip(measured.iter().zip(&fitnesses))
    {
        let angle = adaptive_angle(pop.theta, f, pop.best_f);
        for (q, (&bit, &best_bit)) in reg.iter_mut().zip(bits.iter().zip(&pop.best_bits)) {
            if bit == best_bit {
                continue;
            }
            let s = steer_direction(q.0, q.1, best_bit);
            *q = rotate_qubit(*q, s * angle);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_angle_is_identity() {
        let q = (0.3, (1.0f64 - 0.09).sqrt());
        assert_eq!(rotate_qubit(q, 0.0), q);
    }

    #[test]
    fn quarter_turn_swaps_basis_states() {
        let (alpha, beta) = rotate_qubit((1.0, 0.0), PI / 2.0);
        assert!(alpha.abs() < 1e-15);
        assert!((beta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn best_individual_gets_base_angle() {
        let t = adaptive_angle(0.01 * PI, -17.65, -17.65);
        assert!((t - 0.01 * PI).abs() < 1e-15);
    }

    #[test]
    fn angle_ratio_caps_at_ten() {
        let theta = 0.01 * PI;
        assert_eq!(adaptive_angle(theta, 5.0, 0.0), 10.0 * theta);
        assert_eq!(adaptive_angle(theta, 100.0, 1.0), 10.0 * theta);
        assert!(adaptive_angle(theta, 0.5, 1.0) < theta);
    }

    /// A small rotation in the steered direction grows the amplitude of the
    /// target bit in every sign quadrant.
    #[test]
    fn steering_grows_target_amplitude() {
        let quadrants = [(0.6, 0.8), (-0.6, 0.8), (0.6, -0.8), (-0.6, -0.8)];
        for &(alpha, beta) in &quadrants {
            for target in [false, true] {
                let s = steer_direction(alpha, beta, target);
                let (a2, b2) = rotate_qubit((alpha, beta), s * 0.01);
                if target {
                    assert!(b2.abs() > beta.abs(), "({alpha}, {beta}) toward 1");
                } else {
                    assert!(a2.abs() > alpha.abs(), "({alpha}, {beta}) toward 0");
                }
            }
        }
    }

    #[test]
    fn norm_survives_many_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut q = (FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        for _ in 0..10_000 {
            q = rotate_qubit(q, rng.random_range(-PI..PI));
        }
        let norm = q.0 * q.0 + q.1 * q.1;
        assert!((norm - 1.0).abs() < 1e-12, "norm drifted to {norm}");
    }

    #[test]
    fn generations_keep_norms_and_make_progress() {
        use crate::param_space::{ParamDef, Scale};
        let space = ParameterSpace::new(vec![
            ParamDef::fit("a", -2.0, 2.0, Scale::Linear),
            ParamDef::fit("b", -2.0, 2.0, Scale::Linear),
        ])
        .unwrap();
        let obj = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2);
        let cfg = QgaConfig {
            population: 20,
            bits_per_param: 12,
            ..QgaConfig::default()
        };
        let mut pop = QuantumPopulation::init(&cfg, &space).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        qga_generation(&mut pop, &obj, &mut rng).unwrap();
        let first = pop.best_f;
        assert!(first.is_finite());
        for _ in 0..30 {
            qga_generation(&mut pop, &obj, &mut rng).unwrap();
        }
        assert!(pop.best_f < first);
        assert!(pop.best_f < 0.05, "best_f = {}", pop.best_f);
        for reg in &pop.qubits {
            for &(alpha, beta) in reg {
                assert!((alpha * alpha + beta * beta - 1.0).abs() < 1e-12);
            }
        }
    }
}
