//! Shared fixtures for the integration suites: the standard film-stack
//! problem at campaign quadrature and an independent dense-trapezoid
//! reference for the Hankel integral.
#![allow(dead_code)]

use fdtrfit_core::forward::{fold_impedance, FrequencyGrid, QuadratureSpec, SpotConfig};
use fdtrfit_core::objective::{synthetic_problem, FitProblem};
use fdtrfit_core::sample_model::{build_gan_si_stack, gan_si_truth, SampleStack};

/// Quadrature used by the shipped campaign config: accurate to well below
/// the 0.5 degree noise floor at a fraction of the default cost.
pub fn campaign_quad() -> QuadratureSpec {
    QuadratureSpec {
        node_count: 64,
        ..QuadratureSpec::default()
    }
}

pub fn standard_spots() -> [SpotConfig; 2] {
    [SpotConfig::symmetric(3.4e-6), SpotConfig::symmetric(7.4e-6)]
}

pub fn standard_grid() -> FrequencyGrid {
    FrequencyGrid::log_spaced(1e4, 1e7, 25).expect("valid grid")
}

/// Two-spot film-stack problem synthesized at the documented truth.
pub fn gan_si_problem(noise_sigma_deg: f64, seed: u64) -> FitProblem {
    let (stack, space, binding) = build_gan_si_stack();
    synthetic_problem(
        &stack,
        &binding,
        &space,
        &standard_spots(),
        &standard_grid(),
        campaign_quad(),
        &gan_si_truth(),
        noise_sigma_deg,
        seed,
    )
    .expect("synthesis succeeds")
}

/// Dense-trapezoid reference for the spot-weighted Hankel integral,
/// sharing only the layer-recursion kernel with the production path. The
/// domain and Gaussian kernel follow the model definition:
/// [0, factor / min(r_pump, r_probe)] with weight lam * exp(-a lam^2),
/// a = (r_pump^2 + r_probe^2) / 8.
pub fn trapezoid_phase(
    stack: &SampleStack,
    spot: SpotConfig,
    freqs: &[f64],
    n_nodes: usize,
    lambda_max_factor: f64,
) -> Vec<f64> {
    let lambda_max = lambda_max_factor / spot.r_pump.min(spot.r_probe);
    let kernel_a = (spot.r_pump * spot.r_pump + spot.r_probe * spot.r_probe) / 8.0;
    let dl = lambda_max / (n_nodes - 1) as f64;
    freqs
        .iter()
        .map(|&f| {
            let omega = 2.0 * std::f64::consts::PI * f;
            let mut re = 0.0;
            let mut im = 0.0;
            for i in 0..n_nodes {
                let lam = dl * i as f64;
                let w = lam * (-kernel_a * lam * lam).exp();
                let z = fold_impedance(stack, lam, omega);
                let end = i == 0 || i == n_nodes - 1;
                let tw = if end { 0.5 * dl } else { dl };
                re += tw * w * z.re;
                im += tw * w * z.im;
            }
            im.atan2(re).to_degrees()
        })
        .collect()
}
