//! Timings for the paths that dominate campaign cost: the forward phase
//! model, the full least-squares objective, and one optimizer generation.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};

use fdtrfit_core::benchmarks::{grid_enumerate, y_problem};
use fdtrfit_core::forward::{phase_signal, FrequencyGrid, QuadratureSpec, SpotConfig};
use fdtrfit_core::objective::{synthetic_problem, FitProblem, Objective};
use fdtrfit_core::sample_model::{build_gan_si_stack, gan_si_truth};
use fdtrfit_core::{run_global, Budget, GlobalAlgo};

fn campaign_quad() -> QuadratureSpec {
    QuadratureSpec {
        node_count: 64,
        ..QuadratureSpec::default()
    }
}

fn gan_si_fixture() -> FitProblem {
    let (stack, space, binding) = build_gan_si_stack();
    synthetic_problem(
        &stack,
        &binding,
        &space,
        &[
            SpotConfig::symmetric(3.4e-6),
            SpotConfig::symmetric(7.4e-6),
        ],
        &FrequencyGrid::log_spaced(1e4, 1e7, 25).unwrap(),
        campaign_quad(),
        &gan_si_truth(),
        0.5,
        1,
    )
    .unwrap()
}

fn bench_forward(c: &mut Criterion) {
    let (stack, _, _) = build_gan_si_stack();
    let grid = FrequencyGrid::log_spaced(1e4, 1e7, 25).unwrap();
    let spot = SpotConfig::symmetric(3.4e-6);
    let quad = campaign_quad();
    c.bench_function("phase_signal_25f_64n", |b| {
        b.iter(|| phase_signal(&stack, spot, &grid, quad).unwrap())
    });
}

fn bench_objective(c: &mut Criterion) {
    let problem = gan_si_fixture();
    let x = vec![0.5; 5];
    c.bench_function("fitness_2spots_50pts", |b| {
        b.iter(|| problem.eval(&x).unwrap())
    });
}

fn bench_pso_generation(c: &mut Criterion) {
    let problem = gan_si_fixture();
    let space = problem.space().clone();
    // 10 generations of 30 particles plus the init batch.
    let budget = Budget::evals(30 * 11);
    c.bench_function("pso_10_generations", |b| {
        b.iter(|| run_global(&GlobalAlgo::pso(), &problem, &space, &budget, 7).unwrap())
    });
}

fn bench_grid(c: &mut Criterion) {
    let y = y_problem();
    c.bench_function("grid_enumerate_200x200", |b| {
        b.iter(|| grid_enumerate(&y, 200).unwrap())
    });
}

fn config() -> Criterion {
    Criterion::default()
        .sample_size(10)
        .measurement_time(Duration::from_secs(2))
        .warm_up_time(Duration::from_millis(300))
}

criterion_group! {
    name = benches;
    config = config();
    targets = bench_forward, bench_objective, bench_pso_generation, bench_grid
}
criterion_main!(benches);
