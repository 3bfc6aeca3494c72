//! Closed-form benchmark landscapes and the dense-grid oracle that certifies
//! their global minima.
//!
//! Two two-dimensional surfaces are provided: a separable multimodal product
//! of axis sines (`eval_y`) and a radially symmetric ripple (`eval_z`). Both
//! are cheap enough to enumerate exhaustively, which is what makes them
//! usable as ground truth for optimizer comparisons.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::param_space::{ParamDef, ParameterSpace, Scale};

/// Multimodal benchmark surface: x1*sin(4*pi*x1) + x2*sin(20*pi*x2).
///
/// Search box [-3.0, 12.1] x [4.1, 5.8]; the global minimum sits near
/// (11.8755, 5.77504) at about -17.65.
pub fn eval_y(x1: f64, x2: f64) -> f64 {
    use std::f64::consts::PI;
    x1 * (4.0 * PI * x1).sin() + x2 * (20.0 * PI * x2).sin()
}

/// Radially symmetric ripple benchmark with global minimum -1 at the origin
/// and a secondary ring minimum of about -0.6772 at radius 2.83.
pub fn eval_z(x1: f64, x2: f64) -> f64 {
    let r2 = x1 * x1 + x2 * x2;
    let s = r2.sqrt().sin();
    (s * s - 0.5) / (1.0 + 0.001 * r2 * r2 * r2).powi(2) - 0.5
}

fn eval_y_slice(v: &[f64]) -> f64 {
    eval_y(v[0], v[1])
}

fn eval_z_slice(v: &[f64]) -> f64 {
    eval_z(v[0], v[1])
}

/// An analytic test surface with its search box and, when known, the
/// certified global minimum.
#[derive(Clone)]
pub struct BenchmarkProblem {
    pub evaluator: fn(&[f64]) -> f64,
    pub bounds: Vec<(f64, f64)>,
    pub known_min: Option<(Vec<f64>, f64)>,
}

/// The sine-product surface on its documented search box.
pub fn y_problem() -> BenchmarkProblem {
    BenchmarkProblem {
        evaluator: eval_y_slice,
        bounds: vec![(-3.0, 12.1), (4.1, 5.8)],
        known_min: Some((vec![11.875, 5.775], -17.65)),
    }
}

/// The ripple surface on [-hw, hw]^2.
pub fn z_problem(half_width: f64) -> BenchmarkProblem {
    BenchmarkProblem {
        evaluator: eval_z_slice,
        bounds: vec![(-half_width, half_width), (-half_width, half_width)],
        known_min: Some((vec![0.0, 0.0], -1.0)),
    }
}

/// Linear-scale search space matching a benchmark's box, for running the
/// optimizers on it.
pub fn benchmark_space(problem: &BenchmarkProblem) -> ParameterSpace {
    let defs = problem
        .bounds
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| ParamDef::fit(format!("x{}", i + 1), lo, hi, Scale::Linear))
        .collect();
    ParameterSpace::new(defs).expect("benchmark boxes are valid")
}

/// Exhaustive minimum over the inclusive uniform `n_per_axis` x `n_per_axis`
/// grid. Streams the evaluation (the grid is never materialized) in parallel
/// row stripes; ties resolve to the smallest row-major linear index
/// regardless of scheduling.
pub fn grid_enumerate(problem: &BenchmarkProblem, n_per_axis: usize) -> Result<(Vec<f64>, f64)> {
    if problem.bounds.len() != 2 {
        return Err(CoreError::InvalidConfig(format!(
            "grid enumeration is two-dimensional, got {} axes",
            problem.bounds.len()
        )));
    }
    if n_per_axis < 2 {
        return Err(CoreError::InvalidConfig(format!(
            "need at least 2 points per axis, got {n_per_axis}"
        )));
    }
    let (lo0, hi0) = problem.bounds[0];
    let (lo1, hi1) = problem.bounds[1];
    let n = n_per_axis;
    let step0 = (hi0 - lo0) / (n - 1) as f64;
    let step1 = (hi1 - lo1) / (n - 1) as f64;
    let f = problem.evaluator;

    let combine = |a: (f64, usize), b: (f64, usize)| -> (f64, usize) {
        if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let (best_val, best_idx) = (0..n)
        .into_par_iter()
        .map(|i| {
            let x0 = lo0 + step0 * i as f64;
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..n {
                let x1 = lo1 + step1 * j as f64;
                let v = f(&[x0, x1]);
                if v < best.0 {
                    best = (v, i * n + j);
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, usize::MAX), combine);

    let (i, j) = (best_idx / n, best_idx % n);
    Ok((
        vec![lo0 + step0 * i as f64, lo1 + step1 * j as f64],
        best_val,
    ))
}

/// A copy of `problem` restricted to a box of the given half-widths around
/// `center`, clipped to the original bounds. Used to certify a reported
/// minimum with a locally denser grid.
pub fn local_box(
    problem: &BenchmarkProblem,
    center: &[f64],
    half_widths: &[f64],
) -> Result<BenchmarkProblem> {
    if center.len() != problem.bounds.len() || half_widths.len() != problem.bounds.len() {
        return Err(CoreError::DimensionMismatch {
            expected: problem.bounds.len(),
            got: center.len().min(half_widths.len()),
        });
    }
    let bounds = problem
        .bounds
        .iter()
        .zip(center.iter().zip(half_widths))
        .map(|(&(lo, hi), (&c, &w))| ((c - w).max(lo), (c + w).min(hi)))
        .collect::<Vec<_>>();
    if bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
        return Err(CoreError::InvalidConfig(
            "local certification box is empty".into(),
        ));
    }
    Ok(BenchmarkProblem {
        evaluator: problem.evaluator,
        bounds,
        known_min: None,
    })
}
