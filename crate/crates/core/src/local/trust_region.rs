//! Trust-region least squares: Gauss-Newton model, dogleg step, adaptive
//! radius.
//!
//! Works on the residual vector of an objective with least-squares structure;
//! the objective value is the sum of squared residuals throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::objective::Objective;

use super::{LocalResult, LocalStatus};

/// Forward-difference step for the Jacobian, in scaled coordinates.
const JAC_STEP: f64 = 1e-6;
const DELTA0: f64 = 1.0;
const DELTA_MAX: f64 = 1e6;
const MIN_DELTA: f64 = 1e-14;
const MAX_CONSECUTIVE_REJECTS: u32 = 60;

fn residuals_finite<O: Objective + ?Sized>(obj: &O, x: &[f64]) -> Option<DVector<f64>> {
    match obj.residuals(x) {
        Ok(r) if r.iter().all(|v| v.is_finite()) && !r.is_empty() => {
            Some(DVector::from_vec(r))
        }
        _ => None,
    }
}

fn jacobian<O: Objective + ?Sized>(
    obj: &O,
    x: &DVector<f64>,
    r0: &DVector<f64>,
) -> Option<DMatrix<f64>> {
    let (m, n) = (r0.len(), x.len());
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    for col in 0..n {
        xp[col] = x[col] + JAC_STEP;
        let rp = residuals_finite(obj, xp.as_slice())?;
        xp[col] = x[col];
        if rp.len() != m {
            return None;
        }
        for row in 0..m {
            j[(row, col)] = (rp[row] - r0[row]) / JAC_STEP;
        }
    }
    Some(j)
}

/// Dogleg step within radius `delta`; returns the step and whether it ends
/// on the trust-region boundary.
fn dogleg(
    gn: Option<&DVector<f64>>,
    g_half: &DVector<f64>,
    j_g: &DVector<f64>,
    delta: f64,
) -> (DVector<f64>, bool) {
    if let Some(p) = gn {
        if p.norm() <= delta {
            return (p.clone(), false);
        }
    }
    let g_norm2 = g_half.norm_squared();
    let jg_norm2 = j_g.norm_squared();
    if jg_norm2 <= f64::MIN_POSITIVE {
        // Curvature along the gradient is numerically zero; take the full
        // boundary step downhill.
        return (-(delta / g_half.norm()) * g_half, true);
    }
    let alpha = g_norm2 / jg_norm2;
    let pu = -alpha * g_half;
    let pu_norm = pu.norm();
    if pu_norm >= delta {
        return (-(delta / g_half.norm()) * g_half, true);
    }
    let Some(pb) = gn else {
        return (pu, false);
    };
    // Walk from the Cauchy point toward the Gauss-Newton point until the
    // boundary: solve |pu + tau d|^2 = delta^2 for tau in [0, 1].
    let d = pb - &pu;
    let a = d.norm_squared();
    let b = 2.0 * pu.dot(&d);
    let c = pu_norm * pu_norm - delta * delta;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let tau = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
    (&pu + tau * d, true)
}

/// Minimizes the sum of squared residuals of `obj` from `x0`.
///
/// Stops on small gradient, small relative objective decrease, `max_iter`,
/// or persistent step failure (status `stalled`).
pub fn trust_region_lsq<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<LocalResult> {
    let mut x = DVector::from_column_slice(x0);
    let mut r = residuals_finite(obj, x0).ok_or_else(|| {
        CoreError::InvalidParam("residuals unavailable or non-finite at the starting point".into())
    })?;
    let mut f = r.norm_squared();
    let mut delta = DELTA0;
    let mut trace = vec![(0u64, f)];
    let mut status = LocalStatus::MaxIter;
    let mut iterations = 0;
    let mut rejects = 0u32;
    let mut jac: Option<(DMatrix<f64>, Option<DVector<f64>>, DVector<f64>)> = None;

    for iter in 1..=max_iter {
        if jac.is_none() {
            let Some(j) = jacobian(obj, &x, &r) else {
                status = LocalStatus::Stalled;
                break;
            };
            // Half-gradient J^T r; the objective gradient is twice this.
            let g_half = j.transpose() * &r;
            let jtj = j.transpose() * &j;
            let rhs = -&g_half;
            let gn = jtj
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .or_else(|| {
                    let n = x.len();
                    let ridge = 1e-10 * (jtj.trace() / n as f64).max(f64::MIN_POSITIVE);
                    (jtj + ridge * DMatrix::identity(n, n))
                        .cholesky()
                        .map(|ch| ch.solve(&rhs))
                });
            jac = Some((j, gn, g_half));
        }
        let (j, gn, g_half) = jac.as_ref().expect("set above");

        if 2.0 * g_half.norm() < tol {
            status = LocalStatus::Converged;
            break;
        }

        let j_g = j * g_half;
        let (p, boundary) = dogleg(gn.as_ref(), g_half, &j_g, delta);
        let predicted = f - (&r + j * &p).norm_squared();

        let xt = &x + &p;
        let accepted = match residuals_finite(obj, xt.as_slice()) {
            Some(rt) if predicted > 0.0 => {
                let ft = rt.norm_squared();
                let rho = (f - ft) / predicted;
                if rho < 0.25 {
                    delta *= 0.25;
                } else if rho > 0.75 && boundary {
                    delta = (2.0 * delta).min(DELTA_MAX);
                }
                if rho > 0.0 {
                    Some((rt, ft))
                } else {
                    None
                }
            }
            _ => {
                delta *= 0.25;
                None
            }
        };

        iterations = iter;
        match accepted {
            Some((rt, ft)) => {
                let drop = f - ft;
                x = xt;
                r = rt;
                let f_old = f;
                f = ft;
                jac = None;
                rejects = 0;
                trace.push((iter, f));
                if drop < tol * f_old.max(1e-12) {
                    status = LocalStatus::Converged;
                    break;
                }
            }
            None => {
                rejects += 1;
                trace.push((iter, f));
                if delta < MIN_DELTA || rejects >= MAX_CONSECUTIVE_REJECTS {
                    status = LocalStatus::Stalled;
                    break;
                }
            }
        }
    }

    Ok(LocalResult {
        x_final: x.as_slice().to_vec(),
        f_final: f,
        iterations,
        status,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{FrequencyGrid, QuadratureSpec, SpotConfig};
    use crate::objective::{synthetic_problem, ResidualObjective};
    use crate::sample_model::{build_gan_si_stack, gan_si_truth};

    #[test]
    fn linear_problem_solved_in_one_accepted_step() {
        // Solution (0.3, -0.2) sits inside the initial radius from x0 = 0.
        let a = [[2.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let xs = [0.3, -0.2];
        let b: Vec<f64> = a.iter().map(|row| row[0] * xs[0] + row[1] * xs[1]).collect();
        let obj = ResidualObjective(move |v: &[f64]| {
            a.iter()
                .zip(&b)
                .map(|(row, bi)| row[0] * v[0] + row[1] * v[1] - bi)
                .collect()
        });
        let res = trust_region_lsq(&obj, &[0.0, 0.0], 1e-10, 100).unwrap();
        assert_eq!(res.status, LocalStatus::Converged);
        assert_eq!(res.iterations, 1, "expected a single accepted step");
        assert!((res.x_final[0] - 0.3).abs() < 1e-8);
        assert!((res.x_final[1] + 0.2).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock_valley() {
        let obj = ResidualObjective(|v: &[f64]| {
            vec![10.0 * (v[1] - v[0] * v[0]), 1.0 - v[0]]
        });
        let res = trust_region_lsq(&obj, &[-1.2, 1.0], 1e-10, 500).unwrap();
        assert!(
            (res.x_final[0] - 1.0).abs() < 1e-8 && (res.x_final[1] - 1.0).abs() < 1e-8,
            "x = {:?} after {} iters ({:?})",
            res.x_final,
            res.iterations,
            res.status
        );
    }

    #[test]
    fn accepted_steps_strictly_decrease() {
        let obj = ResidualObjective(|v: &[f64]| {
            vec![10.0 * (v[1] - v[0] * v[0]), 1.0 - v[0]]
        });
        let res = trust_region_lsq(&obj, &[-1.2, 1.0], 1e-12, 200).unwrap();
        for pair in res.trace.windows(2) {
            assert!(pair[1].1 <= pair[0].1);
        }
        assert_eq!(
            res.f_final,
            res.trace.iter().fold(f64::INFINITY, |m, &(_, f)| m.min(f))
        );
    }

    #[test]
    fn recovers_thermal_truth_from_a_nearby_start() {
        let (stack, space, binding) = build_gan_si_stack();
        let grid = FrequencyGrid::log_spaced(1e4, 1e7, 25).unwrap();
        let spots = [SpotConfig::symmetric(3.4e-6), SpotConfig::symmetric(7.4e-6)];
        let truth = gan_si_truth();
        let problem = synthetic_problem(
            &stack,
            &binding,
            &space,
            &spots,
            &grid,
            QuadratureSpec::default(),
            &truth,
            0.0,
            0,
        )
        .unwrap();
        let mut start_phys = truth;
        for (i, p) in start_phys.iter_mut().enumerate() {
            *p *= if i % 2 == 0 { 1.05 } else { 0.95 };
        }
        let v0 = problem.space().from_physical(&start_phys).unwrap();
        let res = trust_region_lsq(&problem, &v0, 1e-14, 200).unwrap();
        let recovered = problem.space().to_physical(&res.x_final).unwrap();
        for (got, want) in recovered.iter().zip(gan_si_truth()) {
            assert!(
                ((got - want) / want).abs() < 1e-3,
                "recovered {got} vs {want}"
            );
        }
    }

    #[test]
    fn objective_without_residuals_is_an_error() {
        let scalar = |v: &[f64]| v[0] * v[0];
        assert!(trust_region_lsq(&scalar, &[1.0], 1e-6, 10).is_err());
    }

    #[test]
    fn persistent_failure_stalls() {
        // Residuals valid only at the start: every trial step fails, the
        // radius collapses, and the run reports stalled at the start point.
        let obj = ResidualObjective(|v: &[f64]| {
            if v[0] == 0.5 {
                vec![1.0, 2.0]
            } else {
                vec![f64::NAN, f64::NAN]
            }
        });
        let res = trust_region_lsq(&obj, &[0.5], 1e-6, 500).unwrap();
        assert_eq!(res.status, LocalStatus::Stalled);
        assert_eq!(res.x_final, vec![0.5]);
    }
}
