//! Quasi-Newton minimization with the BFGS inverse-Hessian update and
//! finite-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::objective::Objective;

use super::{eval_lenient, LocalResult, LocalStatus};

/// Central-difference step in scaled coordinates.
const GRAD_STEP: f64 = 1e-7;
/// Armijo sufficient-decrease coefficient.
const ARMIJO_C: f64 = 1e-4;
/// Step halvings before the line search gives up.
const MAX_HALVINGS: u32 = 40;

/// Iterate state of a BFGS run: current point, gradient, and the running
/// inverse-Hessian approximation.
#[derive(Debug, Clone)]
pub struct BfgsState {
    pub x: DVector<f64>,
    pub g: DVector<f64>,
    pub binv: DMatrix<f64>,
    pub tol: f64,
}

/// BFGS inverse-Hessian update. Returns the new approximation and whether
/// the update was skipped by the curvature guard
/// (dx . dg <= 1e-12 ||dx|| ||dg||), which keeps the matrix positive
/// definite in exact arithmetic.
pub fn bfgs_update(
    binv: &DMatrix<f64>,
    dx: &DVector<f64>,
    dg: &DVector<f64>,
) -> (DMatrix<f64>, bool) {
    let curv = dx.dot(dg);
    if !(curv > 1e-12 * dx.norm() * dg.norm()) {
        return (binv.clone(), true);
    }
    let rho = 1.0 / curv;
    let n = dx.len();
    let i = DMatrix::<f64>::identity(n, n);
    let left = &i - rho * dx * dg.transpose();
    let right = &i - rho * dg * dx.transpose();
    let mut out = &left * binv * right + rho * dx * dx.transpose();
    // The formula is symmetric; re-symmetrize to stop roundoff drift from
    // accumulating across many updates.
    out = 0.5 * (&out + out.transpose());
    (out, false)
}

fn gradient<O: Objective + ?Sized>(obj: &O, x: &DVector<f64>) -> Option<DVector<f64>> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut xp = x.clone();
    for i in 0..n {
        xp[i] = x[i] + GRAD_STEP;
        let fp = eval_lenient(obj, xp.as_slice());
        xp[i] = x[i] - GRAD_STEP;
        let fm = eval_lenient(obj, xp.as_slice());
        xp[i] = x[i];
        let gi = (fp - fm) / (2.0 * GRAD_STEP);
        if !gi.is_finite() {
            return None;
        }
        g[i] = gi;
    }
    Some(g)
}

/// Minimizes `obj` from `x0`, stopping when the gradient norm drops below
/// `eps` or after `max_iter` iterations. The best iterate seen is returned
/// even on a failed line search.
pub fn bfgs_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    eps: f64,
    max_iter: u64,
) -> Result<LocalResult> {
    let f0 = obj.eval(x0)?;
    if !f0.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "objective is {f0} at the starting point"
        )));
    }
    let n = x0.len();
    let mut state = BfgsState {
        x: DVector::from_column_slice(x0),
        g: DVector::zeros(n),
        binv: DMatrix::identity(n, n),
        tol: eps,
    };
    let mut f = f0;
    let mut trace = vec![(0u64, f0)];
    let mut status = LocalStatus::MaxIter;
    let mut iterations = 0;

    match gradient(obj, &state.x) {
        Some(g) => state.g = g,
        None => {
            return Ok(LocalResult {
                x_final: x0.to_vec(),
                f_final: f0,
                iterations: 0,
                status: LocalStatus::Stalled,
                trace,
            })
        }
    }

    for iter in 1..=max_iter {
        if state.g.norm() < state.tol {
            status = LocalStatus::Converged;
            break;
        }
        let mut dir = -(&state.binv * &state.g);
        let slope = dir.dot(&state.g);
        if !(slope < 0.0) {
            // Defensive reset: an indefinite approximation produced a
            // non-descent direction.
            state.binv = DMatrix::identity(n, n);
            dir = -state.g.clone();
        }
        let slope = dir.dot(&state.g);

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let xt = &state.x + lambda * &dir;
            let ft = eval_lenient(obj, xt.as_slice());
            if ft <= f + ARMIJO_C * lambda * slope {
                accepted = Some((xt, ft));
                break;
            }
            lambda *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            status = LocalStatus::LineSearchFailed;
            break;
        };

        let Some(g_new) = gradient(obj, &x_new) else {
            status = LocalStatus::Stalled;
            break;
        };
        let dx = &x_new - &state.x;
        let dg = &g_new - &state.g;
        let (binv_new, _skipped) = bfgs_update(&state.binv, &dx, &dg);
        state.binv = binv_new;
        state.x = x_new;
        state.g = g_new;
        f = f_new;
        iterations = iter;
        trace.push((iter, f));
    }

    // Armijo acceptance makes the trace non-increasing, so the last entry is
    // the minimum.
    let f_final = f;
    Ok(LocalResult {
        x_final: state.x.as_slice().to_vec(),
        f_final,
        iterations,
        status,
        trace,
    })
}
