//! Derivative-free simplex minimization with the standard reflect/expand/
//! contract/shrink moves.

use crate::error::{CoreError, Result};
use crate::objective::Objective;

use super::{eval_lenient, LocalResult, LocalStatus};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Relative offset of the initial simplex along each axis.
const INIT_STEP_FRAC: f64 = 0.05;
/// Absolute offset used when a starting component is exactly zero.
const INIT_STEP_ZERO: f64 = 0.00025;

/// Simplex minimization from `x0`; stops when the spread of vertex values
/// falls below `tol` or after `max_iter` iterations.
pub fn nelder_mead_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<LocalResult> {
    let n = x0.len();
    if n == 0 {
        return Err(CoreError::InvalidParam("empty starting point".into()));
    }
    let f0 = obj.eval(x0)?;
    if !f0.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "objective is {f0} at the starting point"
        )));
    }
    if max_iter == 0 {
        return Ok(LocalResult {
            x_final: x0.to_vec(),
            f_final: f0,
            iterations: 0,
            status: LocalStatus::MaxIter,
            trace: vec![(0, f0)],
        });
    }

    let mut verts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i] != 0.0 {
            INIT_STEP_FRAC * v[i]
        } else {
            INIT_STEP_ZERO
        };
        verts.push(v);
    }
    let mut fvals: Vec<f64> = verts.iter().map(|v| eval_lenient(obj, v)).collect();
    fvals[0] = f0;

    let mut trace = vec![(0u64, f0)];
    let mut status = LocalStatus::MaxIter;
    let mut iterations = 0;

    for iter in 1..=max_iter {
        // Ascending by value; ties keep insertion order for determinism.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        if fvals[worst] - fvals[best] < tol {
            status = LocalStatus::Converged;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| {
                order[..n].iter().map(|&vi| verts[vi][d]).sum::<f64>() / n as f64
            })
            .collect();
        let blend = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&verts[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = blend(REFLECT);
        let fr = eval_lenient(obj, &xr);
        if fr < fvals[best] {
            let xe = blend(EXPAND);
            let fe = eval_lenient(obj, &xe);
            if fe < fr {
                verts[worst] = xe;
                fvals[worst] = fe;
            } else {
                verts[worst] = xr;
                fvals[worst] = fr;
            }
        } else if fr < fvals[second_worst] {
            verts[worst] = xr;
            fvals[worst] = fr;
        } else if fr < fvals[worst] {
            // Outside contraction.
            let xc = blend(REFLECT * CONTRACT);
            let fc = eval_lenient(obj, &xc);
            if fc <= fr {
                verts[worst] = xc;
                fvals[worst] = fc;
            } else {
                shrink(obj, &mut verts, &mut fvals, best);
            }
        } else {
            // Inside contraction.
            let xcc = blend(-CONTRACT);
            let fcc = eval_lenient(obj, &xcc);
            if fcc < fvals[worst] {
                verts[worst] = xcc;
                fvals[worst] = fcc;
            } else {
                shrink(obj, &mut verts, &mut fvals, best);
            }
        }

        iterations = iter;
        let best_f = fvals.iter().fold(f64::INFINITY, |m, &f| m.min(f));
        trace.push((iter, best_f));
    }

    let (bi, bf) = fvals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &f)| (i, f))
        .expect("simplex non-empty");
    Ok(LocalResult {
        x_final: verts[bi].clone(),
        f_final: bf,
        iterations,
        status,
        trace,
    })
}

fn shrink<O: Objective + ?Sized>(
    obj: &O,
    verts: &mut [Vec<f64>],
    fvals: &mut [f64],
    best: usize,
) {
    let anchor = verts[best].clone();
    for i in 0..verts.len() {
        if i == best {
            continue;
        }
        for d in 0..anchor.len() {
            verts[i][d] = anchor[d] + SHRINK * (verts[i][d] - anchor[d]);
        }
        fvals[i] = eval_lenient(obj, &verts[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::eval_z;

    fn sphere(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    #[test]
    fn sphere_from_ones() {
        let r = nelder_mead_minimize(&sphere, &[1.0, 1.0], 1e-6, 1000).unwrap();
        assert_eq!(r.status, LocalStatus::Converged);
        assert!(r.f_final < 1e-6, "f = {}", r.f_final);
    }

    #[test]
    fn ripple_global_basin() {
        let z = |v: &[f64]| eval_z(v[0], v[1]);
        let r = nelder_mead_minimize(&z, &[1.0, 1.0], 1e-6, 1000).unwrap();
        assert!((r.f_final - (-1.0)).abs() < 1e-4, "f = {}", r.f_final);
    }

    #[test]
    fn zero_iteration_contract() {
        let r = nelder_mead_minimize(&sphere, &[0.4, -0.2], 1e-6, 0).unwrap();
        assert_eq!(r.status, LocalStatus::MaxIter);
        assert_eq!(r.x_final, vec![0.4, -0.2]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn zero_component_gets_absolute_offset() {
        // Starting exactly at the optimum of a sharp quadratic: the absolute
        // fallback offset must still give the simplex nonzero volume, or the
        // search would be stuck at a degenerate simplex forever.
        let r = nelder_mead_minimize(&sphere, &[0.0, 0.0], 1e-12, 50).unwrap();
        assert!(r.f_final <= 2.0 * (INIT_STEP_ZERO * INIT_STEP_ZERO));
    }

    #[test]
    fn best_trace_non_increasing() {
        let z = |v: &[f64]| eval_z(v[0], v[1]);
        let r = nelder_mead_minimize(&z, &[0.7, -0.4], 1e-8, 500).unwrap();
        for pair in r.trace.windows(2) {
            assert!(pair[1].1 <= pair[0].1);
        }
    }
}
