//! Which parameters can the data actually pin down? Log-space phase
//! sensitivities per parameter, and an SVD of the stacked sensitivity
//! Jacobian to expose well- and ill-determined directions.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::forward::phase_signal;
use crate::objective::FitProblem;

/// Default logarithmic step for the central difference.
pub const DEFAULT_REL_STEP: f64 = 0.01;

/// Phase sensitivity of one parameter across every dataset frequency, in
/// degrees of phase per unit change of ln(parameter). Frequencies from all
/// datasets are concatenated in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub param: String,
    pub freqs: Vec<f64>,
    pub s: Vec<f64>,
}

impl SensitivityCurve {
    /// Largest absolute sensitivity over the whole frequency range.
    pub fn max_abs(&self) -> f64 {
        self.s.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Singular spectrum of the sensitivity Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub params: Vec<String>,
    /// Sorted non-increasing, all non-negative.
    pub singular_values: Vec<f64>,
    /// Right singular vectors, one parameter-space direction per singular
    /// value, matching the order of `singular_values`.
    pub directions: Vec<Vec<f64>>,
    /// Largest over smallest singular value; infinite when the smallest is
    /// zero.
    pub condition_number: f64,
    /// True when the Jacobian vanished identically.
    pub degenerate: bool,
}

/// Central-difference log-derivative of the phase signal with respect to
/// one named parameter, all others held at their stack values:
/// S(f) = [phi(p e^{+d}) - phi(p e^{-d})] / (2 d).
///
/// A name with no binding into the stack has no influence, so its curve is
/// identically zero.
pub fn sensitivity(problem: &FitProblem, param: &str, rel_step: f64) -> Result<SensitivityCurve> {
    if !(rel_step > 0.0 && rel_step.is_finite()) {
        return Err(CoreError::InvalidParam(format!(
            "rel_step must be positive and finite, got {rel_step}"
        )));
    }
    let freqs: Vec<f64> = problem
        .datasets()
        .iter()
        .flat_map(|d| d.grid.freqs().iter().copied())
        .collect();
    let Some(target) = problem.binding().target(param) else {
        return Ok(SensitivityCurve {
            param: param.to_string(),
            s: vec![0.0; freqs.len()],
            freqs,
        });
    };
    let nominal = problem.stack().read_field(target)?;
    if !(nominal > 0.0) {
        return Err(CoreError::NonPositiveValue {
            name: param.to_string(),
            value: nominal,
        });
    }
    let up = problem.stack().with_field(target, nominal * rel_step.exp())?;
    let down = problem.stack().with_field(target, nominal * (-rel_step).exp())?;
    let mut s = Vec::with_capacity(freqs.len());
    for dataset in problem.datasets() {
        let hi = phase_signal(&up, dataset.spot, &dataset.grid, problem.quad())?;
        let lo = phase_signal(&down, dataset.spot, &dataset.grid, problem.quad())?;
        s.extend(
            hi.iter()
                .zip(&lo)
                .map(|(h, l)| (h - l) / (2.0 * rel_step)),
        );
    }
    Ok(SensitivityCurve {
        param: param.to_string(),
        freqs,
        s,
    })
}

/// Builds the report from an explicit Jacobian whose column `j` is the
/// sensitivity of parameter `params[j]` at every measured frequency.
pub fn report_from_jacobian(j: DMatrix<f64>, params: Vec<String>) -> IdentifiabilityReport {
    let frobenius_sq: f64 = j.iter().map(|v| v * v).sum();
    if frobenius_sq == 0.0 {
        let k = params.len();
        return IdentifiabilityReport {
            singular_values: vec![0.0; k],
            directions: vec![vec![0.0; k]; k],
            condition_number: f64::INFINITY,
            degenerate: true,
            params,
        };
    }
    let k = j.ncols();
    let svd = j.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let directions: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| v_t.row(i).iter().copied().collect())
        .collect();
    let smallest = *singular_values.last().expect("at least one parameter");
    let condition_number = if smallest > 0.0 {
        singular_values[0] / smallest
    } else {
        f64::INFINITY
    };
    IdentifiabilityReport {
        params,
        singular_values,
        directions,
        condition_number,
        degenerate: false,
    }
}

/// Sensitivity Jacobian over all datasets and the requested parameters
/// (duplicates allowed and kept), reduced to its singular spectrum.
/// Columns are computed in parallel.
pub fn identifiability_svd(problem: &FitProblem, params: &[String]) -> Result<IdentifiabilityReport> {
    if params.is_empty() {
        return Err(CoreError::InvalidConfig(
            "identifiability needs at least one parameter".into(),
        ));
    }
    let curves: Vec<SensitivityCurve> = params
        .par_iter()
        .map(|p| sensitivity(problem, p, DEFAULT_REL_STEP))
        .collect::<Result<_>>()?;
    let rows = problem.point_count();
    let j = DMatrix::from_fn(rows, params.len(), |r, c| curves[c].s[r]);
    Ok(report_from_jacobian(j, params.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{FrequencyGrid, QuadratureSpec, SpotConfig};
    use crate::objective::synthetic_problem;
    use crate::sample_model::{build_gan_si_stack, gan_si_truth};

    fn gan_si_problem() -> FitProblem {
        let (stack, space, binding) = build_gan_si_stack();
        synthetic_problem(
            &stack,
            &binding,
            &space,
            &[SpotConfig::symmetric(3.4e-6), SpotConfig::symmetric(7.4e-6)],
            &FrequencyGrid::log_spaced(1e4, 1e7, 25).unwrap(),
            QuadratureSpec::default(),
            &gan_si_truth(),
            0.0,
            1,
        )
        .unwrap()
    }

    #[test]
    fn unbound_name_has_identically_zero_curve() {
        let problem = gan_si_problem();
        let curve = sensitivity(&problem, "not_a_parameter", 0.01).unwrap();
        assert_eq!(curve.freqs.len(), 50);
        assert!(curve.s.iter().all(|&v| v == 0.0));
        assert_eq!(curve.max_abs(), 0.0);
    }

    /// Halving the log step barely moves the curve: the model is smooth in
    /// ln p and the central difference is second order.
    #[test]
    fn step_halving_is_stable() {
        let problem = gan_si_problem();
        let coarse = sensitivity(&problem, "k_Si", 0.01).unwrap();
        let fine = sensitivity(&problem, "k_Si", 0.005).unwrap();
        let scale = coarse.max_abs();
        let worst = coarse
            .s
            .iter()
            .zip(&fine.s)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst / scale < 1e-3, "relative drift {}", worst / scale);
    }

    /// Golden regression of the interface-vs-substrate sensitivity contrast
    /// on the nominal stack: the buried interface conductance moves the
    /// phase about a third as much as the substrate conductivity at its
    /// best frequency.
    #[test]
    fn buried_interface_is_least_sensitive() {
        let problem = gan_si_problem();
        let names = ["G1", "k_GaN", "C_GaN", "k_AlGaN", "k_Si", "G2"];
        let maxima: Vec<f64> = names
            .iter()
            .map(|n| sensitivity(&problem, n, 0.01).unwrap().max_abs())
            .collect();
        for (n, m) in names.iter().zip(&maxima) {
            println!("max |S_{n}| = {m}");
        }
        let ratio = maxima[5] / maxima[4];
        assert!(
            (0.25..0.45).contains(&ratio),
            "sensitivity ratio drifted to {ratio}"
        );
    }

    #[test]
    fn duplicate_columns_are_rank_deficient() {
        let problem = gan_si_problem();
        let report =
            identifiability_svd(&problem, &["k_Si".into(), "k_Si".into()]).unwrap();
        assert_eq!(report.singular_values.len(), 2);
        assert!(report.singular_values[1] < 1e-10);
        assert!(report.condition_number > 1e10);
    }

    #[test]
    fn orthogonal_columns_recover_column_norms() {
        let j = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 4.0, 0.0, 0.0]);
        let report = report_from_jacobian(j, vec!["a".into(), "b".into()]);
        assert!((report.singular_values[0] - 4.0).abs() < 1e-10);
        assert!((report.singular_values[1] - 3.0).abs() < 1e-10);
        assert!(!report.degenerate);
    }

    #[test]
    fn zero_jacobian_is_flagged() {
        let j = DMatrix::zeros(4, 2);
        let report = report_from_jacobian(j, vec!["a".into(), "b".into()]);
        assert!(report.degenerate);
        assert!(report.singular_values.iter().all(|&s| s == 0.0));
        assert!(report.condition_number.is_infinite());
    }

    /// Energy conservation and orthonormality of the five-parameter
    /// spectrum on the nominal stack.
    #[test]
    fn spectrum_conserves_energy_and_directions_are_orthonormal() {
        let problem = gan_si_problem();
        let params: Vec<String> = ["G1", "k_GaN", "C_GaN", "k_AlGaN", "k_Si"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let report = identifiability_svd(&problem, &params).unwrap();
        assert_eq!(report.singular_values.len(), 5);
        for pair in report.singular_values.windows(2) {
            assert!(pair[0] >= pair[1]);
        }
        let curves: Vec<SensitivityCurve> = params
            .iter()
            .map(|p| sensitivity(&problem, p, DEFAULT_REL_STEP).unwrap())
            .collect();
        let frob_sq: f64 = curves.iter().flat_map(|c| &c.s).map(|v| v * v).sum();
        let sum_sq: f64 = report.singular_values.iter().map(|s| s * s).sum();
        assert!(((frob_sq - sum_sq) / frob_sq).abs() < 1e-8);
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = report.directions[i]
                    .iter()
                    .zip(&report.directions[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "V[{i}] . V[{j}] = {dot}");
            }
        }
    }
}
