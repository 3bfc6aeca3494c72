//! Campaign bookkeeping: per-trial records, summary statistics, and the
//! on-disk report formats (trials.csv, summary.json, per-parameter
//! histogram CSVs, optional per-trial traces).
//!
//! Floats are written through Rust's shortest round-trip formatting, so a
//! deterministic campaign produces byte-identical files on a rerun.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Default number of histogram bins.
pub const DEFAULT_HIST_BINS: usize = 20;

/// One optimizer run inside a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: String,
    pub trial: u64,
    pub seed: u64,
    /// NaN when the trial failed.
    pub f_final: f64,
    pub evals: u64,
    /// Termination reason (global), local status (local or hybrid stage
    /// two), or "failed" when the trial errored out.
    pub status: String,
    /// Evaluations spent in the global stage at hand-off; hybrids only.
    pub switch_evals: Option<u64>,
    /// Best parameters in physical units, clamped into bounds.
    pub params: Vec<f64>,
    /// True when clamping moved the reported point materially.
    pub clamped: bool,
}

/// Success test applied per trial: fitness target, per-parameter bands in
/// physical units, or both. Failed trials never succeed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SuccessRule {
    pub target_fitness: Option<f64>,
    /// One (lower, upper) band per reported parameter.
    pub param_bands: Option<Vec<(f64, f64)>>,
}

impl SuccessRule {
    pub fn trial_succeeds(&self, rec: &TrialRecord) -> bool {
        if rec.status == "failed" || !rec.f_final.is_finite() {
            return false;
        }
        if let Some(t) = self.target_fitness {
            if !(rec.f_final <= t) {
                return false;
            }
        }
        if let Some(bands) = &self.param_bands {
            if bands.len() != rec.params.len() {
                return false;
            }
            for (p, (lo, hi)) in rec.params.iter().zip(bands) {
                if !(p >= lo && p <= hi) {
                    return false;
                }
            }
        }
        true
    }
}

/// Fraction of records passing the rule; exact ratio of counts.
pub fn success_rate(records: &[TrialRecord], rule: &SuccessRule) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let successes = records.iter().filter(|r| rule.trial_succeeds(r)).count();
    successes as f64 / records.len() as f64
}

/// Seven-number summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub p2_5: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p97_5: f64,
    pub max: f64,
}

/// Linear-interpolation quantile (the common "type 7" estimator) on
/// pre-sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

impl Quantiles {
    /// None on an empty sample. Non-finite values are rejected by callers
    /// before this point (failed trials are excluded).
    pub fn from_values(values: &[f64]) -> Option<Quantiles> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Quantiles {
            min: sorted[0],
            p2_5: quantile_sorted(&sorted, 0.025),
            p25: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            p75: quantile_sorted(&sorted, 0.75),
            p97_5: quantile_sorted(&sorted, 0.975),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Histogram over the observed range: equal-width bins, right-open except
/// the last, which closes on the maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamHistogram {
    pub algorithm: String,
    pub param: String,
    /// Bin boundaries, one more than `counts`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl ParamHistogram {
    /// Bins `values` into `bins` equal-width cells spanning the observed
    /// min..max. A zero-spread sample collapses to a single closed bin.
    pub fn build(algorithm: &str, param: &str, values: &[f64], bins: usize) -> ParamHistogram {
        assert!(bins >= 1, "histogram needs at least one bin");
        if values.is_empty() {
            return ParamHistogram {
                algorithm: algorithm.into(),
                param: param.into(),
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            return ParamHistogram {
                algorithm: algorithm.into(),
                param: param.into(),
                edges: vec![min, max],
                counts: vec![values.len() as u64],
            };
        }
        let width = (max - min) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { max } else { min + width * i as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = (((v - min) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        ParamHistogram {
            algorithm: algorithm.into(),
            param: param.into(),
            edges,
            counts,
        }
    }
}

/// Per-algorithm rollup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub n_trials: u64,
    pub n_failed: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// Over non-failed trials; None when every trial failed.
    pub f_quantiles: Option<Quantiles>,
}

/// Everything a campaign produced. Serializing the report yields the
/// summary document; the raw trial rows live in trials.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub campaign: String,
    pub master_seed: u64,
    /// False when any stage ran under a wall-clock budget.
    pub deterministic: bool,
    pub param_names: Vec<String>,
    pub summaries: Vec<AlgorithmSummary>,
    pub histograms: Vec<ParamHistogram>,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
    /// Optional per-trial convergence traces as (algorithm, trial,
    /// (evaluations, best fitness) pairs).
    #[serde(skip)]
    pub traces: Vec<(String, u64, Vec<(u64, f64)>)>,
}

impl TrialReport {
    /// Trials of one algorithm, in recorded order.
    pub fn trials_for(&self, algorithm: &str) -> Vec<&TrialRecord> {
        self.trials.iter().filter(|t| t.algorithm == algorithm).collect()
    }

    pub fn summary_for(&self, algorithm: &str) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == algorithm)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes trials.csv, summary.json, one hist_<param>.csv per parameter,
/// and trace_<algorithm>_<trial>.csv for any captured traces.
pub fn export_report(report: &TrialReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CoreError::io(format!("creating {}", dir.display()), e))?;

    let mut csv = String::from("algorithm,trial,seed,f_final,evals,status,switch_evals,clamped");
    for name in &report.param_names {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for t in &report.trials {
        let _ = write!(
            csv,
            "{},{},{},{},{},{},{},{}",
            t.algorithm,
            t.trial,
            t.seed,
            fmt_f64(t.f_final),
            t.evals,
            t.status,
            t.switch_evals.map(|v| v.to_string()).unwrap_or_default(),
            t.clamped,
        );
        for p in &t.params {
            csv.push(',');
            csv.push_str(&fmt_f64(*p));
        }
        csv.push('\n');
    }
    let trials_path = dir.join("trials.csv");
    fs::write(&trials_path, csv)
        .map_err(|e| CoreError::io(format!("writing {}", trials_path.display()), e))?;

    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CoreError::InvalidConfig(format!("serializing summary: {e}")))?;
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, json)
        .map_err(|e| CoreError::io(format!("writing {}", summary_path.display()), e))?;

    for name in &report.param_names {
        let mut hist_csv = String::from("algorithm,bin_lo,bin_hi,count\n");
        for h in report.histograms.iter().filter(|h| &h.param == name) {
            for (i, &c) in h.counts.iter().enumerate() {
                let _ = writeln!(
                    hist_csv,
                    "{},{},{},{}",
                    h.algorithm,
                    fmt_f64(h.edges[i]),
                    fmt_f64(h.edges[i + 1]),
                    c
                );
            }
        }
        let path = dir.join(format!("hist_{name}.csv"));
        fs::write(&path, hist_csv)
            .map_err(|e| CoreError::io(format!("writing {}", path.display()), e))?;
    }

    // Trace x-axis: cumulative evaluations for global and hybrid runs,
    // iteration index for pure local runs.
    for (algorithm, trial, trace) in &report.traces {
        let mut trace_csv = String::from("step,best_f\n");
        for (e, f) in trace {
            let _ = writeln!(trace_csv, "{},{}", e, fmt_f64(*f));
        }
        let path = dir.join(format!("trace_{algorithm}_{trial}.csv"));
        fs::write(&path, trace_csv)
            .map_err(|e| CoreError::io(format!("writing {}", path.display()), e))?;
    }
    Ok(())
}
