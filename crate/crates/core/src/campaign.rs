//! Repeated-trial experiment runner: one problem, a matrix of algorithms,
//! n seeded trials each, and a merged statistical report.
//!
//! Trial seeds derive from the master seed by index only, so every
//! algorithm sees the same seed sequence (paired comparisons) and the
//! campaign is reproducible end to end under evaluation budgets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::global::{run_global, Budget, GlobalAlgo};
use crate::hybrid::{run_hybrid, HybridConfig};
use crate::local::{
    clamp_to_bounds, run_local, LocalAlgo, LocalStatus, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::objective::{CountingObjective, Objective};
use crate::param_space::ParameterSpace;
use crate::report::{
    success_rate, AlgorithmSummary, ParamHistogram, Quantiles, SuccessRule, TrialRecord,
    TrialReport, DEFAULT_HIST_BINS,
};
use crate::seeds::trial_seed;

/// One column of the algorithm matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    /// Standalone population search under a budget.
    Global { alg: GlobalAlgo, budget: Budget },
    /// Global stage plus local refinement.
    Hybrid(HybridConfig),
    /// Local refiner alone, started from a uniform random point drawn from
    /// the trial's RNG stream.
    Local {
        algo: LocalAlgo,
        tol: f64,
        max_iter: u64,
        max_evals: Option<u64>,
    },
}

impl AlgorithmSpec {
    pub fn local(algo: LocalAlgo) -> Self {
        AlgorithmSpec::Local {
            algo,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            max_evals: None,
        }
    }

    pub fn default_name(&self) -> String {
        match self {
            AlgorithmSpec::Global { alg, .. } => alg.name().to_string(),
            AlgorithmSpec::Hybrid(cfg) => cfg.name(),
            AlgorithmSpec::Local { algo, .. } => algo.name().to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AlgorithmSpec::Global { budget, .. } => budget.validate(),
            AlgorithmSpec::Hybrid(cfg) => cfg.switch.validate(),
            AlgorithmSpec::Local { tol, max_iter, .. } => {
                if !(*tol > 0.0) {
                    return Err(CoreError::InvalidConfig(
                        "local tolerance must be positive".into(),
                    ));
                }
                if *max_iter == 0 {
                    return Err(CoreError::InvalidConfig(
                        "local max_iter must be at least 1".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// True when no stage can stop on wall-clock time.
    fn deterministic(&self) -> bool {
        match self {
            AlgorithmSpec::Global { budget, .. } => budget.max_seconds.is_none(),
            AlgorithmSpec::Hybrid(cfg) => cfg.switch.max_seconds.is_none(),
            AlgorithmSpec::Local { .. } => true,
        }
    }
}

/// An algorithm entry with its report label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedAlgorithm {
    pub name: String,
    pub spec: AlgorithmSpec,
}

impl From<AlgorithmSpec> for NamedAlgorithm {
    fn from(spec: AlgorithmSpec) -> Self {
        NamedAlgorithm {
            name: spec.default_name(),
            spec,
        }
    }
}

/// Campaign shape: the problem itself is passed to [`run_campaign`]
/// separately so one config can drive different objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub label: String,
    pub algorithms: Vec<NamedAlgorithm>,
    pub n_trials: u64,
    pub master_seed: u64,
    pub success: SuccessRule,
    pub histogram_bins: usize,
    pub keep_traces: bool,
}

impl CampaignConfig {
    pub fn new(label: &str, algorithms: Vec<NamedAlgorithm>, n_trials: u64, master_seed: u64) -> Self {
        CampaignConfig {
            label: label.into(),
            algorithms,
            n_trials,
            master_seed,
            success: SuccessRule::default(),
            histogram_bins: DEFAULT_HIST_BINS,
            keep_traces: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(CoreError::InvalidConfig("n_trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(CoreError::InvalidConfig(
                "campaign needs at least one algorithm".into(),
            ));
        }
        if self.histogram_bins == 0 {
            return Err(CoreError::InvalidConfig(
                "histogram_bins must be at least 1".into(),
            ));
        }
        for entry in &self.algorithms {
            if entry.name.is_empty()
                || !entry
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "_+.-".contains(c))
            {
                return Err(CoreError::InvalidConfig(format!(
                    "algorithm name {:?} is not report-safe",
                    entry.name
                )));
            }
            entry.spec.validate()?;
        }
        let mut names: Vec<&str> = self.algorithms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.algorithms.len() {
            return Err(CoreError::InvalidConfig(
                "algorithm names must be unique".into(),
            ));
        }
        Ok(())
    }
}

struct TrialOutcome {
    f_final: f64,
    x_scaled: Vec<f64>,
    evals: u64,
    status: String,
    switch_evals: Option<u64>,
    trace: Vec<(u64, f64)>,
}

fn run_trial(
    spec: &AlgorithmSpec,
    obj: &dyn Objective,
    space: &ParameterSpace,
    seed: u64,
) -> Result<TrialOutcome> {
    match spec {
        AlgorithmSpec::Global { alg, budget } => {
            let res = run_global(alg, obj, space, budget, seed)?;
            Ok(TrialOutcome {
                f_final: res.best_f,
                x_scaled: res.best_x,
                evals: res.evals,
                status: res.terminated_by.as_str().into(),
                switch_evals: None,
                trace: res.trace,
            })
        }
        AlgorithmSpec::Hybrid(cfg) => {
            let res = run_hybrid(cfg, obj, space, seed)?;
            let mut trace = res.global_part.trace.clone();
            trace.push((res.total_evals, res.f_final));
            Ok(TrialOutcome {
                f_final: res.f_final,
                x_scaled: res.best_x().to_vec(),
                evals: res.total_evals,
                status: res.local_part.status.as_str().into(),
                switch_evals: Some(res.global_part.evals),
                trace,
            })
        }
        AlgorithmSpec::Local {
            algo,
            tol,
            max_iter,
            max_evals,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = space.sample_uniform(&mut rng);
            let counting = CountingObjective::new(obj, *max_evals);
            match run_local(*algo, &counting, &x0, *tol, *max_iter) {
                Ok(res) => {
                    let status = if counting.tripped() && res.status != LocalStatus::Converged {
                        LocalStatus::MaxIter
                    } else {
                        res.status
                    };
                    Ok(TrialOutcome {
                        f_final: res.f_final,
                        x_scaled: res.x_final,
                        evals: counting.used(),
                        status: status.as_str().into(),
                        switch_evals: None,
                        trace: res.trace,
                    })
                }
                Err(err) => Err(err),
            }
        }
    }
}

/// Runs every (algorithm, trial) cell of the campaign, in parallel, and
/// assembles the sorted report. A trial that errors is recorded with
/// status "failed" and NaN fitness; the campaign continues.
pub fn run_campaign(
    cfg: &CampaignConfig,
    obj: &dyn Objective,
    space: &ParameterSpace,
) -> Result<TrialReport> {
    cfg.validate()?;
    let param_names: Vec<String> = space.fit_defs().map(|d| d.name.clone()).collect();
    let bounds = space.scaled_bounds();
    let seeds: Vec<u64> = (0..cfg.n_trials)
        .map(|i| trial_seed(cfg.master_seed, i))
        .collect();

    let jobs: Vec<(usize, u64)> = (0..cfg.algorithms.len())
        .flat_map(|a| (0..cfg.n_trials).map(move |t| (a, t)))
        .collect();
    let mut results: Vec<(usize, u64, TrialRecord, Vec<(u64, f64)>)> = jobs
        .par_iter()
        .map(|&(a, t)| {
            let entry = &cfg.algorithms[a];
            let seed = seeds[t as usize];
            let record = match run_trial(&entry.spec, obj, space, seed) {
                Ok(out) => {
                    let (clamped_x, moved) = clamp_to_bounds(&out.x_scaled, &bounds);
                    let params = space
                        .to_physical(&clamped_x)
                        .unwrap_or_else(|_| vec![f64::NAN; param_names.len()]);
                    (
                        TrialRecord {
                            algorithm: entry.name.clone(),
                            trial: t,
                            seed,
                            f_final: out.f_final,
                            evals: out.evals,
                            status: out.status,
                            switch_evals: out.switch_evals,
                            params,
                            clamped: moved,
                        },
                        out.trace,
                    )
                }
                Err(_) => (
                    TrialRecord {
                        algorithm: entry.name.clone(),
                        trial: t,
                        seed,
                        f_final: f64::NAN,
                        evals: 0,
                        status: "failed".into(),
                        switch_evals: None,
                        params: vec![f64::NAN; param_names.len()],
                        clamped: false,
                    },
                    Vec::new(),
                ),
            };
            (a, t, record.0, record.1)
        })
        .collect();
    results.sort_by(|x, y| {
        (x.2.algorithm.as_str(), x.0, x.1).cmp(&(y.2.algorithm.as_str(), y.0, y.1))
    });

    let mut summaries = Vec::new();
    let mut histograms = Vec::new();
    for entry in &cfg.algorithms {
        let sub: Vec<&TrialRecord> = results
            .iter()
            .map(|r| &r.2)
            .filter(|r| r.algorithm == entry.name)
            .collect();
        let finished: Vec<f64> = sub
            .iter()
            .filter(|r| r.status != "failed")
            .map(|r| r.f_final)
            .collect();
        let owned: Vec<TrialRecord> = sub.iter().map(|r| (*r).clone()).collect();
        let rate = success_rate(&owned, &cfg.success);
        let successes = owned
            .iter()
            .filter(|r| cfg.success.trial_succeeds(r))
            .count() as u64;
        summaries.push(AlgorithmSummary {
            algorithm: entry.name.clone(),
            n_trials: cfg.n_trials,
            n_failed: cfg.n_trials - finished.len() as u64,
            successes,
            success_rate: rate,
            f_quantiles: Quantiles::from_values(&finished),
        });
        for (j, name) in param_names.iter().enumerate() {
            let values: Vec<f64> = sub
                .iter()
                .filter(|r| r.status != "failed")
                .map(|r| r.params[j])
                .collect();
            histograms.push(ParamHistogram::build(
                &entry.name,
                name,
                &values,
                cfg.histogram_bins,
            ));
        }
    }

    let traces = if cfg.keep_traces {
        results
            .iter()
            .map(|(_, t, rec, trace)| (rec.algorithm.clone(), *t, trace.clone()))
            .collect()
    } else {
        Vec::new()
    };
    Ok(TrialReport {
        campaign: cfg.label.clone(),
        master_seed: cfg.master_seed,
        deterministic: cfg.algorithms.iter().all(|a| a.spec.deterministic()),
        param_names,
        summaries,
        histograms,
        trials: results.into_iter().map(|r| r.2).collect(),
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{benchmark_space, y_problem};
    use crate::report::export_report;
    use std::fs;

    fn y_campaign(n_trials: u64) -> (CampaignConfig, ParameterSpace) {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        let algorithms = vec![
            NamedAlgorithm::from(AlgorithmSpec::Global {
                alg: GlobalAlgo::pso(),
                budget: Budget::evals(900),
            }),
            NamedAlgorithm::from(AlgorithmSpec::Hybrid(HybridConfig::new(
                GlobalAlgo::pso(),
                LocalAlgo::Bfgs,
                Budget::evals(600),
            ))),
        ];
        (CampaignConfig::new("unit", algorithms, n_trials, 77), space)
    }

    #[test]
    fn produces_exactly_n_records_per_algorithm() {
        let (cfg, space) = y_campaign(4);
        let problem = y_problem();
        let report = run_campaign(&cfg, &problem.evaluator, &space).unwrap();
        assert_eq!(report.trials.len(), 8);
        assert_eq!(report.trials_for("pso").len(), 4);
        assert_eq!(report.trials_for("pso+bfgs").len(), 4);
        // Sorted by algorithm then trial.
        for w in report.trials.windows(2) {
            assert!((&w[0].algorithm, w[0].trial) <= (&w[1].algorithm, w[1].trial));
        }
        assert!(report.deterministic);
        assert_eq!(report.param_names, vec!["x1", "x2"]);
    }

    #[test]
    fn seeds_are_paired_across_algorithms() {
        let (cfg, space) = y_campaign(3);
        let problem = y_problem();
        let report = run_campaign(&cfg, &problem.evaluator, &space).unwrap();
        let pso: Vec<u64> = report.trials_for("pso").iter().map(|t| t.seed).collect();
        let hpso: Vec<u64> = report
            .trials_for("pso+bfgs")
            .iter()
            .map(|t| t.seed)
            .collect();
        assert_eq!(pso, hpso);
        assert_eq!(pso.len(), 3);
        assert!(pso.iter().collect::<std::collections::HashSet<_>>().len() == 3);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let (cfg, space) = y_campaign(3);
        let problem = y_problem();
        let a = run_campaign(&cfg, &problem.evaluator, &space).unwrap();
        let b = run_campaign(&cfg, &problem.evaluator, &space).unwrap();
        assert_eq!(a, b);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        export_report(&a, dir_a.path()).unwrap();
        export_report(&b, dir_b.path()).unwrap();
        for file in ["trials.csv", "summary.json", "hist_x1.csv", "hist_x2.csv"] {
            let bytes_a = fs::read(dir_a.path().join(file)).unwrap();
            let bytes_b = fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(bytes_a, bytes_b, "{file} differs between reruns");
        }
    }

    /// A local refiner that needs residuals, pointed at a plain objective,
    /// fails every trial; the campaign still completes and reports it.
    #[test]
    fn crashing_trials_are_recorded_not_fatal() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        let cfg = CampaignConfig::new(
            "crashy",
            vec![NamedAlgorithm::from(AlgorithmSpec::local(
                LocalAlgo::TrustRegion,
            ))],
            3,
            5,
        );
        let report = run_campaign(&cfg, &problem.evaluator, &space).unwrap();
        assert_eq!(report.trials.len(), 3);
        assert!(report.trials.iter().all(|t| t.status == "failed"));
        let summary = report.summary_for("trust_region").unwrap();
        assert_eq!(summary.n_failed, 3);
        assert_eq!(summary.successes, 0);
        assert!(summary.f_quantiles.is_none());
    }

    #[test]
    fn config_validation_rejects_malformed() {
        let (mut cfg, space) = y_campaign(2);
        let problem = y_problem();
        cfg.n_trials = 0;
        assert!(run_campaign(&cfg, &problem.evaluator, &space).is_err());
        let (mut cfg, _) = y_campaign(2);
        cfg.algorithms[1].name = "pso".into();
        assert!(run_campaign(&cfg, &problem.evaluator, &space).is_err());
        let (mut cfg, _) = y_campaign(2);
        cfg.algorithms[0].name = "has space".into();
        assert!(run_campaign(&cfg, &problem.evaluator, &space).is_err());
        let (mut cfg, _) = y_campaign(2);
        cfg.algorithms.clear();
        assert!(run_campaign(&cfg, &problem.evaluator, &space).is_err());
    }

    #[test]
    fn success_rule_feeds_summaries() {
        let problem = y_problem();
        let space = benchmark_space(&problem);
        let mut cfg = CampaignConfig::new(
            "success",
            vec![NamedAlgorithm::from(AlgorithmSpec::Hybrid(
                HybridConfig::new(GlobalAlgo::pso(), LocalAlgo::Bfgs, Budget::evals(3000)),
            ))],
            6,
            11,
        );
        cfg.success.target_fitness = Some(-17.64);
        let report = run_campaign(&cfg, &problem.evaluator, &space).unwrap();
        let summary = &report.summaries[0];
        assert_eq!(
            summary.success_rate,
            summary.successes as f64 / 6.0
        );
        assert!(summary.successes > 0, "polished swarm should hit -17.64 sometimes");
    }
}
