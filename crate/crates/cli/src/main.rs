//! Command-line front end: single fits, trial campaigns, analytic
//! benchmark suites, sensitivity reports, and synthetic data generation.
//!
//! Exit codes: 0 on success, 1 for configuration problems, 2 for runtime
//! failures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use fdtrfit_core::benchmarks::{grid_enumerate, y_problem, z_problem};
use fdtrfit_core::config::{load_and_resolve, ResolvedConfig};
use fdtrfit_core::identifiability::{identifiability_svd, sensitivity};
use fdtrfit_core::local::{run_local, LocalAlgo, DEFAULT_MAX_ITER, DEFAULT_TOL};
use fdtrfit_core::objective::{synthesize, ShiftedResiduals};
use fdtrfit_core::report::export_report;
use fdtrfit_core::{run_campaign, CoreError};

#[derive(Parser)]
#[command(
    name = "fdtrfit",
    version,
    about = "Hybrid global-local fitting for frequency-domain thermoreflectance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run each configured algorithm once and print the fitted parameters.
    Fit(CommonArgs),
    /// Run the full trial matrix and write trials.csv, summary.json,
    /// histograms, and optional traces.
    Campaign(CommonArgs),
    /// Exercise the analytic benchmark surfaces: grid enumeration on the
    /// sine-product box and local descents on the ripple surface.
    Bench(BenchArgs),
    /// Print per-parameter sensitivity maxima and the identifiability
    /// spectrum; optionally write the curves as CSV.
    Sense(SenseArgs),
    /// Generate synthetic measurement CSVs from the configured truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the campaign master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count per algorithm.
    #[arg(long)]
    trials: Option<u64>,
    /// Directory for report files (campaign default: "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only the named algorithm entry.
    #[arg(long)]
    algo: Option<String>,
    /// Replace every algorithm's evaluation budget (the switch budget for
    /// hybrids).
    #[arg(long)]
    budget_evals: Option<u64>,
    /// Replace every algorithm's wall-clock budget in seconds.
    #[arg(long)]
    budget_seconds: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid budget; the per-axis count is its square root (default 1000).
    #[arg(long)]
    budget_evals: Option<u64>,
    /// Write bench_grid.csv and bench_local.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SenseArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Write sense_<param>.csv and svd.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Configuration file (TOML); the problem must be synthetic.
    #[arg(long)]
    config: PathBuf,
    /// Override the synthesis noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the generated CSV files (default "out").
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors tagged by phase so main can map them to exit codes.
struct AppError {
    config: bool,
    message: String,
}

fn config_error(e: CoreError) -> AppError {
    AppError {
        config: true,
        message: e.to_string(),
    }
}

fn runtime_error(e: CoreError) -> AppError {
    AppError {
        config: false,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Campaign(args) => cmd_campaign(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Sense(args) => cmd_sense(&args),
        Command::Synth(args) => cmd_synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.config => {
            eprintln!("config error: {}", e.message);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(2)
        }
    }
}

fn load(args: &CommonArgs) -> Result<ResolvedConfig, AppError> {
    let mut resolved = load_and_resolve(&args.config).map_err(config_error)?;
    resolved
        .apply_overrides(
            args.seed,
            args.trials,
            args.algo.as_deref(),
            args.budget_evals,
            args.budget_seconds,
        )
        .map_err(config_error)?;
    Ok(resolved)
}

fn describe_problem(r: &ResolvedConfig) {
    let kind = if r.truth_physical.is_some() {
        "synthetic"
    } else {
        "measured"
    };
    println!(
        "problem: {} ({kind}, {} datasets, {} points, {} fit parameters)",
        r.label,
        r.problem.datasets().len(),
        r.problem.point_count(),
        r.problem.space().fit_defs().count(),
    );
}

fn cmd_fit(args: &CommonArgs) -> Result<(), AppError> {
    let mut resolved = load(args)?;
    resolved.campaign.n_trials = 1;
    describe_problem(&resolved);

    let space = resolved.problem.space().clone();
    let report =
        run_campaign(&resolved.campaign, &resolved.problem, &space).map_err(runtime_error)?;

    for record in &report.trials {
        println!(
            "\n{}: status={} evals={} f={}",
            record.algorithm,
            record.status,
            record.evals,
            fmt_val(record.f_final)
        );
        for (i, name) in report.param_names.iter().enumerate() {
            let value = record.params[i];
            match &resolved.truth_physical {
                Some(truth) => {
                    let err_pct = (value - truth[i]) / truth[i] * 100.0;
                    println!(
                        "  {name:<10} = {:<14} (truth {}, {err_pct:+.3}%)",
                        fmt_val(value),
                        fmt_val(truth[i])
                    );
                }
                None => println!("  {name:<10} = {}", fmt_val(value)),
            }
        }
        if record.clamped {
            println!("  note: best point was clamped back into bounds");
        }
    }

    if let Some(dir) = &args.out {
        export_report(&report, dir).map_err(runtime_error)?;
        println!("\nwrote {}", dir.display());
    }
    Ok(())
}

fn cmd_campaign(args: &CommonArgs) -> Result<(), AppError> {
    let resolved = load(args)?;
    describe_problem(&resolved);
    println!(
        "campaign: {} algorithms x {} trials, master seed {}",
        resolved.campaign.algorithms.len(),
        resolved.campaign.n_trials,
        resolved.campaign.master_seed
    );

    let started = Instant::now();
    let space = resolved.problem.space().clone();
    let report =
        run_campaign(&resolved.campaign, &resolved.problem, &space).map_err(runtime_error)?;
    println!("finished in {:.1} s", started.elapsed().as_secs_f64());

    println!(
        "\n{:<14} {:>6} {:>6} {:>9} {:>14} {:>14}",
        "algorithm", "trials", "failed", "success", "f_median", "f_best"
    );
    for s in &report.summaries {
        let (median, best) = match &s.f_quantiles {
            Some(q) => (fmt_val(q.median), fmt_val(q.min)),
            None => ("-".into(), "-".into()),
        };
        println!(
            "{:<14} {:>6} {:>6} {:>8.1}% {:>14} {:>14}",
            s.algorithm,
            s.n_trials,
            s.n_failed,
            s.success_rate * 100.0,
            median,
            best
        );
    }
    if !report.deterministic {
        println!("\nnote: wall-clock budgets in use; reruns may differ");
    }

    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    export_report(&report, &out).map_err(runtime_error)?;
    println!("\nwrote {}/trials.csv, summary.json, histograms", out.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), AppError> {
    let n_per_axis = args
        .budget_evals
        .map(|b| (b as f64).sqrt().floor() as usize)
        .unwrap_or(1000)
        .max(2);

    let y = y_problem();
    let started = Instant::now();
    let (best_x, best_f) = grid_enumerate(&y, n_per_axis).map_err(runtime_error)?;
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "sine-product grid {n_per_axis}x{n_per_axis}: f = {:.6} at ({:.6}, {:.6}) in {elapsed:.2} s",
        best_f, best_x[0], best_x[1]
    );
    if let Some((ref x_ref, f_ref)) = y.known_min {
        println!(
            "  reference: f = {f_ref} at ({}, {}); delta f = {:+.2e}",
            x_ref[0],
            x_ref[1],
            best_f - f_ref
        );
    }

    println!("\nripple-surface local descents:");
    println!(
        "{:<14} {:>14} {:>20} {:>12} {:>6}",
        "algorithm", "start", "status", "f_final", "iters"
    );
    let floor = -1.5;
    let z = ShiftedResiduals {
        inner: z_problem(5.0).evaluator,
        floor,
    };
    let mut local_rows = Vec::new();
    for algo in [LocalAlgo::Bfgs, LocalAlgo::NelderMead, LocalAlgo::TrustRegion] {
        for start in [[1.0, 1.0], [-2.5, -2.5]] {
            let res = run_local(algo, &z, &start, DEFAULT_TOL, DEFAULT_MAX_ITER)
                .map_err(runtime_error)?;
            let f = res.f_final + floor;
            println!(
                "{:<14} {:>14} {:>20} {:>12.6} {:>6}",
                algo.name(),
                format!("({}, {})", start[0], start[1]),
                res.status.as_str(),
                f,
                res.iterations
            );
            local_rows.push((algo.name().to_string(), start, res, f));
        }
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .map_err(|e| runtime_error(CoreError::io(format!("creating {}", dir.display()), e)))?;
        let grid_csv = format!(
            "n_per_axis,best_x1,best_x2,best_f\n{n_per_axis},{},{},{}\n",
            best_x[0], best_x[1], best_f
        );
        write_text(&dir.join("bench_grid.csv"), &grid_csv)?;
        let mut local_csv = String::from("algorithm,x1_0,x2_0,status,f_final,iterations\n");
        for (name, start, res, f) in &local_rows {
            let _ = writeln!(
                local_csv,
                "{name},{},{},{},{f},{}",
                start[0],
                start[1],
                res.status.as_str(),
                res.iterations
            );
        }
        write_text(&dir.join("bench_local.csv"), &local_csv)?;
        println!("\nwrote {}/bench_grid.csv, bench_local.csv", dir.display());
    }
    Ok(())
}

fn cmd_sense(args: &SenseArgs) -> Result<(), AppError> {
    let resolved = load_and_resolve(&args.config).map_err(config_error)?;
    describe_problem(&resolved);
    let problem = &resolved.problem;

    // Curves for every bound parameter, searched or fixed; fixed ones are
    // the interesting negative results.
    let bound: Vec<String> = problem
        .space()
        .defs()
        .iter()
        .filter(|d| problem.binding().target(&d.name).is_some())
        .map(|d| d.name.clone())
        .collect();

    println!("\nper-parameter sensitivity maxima (degrees per log-unit):");
    let mut curves = Vec::new();
    for name in &bound {
        let curve = sensitivity(problem, name, 0.01).map_err(runtime_error)?;
        println!("  {name:<10} max|S| = {:.4}", curve.max_abs());
        curves.push(curve);
    }

    let fit_names: Vec<String> = problem
        .space()
        .fit_defs()
        .map(|d| d.name.clone())
        .collect();
    let svd = identifiability_svd(problem, &fit_names).map_err(runtime_error)?;
    println!("\nidentifiability spectrum over {:?}:", svd.params);
    for (i, s) in svd.singular_values.iter().enumerate() {
        println!("  sigma_{} = {:.6}", i + 1, s);
    }
    println!("  condition number = {:.3e}", svd.condition_number);
    if svd.degenerate {
        println!("  warning: jacobian is numerically zero");
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .map_err(|e| runtime_error(CoreError::io(format!("creating {}", dir.display()), e)))?;
        for curve in &curves {
            let mut csv = String::from("frequency_hz,s_deg_per_log\n");
            for (f, s) in curve.freqs.iter().zip(&curve.s) {
                let _ = writeln!(csv, "{f},{s}");
            }
            write_text(&dir.join(format!("sense_{}.csv", curve.param)), &csv)?;
        }
        let json = serde_json::to_string_pretty(&svd)
            .map_err(|e| runtime_error(CoreError::InvalidData(e.to_string())))?;
        write_text(&dir.join("svd.json"), &json)?;
        println!("\nwrote {}/sense_<param>.csv, svd.json", dir.display());
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), AppError> {
    let resolved = load_and_resolve(&args.config).map_err(config_error)?;
    let truth = resolved.truth_physical.clone().ok_or_else(|| AppError {
        config: true,
        message: "synth needs a synthetic problem with a truth vector".into(),
    })?;
    let grid = resolved.grid.clone().ok_or_else(|| AppError {
        config: true,
        message: "synth needs a [frequencies] grid".into(),
    })?;

    let seed = args.seed.unwrap_or(resolved.synth_seed);
    let problem = &resolved.problem;
    let sets = synthesize(
        problem.stack(),
        problem.binding(),
        problem.space(),
        &resolved.spots,
        &grid,
        resolved.quad,
        &truth,
        resolved.noise_sigma_deg,
        seed,
    )
    .map_err(runtime_error)?;

    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)
        .map_err(|e| runtime_error(CoreError::io(format!("creating {}", out.display()), e)))?;
    println!(
        "synthesizing {} spots, sigma = {} deg, seed = {seed}",
        sets.len(),
        resolved.noise_sigma_deg
    );
    for (i, set) in sets.iter().enumerate() {
        let path = out.join(format!("{}_spot{}.csv", resolved.label, i + 1));
        set.write_csv(&path).map_err(runtime_error)?;
        println!(
            "  {} ({} points, pump {:.2} um)",
            path.display(),
            set.phase_deg.len(),
            set.spot.r_pump * 1e6
        );
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text)
        .map_err(|e| runtime_error(CoreError::io(format!("writing {}", path.display()), e)))
}

/// Short scientific formatting for objective and parameter values.
fn fmt_val(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6e}")
    }
}
