//! Sum-of-squares fit objective tying the forward model to measured phase
//! curves, plus synthetic dataset generation.
//!
//! The objective is the unweighted sum over every dataset and frequency of
//! (measured phase - simulated phase)^2, in squared degrees. Residuals are
//! kept accessible separately so least-squares refiners can exploit the
//! structure.

use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CoreError, Result};
use crate::forward::{FrequencyGrid, QuadratureSpec, ResponsePlan, SpotConfig};
use crate::param_space::ParameterSpace;
use crate::sample_model::{resolve, ParameterBinding, SampleStack};

/// A scalar function of a scaled search vector, safe to call from many
/// workers at once.
///
/// Problems with least-squares structure also expose their residual vector;
/// the default implementation reports that no such structure exists.
pub trait Objective: Sync {
    fn eval(&self, v: &[f64]) -> Result<f64>;

    fn residuals(&self, v: &[f64]) -> Result<Vec<f64>> {
        let _ = v;
        Err(CoreError::InvalidConfig(
            "objective has no residual structure".into(),
        ))
    }
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn eval(&self, v: &[f64]) -> Result<f64> {
        Ok(self(v))
    }
}

/// Wraps an objective with an evaluation counter and optional hard cap.
///
/// Once the cap is reached every further call fails fast without touching the
/// wrapped objective; `tripped` records that the cap, not the caller, ended
/// the evaluation stream.
pub struct CountingObjective<'a, O: ?Sized> {
    inner: &'a O,
    cap: Option<u64>,
    count: AtomicU64,
    tripped: AtomicBool,
}

impl<'a, O: Objective + ?Sized> CountingObjective<'a, O> {
    pub fn new(inner: &'a O, cap: Option<u64>) -> Self {
        CountingObjective {
            inner,
            cap,
            count: AtomicU64::new(0),
            tripped: AtomicBool::new(false),
        }
    }

    pub fn used(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    pub fn tripped(&self) -> bool {
        self.tripped.load(Ordering::SeqCst)
    }

    fn admit(&self) -> Result<()> {
        if let Some(cap) = self.cap {
            let n = self.count.fetch_add(1, Ordering::SeqCst);
            if n >= cap {
                self.count.fetch_sub(1, Ordering::SeqCst);
                self.tripped.store(true, Ordering::SeqCst);
                return Err(CoreError::InvalidBudget(
                    "evaluation budget exhausted".into(),
                ));
            }
        } else {
            self.count.fetch_add(1, Ordering::SeqCst);
        }
        Ok(())
    }
}

impl<O: Objective + ?Sized> Objective for CountingObjective<'_, O> {
    fn eval(&self, v: &[f64]) -> Result<f64> {
        self.admit()?;
        self.inner.eval(v)
    }

    fn residuals(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.admit()?;
        self.inner.residuals(v)
    }
}

/// Wraps an explicit residual function as an objective whose value is the
/// sum of squared residuals.
pub struct ResidualObjective<F>(pub F);

impl<F> Objective for ResidualObjective<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn eval(&self, v: &[f64]) -> Result<f64> {
        Ok(self.0(v).iter().map(|r| r * r).sum())
    }

    fn residuals(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0(v))
    }
}

/// Gives a scalar objective least-squares structure via the single residual
/// sqrt(f - floor), where `floor` must be a strict lower bound of f on the
/// region of interest.
///
/// Minimizers are preserved, but reported objective values are shifted down
/// by `floor`; callers add it back when quoting f.
pub struct ShiftedResiduals<O> {
    pub inner: O,
    pub floor: f64,
}

impl<O: Objective> Objective for ShiftedResiduals<O> {
    fn eval(&self, v: &[f64]) -> Result<f64> {
        Ok((self.inner.eval(v)? - self.floor).max(0.0))
    }

    fn residuals(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![(self.inner.eval(v)? - self.floor).max(0.0).sqrt()])
    }
}

/// One measured phase-vs-frequency curve at a single spot size.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub spot: SpotConfig,
    pub grid: FrequencyGrid,
    pub phase_deg: Vec<f64>,
    /// Nominal noise level of this dataset; metadata only, never used as a
    /// residual weight.
    pub noise_sigma_deg: f64,
}

impl MeasurementSet {
    pub fn new(
        spot: SpotConfig,
        grid: FrequencyGrid,
        phase_deg: Vec<f64>,
        noise_sigma_deg: f64,
    ) -> Result<Self> {
        if phase_deg.len() != grid.len() {
            return Err(CoreError::DimensionMismatch {
                expected: grid.len(),
                got: phase_deg.len(),
            });
        }
        if !phase_deg.iter().all(|p| p.is_finite()) {
            return Err(CoreError::InvalidData("non-finite phase sample".into()));
        }
        if !(noise_sigma_deg >= 0.0) {
            return Err(CoreError::InvalidData(format!(
                "noise sigma must be non-negative, got {noise_sigma_deg}"
            )));
        }
        Ok(MeasurementSet {
            spot,
            grid,
            phase_deg,
            noise_sigma_deg,
        })
    }

    pub fn len(&self) -> usize {
        self.phase_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase_deg.is_empty()
    }

    /// Reads a `frequency_hz,phase_deg` CSV file. Spot geometry and the
    /// noise figure are not part of the file format and must be supplied.
    pub fn from_csv(path: &Path, spot: SpotConfig, noise_sigma_deg: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::io(format!("reading {}", path.display()), e))?;
        let mut freqs = Vec::new();
        let mut phases = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                if line != "frequency_hz,phase_deg" {
                    return Err(CoreError::InvalidData(format!(
                        "{}: expected header 'frequency_hz,phase_deg', got '{line}'",
                        path.display()
                    )));
                }
                continue;
            }
            let mut cols = line.split(',');
            let parse = |field: Option<&str>, what: &str| -> Result<f64> {
                field
                    .ok_or_else(|| {
                        CoreError::InvalidData(format!(
                            "{} line {}: missing {what}",
                            path.display(),
                            lineno + 1
                        ))
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| {
                        CoreError::InvalidData(format!(
                            "{} line {}: bad {what}: {e}",
                            path.display(),
                            lineno + 1
                        ))
                    })
            };
            freqs.push(parse(cols.next(), "frequency")?);
            phases.push(parse(cols.next(), "phase")?);
            if cols.next().is_some() {
                return Err(CoreError::InvalidData(format!(
                    "{} line {}: expected 2 columns",
                    path.display(),
                    lineno + 1
                )));
            }
        }
        MeasurementSet::new(spot, FrequencyGrid::new(freqs)?, phases, noise_sigma_deg)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("frequency_hz,phase_deg\n");
        for (f, p) in self.grid.freqs().iter().zip(&self.phase_deg) {
            out.push_str(&format!("{f},{p}\n"));
        }
        let mut file = std::fs::File::create(path)
            .map_err(|e| CoreError::io(format!("creating {}", path.display()), e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| CoreError::io(format!("writing {}", path.display()), e))
    }
}

/// A fully specified inverse problem: nominal stack, which parameters vary
/// and where they land in the stack, and the datasets to match.
#[derive(Debug, Clone)]
pub struct FitProblem {
    stack: SampleStack,
    binding: ParameterBinding,
    space: ParameterSpace,
    datasets: Vec<MeasurementSet>,
    quad: QuadratureSpec,
    plans: Vec<ResponsePlan>,
}

impl FitProblem {
    pub fn new(
        stack: SampleStack,
        binding: ParameterBinding,
        space: ParameterSpace,
        datasets: Vec<MeasurementSet>,
        quad: QuadratureSpec,
    ) -> Result<Self> {
        if datasets.is_empty() {
            return Err(CoreError::InvalidConfig(
                "a fit problem needs at least one dataset".into(),
            ));
        }
        quad.validate()?;
        binding.validate(&stack)?;
        for def in space.fit_defs() {
            if binding.target(&def.name).is_none() {
                return Err(CoreError::UnboundParameter(def.name.clone()));
            }
        }
        let plans = datasets
            .iter()
            .map(|d| ResponsePlan::new(d.spot, quad))
            .collect::<Result<Vec<_>>>()?;
        Ok(FitProblem {
            stack,
            binding,
            space,
            datasets,
            quad,
            plans,
        })
    }

    pub fn stack(&self) -> &SampleStack {
        &self.stack
    }

    pub fn binding(&self) -> &ParameterBinding {
        &self.binding
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn datasets(&self) -> &[MeasurementSet] {
        &self.datasets
    }

    pub fn quad(&self) -> QuadratureSpec {
        self.quad
    }

    /// Total number of data points across datasets.
    pub fn point_count(&self) -> usize {
        self.datasets.iter().map(|d| d.len()).sum()
    }

    /// Signed misfits (measured minus simulated phase, degrees) at the scaled
    /// search vector `v`, concatenated over datasets in order.
    pub fn residuals(&self, v: &[f64]) -> Result<Vec<f64>> {
        let physical = self.space.to_physical(v)?;
        let stack = resolve(&self.stack, &self.space, &self.binding, &physical)
            .map_err(|e| CoreError::Forward(format!("at {physical:?}: {e}")))?;
        let compiled = crate::forward::CompiledStack::compile(&stack);
        let mut out = Vec::with_capacity(self.point_count());
        for (set, plan) in self.datasets.iter().zip(&self.plans) {
            for (&f, &measured) in set.grid.freqs().iter().zip(&set.phase_deg) {
                let h = plan.response(&compiled, 2.0 * std::f64::consts::PI * f);
                out.push(measured - h.im.atan2(h.re).to_degrees());
            }
        }
        Ok(out)
    }

    /// Sum of squared residuals in squared degrees.
    pub fn fitness(&self, v: &[f64]) -> Result<f64> {
        Ok(self.residuals(v)?.iter().map(|r| r * r).sum())
    }
}

impl Objective for FitProblem {
    fn eval(&self, v: &[f64]) -> Result<f64> {
        self.fitness(v)
    }

    fn residuals(&self, v: &[f64]) -> Result<Vec<f64>> {
        FitProblem::residuals(self, v)
    }
}

/// Forward-models phase curves at the true physical parameter values and adds
/// i.i.d. Gaussian noise, one dataset per spot. Deterministic per seed.
#[allow(clippy::too_many_arguments)]
pub fn synthesize(
    stack: &SampleStack,
    binding: &ParameterBinding,
    space: &ParameterSpace,
    spots: &[SpotConfig],
    grid: &FrequencyGrid,
    quad: QuadratureSpec,
    truth_physical: &[f64],
    noise_sigma_deg: f64,
    seed: u64,
) -> Result<Vec<MeasurementSet>> {
    if !(noise_sigma_deg >= 0.0) {
        return Err(CoreError::InvalidData(format!(
            "noise sigma must be non-negative, got {noise_sigma_deg}"
        )));
    }
    if spots.is_empty() {
        return Err(CoreError::InvalidConfig("no spot sizes given".into()));
    }
    let fit_defs: Vec<_> = space.fit_defs().collect();
    if truth_physical.len() != fit_defs.len() {
        return Err(CoreError::DimensionMismatch {
            expected: fit_defs.len(),
            got: truth_physical.len(),
        });
    }
    for (def, &value) in fit_defs.iter().zip(truth_physical) {
        if !(value >= def.lower && value <= def.upper) {
            return Err(CoreError::InvalidParam(format!(
                "truth for '{}' is {value}, outside [{}, {}]",
                def.name, def.lower, def.upper
            )));
        }
    }
    let truth_stack = resolve(stack, space, binding, truth_physical)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if noise_sigma_deg > 0.0 {
        Some(Normal::new(0.0, noise_sigma_deg).expect("sigma checked above"))
    } else {
        None
    };
    spots
        .iter()
        .map(|&spot| {
            let mut phases = crate::forward::phase_signal(&truth_stack, spot, grid, quad)?;
            if let Some(n) = &noise {
                for p in &mut phases {
                    *p += n.sample(&mut rng);
                }
            }
            MeasurementSet::new(spot, grid.clone(), phases, noise_sigma_deg)
        })
        .collect()
}

/// Builds the documented two-spot synthetic problem in one call: synthesizes
/// data at `truth_physical` and returns the ready-to-fit problem.
pub fn synthetic_problem(
    stack: &SampleStack,
    binding: &ParameterBinding,
    space: &ParameterSpace,
    spots: &[SpotConfig],
    grid: &FrequencyGrid,
    quad: QuadratureSpec,
    truth_physical: &[f64],
    noise_sigma_deg: f64,
    seed: u64,
) -> Result<FitProblem> {
    let datasets = synthesize(
        stack,
        binding,
        space,
        spots,
        grid,
        quad,
        truth_physical,
        noise_sigma_deg,
        seed,
    )?;
    FitProblem::new(
        stack.clone(),
        binding.clone(),
        space.clone(),
        datasets,
        quad,
    )
}

/// Success threshold on fitness: slightly above the irreducible noise floor
/// on noisy data, or a hard near-zero bar on noiseless data.
pub fn default_target_fitness(problem: &FitProblem, truth_scaled: &[f64]) -> Result<f64> {
    let noisy = problem.datasets.iter().any(|d| d.noise_sigma_deg > 0.0);
    if noisy {
        Ok(1.1 * problem.fitness(truth_scaled)?)
    } else {
        Ok(1e-6)
    }
}
