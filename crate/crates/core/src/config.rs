//! Single-file TOML configuration: problem definition (synthetic or
//! measured), sample stack, parameter space, spots, frequency grid,
//! quadrature, campaign shape, success rule, and the algorithm matrix.
//!
//! Lengths in the file use presentation units (spot radii in micrometers,
//! layer thicknesses in nanometers); everything else is SI.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::campaign::{AlgorithmSpec, CampaignConfig, NamedAlgorithm};
use crate::error::{CoreError, Result};
use crate::forward::{FrequencyGrid, QuadratureSpec, SpotConfig};
use crate::global::{Budget, FwaConfig, GaConfig, GlobalAlgo, PsoConfig, QgaConfig};
use crate::hybrid::HybridConfig;
use crate::local::{LocalAlgo, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::objective::{default_target_fitness, synthesize, FitProblem, MeasurementSet};
use crate::param_space::{ParamDef, ParameterSpace, Scale};
use crate::report::SuccessRule;
use crate::sample_model::{
    build_gan_si_stack, gan_si_truth, BottomBoundary, Element, Field, Interface, Layer,
    ParameterBinding, SampleStack,
};

/// Raw file schema, straight from TOML.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub label: Option<String>,
    pub problem: ProblemSection,
    pub stack: StackSection,
    #[serde(default)]
    pub params: Vec<ParamSection>,
    #[serde(default)]
    pub spots: Vec<SpotSection>,
    pub frequencies: Option<FreqSection>,
    pub quadrature: Option<QuadSection>,
    pub campaign: Option<CampaignSection>,
    pub success: Option<SuccessSection>,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// "synthetic" or "measured".
    pub kind: String,
    pub noise_sigma_deg: Option<f64>,
    pub synth_seed: Option<u64>,
    /// Physical truth values for the fit parameters, in parameter order;
    /// synthetic stacks without a preset must provide it.
    pub truth: Option<Vec<f64>>,
    #[serde(default)]
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub r_pump_um: f64,
    pub r_probe_um: Option<f64>,
    pub noise_sigma_deg: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSection {
    /// "gan_si" ships with the toolkit; a preset brings its own parameter
    /// space and truth values.
    pub preset: Option<String>,
    #[serde(default)]
    pub elements: Vec<ElementSection>,
    /// "semi_infinite" (default) or "adiabatic".
    pub bottom: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSection {
    /// "layer" or "interface".
    pub kind: String,
    pub name: String,
    /// Isotropic conductivity shorthand; exclusive with kz/kr.
    pub k: Option<f64>,
    pub kz: Option<f64>,
    pub kr: Option<f64>,
    pub c: Option<f64>,
    pub h_nm: Option<f64>,
    #[serde(default)]
    pub terminal: bool,
    pub g: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSection {
    pub name: String,
    /// "element.field" with field one of g, k, kz, kr, c, h.
    pub bind: Option<String>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// "linear" or "log10" (default).
    pub scale: Option<String>,
    /// A fixed parameter takes this value and is not searched.
    pub fixed: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotSection {
    pub r_pump_um: f64,
    pub r_probe_um: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqSection {
    pub min_hz: f64,
    pub max_hz: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    pub node_count: Option<usize>,
    pub lambda_max_factor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub histogram_bins: Option<usize>,
    pub keep_traces: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessSection {
    pub target_fitness: Option<f64>,
    /// Derive the fitness target from the synthetic truth (default true
    /// on synthetic problems when no explicit target is given).
    pub auto_target: Option<bool>,
    /// Per-parameter success band, percent around the synthetic truth.
    pub param_band_pct: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub name: Option<String>,
    /// "global", "hybrid", or "local".
    pub mode: String,
    /// "pso", "ga", "qga", or "fwa".
    pub global: Option<String>,
    /// "bfgs", "nelder_mead", or "trust_region".
    pub local: Option<String>,
    pub budget_evals: Option<u64>,
    pub budget_seconds: Option<f64>,
    pub target_fitness: Option<f64>,
    pub local_tol: Option<f64>,
    pub local_max_iter: Option<u64>,
    pub local_max_evals: Option<u64>,
    pub pso: Option<PsoConfig>,
    pub ga: Option<GaConfig>,
    pub qga: Option<QgaConfig>,
    pub fwa: Option<FwaConfig>,
}

/// Everything the commands need, validated and in SI units.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub label: String,
    pub problem: FitProblem,
    /// Synthetic problems carry their truth in physical and scaled form.
    pub truth_physical: Option<Vec<f64>>,
    pub truth_scaled: Option<Vec<f64>>,
    pub spots: Vec<SpotConfig>,
    pub grid: Option<FrequencyGrid>,
    pub quad: QuadratureSpec,
    pub noise_sigma_deg: f64,
    pub synth_seed: u64,
    pub campaign: CampaignConfig,
}

fn invalid(msg: impl Into<String>) -> CoreError {
    CoreError::InvalidConfig(msg.into())
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::io(format!("reading config {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| invalid(format!("parsing {}: {e}", path.display())))
}

fn parse_scale(s: Option<&str>) -> Result<Scale> {
    match s.unwrap_or("log10") {
        "linear" => Ok(Scale::Linear),
        "log10" => Ok(Scale::Log10),
        other => Err(invalid(format!("unknown scale {other:?}"))),
    }
}

fn parse_field(s: &str) -> Result<Field> {
    Ok(match s {
        "g" => Field::G,
        "k" => Field::KIso,
        "kz" => Field::Kz,
        "kr" => Field::Kr,
        "c" => Field::C,
        "h" => Field::H,
        other => return Err(invalid(format!("unknown bind field {other:?}"))),
    })
}

fn check_global_name(s: &str) -> Result<&str> {
    match s {
        "pso" | "ga" | "qga" | "fwa" => Ok(s),
        other => Err(invalid(format!("unknown global algorithm {other:?}"))),
    }
}

fn parse_local_name(s: &str) -> Result<LocalAlgo> {
    match s {
        "bfgs" => Ok(LocalAlgo::Bfgs),
        "nelder_mead" => Ok(LocalAlgo::NelderMead),
        "trust_region" => Ok(LocalAlgo::TrustRegion),
        other => Err(invalid(format!("unknown local algorithm {other:?}"))),
    }
}

fn build_stack(section: &StackSection) -> Result<SampleStack> {
    let bottom = match section.bottom.as_deref().unwrap_or("semi_infinite") {
        "semi_infinite" => BottomBoundary::SemiInfinite,
        "adiabatic" => BottomBoundary::Adiabatic,
        other => return Err(invalid(format!("unknown bottom boundary {other:?}"))),
    };
    let mut elements = Vec::with_capacity(section.elements.len());
    for e in &section.elements {
        match e.kind.as_str() {
            "layer" => {
                let (kz, kr) = match (e.k, e.kz, e.kr) {
                    (Some(k), None, None) => (k, k),
                    (None, Some(kz), Some(kr)) => (kz, kr),
                    _ => {
                        return Err(invalid(format!(
                            "layer {:?} needs either k or both kz and kr",
                            e.name
                        )))
                    }
                };
                let c = e
                    .c
                    .ok_or_else(|| invalid(format!("layer {:?} needs c", e.name)))?;
                let h_nm = match (e.h_nm, e.terminal) {
                    (Some(h), _) => h,
                    (None, true) => 0.0,
                    (None, false) => {
                        return Err(invalid(format!("layer {:?} needs h_nm", e.name)))
                    }
                };
                elements.push(Element::Layer(Layer {
                    name: e.name.clone(),
                    kz,
                    kr,
                    c,
                    h: h_nm * 1e-9,
                    terminal: e.terminal,
                }));
            }
            "interface" => {
                let g = e
                    .g
                    .ok_or_else(|| invalid(format!("interface {:?} needs g", e.name)))?;
                elements.push(Element::Interface(Interface {
                    name: e.name.clone(),
                    g,
                }));
            }
            other => return Err(invalid(format!("unknown element kind {other:?}"))),
        }
    }
    SampleStack::new(elements, bottom)
}

fn build_params(sections: &[ParamSection]) -> Result<(ParameterSpace, ParameterBinding)> {
    let mut defs = Vec::with_capacity(sections.len());
    let mut binding = ParameterBinding::new();
    for p in sections {
        if let Some(v) = p.fixed {
            if p.lower.is_some() || p.upper.is_some() {
                return Err(invalid(format!(
                    "parameter {:?} is fixed and cannot carry bounds",
                    p.name
                )));
            }
            defs.push(ParamDef::fixed(&p.name, v));
        } else {
            let (lower, upper) = match (p.lower, p.upper) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => {
                    return Err(invalid(format!(
                        "parameter {:?} needs lower and upper (or fixed)",
                        p.name
                    )))
                }
            };
            defs.push(ParamDef::fit(
                &p.name,
                lower,
                upper,
                parse_scale(p.scale.as_deref())?,
            ));
        }
        if let Some(bind) = &p.bind {
            let (element, field) = bind
                .split_once('.')
                .ok_or_else(|| invalid(format!("bind {bind:?} is not element.field")))?;
            binding = binding.bind(&p.name, element, parse_field(field)?);
        }
    }
    Ok((ParameterSpace::new(defs)?, binding))
}

fn build_global(section: &AlgorithmSection) -> Result<GlobalAlgo> {
    let name = section
        .global
        .as_deref()
        .ok_or_else(|| invalid("global/hybrid algorithm entry needs `global`"))?;
    let name = check_global_name(name)?;
    let foreign = [
        ("pso", section.pso.is_some()),
        ("ga", section.ga.is_some()),
        ("qga", section.qga.is_some()),
        ("fwa", section.fwa.is_some()),
    ];
    for (n, present) in foreign {
        if present && n != name {
            return Err(invalid(format!(
                "hyperparameter table [{n}] does not match global = {name:?}"
            )));
        }
    }
    Ok(match name {
        "pso" => GlobalAlgo::Pso(section.pso.unwrap_or_default()),
        "ga" => GlobalAlgo::Ga(section.ga.unwrap_or_default()),
        "qga" => GlobalAlgo::Qga(section.qga.unwrap_or_default()),
        _ => GlobalAlgo::Fwa(section.fwa.unwrap_or_default()),
    })
}

fn build_budget(section: &AlgorithmSection) -> Result<Budget> {
    let budget = Budget {
        max_evals: section.budget_evals,
        max_seconds: section.budget_seconds,
        target_fitness: section.target_fitness,
    };
    budget.validate()?;
    Ok(budget)
}

fn build_algorithm(section: &AlgorithmSection) -> Result<NamedAlgorithm> {
    let spec = match section.mode.as_str() {
        "global" => AlgorithmSpec::Global {
            alg: build_global(section)?,
            budget: build_budget(section)?,
        },
        "hybrid" => {
            let mut cfg = HybridConfig::new(
                build_global(section)?,
                parse_local_name(
                    section
                        .local
                        .as_deref()
                        .ok_or_else(|| invalid("hybrid algorithm entry needs `local`"))?,
                )?,
                build_budget(section)?,
            );
            if let Some(t) = section.local_tol {
                cfg.local_tol = t;
            }
            if let Some(n) = section.local_max_iter {
                cfg.local_max_iter = n;
            }
            cfg.local_max_evals = section.local_max_evals;
            AlgorithmSpec::Hybrid(cfg)
        }
        "local" => AlgorithmSpec::Local {
            algo: parse_local_name(
                section
                    .local
                    .as_deref()
                    .ok_or_else(|| invalid("local algorithm entry needs `local`"))?,
            )?,
            tol: section.local_tol.unwrap_or(DEFAULT_TOL),
            max_iter: section.local_max_iter.unwrap_or(DEFAULT_MAX_ITER),
            max_evals: section.local_max_evals.or(section.budget_evals),
        },
        other => return Err(invalid(format!("unknown algorithm mode {other:?}"))),
    };
    let name = section
        .name
        .clone()
        .unwrap_or_else(|| spec.default_name());
    Ok(NamedAlgorithm { name, spec })
}

/// Validates the raw file and assembles the problem, truth, success rule,
/// and campaign. Measurement file paths resolve relative to `base_dir`.
pub fn resolve_config(cfg: &FileConfig, base_dir: &Path) -> Result<ResolvedConfig> {
    let label = cfg.label.clone().unwrap_or_else(|| "campaign".into());

    // Stack, space, binding, and default truth.
    let (stack, space, binding, preset_truth) = match cfg.stack.preset.as_deref() {
        Some("gan_si") => {
            if !cfg.params.is_empty() {
                return Err(invalid(
                    "preset \"gan_si\" defines its own parameters; drop [[params]]",
                ));
            }
            if !cfg.stack.elements.is_empty() {
                return Err(invalid(
                    "preset \"gan_si\" defines its own elements; drop [[stack.elements]]",
                ));
            }
            let (stack, space, binding) = build_gan_si_stack();
            (stack, space, binding, Some(gan_si_truth().to_vec()))
        }
        Some(other) => return Err(invalid(format!("unknown stack preset {other:?}"))),
        None => {
            let stack = build_stack(&cfg.stack)?;
            let (space, binding) = build_params(&cfg.params)?;
            binding.validate(&stack)?;
            (stack, space, binding, None)
        }
    };

    let quad = match &cfg.quadrature {
        Some(q) => {
            let mut spec = QuadratureSpec::default();
            if let Some(n) = q.node_count {
                spec.node_count = n;
            }
            if let Some(f) = q.lambda_max_factor {
                spec.lambda_max_factor = f;
            }
            spec.validate()?;
            spec
        }
        None => QuadratureSpec::default(),
    };

    let spot_of = |r_pump_um: f64, r_probe_um: Option<f64>| {
        SpotConfig {
            r_pump: r_pump_um * 1e-6,
            r_probe: r_probe_um.unwrap_or(r_pump_um) * 1e-6,
        }
    };

    let noise_sigma_deg = cfg.problem.noise_sigma_deg.unwrap_or(0.0);
    let synth_seed = cfg.problem.synth_seed.unwrap_or(0);

    let (problem, truth_physical, spots, grid) = match cfg.problem.kind.as_str() {
        "synthetic" => {
            if cfg.spots.is_empty() {
                return Err(invalid("synthetic problem needs at least one [[spots]]"));
            }
            let freq = cfg
                .frequencies
                .as_ref()
                .ok_or_else(|| invalid("synthetic problem needs [frequencies]"))?;
            let grid = FrequencyGrid::log_spaced(freq.min_hz, freq.max_hz, freq.count)?;
            let truth = match (&cfg.problem.truth, preset_truth) {
                (Some(t), _) => t.clone(),
                (None, Some(t)) => t,
                (None, None) => {
                    return Err(invalid(
                        "synthetic problem on a custom stack needs problem.truth",
                    ))
                }
            };
            let spots: Vec<SpotConfig> = cfg
                .spots
                .iter()
                .map(|s| spot_of(s.r_pump_um, s.r_probe_um))
                .collect();
            let datasets = synthesize(
                &stack,
                &binding,
                &space,
                &spots,
                &grid,
                quad,
                &truth,
                noise_sigma_deg,
                synth_seed,
            )?;
            let problem = FitProblem::new(
                stack.clone(),
                binding.clone(),
                space.clone(),
                datasets,
                quad,
            )?;
            (problem, Some(truth), spots, Some(grid))
        }
        "measured" => {
            if cfg.problem.files.is_empty() {
                return Err(invalid("measured problem needs [[problem.files]]"));
            }
            let mut datasets = Vec::with_capacity(cfg.problem.files.len());
            let mut spots = Vec::with_capacity(cfg.problem.files.len());
            for f in &cfg.problem.files {
                let spot = spot_of(f.r_pump_um, f.r_probe_um);
                spots.push(spot);
                datasets.push(MeasurementSet::from_csv(
                    &base_dir.join(&f.path),
                    spot,
                    f.noise_sigma_deg.unwrap_or(noise_sigma_deg),
                )?);
            }
            let problem = FitProblem::new(
                stack.clone(),
                binding.clone(),
                space.clone(),
                datasets,
                quad,
            )?;
            (problem, None, spots, None)
        }
        other => return Err(invalid(format!("unknown problem kind {other:?}"))),
    };

    let truth_scaled = match &truth_physical {
        Some(t) => Some(space.from_physical(t)?),
        None => None,
    };

    // Success rule: explicit target wins; otherwise synthetic problems
    // derive one from the truth unless auto_target is switched off.
    let success_section = cfg.success.as_ref();
    let auto = success_section
        .and_then(|s| s.auto_target)
        .unwrap_or(true);
    let target_fitness = match success_section.and_then(|s| s.target_fitness) {
        Some(t) => Some(t),
        None => match (&truth_scaled, auto) {
            (Some(ts), true) => Some(default_target_fitness(&problem, ts)?),
            _ => None,
        },
    };
    let band_pct = success_section.and_then(|s| s.param_band_pct).or({
        if truth_physical.is_some() {
            Some(2.0)
        } else {
            None
        }
    });
    let param_bands = match (band_pct, &truth_physical) {
        (Some(pct), Some(truth)) => {
            if !(pct > 0.0) {
                return Err(invalid("param_band_pct must be positive"));
            }
            Some(
                truth
                    .iter()
                    .map(|t| (t * (1.0 - pct / 100.0), t * (1.0 + pct / 100.0)))
                    .collect(),
            )
        }
        (Some(_), None) => {
            return Err(invalid(
                "param_band_pct needs a synthetic truth to band around",
            ))
        }
        _ => None,
    };

    let algorithms: Vec<NamedAlgorithm> = cfg
        .algorithms
        .iter()
        .map(build_algorithm)
        .collect::<Result<_>>()?;

    let camp = cfg.campaign.as_ref();
    let mut campaign = CampaignConfig::new(
        &label,
        algorithms,
        camp.and_then(|c| c.trials).unwrap_or(100),
        camp.and_then(|c| c.master_seed).unwrap_or(0),
    );
    if let Some(bins) = camp.and_then(|c| c.histogram_bins) {
        campaign.histogram_bins = bins;
    }
    if let Some(keep) = camp.and_then(|c| c.keep_traces) {
        campaign.keep_traces = keep;
    }
    campaign.success = SuccessRule {
        target_fitness,
        param_bands,
    };

    Ok(ResolvedConfig {
        label,
        problem,
        truth_physical,
        truth_scaled,
        spots,
        grid,
        quad,
        noise_sigma_deg,
        synth_seed,
        campaign,
    })
}

impl ResolvedConfig {
    /// Applies command-line overrides on top of the file: master seed,
    /// trial count, algorithm filter, and budget replacements.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        trials: Option<u64>,
        algo: Option<&str>,
        budget_evals: Option<u64>,
        budget_seconds: Option<f64>,
    ) -> Result<()> {
        if let Some(s) = seed {
            self.campaign.master_seed = s;
        }
        if let Some(n) = trials {
            self.campaign.n_trials = n;
        }
        if let Some(name) = algo {
            self.campaign.algorithms.retain(|a| a.name == name);
            if self.campaign.algorithms.is_empty() {
                return Err(invalid(format!(
                    "no algorithm named {name:?} in the config"
                )));
            }
        }
        if budget_evals.is_some() || budget_seconds.is_some() {
            for entry in &mut self.campaign.algorithms {
                match &mut entry.spec {
                    AlgorithmSpec::Global { budget, .. } => {
                        if budget_evals.is_some() {
                            budget.max_evals = budget_evals;
                        }
                        if budget_seconds.is_some() {
                            budget.max_seconds = budget_seconds;
                        }
                    }
                    AlgorithmSpec::Hybrid(cfg) => {
                        if budget_evals.is_some() {
                            cfg.switch.max_evals = budget_evals;
                        }
                        if budget_seconds.is_some() {
                            cfg.switch.max_seconds = budget_seconds;
                        }
                    }
                    AlgorithmSpec::Local { max_evals, .. } => {
                        if budget_evals.is_some() {
                            *max_evals = budget_evals;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Convenience: read and resolve in one step.
pub fn load_and_resolve(path: &Path) -> Result<ResolvedConfig> {
    let file = load_config(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve_config(&file, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
        let path = dir.join("config.toml");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        path
    }

    const PRESET_CONFIG: &str = r#"
label = "demo"

[problem]
kind = "synthetic"
noise_sigma_deg = 0.5
synth_seed = 3

[stack]
preset = "gan_si"

[[spots]]
r_pump_um = 3.4

[[spots]]
r_pump_um = 7.4

[frequencies]
min_hz = 1e4
max_hz = 1e7
count = 10

[quadrature]
node_count = 64

[campaign]
trials = 4
master_seed = 9

[[algorithms]]
mode = "hybrid"
global = "pso"
local = "bfgs"
budget_evals = 600

[algorithms.pso]
particles = 20
"#;

    #[test]
    fn preset_config_resolves_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), PRESET_CONFIG);
        let resolved = load_and_resolve(&path).unwrap();
        assert_eq!(resolved.label, "demo");
        assert_eq!(resolved.problem.datasets().len(), 2);
        assert_eq!(resolved.problem.point_count(), 20);
        assert_eq!(resolved.truth_physical.as_deref(), Some(&gan_si_truth()[..]));
        assert_eq!(resolved.campaign.n_trials, 4);
        assert_eq!(resolved.campaign.algorithms.len(), 1);
        assert_eq!(resolved.campaign.algorithms[0].name, "pso+bfgs");
        match &resolved.campaign.algorithms[0].spec {
            AlgorithmSpec::Hybrid(h) => match &h.global_alg {
                GlobalAlgo::Pso(p) => assert_eq!(p.particles, 20),
                other => panic!("wrong global algo {other:?}"),
            },
            other => panic!("wrong spec {other:?}"),
        }
        // Noisy synthetic truth implies an automatic fitness target and
        // a default 2 percent success band.
        let rule = &resolved.campaign.success;
        assert!(rule.target_fitness.unwrap() > 0.0);
        let bands = rule.param_bands.as_ref().unwrap();
        assert_eq!(bands.len(), 5);
        assert!((bands[1].0 - 130.0 * 0.98).abs() < 1e-9);
        assert!((bands[1].1 - 130.0 * 1.02).abs() < 1e-9);
    }

    #[test]
    fn custom_stack_round_trips_through_config() {
        let text = r#"
[problem]
kind = "synthetic"
truth = [55.0]

[stack]
bottom = "adiabatic"

[[stack.elements]]
kind = "layer"
name = "film"
k = 50.0
c = 2.0e6
h_nm = 500.0

[[params]]
name = "k_film"
bind = "film.k"
lower = 1.0
upper = 500.0

[[spots]]
r_pump_um = 5.0
r_probe_um = 6.0

[frequencies]
min_hz = 1e4
max_hz = 1e6
count = 8

[[algorithms]]
mode = "global"
global = "fwa"
budget_evals = 300
"#;
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), text);
        let resolved = load_and_resolve(&path).unwrap();
        assert_eq!(resolved.problem.point_count(), 8);
        assert!((resolved.spots[0].r_pump - 5.0e-6).abs() < 1e-18);
        assert!((resolved.spots[0].r_probe - 6.0e-6).abs() < 1e-18);
        assert_eq!(resolved.truth_physical, Some(vec![55.0]));
        // Noiseless synthetic: the auto target is the hard floor.
        assert!(resolved.campaign.success.target_fitness.unwrap() <= 1e-6);
    }

    #[test]
    fn malformed_configs_are_rejected_with_context() {
        let dir = tempfile::tempdir().unwrap();
        let bad_key = write_config(dir.path(), "[problem]\nkind = \"synthetic\"\nnope = 1\n[stack]\npreset = \"gan_si\"\n");
        assert!(load_config(&bad_key).is_err());

        let cases = [
            // Unknown preset.
            PRESET_CONFIG.replace("preset = \"gan_si\"", "preset = \"mystery\""),
            // Unknown algorithm mode.
            PRESET_CONFIG.replace("mode = \"hybrid\"", "mode = \"wat\""),
            // Hyperparameter table for the wrong algorithm.
            PRESET_CONFIG.replace("[algorithms.pso]\nparticles = 20", "[algorithms.ga]\npopulation = 16"),
            // Budget-free algorithm entry.
            PRESET_CONFIG.replace("budget_evals = 600\n", ""),
        ];
        for (i, text) in cases.iter().enumerate() {
            let path = write_config(dir.path(), text);
            let file = load_config(&path);
            let failed = match file {
                Err(_) => true,
                Ok(f) => resolve_config(&f, dir.path()).is_err(),
            };
            assert!(failed, "case {i} should fail");
        }
    }

    #[test]
    fn overrides_replace_seed_trials_algo_and_budget() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), PRESET_CONFIG);
        let mut resolved = load_and_resolve(&path).unwrap();
        resolved
            .apply_overrides(Some(123), Some(7), Some("pso+bfgs"), Some(999), None)
            .unwrap();
        assert_eq!(resolved.campaign.master_seed, 123);
        assert_eq!(resolved.campaign.n_trials, 7);
        match &resolved.campaign.algorithms[0].spec {
            AlgorithmSpec::Hybrid(h) => assert_eq!(h.switch.max_evals, Some(999)),
            other => panic!("wrong spec {other:?}"),
        }
        assert!(resolved
            .apply_overrides(None, None, Some("missing"), None, None)
            .is_err());
    }

    #[test]
    fn measured_problem_loads_csv_files() {
        use crate::forward::FrequencyGrid;
        let dir = tempfile::tempdir().unwrap();
        // Synthesize a measurement file first.
        let (stack, space, binding) = build_gan_si_stack();
        let grid = FrequencyGrid::log_spaced(1e4, 1e6, 6).unwrap();
        let sets = synthesize(
            &stack,
            &binding,
            &space,
            &[SpotConfig::symmetric(3.4e-6)],
            &grid,
            QuadratureSpec::default(),
            &gan_si_truth(),
            0.0,
            1,
        )
        .unwrap();
        sets[0].write_csv(&dir.path().join("spot1.csv")).unwrap();

        let text = r#"
[problem]
kind = "measured"

[[problem.files]]
path = "spot1.csv"
r_pump_um = 3.4

[stack]
preset = "gan_si"

[[algorithms]]
mode = "global"
global = "pso"
budget_evals = 100
"#;
        let path = write_config(dir.path(), text);
        let resolved = load_and_resolve(&path).unwrap();
        assert_eq!(resolved.problem.point_count(), 6);
        assert!(resolved.truth_physical.is_none());
        assert!(resolved.campaign.success.target_fitness.is_none());
        assert!(resolved.campaign.success.param_bands.is_none());
        // The stored phases reproduce the stack at truth, so fitness at
        // truth is machine zero.
        let truth_scaled = space.from_physical(&gan_si_truth()).unwrap();
        assert!(resolved.problem.fitness(&truth_scaled).unwrap() < 1e-12);
    }
}
