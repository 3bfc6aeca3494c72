//! Thermal-parameter fitting for frequency-domain pump-probe measurements.

pub mod benchmarks;
pub mod campaign;
pub mod config;
pub mod error;
pub mod forward;
pub mod global;
pub mod hybrid;
pub mod identifiability;
pub mod local;
pub mod objective;
pub mod param_space;
pub mod report;
pub mod sample_model;
pub mod seeds;

pub use campaign::{run_campaign, AlgorithmSpec, CampaignConfig, NamedAlgorithm};
pub use config::{load_and_resolve, load_config, resolve_config, FileConfig, ResolvedConfig};
pub use error::{CoreError, Result};
pub use global::{run_global, Budget, GlobalAlgo, RunResult, TerminationReason};
pub use hybrid::{run_hybrid, HybridConfig, HybridResult};
pub use identifiability::{
    identifiability_svd, sensitivity, IdentifiabilityReport, SensitivityCurve,
};
pub use local::{LocalAlgo, LocalResult, LocalStatus};
pub use objective::{CountingObjective, FitProblem, MeasurementSet, Objective};
pub use forward::{
    fold_impedance, phase_signal, surface_response, FrequencyGrid, QuadratureSpec, SpotConfig,
};
pub use param_space::{ConstraintMode, ParamDef, ParameterSpace, Role, Scale, SearchVector};
pub use report::{
    export_report, success_rate, AlgorithmSummary, ParamHistogram, Quantiles, SuccessRule,
    TrialRecord, TrialReport,
};
pub use sample_model::{
    build_gan_si_stack, gan_si_truth, BindingTarget, BottomBoundary, Element, Field, Interface,
    Layer, ParameterBinding, SampleStack,
};
