//! Experiment orchestration: declarative specs, strict validation, and
//! deterministic CSV artifact emission.
//!
//! A spec is a TOML file with sections `[experiment]`, `[problem]`,
//! `[method]` and, depending on the experiment kind, `[sampler]`, `[outer]`,
//! `[dataset]`, `[attack]`, `[dual]`, `[oracle]` and `[inner_objective]`.
//! `problem.tau` and `problem.epsilon` must always be explicit; algorithmic
//! defaults are filled during validation and echoed to
//! `<output_dir>/config_echo.toml`.
//!
//! Artifact schema (one file per metric family, snake_case headers, floats
//! at 9 significant digits):
//! - `accuracy.csv`: `metric,value`
//! - `inner_objective.csv`: `iteration,value` (the weighted mean tilted
//!   potential; negate for the maximized inner objective)
//! - `robustness_curve.csv`: `delta,value`
//! - `sampler_oracle.csv`: per-coordinate empirical vs closed-form moments
//! - `training_trace.csv`, `theta_checkpoints.csv`: per-step and per-epoch
//!   training diagnostics
//! - `run_meta.txt`: the only file carrying timestamps; CSV bodies are
//!   byte-identical across reruns of the same spec.

mod csv;
mod runner;
mod spec;

pub use csv::{fmt_float, parse_simple_csv, CsvTable};
pub use runner::{compare_methods, run_experiment, RunArtifact};
pub use spec::{
    canonicalize, serialize_spec, validate_spec, AttackSection, BandwidthSpec, CostName,
    DatasetSection, DualSection, ExperimentKind, ExperimentSection, ExperimentSpec,
    InnerObjectiveSection, MethodSection, MethodName, OracleSection, OuterSection,
    ProblemSection, ProjectionKind, SamplerSection, StepsizeKind,
};

/// Worker-thread cap from the `GFSDRO_THREADS` environment variable
/// (`0` means serial). `None` when unset or unparsable.
pub fn configured_threads() -> Option<usize> {
    std::env::var("GFSDRO_THREADS").ok()?.trim().parse().ok()
}
