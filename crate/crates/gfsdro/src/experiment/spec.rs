//! Declarative experiment specs: a strict `key = value` file with sections,
//! parsed from TOML. Unknown keys are rejected; the robustness knobs
//! `problem.tau` and `problem.epsilon` have no defaults, while algorithmic
//! defaults (PGD internals, kernel policy, dual-baseline settings) are filled
//! in and echoed back in canonical form.

use serde::{Deserialize, Serialize};

use crate::driver::{
    DualConfig, OuterLoopConfig, OuterSchedule, Projection, StepsizeSchedule,
};
use crate::error::{Error, Result};
use crate::eval::AttackConfig;
use crate::problem::{CostFunction, RobustnessParams};
use crate::samplers::{KernelBandwidth, SamplerConfig, SamplerMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BiasedCircle,
    TwoMoons,
    InnerObjective,
    FeatureRobustness,
    UncertainLs,
    SamplerOracle,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BiasedCircle => "biased-circle",
            ExperimentKind::TwoMoons => "two-moons",
            ExperimentKind::InnerObjective => "inner-objective",
            ExperimentKind::FeatureRobustness => "feature-robustness",
            ExperimentKind::UncertainLs => "uncertain-ls",
            ExperimentKind::SamplerOracle => "sampler-oracle",
        }
    }

    fn trains(&self) -> bool {
        matches!(
            self,
            ExperimentKind::BiasedCircle
                | ExperimentKind::TwoMoons
                | ExperimentKind::FeatureRobustness
                | ExperimentKind::UncertainLs
        )
    }
}

/// Training method: one of the five inner samplers or a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    WgfUla,
    Wfr,
    Svgd,
    Rgo,
    Wrm,
    Saa,
    Dual,
}

impl MethodName {
    pub fn name(&self) -> &'static str {
        match self {
            MethodName::WgfUla => "wgf-ula",
            MethodName::Wfr => "wfr",
            MethodName::Svgd => "svgd",
            MethodName::Rgo => "rgo",
            MethodName::Wrm => "wrm",
            MethodName::Saa => "saa",
            MethodName::Dual => "dual",
        }
    }

    pub fn sampler(&self) -> Option<SamplerMethod> {
        match self {
            MethodName::WgfUla => Some(SamplerMethod::WgfUla),
            MethodName::Wfr => Some(SamplerMethod::Wfr),
            MethodName::Svgd => Some(SamplerMethod::Svgd),
            MethodName::Rgo => Some(SamplerMethod::Rgo),
            MethodName::Wrm => Some(SamplerMethod::Wrm),
            MethodName::Saa | MethodName::Dual => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub tau: f64,
    pub epsilon: f64,
    /// Transport cost; defaults to the experiment's natural choice.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostName {
    SquaredEuclidean,
    SquaredEuclideanWithFixedLabel,
}

impl CostName {
    pub fn to_cost(self) -> CostFunction {
        match self {
            CostName::SquaredEuclidean => CostFunction::SquaredEuclidean,
            CostName::SquaredEuclideanWithFixedLabel => CostFunction::SquaredEuclideanFixedLabel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub name: MethodName,
}

/// Kernel bandwidth: the string `"median-heuristic"` or a fixed positive h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub eta: f64,
    pub t: usize,
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_init: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_bandwidth: Option<BandwidthSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepsizeKind {
    Constant,
    InverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionKind {
    Identity,
    L2Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    pub stepsize_kind: StepsizeKind,
    pub stepsize_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_feature_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_inner: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Linear-loss coefficient vector; the worst-case law is
    /// `N(anchor + tau a, (eps/2) I)`.
    pub a: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerObjectiveSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_stepsize: Option<f64>,
}

/// A full experiment spec. [`validate_spec`] produces the canonical form:
/// every relevant optional key filled with its default, every irrelevant
/// section absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentSection,
    pub problem: ProblemSection,
    pub method: MethodSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer: Option<OuterSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_objective: Option<InnerObjectiveSection>,
}

/// Parse and validate a spec file, returning the canonical echo or the full
/// list of violations (each naming its key path).
pub fn validate_spec(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = toml::from_str(text)
        .map_err(|e| Error::SpecValidation(vec![format!("{}", e.message())]))?;
    canonicalize(spec)
}

/// Serialize a spec in the canonical file format.
pub fn serialize_spec(spec: &ExperimentSpec) -> Result<String> {
    toml::to_string_pretty(spec)
        .map_err(|e| Error::InvalidArgument(format!("spec not serializable: {e}")))
}

struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn new() -> Self {
        Checker { errors: Vec::new() }
    }

    fn require(&mut self, ok: bool, message: impl Into<String>) {
        if !ok {
            self.errors.push(message.into());
        }
    }

    fn finish(self) -> Result<()> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(Error::SpecValidation(self.errors))
        }
    }
}

/// Validate every constraint eagerly and fill algorithmic defaults.
pub fn canonicalize(mut spec: ExperimentSpec) -> Result<ExperimentSpec> {
    let mut c = Checker::new();
    let kind = spec.experiment.kind;
    let method = spec.method.name;

    c.require(
        !spec.experiment.output_dir.is_empty(),
        "experiment.output_dir must not be empty",
    );

    // problem: tau and epsilon are mandatory by schema; check their domains
    c.require(
        spec.problem.tau > 0.0 && spec.problem.tau.is_finite(),
        format!("problem.tau must be > 0, got {}", spec.problem.tau),
    );
    c.require(
        spec.problem.epsilon >= 0.0 && spec.problem.epsilon.is_finite(),
        format!("problem.epsilon must be >= 0, got {}", spec.problem.epsilon),
    );
    if spec.problem.cost.is_none() {
        spec.problem.cost = Some(match kind {
            ExperimentKind::UncertainLs | ExperimentKind::SamplerOracle => {
                CostName::SquaredEuclidean
            }
            _ => CostName::SquaredEuclideanWithFixedLabel,
        });
    }

    // method / sampler section pairing
    let is_sampler = method.sampler().is_some();
    if is_sampler {
        c.require(
            spec.sampler.is_some(),
            format!("sampler section is required for method.name = {}", method.name()),
        );
    } else {
        c.require(
            spec.sampler.is_none(),
            format!("sampler section is not used by method.name = {}", method.name()),
        );
    }
    match kind {
        ExperimentKind::SamplerOracle | ExperimentKind::InnerObjective => c.require(
            is_sampler,
            format!("{} requires a sampler method, got {}", kind.name(), method.name()),
        ),
        _ => {}
    }

    if let Some(s) = spec.sampler.as_mut() {
        c.require(s.eta > 0.0 && s.eta.is_finite(), format!("sampler.eta must be > 0, got {}", s.eta));
        c.require(s.m >= 1, "sampler.m must be >= 1");
        let eta_w = *s.eta_w.get_or_insert(0.0);
        c.require(eta_w >= 0.0, format!("sampler.eta_w must be >= 0, got {eta_w}"));
        let w_min = *s.w_min.get_or_insert(0.0);
        c.require(
            (0.0..=1.0 / s.m.max(1) as f64).contains(&w_min),
            format!("sampler.w_min must lie in [0, 1/m], got {w_min}"),
        );
        let sigma = *s.sigma_init.get_or_insert(0.1);
        c.require(sigma >= 0.0, format!("sampler.sigma_init must be >= 0, got {sigma}"));
        let l = *s.smoothness_l.get_or_insert(0.0);
        c.require(l >= 0.0, format!("sampler.smoothness_l must be >= 0, got {l}"));
        match s.kernel_bandwidth.get_or_insert(BandwidthSpec::Named("median-heuristic".into())) {
            BandwidthSpec::Named(name) => c.require(
                name == "median-heuristic",
                format!("sampler.kernel_bandwidth must be 'median-heuristic' or a positive float, got '{name}'"),
            ),
            BandwidthSpec::Fixed(h) => {
                c.require(*h > 0.0, format!("sampler.kernel_bandwidth must be > 0, got {h}"))
            }
        }
        if method == MethodName::Wfr && spec.problem.tau > 0.0 {
            let factor = spec.problem.epsilon * eta_w / (2.0 * spec.problem.tau);
            c.require(
                factor < 1.0,
                format!("sampler.eta_w: epsilon * eta_w / (2 tau) = {factor} must be < 1"),
            );
        }
        if method == MethodName::Svgd {
            c.require(
                spec.problem.epsilon > 0.0,
                "method.name = svgd requires problem.epsilon > 0 (the drive scale is 2 tau / epsilon)",
            );
        }
        if method == MethodName::Rgo {
            c.require(
                l * spec.problem.tau < 1.0,
                format!(
                    "sampler.smoothness_l: rgo requires smoothness_l * tau < 1, got {}",
                    l * spec.problem.tau
                ),
            );
            c.require(
                spec.problem.epsilon > 0.0,
                "method.name = rgo requires problem.epsilon > 0",
            );
        }
    }

    // outer loop
    if kind.trains() {
        c.require(spec.outer.is_some(), format!("outer section is required for {}", kind.name()));
    } else {
        c.require(
            spec.outer.is_none(),
            format!("outer section is not used by {}", kind.name()),
        );
    }
    if let Some(o) = spec.outer.as_mut() {
        c.require(
            o.epochs.is_some() != o.steps.is_some(),
            "outer: exactly one of epochs / steps must be set",
        );
        c.require(
            o.stepsize_value > 0.0 && o.stepsize_value.is_finite(),
            format!("outer.stepsize_value must be > 0, got {}", o.stepsize_value),
        );
        let batch = *o.batch.get_or_insert(1);
        c.require(batch >= 1, "outer.batch must be >= 1");
        let projection = *o.projection.get_or_insert(ProjectionKind::Identity);
        match projection {
            ProjectionKind::Identity => c.require(
                o.projection_radius.is_none(),
                "outer.projection_radius is only used with projection = 'l2-ball'",
            ),
            ProjectionKind::L2Ball => {
                let radius = o.projection_radius.unwrap_or(0.0);
                c.require(
                    radius > 0.0,
                    "outer.projection_radius must be > 0 for projection = 'l2-ball'",
                );
            }
        }
    }

    // dataset section relevance
    let allowed_dataset_keys: &[&str] = match kind {
        ExperimentKind::BiasedCircle => &["n_train", "n_test"],
        ExperimentKind::TwoMoons | ExperimentKind::InnerObjective => {
            &["n_train", "n_test", "noise", "positive_fraction"]
        }
        ExperimentKind::FeatureRobustness => &[
            "n_train",
            "n_test",
            "d",
            "classes",
            "margin",
            "feature_file",
            "test_feature_file",
        ],
        ExperimentKind::UncertainLs => &["n_test", "delta_grid"],
        ExperimentKind::SamplerOracle => &[],
    };
    if kind == ExperimentKind::SamplerOracle {
        c.require(spec.dataset.is_none(), "dataset section is not used by sampler-oracle");
    }
    if let Some(d) = spec.dataset.as_ref() {
        let present: Vec<(&str, bool)> = vec![
            ("n_train", d.n_train.is_some()),
            ("n_test", d.n_test.is_some()),
            ("noise", d.noise.is_some()),
            ("positive_fraction", d.positive_fraction.is_some()),
            ("d", d.d.is_some()),
            ("classes", d.classes.is_some()),
            ("margin", d.margin.is_some()),
            ("delta_grid", d.delta_grid.is_some()),
            ("feature_file", d.feature_file.is_some()),
            ("test_feature_file", d.test_feature_file.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed_dataset_keys.contains(&key) {
                c.errors.push(format!("dataset.{key} is not used by {}", kind.name()));
            }
        }
    }
    // fill dataset defaults for kinds that use one
    if kind != ExperimentKind::SamplerOracle {
        let d = spec.dataset.get_or_insert_with(DatasetSection::default);
        match kind {
            ExperimentKind::BiasedCircle => {
                d.n_train.get_or_insert(200);
                d.n_test.get_or_insert(1000);
            }
            ExperimentKind::TwoMoons | ExperimentKind::InnerObjective => {
                d.n_train.get_or_insert(200);
                d.n_test.get_or_insert(400);
                let noise = *d.noise.get_or_insert(0.1);
                c.require(noise >= 0.0, format!("dataset.noise must be >= 0, got {noise}"));
                let pf = *d.positive_fraction.get_or_insert(0.9);
                c.require(
                    pf > 0.0 && pf < 1.0,
                    format!("dataset.positive_fraction must lie in (0, 1), got {pf}"),
                );
            }
            ExperimentKind::FeatureRobustness => {
                d.n_train.get_or_insert(2000);
                d.n_test.get_or_insert(1000);
                let dim = *d.d.get_or_insert(64);
                let classes = *d.classes.get_or_insert(10);
                c.require(classes >= 2, "dataset.classes must be >= 2");
                c.require(
                    dim >= classes,
                    format!("dataset.d must be >= dataset.classes ({dim} < {classes})"),
                );
                let margin = *d.margin.get_or_insert(3.0);
                c.require(margin > 0.0, format!("dataset.margin must be > 0, got {margin}"));
                c.require(
                    d.feature_file.is_some() == d.test_feature_file.is_some(),
                    "dataset.feature_file and dataset.test_feature_file must be set together",
                );
            }
            ExperimentKind::UncertainLs => {
                d.n_test.get_or_insert(1000);
                let grid = d
                    .delta_grid
                    .get_or_insert_with(|| (0..=10).map(|k| k as f64).collect());
                c.require(!grid.is_empty(), "dataset.delta_grid must not be empty");
                c.require(
                    grid.iter().all(|&x| x >= 0.0),
                    "dataset.delta_grid entries must be >= 0",
                );
            }
            ExperimentKind::SamplerOracle => unreachable!(),
        }
        if let Some(n) = d.n_train {
            c.require(n >= 1, "dataset.n_train must be >= 1");
        }
        if let Some(n) = d.n_test {
            c.require(n >= 1, "dataset.n_test must be >= 1");
        }
    }

    // attack section: only the feature-robustness experiment runs PGD
    if kind == ExperimentKind::FeatureRobustness {
        let defaults = AttackConfig::default();
        let a = spec.attack.get_or_insert(AttackSection {
            delta_grid: None,
            steps: None,
            step_scale: None,
        });
        let grid = a.delta_grid.get_or_insert(defaults.delta_grid);
        c.require(!grid.is_empty(), "attack.delta_grid must not be empty");
        c.require(grid.iter().all(|&x| x >= 0.0), "attack.delta_grid entries must be >= 0");
        let steps = *a.steps.get_or_insert(defaults.steps);
        c.require(steps >= 1, "attack.steps must be >= 1");
        let scale = *a.step_scale.get_or_insert(defaults.step_scale);
        c.require(scale > 0.0, format!("attack.step_scale must be > 0, got {scale}"));
    } else {
        c.require(
            spec.attack.is_none(),
            format!("attack section is not used by {}", kind.name()),
        );
    }

    // dual baseline settings
    if method == MethodName::Dual {
        let defaults = DualConfig::default();
        let d = spec.dual.get_or_insert(DualSection {
            radius_r: None,
            n_inner: None,
            tau_lo: None,
            tau_hi: None,
        });
        let r = *d.radius_r.get_or_insert(defaults.radius_r);
        c.require(r > 0.0, format!("dual.radius_r must be > 0, got {r}"));
        let n_inner = *d.n_inner.get_or_insert(defaults.n_inner);
        c.require(n_inner >= 2, "dual.n_inner must be >= 2");
        let lo = *d.tau_lo.get_or_insert(defaults.tau_bracket.0);
        let hi = *d.tau_hi.get_or_insert(defaults.tau_bracket.1);
        c.require(
            lo > 0.0 && hi > lo,
            format!("dual.tau_lo / dual.tau_hi must satisfy 0 < lo < hi, got ({lo}, {hi})"),
        );
        c.require(
            spec.problem.epsilon > 0.0,
            "method.name = dual requires problem.epsilon > 0",
        );
    } else {
        c.require(
            spec.dual.is_none(),
            format!("dual section is not used by method.name = {}", method.name()),
        );
    }

    // oracle section
    if kind == ExperimentKind::SamplerOracle {
        match spec.oracle.as_mut() {
            None => c.errors.push("oracle section is required for sampler-oracle".into()),
            Some(o) => {
                c.require(!o.a.is_empty(), "oracle.a must not be empty");
                let dim = o.a.len();
                let anchor = o.anchor.get_or_insert_with(|| vec![0.0; dim]);
                c.require(
                    anchor.len() == dim,
                    format!("oracle.anchor must have the same length as oracle.a ({dim})"),
                );
            }
        }
    } else {
        c.require(
            spec.oracle.is_none(),
            format!("oracle section is not used by {}", kind.name()),
        );
    }

    // inner-objective settings
    if kind == ExperimentKind::InnerObjective {
        let io = spec.inner_objective.get_or_insert(InnerObjectiveSection {
            record_every: None,
            pretrain_epochs: None,
            pretrain_stepsize: None,
        });
        let every = *io.record_every.get_or_insert(1);
        c.require(every >= 1, "inner_objective.record_every must be >= 1");
        let epochs = *io.pretrain_epochs.get_or_insert(100);
        c.require(epochs >= 1, "inner_objective.pretrain_epochs must be >= 1");
        let step = *io.pretrain_stepsize.get_or_insert(0.1);
        c.require(step > 0.0, format!("inner_objective.pretrain_stepsize must be > 0, got {step}"));
    } else {
        c.require(
            spec.inner_objective.is_none(),
            format!("inner_objective section is not used by {}", kind.name()),
        );
    }

    c.finish()?;
    Ok(spec)
}

impl ExperimentSpec {
    pub fn robustness_params(&self) -> Result<RobustnessParams> {
        RobustnessParams::new(self.problem.tau, self.problem.epsilon)
    }

    pub fn cost(&self) -> CostFunction {
        self.problem.cost.expect("canonical spec").to_cost()
    }

    /// Sampler configuration (canonical specs only).
    pub fn sampler_config(&self) -> Result<SamplerConfig> {
        let method = self.method.name.sampler().ok_or_else(|| {
            Error::InvalidConfig(format!("method {} has no sampler config", self.method.name.name()))
        })?;
        let s = self
            .sampler
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing sampler section".into()))?;
        let mut cfg = SamplerConfig::new(method);
        cfg.eta = s.eta;
        cfg.t = s.t;
        cfg.m = s.m;
        cfg.eta_w = s.eta_w.unwrap_or(0.0);
        cfg.w_min = s.w_min.unwrap_or(0.0);
        cfg.sigma_init = s.sigma_init.unwrap_or(0.1);
        cfg.smoothness_l = s.smoothness_l.unwrap_or(0.0);
        cfg.kernel_bandwidth = match &s.kernel_bandwidth {
            Some(BandwidthSpec::Fixed(h)) => KernelBandwidth::Fixed(*h),
            _ => KernelBandwidth::MedianHeuristic,
        };
        Ok(cfg)
    }

    /// Outer-loop configuration (canonical specs only).
    pub fn outer_config(&self) -> Result<OuterLoopConfig> {
        let o = self
            .outer
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing outer section".into()))?;
        let schedule = match (o.epochs, o.steps) {
            (Some(e), None) => OuterSchedule::Epochs(e),
            (None, Some(s)) => OuterSchedule::Steps(s),
            _ => return Err(Error::InvalidConfig("outer: exactly one of epochs / steps".into())),
        };
        let stepsize = match o.stepsize_kind {
            StepsizeKind::Constant => StepsizeSchedule::Constant(o.stepsize_value),
            StepsizeKind::InverseSqrt => StepsizeSchedule::InverseSqrt(o.stepsize_value),
        };
        let mut cfg = OuterLoopConfig::new(schedule, stepsize);
        cfg.batch = o.batch.unwrap_or(1);
        cfg.projection = match o.projection.unwrap_or(ProjectionKind::Identity) {
            ProjectionKind::Identity => Projection::Identity,
            ProjectionKind::L2Ball => Projection::L2Ball(o.projection_radius.unwrap_or(1.0)),
        };
        Ok(cfg)
    }

    pub fn dual_config(&self) -> DualConfig {
        let defaults = DualConfig::default();
        match &self.dual {
            None => defaults,
            Some(d) => DualConfig {
                radius_r: d.radius_r.unwrap_or(defaults.radius_r),
                n_inner: d.n_inner.unwrap_or(defaults.n_inner),
                tau_bracket: (
                    d.tau_lo.unwrap_or(defaults.tau_bracket.0),
                    d.tau_hi.unwrap_or(defaults.tau_bracket.1),
                ),
            },
        }
    }

    pub fn attack_config(&self) -> AttackConfig {
        let defaults = AttackConfig::default();
        match &self.attack {
            None => defaults,
            Some(a) => AttackConfig {
                delta_grid: a.delta_grid.clone().unwrap_or(defaults.delta_grid),
                steps: a.steps.unwrap_or(defaults.steps),
                step_scale: a.step_scale.unwrap_or(defaults.step_scale),
            },
        }
    }
}
