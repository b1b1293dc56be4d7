//! Experiment execution: build data, train, evaluate, and emit the CSV
//! artifact family for each experiment kind.

use std::path::{Path, PathBuf};

use super::csv::{fmt_float, CsvTable};
use super::spec::{canonicalize, serialize_spec, ExperimentKind, ExperimentSpec, MethodName};
use crate::datasets::{
    gen_biased_circle, gen_circle, gen_synthetic_features, gen_two_moons, gen_uncertain_ls,
    load_features, LabeledDataset,
};
use crate::driver::{dual_train, saa_train, train, TrainReport};
use crate::error::{Error, Result};
use crate::eval::{attacked_error_rate, inner_objective_curve, misclassification_rate, quadrant_fraction};
use crate::loss::{LabeledPoint, LossOracle, MlpArchitecture};
use crate::problem::RobustProblem;
use crate::rng::RngStream;
use crate::samplers::sample_worst_case_detailed;

/// Stream word separating test-set generation from training-set generation.
const TEST_DATA_TAG: u64 = 0x7E57;
/// Stream word for the inner-objective curve runs.
const CURVE_TAG: u64 = 0xC0DE;

const CIRCLE_HIDDEN: &[usize] = &[4];
const MOONS_HIDDEN: &[usize] = &[16, 16];

fn derived_seed(seed: u64, tag: u64) -> u64 {
    RngStream::new(seed).child(tag).seed()
}

/// Everything one experiment run produces. CSV bodies are byte-deterministic
/// under a fixed spec; wall-clock information lives only in `metadata`.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub spec: ExperimentSpec,
    pub output_dir: PathBuf,
    /// `(file name, body)` pairs, also written under `output_dir`.
    pub csv_files: Vec<(String, String)>,
    /// Sidecar metadata (timestamps, wall clock, environment stamp).
    pub metadata: String,
    /// File the method comparison merges on.
    pub primary_table: &'static str,
}

impl RunArtifact {
    pub fn csv_body(&self, name: &str) -> Option<&str> {
        self.csv_files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_str())
    }
}

fn accuracy(oracle: &LossOracle, theta: &[f64], data: &LabeledDataset) -> Result<f64> {
    Ok(1.0 - misclassification_rate(oracle, theta, data)?)
}

fn run_training(
    spec: &ExperimentSpec,
    problem: &RobustProblem,
    data: &LabeledDataset,
    record_clouds: bool,
) -> Result<TrainReport> {
    let mut outer = spec.outer_config()?;
    outer.record_first_epoch_clouds = record_clouds && spec.method.name.sampler().is_some();
    match spec.method.name {
        MethodName::Saa => saa_train(problem, data, &outer, spec.experiment.seed),
        MethodName::Dual => {
            dual_train(problem, data, &spec.dual_config(), &outer, spec.experiment.seed)
        }
        _ => train(problem, data, &spec.sampler_config()?, &outer, spec.experiment.seed),
    }
}

fn checkpoints_table(report: &TrainReport) -> CsvTable {
    let mut t = CsvTable::new(&["epoch", "param_index", "value"]);
    for (e, theta) in report.epoch_checkpoints.iter().enumerate() {
        for (k, v) in theta.iter().enumerate() {
            t.push_row(vec![(e + 1).to_string(), k.to_string(), fmt_float(*v)]);
        }
    }
    t
}

fn trace_table(report: &TrainReport) -> CsvTable {
    let mut t = CsvTable::new(&["step", "grad_norm", "loss_estimate"]);
    for s in 0..report.grad_norms.len() {
        t.push_row(vec![
            s.to_string(),
            fmt_float(report.grad_norms[s]),
            fmt_float(report.loss_estimates[s]),
        ]);
    }
    t
}

struct Outputs {
    csv_files: Vec<(String, String)>,
    extra_metadata: Vec<String>,
    primary_table: &'static str,
}

fn execute(spec: &ExperimentSpec) -> Result<Outputs> {
    match spec.experiment.kind {
        ExperimentKind::SamplerOracle => run_sampler_oracle(spec),
        ExperimentKind::BiasedCircle => run_biased_circle(spec),
        ExperimentKind::TwoMoons => run_two_moons(spec),
        ExperimentKind::InnerObjective => run_inner_objective(spec),
        ExperimentKind::FeatureRobustness => run_feature_robustness(spec),
        ExperimentKind::UncertainLs => run_uncertain_ls(spec),
    }
}

fn run_sampler_oracle(spec: &ExperimentSpec) -> Result<Outputs> {
    let oracle_cfg = spec.oracle.as_ref().expect("canonical spec");
    let a = oracle_cfg.a.clone();
    let anchor_features = oracle_cfg.anchor.clone().expect("canonical spec");
    let problem = RobustProblem::new(
        LossOracle::Linear { dim: a.len() },
        spec.cost(),
        spec.robustness_params()?,
    );
    let anchor = LabeledPoint::unlabeled(anchor_features.clone());
    let cfg = spec.sampler_config()?;
    let scope = crate::samplers::InnerRngScope::new(RngStream::new(spec.experiment.seed), 0, 0);
    let outcome = sample_worst_case_detailed(&problem, &a, &anchor, &cfg, scope)?;
    let mean = outcome.cloud.weighted_mean();
    let var = outcome.cloud.weighted_variance();
    let tau = spec.problem.tau;
    let eps = spec.problem.epsilon;
    let mut table = CsvTable::new(&[
        "coord",
        "empirical_mean",
        "oracle_mean",
        "empirical_var",
        "oracle_var",
    ]);
    for c in 0..a.len() {
        table.push_row(vec![
            c.to_string(),
            fmt_float(mean[c]),
            fmt_float(anchor_features[c] + tau * a[c]),
            fmt_float(var[c]),
            fmt_float(eps / 2.0),
        ]);
    }
    let mut extra = Vec::new();
    if let Some(stats) = outcome.rgo_stats {
        extra.push(format!(
            "rgo_samples = {}\nrgo_trials = {}\nrgo_acceptance_rate = {}",
            stats.samples,
            stats.trials,
            stats.acceptance_rate()
        ));
    }
    Ok(Outputs {
        csv_files: vec![("sampler_oracle.csv".into(), table.body())],
        extra_metadata: extra,
        primary_table: "sampler_oracle.csv",
    })
}

fn circle_problem(spec: &ExperimentSpec) -> Result<RobustProblem> {
    Ok(RobustProblem::new(
        LossOracle::MlpBce(MlpArchitecture::new(2, CIRCLE_HIDDEN.to_vec())?),
        spec.cost(),
        spec.robustness_params()?,
    ))
}

fn run_biased_circle(spec: &ExperimentSpec) -> Result<Outputs> {
    let ds = spec.dataset.as_ref().expect("canonical spec");
    let seed = spec.experiment.seed;
    let train_data = gen_biased_circle(ds.n_train.unwrap(), seed)?;
    let test_data = gen_circle(ds.n_test.unwrap(), derived_seed(seed, TEST_DATA_TAG), false)?;
    let problem = circle_problem(spec)?;
    let report = run_training(spec, &problem, &train_data, true)?;
    let theta = &report.final_theta;

    let quadrant = if report.first_epoch_clouds.is_empty() {
        f64::NAN
    } else {
        quadrant_fraction(&report.first_epoch_clouds)?
    };
    let mut acc = CsvTable::new(&["metric", "value"]);
    acc.push_row(vec![
        "train_accuracy".into(),
        fmt_float(accuracy(&problem.loss, theta, &train_data)?),
    ]);
    acc.push_row(vec![
        "test_accuracy".into(),
        fmt_float(accuracy(&problem.loss, theta, &test_data)?),
    ]);
    acc.push_row(vec!["quadrant_fraction_epoch1".into(), fmt_float(quadrant)]);
    Ok(Outputs {
        csv_files: vec![
            ("accuracy.csv".into(), acc.body()),
            ("training_trace.csv".into(), trace_table(&report).body()),
            ("theta_checkpoints.csv".into(), checkpoints_table(&report).body()),
        ],
        extra_metadata: vec![format!("train_wall_clock_secs = {}", report.wall_clock_secs)],
        primary_table: "accuracy.csv",
    })
}

fn moons_problem(spec: &ExperimentSpec) -> Result<RobustProblem> {
    Ok(RobustProblem::new(
        LossOracle::MlpBce(MlpArchitecture::new(2, MOONS_HIDDEN.to_vec())?),
        spec.cost(),
        spec.robustness_params()?,
    ))
}

fn moons_train_set(spec: &ExperimentSpec) -> Result<LabeledDataset> {
    let ds = spec.dataset.as_ref().expect("canonical spec");
    gen_two_moons(
        ds.n_train.unwrap(),
        ds.noise.unwrap(),
        ds.positive_fraction.unwrap(),
        spec.experiment.seed,
    )
}

fn run_two_moons(spec: &ExperimentSpec) -> Result<Outputs> {
    let ds = spec.dataset.as_ref().expect("canonical spec");
    let train_data = moons_train_set(spec)?;
    let test_data = gen_two_moons(
        ds.n_test.unwrap(),
        ds.noise.unwrap(),
        0.5,
        derived_seed(spec.experiment.seed, TEST_DATA_TAG),
    )?;
    let problem = moons_problem(spec)?;
    let report = run_training(spec, &problem, &train_data, false)?;
    let theta = &report.final_theta;
    let mut acc = CsvTable::new(&["metric", "value"]);
    acc.push_row(vec![
        "train_accuracy".into(),
        fmt_float(accuracy(&problem.loss, theta, &train_data)?),
    ]);
    acc.push_row(vec![
        "test_accuracy".into(),
        fmt_float(accuracy(&problem.loss, theta, &test_data)?),
    ]);
    Ok(Outputs {
        csv_files: vec![
            ("accuracy.csv".into(), acc.body()),
            ("training_trace.csv".into(), trace_table(&report).body()),
            ("theta_checkpoints.csv".into(), checkpoints_table(&report).body()),
        ],
        extra_metadata: vec![format!("train_wall_clock_secs = {}", report.wall_clock_secs)],
        primary_table: "accuracy.csv",
    })
}

/// Pretrain an SAA model on the dataset, then trace the configured inner
/// sampler's expected tilted potential across its iterations.
fn run_inner_objective(spec: &ExperimentSpec) -> Result<Outputs> {
    use crate::driver::{OuterLoopConfig, OuterSchedule, StepsizeSchedule};
    let io = spec.inner_objective.as_ref().expect("canonical spec");
    let data = moons_train_set(spec)?;
    let problem = moons_problem(spec)?;
    let pretrain_outer = OuterLoopConfig::new(
        OuterSchedule::Epochs(io.pretrain_epochs.unwrap()),
        StepsizeSchedule::Constant(io.pretrain_stepsize.unwrap()),
    );
    let pretrained = saa_train(&problem, &data, &pretrain_outer, spec.experiment.seed)?;
    let cfg = spec.sampler_config()?;
    let curve = inner_objective_curve(
        &problem,
        &pretrained.final_theta,
        &data,
        &cfg,
        io.record_every.unwrap(),
        &RngStream::new(spec.experiment.seed).child(CURVE_TAG),
    )?;
    let mut table = CsvTable::new(&["iteration", "value"]);
    for (i, v) in curve.iterations.iter().zip(&curve.expected_potential) {
        table.push_row(vec![i.to_string(), fmt_float(*v)]);
    }
    Ok(Outputs {
        csv_files: vec![("inner_objective.csv".into(), table.body())],
        extra_metadata: vec![format!(
            "pretrain_epochs = {}\npretrain_final_loss = {}",
            io.pretrain_epochs.unwrap(),
            pretrained.loss_estimates.last().copied().unwrap_or(f64::NAN)
        )],
        primary_table: "inner_objective.csv",
    })
}

fn run_feature_robustness(spec: &ExperimentSpec) -> Result<Outputs> {
    let ds = spec.dataset.as_ref().expect("canonical spec");
    let seed = spec.experiment.seed;
    let (train_data, test_data) = match (&ds.feature_file, &ds.test_feature_file) {
        (Some(train_path), Some(test_path)) => {
            let tr = load_features(Path::new(train_path))?;
            let te = load_features(Path::new(test_path))?;
            if tr.dim() != te.dim() || tr.class_count() != te.class_count() {
                return Err(Error::InvalidArgument(
                    "train and test feature files disagree on d or classes".into(),
                ));
            }
            (tr, te)
        }
        _ => {
            let d = ds.d.unwrap();
            let classes = ds.classes.unwrap();
            let margin = ds.margin.unwrap();
            (
                gen_synthetic_features(ds.n_train.unwrap(), d, classes, margin, seed)?,
                gen_synthetic_features(
                    ds.n_test.unwrap(),
                    d,
                    classes,
                    margin,
                    derived_seed(seed, TEST_DATA_TAG),
                )?,
            )
        }
    };
    let problem = RobustProblem::new(
        LossOracle::SoftmaxLogistic {
            feature_dim: train_data.dim(),
            classes: train_data.class_count(),
        },
        spec.cost(),
        spec.robustness_params()?,
    );
    let report = run_training(spec, &problem, &train_data, false)?;
    let theta = &report.final_theta;
    let attack = spec.attack_config();

    let mut acc = CsvTable::new(&["metric", "value"]);
    acc.push_row(vec![
        "train_accuracy".into(),
        fmt_float(accuracy(&problem.loss, theta, &train_data)?),
    ]);
    acc.push_row(vec![
        "test_accuracy".into(),
        fmt_float(accuracy(&problem.loss, theta, &test_data)?),
    ]);
    let mut curve = CsvTable::new(&["delta", "value"]);
    for &delta in &attack.delta_grid {
        let err = attacked_error_rate(&problem.loss, theta, &test_data, delta, &attack)?;
        curve.push_row(vec![fmt_float(delta), fmt_float(err)]);
    }
    Ok(Outputs {
        csv_files: vec![
            ("robustness_curve.csv".into(), curve.body()),
            ("accuracy.csv".into(), acc.body()),
            ("training_trace.csv".into(), trace_table(&report).body()),
            ("theta_checkpoints.csv".into(), checkpoints_table(&report).body()),
        ],
        extra_metadata: vec![format!(
            "attack_steps = {}\nattack_step_scale = {}\ntrain_wall_clock_secs = {}",
            attack.steps, attack.step_scale, report.wall_clock_secs
        )],
        primary_table: "robustness_curve.csv",
    })
}

fn run_uncertain_ls(spec: &ExperimentSpec) -> Result<Outputs> {
    let ds = spec.dataset.as_ref().expect("canonical spec");
    let seed = spec.experiment.seed;
    let instance = gen_uncertain_ls(seed);
    let data = instance.train_dataset();
    let problem = RobustProblem::new(
        LossOracle::UncertainLs(instance.system.clone()),
        spec.cost(),
        spec.robustness_params()?,
    );
    let report = run_training(spec, &problem, &data, false)?;
    let theta = &report.final_theta;
    let n_test = ds.n_test.unwrap();
    let grid = ds.delta_grid.clone().unwrap();
    let mut curve = CsvTable::new(&["delta", "value"]);
    for &delta in &grid {
        let xis = instance.test_xi(delta, n_test, derived_seed(seed, TEST_DATA_TAG));
        let mut loss = 0.0;
        for xi in &xis {
            loss += problem.loss.value(theta, &LabeledPoint::unlabeled(vec![*xi]))?;
        }
        curve.push_row(vec![fmt_float(delta), fmt_float(loss / n_test as f64)]);
    }
    Ok(Outputs {
        csv_files: vec![
            ("robustness_curve.csv".into(), curve.body()),
            ("training_trace.csv".into(), trace_table(&report).body()),
            ("theta_checkpoints.csv".into(), checkpoints_table(&report).body()),
        ],
        extra_metadata: vec![format!("train_wall_clock_secs = {}", report.wall_clock_secs)],
        primary_table: "robustness_curve.csv",
    })
}

/// Validate, execute and write one experiment. Nothing is written unless the
/// spec validates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunArtifact> {
    let canonical = canonicalize(spec.clone())?;
    let started = std::time::Instant::now();
    let outputs = execute(&canonical)?;
    let output_dir = PathBuf::from(&canonical.experiment.output_dir);
    std::fs::create_dir_all(&output_dir)?;
    let echo = serialize_spec(&canonical)?;
    std::fs::write(output_dir.join("config_echo.toml"), &echo)?;
    for (name, body) in &outputs.csv_files {
        std::fs::write(output_dir.join(name), body)?;
    }
    let mut metadata = String::new();
    metadata.push_str(&format!(
        "experiment = {}\nmethod = {}\nseed = {}\nversion = {}\n",
        canonical.experiment.kind.name(),
        canonical.method.name.name(),
        canonical.experiment.seed,
        env!("CARGO_PKG_VERSION"),
    ));
    metadata.push_str(&format!(
        "threads = {}\n",
        std::env::var("GFSDRO_THREADS").unwrap_or_else(|_| "default".into())
    ));
    metadata.push_str(&format!(
        "unix_time_secs = {}\nwall_clock_secs = {}\n",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        started.elapsed().as_secs_f64(),
    ));
    for line in &outputs.extra_metadata {
        metadata.push_str(line);
        metadata.push('\n');
    }
    std::fs::write(output_dir.join("run_meta.txt"), &metadata)?;
    Ok(RunArtifact {
        spec: canonical,
        output_dir,
        csv_files: outputs.csv_files,
        metadata,
        primary_table: outputs.primary_table,
    })
}

/// Run several specs that share an experiment, dataset and seed, and merge
/// their primary tables into one wide CSV (rows keyed by delta / iteration /
/// metric, one column per method).
pub fn compare_methods(specs: &[ExperimentSpec], out_dir: &Path) -> Result<(PathBuf, String)> {
    use super::csv::parse_simple_csv;
    if specs.is_empty() {
        return Err(Error::InvalidArgument("compare needs at least one spec".into()));
    }
    let canonical: Vec<ExperimentSpec> = specs
        .iter()
        .map(|s| canonicalize(s.clone()))
        .collect::<Result<Vec<_>>>()?;
    let first = &canonical[0];
    for other in &canonical[1..] {
        if other.experiment.kind != first.experiment.kind {
            return Err(Error::InvalidArgument("compare specs differ in experiment.kind".into()));
        }
        if other.experiment.seed != first.experiment.seed {
            return Err(Error::InvalidArgument("compare specs differ in experiment.seed".into()));
        }
        if other.dataset != first.dataset {
            return Err(Error::InvalidArgument("compare specs differ in dataset section".into()));
        }
        if other.oracle != first.oracle {
            return Err(Error::InvalidArgument("compare specs differ in oracle section".into()));
        }
        if other.attack != first.attack {
            return Err(Error::InvalidArgument("compare specs differ in attack section".into()));
        }
        if other.inner_objective != first.inner_objective {
            return Err(Error::InvalidArgument(
                "compare specs differ in inner_objective section".into(),
            ));
        }
    }
    // value column merged per experiment family
    let value_col = match first.experiment.kind {
        ExperimentKind::SamplerOracle => "empirical_mean",
        _ => "value",
    };
    let mut key_column: Option<(String, Vec<String>)> = None;
    let mut columns: Vec<(String, Vec<String>)> = Vec::new();
    for spec in &canonical {
        let artifact = run_experiment(spec)?;
        let body = artifact
            .csv_body(artifact.primary_table)
            .ok_or_else(|| Error::InvalidArgument("missing primary table".into()))?;
        let (header, rows) = parse_simple_csv(body)
            .ok_or_else(|| Error::InvalidArgument("unparseable primary table".into()))?;
        let key_idx = 0usize;
        let value_idx = header
            .iter()
            .position(|h| h == value_col)
            .ok_or_else(|| Error::InvalidArgument(format!("missing column {value_col}")))?;
        let keys: Vec<String> = rows.iter().map(|r| r[key_idx].clone()).collect();
        match &key_column {
            None => key_column = Some((header[key_idx].clone(), keys)),
            Some((_, existing)) => {
                if *existing != keys {
                    return Err(Error::InvalidArgument(
                        "compare specs produced different key columns".into(),
                    ));
                }
            }
        }
        let mut name = spec.method.name.name().to_string().replace('-', "_");
        let mut suffix = 1usize;
        while columns.iter().any(|(n, _)| *n == name) {
            suffix += 1;
            name = format!("{}_{}", spec.method.name.name().replace('-', "_"), suffix);
        }
        columns.push((name, rows.iter().map(|r| r[value_idx].clone()).collect()));
    }
    let (key_name, keys) = key_column.expect("at least one spec");
    let mut header: Vec<&str> = vec![key_name.as_str()];
    header.extend(columns.iter().map(|(n, _)| n.as_str()));
    let mut table = CsvTable::new(&header);
    for (i, key) in keys.iter().enumerate() {
        let mut row = vec![key.clone()];
        for (_, vals) in &columns {
            row.push(vals[i].clone());
        }
        table.push_row(row);
    }
    std::fs::create_dir_all(out_dir)?;
    let file_name = format!(
        "compare_{}",
        canonical[0].experiment.kind.name().replace('-', "_")
    );
    let path = out_dir.join(format!("{file_name}.csv"));
    let body = table.body();
    std::fs::write(&path, &body)?;
    Ok((path, body))
}
