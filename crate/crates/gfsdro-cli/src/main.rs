//! `gfsdro` — run, validate and compare entropy-regularized Wasserstein DRO
//! experiments from declarative spec files.
//!
//! Exit codes: 0 success, 1 spec-validation error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gfsdro::experiment::{
    compare_methods, configured_threads, fmt_float, run_experiment, serialize_spec,
    validate_spec, ExperimentSpec,
};
use gfsdro::Error;

#[derive(Parser)]
#[command(name = "gfsdro", version, about = "Gradient-flow samplers for entropy-regularized Wasserstein DRO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment spec and write its CSV artifacts.
    Run {
        /// Path to the spec file.
        spec: PathBuf,
    },
    /// Run several specs sharing a dataset and seed; merge their primary
    /// metric tables into one wide CSV (one column per method).
    Compare {
        /// Paths to the spec files.
        specs: Vec<PathBuf>,
        /// Directory for the combined table.
        #[arg(long, default_value = "compare_out")]
        out: PathBuf,
    },
    /// Validate a spec file and echo its canonical form.
    Validate {
        /// Path to the spec file.
        spec: PathBuf,
    },
    /// Check analytic gradients of every loss family against central finite
    /// differences.
    Gradcheck {
        /// Evaluation points per family.
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 1234)]
        seed: u64,
    },
    /// Sample the closed-form linear-loss target with ULA and RGO and report
    /// empirical vs exact moments.
    Oracle {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Inner stepsize for the ULA run.
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        /// Inner iterations for the ULA run.
        #[arg(long, default_value_t = 5000)]
        t: usize,
        /// Particle count.
        #[arg(long, default_value_t = 2000)]
        m: usize,
    },
}

fn is_validation_error(e: &Error) -> bool {
    matches!(
        e,
        Error::SpecValidation(_)
            | Error::Parse { .. }
            | Error::InvalidConfig(_)
            | Error::InvalidArgument(_)
    )
}

fn load_spec(path: &PathBuf) -> Result<ExperimentSpec, Error> {
    let text = std::fs::read_to_string(path)?;
    validate_spec(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = configured_threads() {
        // 0 caps the pool to a single worker (serial execution)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if is_validation_error(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { spec } => {
            let spec = load_spec(&spec)?;
            let artifact = run_experiment(&spec)?;
            println!(
                "wrote {} file(s) to {}",
                artifact.csv_files.len() + 2,
                artifact.output_dir.display()
            );
            for (name, _) in &artifact.csv_files {
                println!("  {name}");
            }
            Ok(())
        }
        Command::Compare { specs, out } => {
            if specs.is_empty() {
                return Err(Error::InvalidArgument("compare needs at least one spec".into()));
            }
            let parsed: Result<Vec<ExperimentSpec>, Error> = specs.iter().map(load_spec).collect();
            let (path, body) = compare_methods(&parsed?, &out)?;
            println!("wrote {}", path.display());
            print!("{body}");
            Ok(())
        }
        Command::Validate { spec } => {
            let spec = load_spec(&spec)?;
            print!("{}", serialize_spec(&spec)?);
            Ok(())
        }
        Command::Gradcheck { points, seed } => {
            use gfsdro::loss::{
                finite_diff_check, LossOracle, Mat, MlpArchitecture, UncertainLsSystem,
            };
            use gfsdro::rng::RngStream;
            use rand::Rng;
            let mut rng = RngStream::new(seed).rng(&[0xAB]);
            let n = 10;
            let mut draw = |k: usize| -> Vec<f64> {
                (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
            };
            let families = vec![
                LossOracle::Linear { dim: 4 },
                LossOracle::MlpBce(MlpArchitecture::new(2, vec![16, 16])?),
                LossOracle::SoftmaxLogistic { feature_dim: 8, classes: 5 },
                LossOracle::UncertainLs(UncertainLsSystem::new(
                    Mat::new(n, n, draw(n * n))?,
                    Mat::new(n, n, draw(n * n))?,
                    draw(n),
                )?),
            ];
            println!("family,n_points,max_rel_err_theta,max_rel_err_input");
            let mut worst: f64 = 0.0;
            for oracle in &families {
                let report = finite_diff_check(oracle, points, seed)?;
                worst = worst.max(report.max_rel_err_theta).max(report.max_rel_err_input);
                println!(
                    "{},{},{},{}",
                    report.family,
                    report.n_points,
                    fmt_float(report.max_rel_err_theta),
                    fmt_float(report.max_rel_err_input)
                );
            }
            if points > 0 && worst >= 1e-5 {
                return Err(Error::OptimizerFailure(format!(
                    "gradient check failed: max relative error {worst:.3e} >= 1e-5"
                )));
            }
            Ok(())
        }
        Command::Oracle { seed, eta, t, m } => {
            use gfsdro::loss::{LabeledPoint, LossOracle};
            use gfsdro::problem::{CostFunction, RobustnessParams, RobustProblem};
            use gfsdro::rng::RngStream;
            use gfsdro::samplers::{
                sample_worst_case_detailed, InnerRngScope, SamplerConfig, SamplerMethod,
            };
            let (tau, eps) = (0.5, 0.5);
            let a = [1.0, 0.0];
            let problem = RobustProblem::new(
                LossOracle::Linear { dim: 2 },
                CostFunction::SquaredEuclidean,
                RobustnessParams::new(tau, eps)?,
            );
            let anchor = LabeledPoint::unlabeled(vec![0.0, 0.0]);
            println!("method,coord,empirical_mean,oracle_mean,empirical_var,oracle_var");
            for method in [SamplerMethod::WgfUla, SamplerMethod::Rgo] {
                let mut cfg = SamplerConfig::new(method);
                cfg.eta = eta;
                cfg.t = t;
                cfg.m = m;
                cfg.smoothness_l = 0.0;
                let scope = InnerRngScope::new(RngStream::new(seed), 0, 0);
                let outcome = sample_worst_case_detailed(&problem, &a, &anchor, &cfg, scope)?;
                let mean = outcome.cloud.weighted_mean();
                let var = outcome.cloud.weighted_variance();
                for c in 0..2 {
                    println!(
                        "{},{},{},{},{},{}",
                        method.name(),
                        c,
                        fmt_float(mean[c]),
                        fmt_float(anchor.features[c] + tau * a[c]),
                        fmt_float(var[c]),
                        fmt_float(eps / 2.0)
                    );
                }
                if let Some(stats) = outcome.rgo_stats {
                    println!(
                        "# rgo acceptance: {}/{} = {}",
                        stats.samples,
                        stats.trials,
                        stats.acceptance_rate()
                    );
                }
            }
            Ok(())
        }
    }
}
