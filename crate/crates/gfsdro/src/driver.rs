//! Outer robust-training loop: projected SGD on theta where each stochastic
//! gradient comes from worst-case particle clouds, plus the plain SAA/ERM
//! baseline and a nested-Monte-Carlo dual-objective baseline.

use rayon::prelude::*;

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, log_sum_exp};
use crate::loss::LabeledPoint;
use crate::problem::{ParticleCloud, RobustProblem};
use crate::rng::{tag, RngStream};
use crate::samplers::{sample_worst_case, SamplerConfig};

/// Outer stepsize schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeSchedule {
    Constant(f64),
    /// `r_s = r0 / sqrt(s + 1)` with `s` zero-based.
    InverseSqrt(f64),
}

impl StepsizeSchedule {
    pub fn at(&self, s: usize) -> f64 {
        match self {
            StepsizeSchedule::Constant(r) => *r,
            StepsizeSchedule::InverseSqrt(r0) => r0 / ((s + 1) as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = match self {
            StepsizeSchedule::Constant(r) | StepsizeSchedule::InverseSqrt(r) => *r,
        };
        if !(r > 0.0) {
            return Err(Error::InvalidConfig(format!("stepsize must be > 0, got {r}")));
        }
        Ok(())
    }
}

/// Projection onto the parameter constraint set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Identity,
    L2Ball(f64),
}

impl Projection {
    pub fn apply(&self, theta: &mut [f64]) {
        if let Projection::L2Ball(radius) = self {
            let n = linalg::norm(theta);
            if n > *radius {
                linalg::scale(theta, radius / n);
            }
        }
    }
}

/// Total outer work, either as raw steps or full passes over the anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterSchedule {
    Steps(usize),
    Epochs(usize),
}

/// Configuration of the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterLoopConfig {
    pub schedule: OuterSchedule,
    pub stepsize: StepsizeSchedule,
    /// Anchors drawn per outer step.
    pub batch: usize,
    pub projection: Projection,
    /// Keep the worst-case clouds generated during the first epoch (used by
    /// the quadrant-fraction diagnostic).
    pub record_first_epoch_clouds: bool,
}

impl OuterLoopConfig {
    pub fn new(schedule: OuterSchedule, stepsize: StepsizeSchedule) -> Self {
        OuterLoopConfig {
            schedule,
            stepsize,
            batch: 1,
            projection: Projection::Identity,
            record_first_epoch_clouds: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stepsize.validate()?;
        if self.batch == 0 {
            return Err(Error::InvalidConfig("anchor batch size must be >= 1".into()));
        }
        if let Projection::L2Ball(r) = self.projection {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig("projection radius must be > 0".into()));
            }
        }
        Ok(())
    }

    fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch)
    }

    fn total_steps(&self, n: usize) -> usize {
        match self.schedule {
            OuterSchedule::Steps(s) => s,
            OuterSchedule::Epochs(e) => e * self.steps_per_epoch(n),
        }
    }
}

/// Everything a training run records.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub final_theta: Vec<f64>,
    /// Norm of the (robust) gradient used at each outer step.
    pub grad_norms: Vec<f64>,
    /// Per-step objective estimate: the weighted worst-case loss for DRO
    /// methods, the batch loss for SAA, the dual value for the dual baseline.
    pub loss_estimates: Vec<f64>,
    /// Theta after each completed epoch.
    pub epoch_checkpoints: Vec<Vec<f64>>,
    /// Worst-case clouds from the first epoch, when recording was requested.
    pub first_epoch_clouds: Vec<ParticleCloud>,
    pub wall_clock_secs: f64,
    pub seed: u64,
    pub steps_run: usize,
}

/// Projected outer update `theta' = Proj(theta - r g)`.
pub fn outer_step(theta: &[f64], gradient: &[f64], r: f64, projection: &Projection) -> Vec<f64> {
    let mut next = theta.to_vec();
    linalg::axpy(-r, gradient, &mut next);
    projection.apply(&mut next);
    next
}

/// Robust gradient plus the diagnostics the training loop wants.
pub struct RobustStep {
    pub gradient: Vec<f64>,
    /// Batch average of the weighted worst-case loss.
    pub worst_case_loss: f64,
    pub clouds: Vec<ParticleCloud>,
}

/// For each anchor run the inner sampler and average the weighted parameter
/// gradients `sum_i w_i grad_theta loss(theta, y_i)` over the batch.
pub fn robust_gradient(
    problem: &RobustProblem,
    theta: &[f64],
    anchors: &[LabeledPoint],
    config: &SamplerConfig,
    stream: &RngStream,
    outer_step_idx: u64,
) -> Result<Vec<f64>> {
    robust_gradient_detailed(problem, theta, anchors, config, stream, outer_step_idx)
        .map(|s| s.gradient)
}

/// As [`robust_gradient`], also returning the loss estimate and the clouds.
pub fn robust_gradient_detailed(
    problem: &RobustProblem,
    theta: &[f64],
    anchors: &[LabeledPoint],
    config: &SamplerConfig,
    stream: &RngStream,
    outer_step_idx: u64,
) -> Result<RobustStep> {
    if anchors.is_empty() {
        return Err(Error::InvalidArgument("anchor batch must be nonempty".into()));
    }
    let per_anchor = |(a_idx, anchor): (usize, &LabeledPoint)| -> Result<(Vec<f64>, f64, ParticleCloud)> {
        let scope = crate::samplers::InnerRngScope::new(*stream, outer_step_idx, a_idx as u64);
        let cloud = sample_worst_case(problem, theta, anchor, config, scope)?;
        let w = cloud.weights();
        let mut grad = vec![0.0; theta.len()];
        let mut loss_acc = 0.0;
        for (i, pos) in cloud.positions().iter().enumerate() {
            let z = anchor.with_features(pos.clone());
            let g = problem.loss.grad_theta(theta, &z)?;
            linalg::axpy(w[i], &g, &mut grad);
            loss_acc += w[i] * problem.loss.value(theta, &z)?;
        }
        Ok((grad, loss_acc, cloud))
    };
    let results: Vec<(Vec<f64>, f64, ParticleCloud)> = if anchors.len() > 1 {
        anchors
            .par_iter()
            .enumerate()
            .map(per_anchor)
            .collect::<Result<Vec<_>>>()?
    } else {
        anchors
            .iter()
            .enumerate()
            .map(per_anchor)
            .collect::<Result<Vec<_>>>()?
    };
    let mut gradient = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut clouds = Vec::with_capacity(results.len());
    for (g, l, c) in results {
        linalg::axpy(1.0, &g, &mut gradient);
        loss += l;
        clouds.push(c);
    }
    let inv = 1.0 / anchors.len() as f64;
    linalg::scale(&mut gradient, inv);
    Ok(RobustStep { gradient, worst_case_loss: loss * inv, clouds })
}

/// Shuffled anchor order for one epoch (Fisher-Yates from the shuffle stream).
fn epoch_order(n: usize, stream: &RngStream, epoch: u64) -> Vec<usize> {
    use rand::Rng;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = stream.rng(&[tag::SHUFFLE, epoch]);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// The gradient source a training loop plugs into the shared outer loop.
enum GradientSource<'a> {
    Sampler(&'a SamplerConfig),
    Saa,
    Dual { config: &'a DualConfig },
}

fn batch_points(dataset: &LabeledDataset, order: &[usize], start: usize, batch: usize) -> Vec<LabeledPoint> {
    order[start..(start + batch).min(order.len())]
        .iter()
        .map(|&i| dataset.point(i))
        .collect()
}

fn run_outer_loop(
    problem: &RobustProblem,
    dataset: &LabeledDataset,
    source: GradientSource<'_>,
    outer: &OuterLoopConfig,
    seed: u64,
) -> Result<TrainReport> {
    outer.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset must be nonempty".into()));
    }
    let started = std::time::Instant::now();
    let stream = RngStream::new(seed);
    let mut theta = problem.loss.init_theta(&stream);
    let n = dataset.len();
    let steps_per_epoch = outer.steps_per_epoch(n);
    let total = outer.total_steps(n);

    let mut grad_norms = Vec::with_capacity(total);
    let mut loss_estimates = Vec::with_capacity(total);
    let mut epoch_checkpoints = Vec::new();
    let mut first_epoch_clouds = Vec::new();
    let mut order = epoch_order(n, &stream, 0);

    // the dual baseline re-tunes its dual variable at every epoch boundary
    let mut dual_tau_current = match &source {
        GradientSource::Dual { config } => {
            let anchors: Vec<LabeledPoint> = (0..n).map(|i| dataset.point(i)).collect();
            tune_dual_tau(problem, &theta, &anchors, config, &stream, 0)?
        }
        _ => 0.0,
    };

    for s in 0..total {
        let epoch = s / steps_per_epoch;
        let pos_in_epoch = s % steps_per_epoch;
        if s > 0 && pos_in_epoch == 0 {
            order = epoch_order(n, &stream, epoch as u64);
            if let GradientSource::Dual { config } = &source {
                let anchors: Vec<LabeledPoint> = (0..n).map(|i| dataset.point(i)).collect();
                dual_tau_current =
                    tune_dual_tau(problem, &theta, &anchors, config, &stream, epoch as u64)?;
            }
        }
        let anchors = batch_points(dataset, &order, pos_in_epoch * outer.batch, outer.batch);

        let (gradient, loss_estimate) = match &source {
            GradientSource::Sampler(cfg) => {
                let step =
                    robust_gradient_detailed(problem, &theta, &anchors, cfg, &stream, s as u64)?;
                if outer.record_first_epoch_clouds && epoch == 0 {
                    first_epoch_clouds.extend(step.clouds);
                }
                (step.gradient, step.worst_case_loss)
            }
            GradientSource::Saa => {
                let mut gradient = vec![0.0; theta.len()];
                let mut loss = 0.0;
                for z in &anchors {
                    let g = problem.loss.grad_theta(&theta, z)?;
                    linalg::axpy(1.0, &g, &mut gradient);
                    loss += problem.loss.value(&theta, z)?;
                }
                let inv = 1.0 / anchors.len() as f64;
                linalg::scale(&mut gradient, inv);
                (gradient, loss * inv)
            }
            GradientSource::Dual { config } => {
                let (value, gradient) = dual_objective_estimate(
                    problem,
                    &theta,
                    dual_tau_current,
                    config.radius_r,
                    &anchors,
                    config.n_inner,
                    &stream,
                    s as u64,
                )?;
                (gradient, value)
            }
        };

        grad_norms.push(linalg::norm(&gradient));
        loss_estimates.push(loss_estimate);
        theta = outer_step(&theta, &gradient, outer.stepsize.at(s), &outer.projection);
        if !linalg::all_finite(&theta) {
            return Err(Error::OptimizerFailure(format!(
                "outer loop produced non-finite theta at step {s}"
            )));
        }
        if (s + 1) % steps_per_epoch == 0 {
            epoch_checkpoints.push(theta.clone());
        }
    }

    Ok(TrainReport {
        final_theta: theta,
        grad_norms,
        loss_estimates,
        epoch_checkpoints,
        first_epoch_clouds,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        seed,
        steps_run: total,
    })
}

/// Full robust training: nested inner sampling + projected outer SGD.
pub fn train(
    problem: &RobustProblem,
    dataset: &LabeledDataset,
    sampler: &SamplerConfig,
    outer: &OuterLoopConfig,
    seed: u64,
) -> Result<TrainReport> {
    sampler.validate(&problem.params)?;
    run_outer_loop(problem, dataset, GradientSource::Sampler(sampler), outer, seed)
}

/// Plain minibatch SGD on the empirical loss (no inner sampler).
pub fn saa_train(
    problem: &RobustProblem,
    dataset: &LabeledDataset,
    outer: &OuterLoopConfig,
    seed: u64,
) -> Result<TrainReport> {
    run_outer_loop(problem, dataset, GradientSource::Saa, outer, seed)
}

/// Configuration of the dual-objective baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct DualConfig {
    /// Ambiguity radius of the dual objective.
    pub radius_r: f64,
    /// Inner Monte Carlo sample count per anchor.
    pub n_inner: usize,
    /// Bracket for the per-epoch dual-variable search.
    pub tau_bracket: (f64, f64),
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig { radius_r: 1.0, n_inner: 32, tau_bracket: (1e-3, 1e2) }
    }
}

/// Nested Monte Carlo estimate of the dual objective
///
/// ```text
/// r/(2 tau') + (eps/(2 tau')) mean_x log mean_j exp(2 tau' loss(theta, y_j) / eps)
/// ```
///
/// with `y_j ~ N(x, (eps/2) I)` on the feature block, together with its
/// theta-gradient (softmax-weighted inner gradients). The estimator is
/// biased for finite `n_inner`; the bias is documented, not corrected. Draws
/// depend only on `(stream, step_idx, anchor index)`, so finite-difference
/// checks in theta see common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn dual_objective_estimate(
    problem: &RobustProblem,
    theta: &[f64],
    dual_tau: f64,
    radius_r: f64,
    anchors: &[LabeledPoint],
    n_inner: usize,
    stream: &RngStream,
    step_idx: u64,
) -> Result<(f64, Vec<f64>)> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let _ = radius_r;
    if n_inner < 2 {
        return Err(Error::InvalidConfig("dual estimator needs n_inner >= 2".into()));
    }
    if !(dual_tau > 0.0) {
        return Err(Error::InvalidConfig("dual_tau must be > 0".into()));
    }
    let eps = problem.epsilon();
    if eps <= 0.0 {
        return Err(Error::InvalidConfig("dual objective needs epsilon > 0".into()));
    }
    if anchors.is_empty() {
        return Err(Error::InvalidArgument("anchor batch must be nonempty".into()));
    }
    let kernel_std = (eps / 2.0).sqrt();
    let mut mean_log = 0.0;
    let mut gradient = vec![0.0; theta.len()];
    for (a_idx, anchor) in anchors.iter().enumerate() {
        let mut rng = stream.rng(&[tag::DUAL, step_idx, a_idx as u64]);
        let mut exponents = Vec::with_capacity(n_inner);
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(n_inner);
        for _ in 0..n_inner {
            let y: Vec<f64> = anchor
                .features
                .iter()
                .map(|&x| x + kernel_std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let z = anchor.with_features(y);
            let loss = problem.loss.value(theta, &z)?;
            exponents.push(2.0 * dual_tau * loss / eps);
            grads.push(problem.loss.grad_theta(theta, &z)?);
        }
        let lse = log_sum_exp(&exponents);
        mean_log += lse - (n_inner as f64).ln();
        for (j, g) in grads.iter().enumerate() {
            let w = (exponents[j] - lse).exp();
            linalg::axpy(w, g, &mut gradient);
        }
    }
    let inv = 1.0 / anchors.len() as f64;
    linalg::scale(&mut gradient, inv);
    let value = radius_r / (2.0 * dual_tau) + eps / (2.0 * dual_tau) * mean_log * inv;
    Ok((value, gradient))
}

/// Golden-section search on `log tau'` for the epoch's dual variable, using
/// a fixed draw stream so all candidates see the same samples.
fn tune_dual_tau(
    problem: &RobustProblem,
    theta: &[f64],
    anchors: &[LabeledPoint],
    config: &DualConfig,
    stream: &RngStream,
    epoch: u64,
) -> Result<f64> {
    let eval_step = u64::MAX - epoch; // disjoint from per-step draw addresses
    let f = |log_tau: f64| -> Result<f64> {
        let (value, _) = dual_objective_estimate(
            problem,
            theta,
            log_tau.exp(),
            config.radius_r,
            anchors,
            config.n_inner,
            stream,
            eval_step,
        )?;
        Ok(value)
    };
    let golden: f64 = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (config.tau_bracket.0.ln(), config.tau_bracket.1.ln());
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..40 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = f(d)?;
        }
    }
    Ok(((a + b) / 2.0).exp())
}

/// Train with the dual-objective baseline; the dual variable is re-tuned by
/// golden-section search at every epoch boundary.
pub fn dual_train(
    problem: &RobustProblem,
    dataset: &LabeledDataset,
    config: &DualConfig,
    outer: &OuterLoopConfig,
    seed: u64,
) -> Result<TrainReport> {
    if config.n_inner < 2 {
        return Err(Error::InvalidConfig("dual estimator needs n_inner >= 2".into()));
    }
    run_outer_loop(
        problem,
        dataset,
        GradientSource::Dual { config },
        outer,
        seed,
    )
}
