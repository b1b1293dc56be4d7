//! Inner worst-case samplers.
//!
//! Five interchangeable methods approximate the conditional worst-case
//! distribution for one anchor point:
//!
//! - `wgf-ula`: unadjusted Langevin steps
//!   `y' = y - eta * grad V~(y) + sqrt(eta * eps / tau) * xi`;
//! - `wfr`: the same position move plus a multiplicative weight flow and
//!   birth-death resampling;
//! - `svgd`: deterministic kernel-interacting particles;
//! - `rgo`: rejection sampling from a Gaussian proposal at the minimizer of
//!   the scaled potential;
//! - `wrm`: plain inner gradient descent (the `eps = 0` limit of `wgf-ula`).
//!
//! All stochastic draws are addressed through [`RngStream`], so inner runs
//! are reproducible and can execute in parallel across anchors.

mod rgo;
mod svgd;

pub use rgo::{rgo_sample, RgoStats};
pub use svgd::svgd_step;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::loss::LabeledPoint;
use crate::problem::{tilted_gradient_scratch, ParticleCloud, RobustnessParams, RobustProblem};
use crate::rng::RngStream;

/// Which inner sampler to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    WgfUla,
    Wfr,
    Svgd,
    Rgo,
    Wrm,
}

impl SamplerMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerMethod::WgfUla => "wgf-ula",
            SamplerMethod::Wfr => "wfr",
            SamplerMethod::Svgd => "svgd",
            SamplerMethod::Rgo => "rgo",
            SamplerMethod::Wrm => "wrm",
        }
    }
}

/// SVGD kernel bandwidth policy for the RBF kernel
/// `k(a, b) = exp(-||a - b||^2 / h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelBandwidth {
    /// `h = med^2 / ln(m + 1)` with `med` the median pairwise distance,
    /// recomputed every iteration.
    MedianHeuristic,
    /// Fixed `h`.
    Fixed(f64),
}

/// Per-method hyperparameters for the inner samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    /// Inner stepsize.
    pub eta: f64,
    /// Weight-flow stepsize (WFR).
    pub eta_w: f64,
    /// Birth-death threshold (WFR); 0 disables birth-death.
    pub w_min: f64,
    /// Inner iteration count.
    pub t: usize,
    /// Particle count.
    pub m: usize,
    /// Initial standard deviation of the SVGD particle spread.
    pub sigma_init: f64,
    /// Smoothness bound `L` used by the RGO proposal.
    pub smoothness_l: f64,
    pub kernel_bandwidth: KernelBandwidth,
}

impl SamplerConfig {
    pub fn new(method: SamplerMethod) -> Self {
        SamplerConfig {
            method,
            eta: 0.01,
            eta_w: 0.0,
            w_min: 0.0,
            t: 100,
            m: 10,
            sigma_init: 0.1,
            smoothness_l: 0.0,
            kernel_bandwidth: KernelBandwidth::MedianHeuristic,
        }
    }

    /// Check every constraint that depends only on the config and the
    /// robustness parameters.
    pub fn validate(&self, params: &RobustnessParams) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be >= 1".into()));
        }
        match self.method {
            SamplerMethod::Wfr => {
                if self.eta_w < 0.0 {
                    return Err(Error::InvalidConfig("eta_w must be >= 0".into()));
                }
                let factor = params.epsilon * self.eta_w / (2.0 * params.tau);
                if factor >= 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "epsilon * eta_w / (2 tau) = {factor} must be < 1"
                    )));
                }
                if self.w_min < 0.0 || self.w_min > 1.0 / self.m as f64 {
                    return Err(Error::InvalidConfig(format!(
                        "w_min must lie in [0, 1/m], got {}",
                        self.w_min
                    )));
                }
            }
            SamplerMethod::Svgd => {
                if params.epsilon <= 0.0 {
                    return Err(Error::InvalidConfig(
                        "svgd needs epsilon > 0 (its drive scale is 2 tau / epsilon)".into(),
                    ));
                }
                if self.sigma_init < 0.0 {
                    return Err(Error::InvalidConfig("sigma_init must be >= 0".into()));
                }
                if let KernelBandwidth::Fixed(h) = self.kernel_bandwidth {
                    if !(h > 0.0) {
                        return Err(Error::InvalidConfig("fixed kernel bandwidth must be > 0".into()));
                    }
                }
            }
            SamplerMethod::Rgo => {
                if self.smoothness_l < 0.0 {
                    return Err(Error::InvalidConfig("smoothness_l must be >= 0".into()));
                }
                if self.smoothness_l * params.tau >= 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "rgo requires smoothness_l * tau < 1, got {}",
                        self.smoothness_l * params.tau
                    )));
                }
                if params.epsilon <= 0.0 {
                    return Err(Error::InvalidConfig(
                        "rgo needs epsilon > 0 (its proposal variance is eps / (2 (1 - L tau)))"
                            .into(),
                    ));
                }
            }
            SamplerMethod::WgfUla | SamplerMethod::Wrm => {}
        }
        Ok(())
    }
}

/// One Langevin / gradient-descent position move. With `epsilon = 0` the
/// noise term is exactly zero and no draw is consumed.
fn langevin_move(
    problem: &RobustProblem,
    theta: &[f64],
    anchor_features: &[f64],
    scratch: &mut LabeledPoint,
    position: &mut [f64],
    grad_buf: &mut [f64],
    eta: f64,
    noise_coef: f64,
    rng: &mut ChaCha8Rng,
    iteration: usize,
) -> Result<()> {
    scratch.features.copy_from_slice(position);
    tilted_gradient_scratch(problem, theta, scratch, anchor_features, grad_buf)?;
    if !all_finite(grad_buf) {
        return Err(Error::DivergedSampler { iteration });
    }
    for k in 0..position.len() {
        position[k] -= eta * grad_buf[k];
    }
    if noise_coef > 0.0 {
        for p in position.iter_mut() {
            let xi: f64 = rng.sample(StandardNormal);
            *p += noise_coef * xi;
        }
    }
    if !all_finite(position) {
        return Err(Error::DivergedSampler { iteration });
    }
    Ok(())
}

/// Single ULA update `y' = y - eta grad V~(y) + sqrt(eta eps / tau) xi`.
pub fn ula_step(
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    y: &[f64],
    eta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut pos = y.to_vec();
    let mut scratch = anchor.with_features(y.to_vec());
    let mut grad = vec![0.0; y.len()];
    let noise_coef = noise_coefficient(problem, eta);
    langevin_move(
        problem,
        theta,
        &anchor.features,
        &mut scratch,
        &mut pos,
        &mut grad,
        eta,
        noise_coef,
        rng,
        0,
    )?;
    Ok(pos)
}

/// Single deterministic inner gradient-descent update
/// `y' = y - eta grad V~(y)`.
pub fn wrm_step(
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    y: &[f64],
    eta: f64,
) -> Result<Vec<f64>> {
    let mut pos = y.to_vec();
    let mut scratch = anchor.with_features(y.to_vec());
    let mut grad = vec![0.0; y.len()];
    // rng is untouched when the noise coefficient is zero
    let mut dummy = RngStream::new(0).rng(&[u64::MAX]);
    langevin_move(
        problem,
        theta,
        &anchor.features,
        &mut scratch,
        &mut pos,
        &mut grad,
        eta,
        0.0,
        &mut dummy,
        0,
    )?;
    Ok(pos)
}

fn noise_coefficient(problem: &RobustProblem, eta: f64) -> f64 {
    if problem.epsilon() > 0.0 {
        (eta * problem.epsilon() / problem.tau()).sqrt()
    } else {
        0.0
    }
}

/// Multiplicative weight-flow update, in log domain:
/// `log w' = (1 - eps eta_w / (2 tau)) log w - eta_w V~(y)`, then normalized.
/// Returns the new normalized log weights.
pub fn wfr_weight_update(
    log_weights: &[f64],
    tilted_values: &[f64],
    eta_w: f64,
    params: &RobustnessParams,
) -> Result<Vec<f64>> {
    if log_weights.len() != tilted_values.len() {
        return Err(Error::dims("weight and potential vectors differ in length"));
    }
    let shrink = params.epsilon * eta_w / (2.0 * params.tau);
    if shrink >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "weight update exponent factor {shrink} must be < 1"
        )));
    }
    let keep = 1.0 - shrink;
    let updated: Vec<f64> = log_weights
        .iter()
        .zip(tilted_values)
        .map(|(&lw, &v)| keep * lw - eta_w * v)
        .collect();
    let lse = crate::linalg::log_sum_exp(&updated);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights(
            "weight-flow update produced zero total mass".into(),
        ));
    }
    Ok(updated.iter().map(|&lw| lw - lse).collect())
}

/// Birth-death resampling sweep. Every particle whose weight fell below
/// `w_min` jumps to a donor drawn with probability equal to the donor's
/// weight; both keep the average of their two weights, which conserves total
/// mass. Replacements happen in particle-index order; the cloud is
/// renormalized once at the end if anything changed.
pub fn birth_death(cloud: &mut ParticleCloud, w_min: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    use rand::Rng;
    if w_min <= 0.0 {
        return Ok(());
    }
    let m = cloud.m();
    let mut w = cloud.weights();
    let mut replaced = false;
    for i in 0..m {
        if w[i] < w_min {
            let u: f64 = rng.random();
            let donor = categorical(&w, u);
            let pos = cloud.positions()[donor].clone();
            cloud.set_position(i, pos);
            let avg = 0.5 * (w[i] + w[donor]);
            w[i] = avg;
            w[donor] = avg;
            replaced = true;
        }
    }
    if replaced {
        let lw = cloud.log_weights_mut();
        for (i, v) in w.iter().enumerate() {
            lw[i] = v.ln();
        }
        cloud.normalize_weights()?;
    }
    Ok(())
}

/// Index of the category containing `u` in the cumulative distribution of `w`.
fn categorical(w: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        acc += wi;
        if u < acc {
            return i;
        }
    }
    w.len() - 1
}

/// Rng scope of one inner run: all draws are addressed relative to
/// `(outer step, anchor index)`.
#[derive(Debug, Clone, Copy)]
pub struct InnerRngScope {
    stream: RngStream,
    outer_step: u64,
    anchor_idx: u64,
}

impl InnerRngScope {
    pub fn new(stream: RngStream, outer_step: u64, anchor_idx: u64) -> Self {
        InnerRngScope { stream, outer_step, anchor_idx }
    }

    fn particle(&self, i: usize) -> ChaCha8Rng {
        self.stream.particle_rng(self.outer_step, self.anchor_idx, i as u64)
    }

    fn cloud(&self) -> ChaCha8Rng {
        self.stream.cloud_rng(self.outer_step, self.anchor_idx)
    }
}

/// State of one iterative inner run (every method except RGO).
pub struct InnerRun<'a> {
    problem: &'a RobustProblem,
    theta: &'a [f64],
    anchor: &'a LabeledPoint,
    config: &'a SamplerConfig,
    cloud: ParticleCloud,
    particle_rngs: Vec<ChaCha8Rng>,
    cloud_rng: ChaCha8Rng,
    noise_coef: f64,
    iteration: usize,
    scratch: LabeledPoint,
    grad_buf: Vec<f64>,
    tilted_buf: Vec<f64>,
}

impl<'a> InnerRun<'a> {
    pub fn new(
        problem: &'a RobustProblem,
        theta: &'a [f64],
        anchor: &'a LabeledPoint,
        config: &'a SamplerConfig,
        scope: InnerRngScope,
    ) -> Result<Self> {
        config.validate(&problem.params)?;
        if config.method == SamplerMethod::Rgo {
            return Err(Error::InvalidConfig(
                "rgo is not an iterative sampler; use sample_worst_case".into(),
            ));
        }
        let d = anchor.features.len();
        if d != problem.loss.feature_dim() {
            return Err(Error::dims("anchor dimension differs from the loss oracle"));
        }
        let mut particle_rngs: Vec<ChaCha8Rng> =
            (0..config.m).map(|i| scope.particle(i)).collect();
        let cloud = match config.method {
            SamplerMethod::Svgd => {
                let mut positions = Vec::with_capacity(config.m);
                for rng in particle_rngs.iter_mut() {
                    let mut p = anchor.features.clone();
                    if config.sigma_init > 0.0 {
                        for v in p.iter_mut() {
                            let xi: f64 = rng.sample(StandardNormal);
                            *v += config.sigma_init * xi;
                        }
                    }
                    positions.push(p);
                }
                ParticleCloud::from_positions(&anchor.features, positions)?
            }
            _ => ParticleCloud::at_anchor(&anchor.features, config.m)?,
        };
        Ok(InnerRun {
            problem,
            theta,
            anchor,
            config,
            cloud,
            particle_rngs,
            cloud_rng: scope.cloud(),
            noise_coef: noise_coefficient(problem, config.eta),
            iteration: 0,
            scratch: anchor.clone(),
            grad_buf: vec![0.0; d],
            tilted_buf: vec![0.0; config.m],
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    pub fn into_cloud(self) -> ParticleCloud {
        self.cloud
    }

    /// Weighted average of the tilted potential over the current cloud.
    pub fn expected_tilted_potential(&mut self) -> Result<f64> {
        let w = self.cloud.weights();
        let mut acc = 0.0;
        for i in 0..self.cloud.m() {
            self.scratch.features.copy_from_slice(&self.cloud.positions()[i]);
            let v = tilted_value(self.problem, self.theta, &self.scratch, &self.anchor.features)?;
            acc += w[i] * v;
        }
        Ok(acc)
    }

    /// Advance one inner iteration.
    pub fn step(&mut self) -> Result<()> {
        match self.config.method {
            SamplerMethod::WgfUla | SamplerMethod::Wrm => self.step_langevin(false),
            SamplerMethod::Wfr => self.step_langevin(true),
            SamplerMethod::Svgd => {
                svgd_step(
                    &mut self.cloud,
                    self.problem,
                    self.theta,
                    self.anchor,
                    &self.config.kernel_bandwidth,
                    self.config.eta,
                )
                .map_err(|e| self.tag_iteration(e))?;
                self.iteration += 1;
                Ok(())
            }
            SamplerMethod::Rgo => unreachable!("rejected in InnerRun::new"),
        }
    }

    fn tag_iteration(&self, e: Error) -> Error {
        match e {
            Error::DivergedSampler { .. } => Error::DivergedSampler { iteration: self.iteration },
            other => other,
        }
    }

    fn step_langevin(&mut self, with_weight_flow: bool) -> Result<()> {
        let m = self.cloud.m();
        for i in 0..m {
            if with_weight_flow {
                // tilted potential at the pre-move position, anchored at x^s
                self.scratch
                    .features
                    .copy_from_slice(&self.cloud.positions()[i]);
                self.tilted_buf[i] =
                    tilted_value(self.problem, self.theta, &self.scratch, &self.anchor.features)?;
            }
            let positions = self.cloud.positions_mut();
            langevin_move(
                self.problem,
                self.theta,
                &self.anchor.features,
                &mut self.scratch,
                &mut positions[i],
                &mut self.grad_buf,
                self.config.eta,
                self.noise_coef,
                &mut self.particle_rngs[i],
                self.iteration,
            )?;
        }
        if with_weight_flow {
            let new_log = wfr_weight_update(
                self.cloud.log_weights(),
                &self.tilted_buf,
                self.config.eta_w,
                &self.problem.params,
            )?;
            self.cloud.log_weights_mut().copy_from_slice(&new_log);
            birth_death(&mut self.cloud, self.config.w_min, &mut self.cloud_rng)?;
        }
        self.iteration += 1;
        Ok(())
    }
}

/// Tilted potential evaluated through a reusable scratch point.
pub(crate) fn tilted_value(
    problem: &RobustProblem,
    theta: &[f64],
    scratch: &LabeledPoint,
    anchor_features: &[f64],
) -> Result<f64> {
    let loss = problem.loss.value(theta, scratch)?;
    let c = problem.cost.eval(&scratch.features, anchor_features)?;
    Ok(-loss + c / (2.0 * problem.tau()))
}

/// Result of one inner sampling run.
#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub cloud: ParticleCloud,
    /// Rejection statistics when the method is RGO.
    pub rgo_stats: Option<RgoStats>,
}

/// Run the configured method for its full inner schedule and return the
/// final cloud (the last iterate).
pub fn sample_worst_case(
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    config: &SamplerConfig,
    scope: InnerRngScope,
) -> Result<ParticleCloud> {
    sample_worst_case_detailed(problem, theta, anchor, config, scope).map(|o| o.cloud)
}

/// As [`sample_worst_case`], also returning rejection statistics for RGO.
pub fn sample_worst_case_detailed(
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    config: &SamplerConfig,
    scope: InnerRngScope,
) -> Result<InnerOutcome> {
    config.validate(&problem.params)?;
    if config.method == SamplerMethod::Rgo {
        let mut positions = Vec::with_capacity(config.m);
        let mut trials = 0usize;
        for i in 0..config.m {
            let mut rng = scope.particle(i);
            let (z, stats) = rgo_sample(problem, theta, anchor, config, &mut rng)?;
            trials += stats.trials;
            positions.push(z);
        }
        let cloud = ParticleCloud::from_positions(&anchor.features, positions)?;
        return Ok(InnerOutcome {
            cloud,
            rgo_stats: Some(RgoStats { samples: config.m, trials }),
        });
    }
    let mut run = InnerRun::new(problem, theta, anchor, config, scope)?;
    for _ in 0..config.t {
        run.step()?;
    }
    Ok(InnerOutcome { cloud: run.into_cloud(), rgo_stats: None })
}
