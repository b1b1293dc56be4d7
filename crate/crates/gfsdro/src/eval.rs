//! Robustness evaluation: l2 PGD attacks, misclassification curves,
//! inner-objective tracking and the quadrant-coverage diagnostic.

use rayon::prelude::*;

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{LabeledPoint, LossOracle};
use crate::problem::{ParticleCloud, RobustProblem};
use crate::rng::RngStream;
use crate::samplers::{
    sample_worst_case_detailed, InnerRngScope, InnerRun, SamplerConfig, SamplerMethod,
};

/// l2 PGD attack configuration. `delta_grid` holds perturbation levels
/// normalized by the mean l2 norm of the attacked features.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub delta_grid: Vec<f64>,
    pub steps: usize,
    pub step_scale: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { delta_grid: vec![0.0, 0.02, 0.04, 0.08], steps: 40, step_scale: 2.5 }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_grid.iter().any(|&d| d < 0.0) {
            return Err(Error::InvalidConfig("attack deltas must be >= 0".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("attack needs steps >= 1".into()));
        }
        if !(self.step_scale > 0.0) {
            return Err(Error::InvalidConfig("attack step_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Deterministic l2 PGD: `steps` ascent moves of length
/// `step_scale * radius / steps` along the normalized feature gradient,
/// each followed by projection onto the ball `B(x0, radius)`. A zero
/// gradient skips the move for that step. No random start.
pub fn pgd_attack_l2(
    oracle: &LossOracle,
    theta: &[f64],
    z: &LabeledPoint,
    radius: f64,
    steps: usize,
    step_scale: f64,
) -> Result<Vec<f64>> {
    if radius < 0.0 {
        return Err(Error::InvalidArgument("attack radius must be >= 0".into()));
    }
    let x0 = &z.features;
    let mut x = x0.clone();
    if radius == 0.0 || steps == 0 {
        return Ok(x);
    }
    let alpha = step_scale * radius / steps as f64;
    let mut current = z.clone();
    for _ in 0..steps {
        current.features.copy_from_slice(&x);
        let g = oracle.grad_input(theta, &current)?;
        let gn = linalg::norm(&g);
        if gn > 0.0 {
            linalg::axpy(alpha / gn, &g, &mut x);
        }
        // project back onto the l2 ball around the clean point
        let mut dist2 = 0.0;
        for k in 0..x.len() {
            let d = x[k] - x0[k];
            dist2 += d * d;
        }
        let dist = dist2.sqrt();
        if dist > radius {
            let shrink = radius / dist;
            for k in 0..x.len() {
                x[k] = x0[k] + shrink * (x[k] - x0[k]);
            }
        }
    }
    Ok(x)
}

/// Fraction of points whose argmax prediction disagrees with the label.
/// Ties break toward the lower class index.
pub fn misclassification_rate(
    oracle: &LossOracle,
    theta: &[f64],
    data: &LabeledDataset,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("dataset must be nonempty".into()));
    }
    let mut wrong = 0usize;
    for i in 0..data.len() {
        let predicted = oracle.predict_class(theta, &data.features[i])?;
        let actual = match data.labels[i] {
            crate::loss::Label::Binary(v) => v as usize,
            crate::loss::Label::Class(c) => c,
            crate::loss::Label::None => {
                return Err(Error::InvalidArgument(
                    "misclassification rate needs labeled data".into(),
                ))
            }
        };
        if predicted != actual {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.len() as f64)
}

/// Misclassification rate under a PGD attack at one normalized level:
/// `radius = delta * mean l2 norm of the dataset's features`. Attacks run
/// per point (in parallel) and the reduction is in index order.
pub fn attacked_error_rate(
    oracle: &LossOracle,
    theta: &[f64],
    data: &LabeledDataset,
    delta: f64,
    attack: &AttackConfig,
) -> Result<f64> {
    attack.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("dataset must be nonempty".into()));
    }
    let mean_norm =
        data.features.iter().map(|f| linalg::norm(f)).sum::<f64>() / data.len() as f64;
    let radius = delta * mean_norm;
    let verdicts: Vec<Result<bool>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let z = data.point(i);
            let adv = pgd_attack_l2(oracle, theta, &z, radius, attack.steps, attack.step_scale)?;
            let predicted = oracle.predict_class(theta, &adv)?;
            let actual = match data.labels[i] {
                crate::loss::Label::Binary(v) => v as usize,
                crate::loss::Label::Class(c) => c,
                crate::loss::Label::None => {
                    return Err(Error::InvalidArgument(
                        "attacked error rate needs labeled data".into(),
                    ))
                }
            };
            Ok(predicted != actual)
        })
        .collect();
    let mut wrong = 0usize;
    for v in verdicts {
        if v? {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.len() as f64)
}

/// Trajectory of the expected tilted potential while an inner sampler runs.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerCurve {
    pub iterations: Vec<usize>,
    /// Weighted average of `V~` over particles and anchors at each recorded
    /// iteration.
    pub expected_potential: Vec<f64>,
    pub method: SamplerMethod,
}

/// Run the inner sampler for every anchor of the dataset, recording the
/// anchor-averaged weighted mean of the tilted potential at iteration 0,
/// every `record_every` iterations, and the final iteration. RGO is not
/// iterative: its curve is the final-cloud value replicated over the grid.
pub fn inner_objective_curve(
    problem: &RobustProblem,
    theta: &[f64],
    dataset: &LabeledDataset,
    config: &SamplerConfig,
    record_every: usize,
    stream: &RngStream,
) -> Result<InnerCurve> {
    config.validate(&problem.params)?;
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be >= 1".into()));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset must be nonempty".into()));
    }
    let mut grid: Vec<usize> = (0..=config.t).filter(|t| t % record_every == 0).collect();
    if grid.last() != Some(&config.t) {
        grid.push(config.t);
    }

    let per_anchor = |a_idx: usize| -> Result<Vec<f64>> {
        let anchor = dataset.point(a_idx);
        let scope = InnerRngScope::new(*stream, 0, a_idx as u64);
        if config.method == SamplerMethod::Rgo {
            let outcome = sample_worst_case_detailed(problem, theta, &anchor, config, scope)?;
            let w = outcome.cloud.weights();
            let mut v = 0.0;
            for (i, pos) in outcome.cloud.positions().iter().enumerate() {
                let z = anchor.with_features(pos.clone());
                v += w[i]
                    * crate::problem::tilted_potential(problem, theta, &anchor, &z.features)?;
            }
            return Ok(vec![v; grid.len()]);
        }
        let mut run = InnerRun::new(problem, theta, &anchor, config, scope)?;
        let mut values = Vec::with_capacity(grid.len());
        let mut next = 0usize;
        for &g in &grid {
            while next < g {
                run.step()?;
                next += 1;
            }
            values.push(run.expected_tilted_potential()?);
        }
        Ok(values)
    };

    let all: Vec<Vec<f64>> = (0..dataset.len())
        .into_par_iter()
        .map(per_anchor)
        .collect::<Result<Vec<_>>>()?;
    let mut averaged = vec![0.0; grid.len()];
    for values in &all {
        for (k, v) in values.iter().enumerate() {
            averaged[k] += v;
        }
    }
    let inv = 1.0 / dataset.len() as f64;
    for v in averaged.iter_mut() {
        *v *= inv;
    }
    Ok(InnerCurve { iterations: grid, expected_potential: averaged, method: config.method })
}

/// Weight-weighted fraction of worst-case samples lying in the open first
/// quadrant (both coordinates strictly positive), averaged over clouds.
pub fn quadrant_fraction(clouds: &[ParticleCloud]) -> Result<f64> {
    if clouds.is_empty() {
        return Err(Error::InvalidArgument("need at least one cloud".into()));
    }
    let mut total = 0.0;
    for cloud in clouds {
        if cloud.dim() != 2 {
            return Err(Error::InvalidArgument(format!(
                "quadrant fraction needs 2-d clouds, got dimension {}",
                cloud.dim()
            )));
        }
        let w = cloud.weights();
        for (i, p) in cloud.positions().iter().enumerate() {
            if p[0] > 0.0 && p[1] > 0.0 {
                total += w[i];
            }
        }
    }
    Ok(total / clouds.len() as f64)
}
