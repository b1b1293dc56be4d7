//! Robust problem definition: robustness parameters, transport cost, the
//! tilted potential driving every inner sampler, and the weighted particle
//! cloud that approximates a conditional worst-case distribution.
//!
//! The tilted potential is always the unscaled
//! `V~(y) = -loss(theta, y) + c(y, x) / (2 tau)`; each sampler applies its own
//! temperature factor `2 tau / eps` where required, so there is exactly one
//! definition to get right.

use crate::error::{Error, Result};
use crate::linalg::{self, log_sum_exp};
use crate::loss::{LabeledPoint, LossOracle};

/// Penalty and entropy-regularization strengths of the robust objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessParams {
    /// Transport penalty weight `1/(2 tau)`; must be positive.
    pub tau: f64,
    /// Entropy regularization; zero selects the degenerate deterministic
    /// (WRM) path.
    pub epsilon: f64,
}

impl RobustnessParams {
    pub fn new(tau: f64, epsilon: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be > 0, got {tau}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        Ok(RobustnessParams { tau, epsilon })
    }
}

/// Transport cost on data points. Both kinds are squared Euclidean on the
/// feature block; the fixed-label kind records that labels are never
/// transported (samplers carry the anchor's label unchanged, which realizes
/// an infinite label-transport cost without any literal infinities).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostFunction {
    SquaredEuclidean,
    SquaredEuclideanFixedLabel,
}

impl CostFunction {
    /// `c(y, x)` on feature vectors.
    pub fn eval(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        if y.len() != x.len() {
            return Err(Error::dims(format!(
                "cost arguments have lengths {} and {}",
                y.len(),
                x.len()
            )));
        }
        Ok(linalg::sq_dist(y, x))
    }
}

/// The inner worst-case target: a loss oracle, a transport cost and the
/// robustness parameters `(tau, epsilon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustProblem {
    pub loss: LossOracle,
    pub cost: CostFunction,
    pub params: RobustnessParams,
}

impl RobustProblem {
    pub fn new(loss: LossOracle, cost: CostFunction, params: RobustnessParams) -> Self {
        RobustProblem { loss, cost, params }
    }

    pub fn tau(&self) -> f64 {
        self.params.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }
}

/// Tilted potential `V~(y) = -loss(theta, (y, label_x)) + c(y, x) / (2 tau)`.
///
/// `anchor` supplies both the conditioning features `x` and the label carried
/// by every perturbed point.
pub fn tilted_potential(
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    y: &[f64],
) -> Result<f64> {
    let loss = problem.loss.value(theta, &anchor.with_features(y.to_vec()))?;
    let c = problem.cost.eval(y, &anchor.features)?;
    Ok(-loss + c / (2.0 * problem.tau()))
}

/// Gradient of the tilted potential with respect to `y`:
/// `-grad_input loss + (y - x) / tau` for squared Euclidean cost.
pub fn tilted_gradient(
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    y: &[f64],
) -> Result<Vec<f64>> {
    let mut g = vec![0.0; y.len()];
    tilted_gradient_into(problem, theta, anchor, y, &mut g)?;
    Ok(g)
}

/// Allocation-free variant of [`tilted_gradient`]. Reuses `scratch` to hold
/// the perturbed point; its label must already match the anchor's.
pub(crate) fn tilted_gradient_scratch(
    problem: &RobustProblem,
    theta: &[f64],
    scratch: &LabeledPoint,
    anchor_features: &[f64],
    out: &mut [f64],
) -> Result<()> {
    problem.loss.grad_input_into(theta, scratch, out)?;
    let y = &scratch.features;
    if y.len() != anchor_features.len() {
        return Err(Error::dims("anchor and particle dimensions differ"));
    }
    let inv_tau = 1.0 / problem.tau();
    for i in 0..out.len() {
        out[i] = -out[i] + (y[i] - anchor_features[i]) * inv_tau;
    }
    Ok(())
}

fn tilted_gradient_into(
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    y: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let z = anchor.with_features(y.to_vec());
    tilted_gradient_scratch(problem, theta, &z, &anchor.features, out)
}

/// Weighted particles approximating one conditional worst-case distribution.
///
/// Weights live in log domain internally (the multiplicative weight-flow
/// update underflows quickly otherwise) and are exposed as normalized
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    positions: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    anchor: Vec<f64>,
}

impl ParticleCloud {
    /// `m` particles, all at the anchor, uniformly weighted.
    pub fn at_anchor(anchor: &[f64], m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("particle count must be >= 1".into()));
        }
        Ok(ParticleCloud {
            positions: vec![anchor.to_vec(); m],
            log_weights: vec![-(m as f64).ln(); m],
            anchor: anchor.to_vec(),
        })
    }

    /// Uniformly weighted cloud at explicit positions.
    pub fn from_positions(anchor: &[f64], positions: Vec<Vec<f64>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("particle count must be >= 1".into()));
        }
        if positions.iter().any(|p| p.len() != anchor.len()) {
            return Err(Error::dims("particle dimension differs from anchor"));
        }
        let m = positions.len();
        Ok(ParticleCloud {
            positions,
            log_weights: vec![-(m as f64).ln(); m],
            anchor: anchor.to_vec(),
        })
    }

    /// Cloud with explicit raw (unnormalized, linear-domain) weights.
    pub fn with_raw_weights(
        anchor: &[f64],
        positions: Vec<Vec<f64>>,
        raw_weights: &[f64],
    ) -> Result<Self> {
        if raw_weights.len() != positions.len() {
            return Err(Error::dims("weight count differs from particle count"));
        }
        if raw_weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("raw weights must be nonnegative".into()));
        }
        let mut cloud = Self::from_positions(anchor, positions)?;
        cloud.log_weights = raw_weights.iter().map(|&w| w.ln()).collect();
        cloud.normalize_weights()?;
        Ok(cloud)
    }

    pub fn m(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.positions
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub(crate) fn log_weights_mut(&mut self) -> &mut [f64] {
        &mut self.log_weights
    }

    pub(crate) fn set_position(&mut self, i: usize, p: Vec<f64>) {
        self.positions[i] = p;
    }

    /// Renormalize the log weights by log-sum-exp subtraction so the exposed
    /// probabilities sum to 1. Errors if the weights carry no mass.
    pub fn normalize_weights(&mut self) -> Result<()> {
        if self.log_weights.iter().any(|w| w.is_nan()) {
            return Err(Error::DegenerateWeights("a weight is NaN".into()));
        }
        let lse = log_sum_exp(&self.log_weights);
        if !lse.is_finite() {
            return Err(Error::DegenerateWeights(
                "all weights are zero in log domain".into(),
            ));
        }
        for w in self.log_weights.iter_mut() {
            *w -= lse;
        }
        Ok(())
    }

    /// Normalized probability weights. A final linear-domain renormalization
    /// keeps the sum at 1 to machine precision.
    pub fn weights(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.log_weights.iter().map(|&lw| lw.exp()).collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            for v in w.iter_mut() {
                *v /= s;
            }
        }
        w
    }

    /// Weight-weighted mean position.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let w = self.weights();
        let mut mean = vec![0.0; self.dim()];
        for (i, p) in self.positions.iter().enumerate() {
            linalg::axpy(w[i], p, &mut mean);
        }
        mean
    }

    /// Weight-weighted per-coordinate variance around the weighted mean.
    pub fn weighted_variance(&self) -> Vec<f64> {
        let w = self.weights();
        let mean = self.weighted_mean();
        let mut var = vec![0.0; self.dim()];
        for (i, p) in self.positions.iter().enumerate() {
            for k in 0..var.len() {
                let d = p[k] - mean[k];
                var[k] += w[i] * d * d;
            }
        }
        var
    }
}

/// Normalize a cloud's weights (operation form of
/// [`ParticleCloud::normalize_weights`]).
pub fn normalize_weights(mut cloud: ParticleCloud) -> Result<ParticleCloud> {
    cloud.normalize_weights()?;
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{fd_gradient, relative_error, Label};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn linear_problem(tau: f64, epsilon: f64, dim: usize) -> RobustProblem {
        RobustProblem::new(
            LossOracle::Linear { dim },
            CostFunction::SquaredEuclidean,
            RobustnessParams::new(tau, epsilon).unwrap(),
        )
    }

    #[test]
    fn potential_vanishes_at_anchor_for_zero_loss() {
        let p = linear_problem(0.7, 0.1, 2);
        let anchor = LabeledPoint::unlabeled(vec![1.0, -2.0]);
        let v = tilted_potential(&p, &[0.0, 0.0], &anchor, &[1.0, -2.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn potential_matches_direct_formula() {
        // loss = a.y with a = (1, 0), tau = 0.5: c/(2 tau) = c
        let p = linear_problem(0.5, 0.1, 2);
        let anchor = LabeledPoint::unlabeled(vec![0.0, 0.0]);
        let v = tilted_potential(&p, &[1.0, 0.0], &anchor, &[1.0, 0.0]).unwrap();
        assert!((v - 0.0).abs() < 1e-15);
        let v2 = tilted_potential(&p, &[0.0, 0.0], &anchor, &[3.0, 4.0]).unwrap();
        assert!((v2 - 25.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_zero_at_anchor_for_zero_loss() {
        let p = linear_problem(1.3, 0.0, 3);
        let anchor = LabeledPoint::unlabeled(vec![0.5, 0.5, -0.5]);
        let g = tilted_gradient(&p, &[0.0; 3], &anchor, &[0.5, 0.5, -0.5]).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_linear_formula() {
        // a = (1, 0), tau = 1, anchor = 0, y = (2, 0): -a + y = (1, 0)
        let p = linear_problem(1.0, 0.0, 2);
        let anchor = LabeledPoint::unlabeled(vec![0.0, 0.0]);
        let g = tilted_gradient(&p, &[1.0, 0.0], &anchor, &[2.0, 0.0]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences_per_family() {
        for oracle in crate::loss::tests::all_families() {
            let problem = RobustProblem::new(
                oracle.clone(),
                CostFunction::SquaredEuclideanFixedLabel,
                RobustnessParams::new(0.8, 0.3).unwrap(),
            );
            let stream = crate::rng::RngStream::new(2024);
            for k in 0..20u64 {
                let mut rng = stream.rng(&[k]);
                let theta_scale = match oracle {
                    LossOracle::MlpBce(_) => 0.5,
                    _ => 1.0,
                };
                let theta: Vec<f64> = (0..oracle.param_count())
                    .map(|_| theta_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let d = oracle.feature_dim();
                let anchor_feats: Vec<f64> =
                    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let label = match oracle {
                    LossOracle::MlpBce(_) => Label::Binary(u8::from(rng.random::<f64>() > 0.5)),
                    LossOracle::SoftmaxLogistic { classes, .. } => {
                        Label::Class(rng.random_range(0..classes))
                    }
                    _ => Label::None,
                };
                let anchor = LabeledPoint::new(anchor_feats, label);
                let y: Vec<f64> = (0..d)
                    .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let analytic = tilted_gradient(&problem, &theta, &anchor, &y).unwrap();
                let fd = fd_gradient(
                    |yy| tilted_potential(&problem, &theta, &anchor, yy).unwrap(),
                    &y,
                    1e-5,
                );
                let err = relative_error(&analytic, &fd);
                assert!(err < 1e-5, "{}: rel err {err}", oracle.family_name());
            }
        }
    }

    #[test]
    fn potential_at_anchor_equals_minus_loss() {
        for oracle in crate::loss::tests::all_families() {
            let problem = RobustProblem::new(
                oracle.clone(),
                CostFunction::SquaredEuclideanFixedLabel,
                RobustnessParams::new(0.4, 0.2).unwrap(),
            );
            let mut rng = crate::rng::RngStream::new(5).rng(&[3]);
            let theta: Vec<f64> = (0..oracle.param_count())
                .map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let d = oracle.feature_dim();
            let feats: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let label = match oracle {
                LossOracle::MlpBce(_) => Label::Binary(1),
                LossOracle::SoftmaxLogistic { .. } => Label::Class(0),
                _ => Label::None,
            };
            let anchor = LabeledPoint::new(feats.clone(), label);
            let v = tilted_potential(&problem, &theta, &anchor, &feats).unwrap();
            let l = oracle.value(&theta, &anchor).unwrap();
            assert!(
                (v + l).abs() <= 1e-9 * (1.0 + l.abs()),
                "{}: potential at anchor {v} vs -loss {}",
                oracle.family_name(),
                -l
            );
        }
    }

    #[test]
    fn normalize_uniform_weights() {
        let cloud = ParticleCloud::with_raw_weights(
            &[0.0],
            vec![vec![1.0], vec![2.0]],
            &[2.0, 2.0],
        )
        .unwrap();
        let w = cloud.weights();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalize_survives_tiny_log_weights() {
        let mut cloud = ParticleCloud::at_anchor(&[0.0], 2).unwrap();
        cloud.log_weights_mut().copy_from_slice(&[-1000.0, -1001.0]);
        cloud.normalize_weights().unwrap();
        let w = cloud.weights();
        let e = std::f64::consts::E;
        assert!((w[0] - e / (1.0 + e)).abs() < 1e-12);
        assert!((w[1] - 1.0 / (1.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn single_particle_weight_is_one() {
        let cloud =
            ParticleCloud::with_raw_weights(&[0.0], vec![vec![3.0]], &[0.123]).unwrap();
        assert_eq!(cloud.weights(), vec![1.0]);
    }

    #[test]
    fn degenerate_weights_error() {
        let mut cloud = ParticleCloud::at_anchor(&[0.0], 2).unwrap();
        cloud
            .log_weights_mut()
            .copy_from_slice(&[f64::NEG_INFINITY, f64::NEG_INFINITY]);
        assert!(matches!(
            cloud.normalize_weights(),
            Err(Error::DegenerateWeights(_))
        ));
    }
}
