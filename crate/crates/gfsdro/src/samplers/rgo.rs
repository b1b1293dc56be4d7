//! Restricted-Gaussian-oracle rejection sampler.
//!
//! The target for one anchor is proportional to `exp(-U(y))` with the scaled
//! exponent `U(y) = (2 tau * (-loss(theta, y)) + ||y - x||^2) / eps`. When the
//! loss is `L`-smooth and `L * tau < 1`, `U` is `(2 (1 - L tau) / eps)`-strongly
//! convex, so:
//!
//! 1. gradient descent finds the minimizer `y_hat` of `U`;
//! 2. proposals `Z ~ N(y_hat, eps / (2 (1 - L tau)) I)` are accepted with
//!    probability `min{1, exp(-U(Z) + U(y_hat) + ((1 - L tau)/eps) ||Z - y_hat||^2)}`.
//!
//! The acceptance exponent uses the factor `(1 - L tau) / eps`: strong
//! convexity gives `U(Z) - U(y_hat) >= ((1 - L tau)/eps) ||Z - y_hat||^2` at
//! the minimizer, which is exactly what keeps the probability at most 1. The
//! probability is additionally clamped to [0, 1] so that losses violating the
//! assumed smoothness degrade gracefully instead of breaking the sampler.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SamplerConfig;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm, sq_dist};
use crate::loss::LabeledPoint;
use crate::problem::RobustProblem;

/// Trial bookkeeping for rejection sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RgoStats {
    pub samples: usize,
    pub trials: usize,
}

impl RgoStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.samples as f64 / self.trials as f64
        }
    }
}

const MAX_MINIMIZER_ITERS: usize = 10_000;
const GRAD_TOLERANCE: f64 = 1e-8;
/// Iterations without exponent improvement before the minimizer settles for
/// its best iterate. Nonsmooth losses (ReLU networks) put the minimizer at a
/// gradient discontinuity where no tolerance on the gradient norm is
/// reachable; the proposal stays valid for any center because the acceptance
/// probability is clamped.
const STALL_WINDOW: usize = 200;
const MAX_REJECTION_TRIALS: usize = 100_000;

struct ScaledExponent<'a> {
    problem: &'a RobustProblem,
    theta: &'a [f64],
    anchor: &'a LabeledPoint,
}

impl ScaledExponent<'_> {
    /// `U(y) = (2 tau (-loss) + ||y - x||^2) / eps`
    fn value(&self, scratch: &LabeledPoint) -> Result<f64> {
        let loss = self.problem.loss.value(self.theta, scratch)?;
        let c = sq_dist(&scratch.features, &self.anchor.features);
        Ok((2.0 * self.problem.tau() * (-loss) + c) / self.problem.epsilon())
    }

    fn gradient(&self, scratch: &LabeledPoint, out: &mut [f64]) -> Result<()> {
        self.problem.loss.grad_input_into(self.theta, scratch, out)?;
        let tau = self.problem.tau();
        let eps = self.problem.epsilon();
        for k in 0..out.len() {
            out[k] = (2.0 * tau * (-out[k])
                + 2.0 * (scratch.features[k] - self.anchor.features[k]))
                / eps;
        }
        Ok(())
    }
}

/// Draw one sample from the anchor's conditional worst-case distribution by
/// rejection sampling, returning the accepted point and the trial count.
pub fn rgo_sample(
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, RgoStats)> {
    let l = config.smoothness_l;
    let tau = problem.tau();
    let eps = problem.epsilon();
    if l * tau >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "rgo requires smoothness_l * tau < 1, got {}",
            l * tau
        )));
    }
    if eps <= 0.0 {
        return Err(Error::InvalidConfig("rgo needs epsilon > 0".into()));
    }

    let exponent = ScaledExponent { problem, theta, anchor };
    let d = anchor.features.len();

    // Inner minimization: gradient descent with the inverse-smoothness
    // stepsize eps / (2 (1 + L tau)). Stops at the gradient tolerance, or at
    // the best iterate seen once the exponent stalls (the minimizer of a
    // piecewise-smooth potential can sit at a kink where the gradient norm
    // never vanishes).
    let step = eps / (2.0 * (1.0 + l * tau));
    let mut scratch = anchor.clone();
    let mut grad = vec![0.0; d];
    let mut best_u = f64::INFINITY;
    let mut best_y = scratch.features.clone();
    let mut since_improved = 0usize;
    let mut settled = false;
    for _ in 0..MAX_MINIMIZER_ITERS {
        exponent.gradient(&scratch, &mut grad)?;
        if !all_finite(&grad) {
            return Err(Error::OptimizerFailure(
                "non-finite gradient during rgo minimization".into(),
            ));
        }
        if norm(&grad) <= GRAD_TOLERANCE {
            best_y.copy_from_slice(&scratch.features);
            settled = true;
            break;
        }
        let u = exponent.value(&scratch)?;
        if u < best_u - 1e-12 * (1.0 + best_u.abs()) {
            best_u = u;
            best_y.copy_from_slice(&scratch.features);
            since_improved = 0;
        } else {
            since_improved += 1;
            if since_improved >= STALL_WINDOW {
                settled = true;
                break;
            }
        }
        for k in 0..d {
            scratch.features[k] -= step * grad[k];
        }
    }
    if !settled {
        // still making progress when the budget ran out
        exponent.gradient(&scratch, &mut grad)?;
        if norm(&grad) > GRAD_TOLERANCE {
            return Err(Error::OptimizerFailure(format!(
                "rgo minimizer did not reach |grad| <= {GRAD_TOLERANCE} or stall in {MAX_MINIMIZER_ITERS} iterations (|grad| = {:.3e})",
                norm(&grad)
            )));
        }
        best_y.copy_from_slice(&scratch.features);
    }
    let y_hat = best_y;
    scratch.features.copy_from_slice(&y_hat);
    let u_hat = exponent.value(&scratch)?;

    let strong_convexity = (1.0 - l * tau) / eps;
    let proposal_std = (eps / (2.0 * (1.0 - l * tau))).sqrt();

    let mut proposal = anchor.clone();
    for trial in 1..=MAX_REJECTION_TRIALS {
        for k in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            proposal.features[k] = y_hat[k] + proposal_std * xi;
        }
        let u_z = exponent.value(&proposal)?;
        let log_accept = -u_z + u_hat + strong_convexity * sq_dist(&proposal.features, &y_hat);
        let p = log_accept.exp().min(1.0);
        let u: f64 = rng.random();
        if u < p {
            return Ok((proposal.features, RgoStats { samples: 1, trials: trial }));
        }
    }
    Err(Error::RejectionStall { trials: MAX_REJECTION_TRIALS })
}
