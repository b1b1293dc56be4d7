//! Stein variational gradient descent step for the tilted-potential target.
//!
//! Velocity field for particle `i`:
//!
//! ```text
//! phi_i = (1/m) sum_j [ -k(y_i, y_j) * (2 tau / eps) grad V~(y_j) + grad_2 k(y_i, y_j) ]
//! ```
//!
//! with the RBF kernel `k(a, b) = exp(-||a - b||^2 / h)` and
//! `grad_2 k(y_i, y_j) = (2/h) (y_i - y_j) k(y_i, y_j)`. Positions update
//! synchronously by `y_i += eta * phi_i`; weights stay uniform.

use super::KernelBandwidth;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, sq_dist};
use crate::loss::LabeledPoint;
use crate::problem::{tilted_gradient_scratch, ParticleCloud, RobustProblem};

/// Bandwidth for the current particle set. The median heuristic uses the
/// median pairwise squared distance; a degenerate (all-coincident) cloud
/// falls back to `h = 1`, where the kernel is still exactly 1 at distance 0.
fn bandwidth(positions: &[Vec<f64>], policy: &KernelBandwidth) -> f64 {
    match policy {
        KernelBandwidth::Fixed(h) => *h,
        KernelBandwidth::MedianHeuristic => {
            let m = positions.len();
            if m < 2 {
                return 1.0;
            }
            let mut sq = Vec::with_capacity(m * (m - 1) / 2);
            for i in 0..m {
                for j in (i + 1)..m {
                    sq.push(sq_dist(&positions[i], &positions[j]));
                }
            }
            sq.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            let med_sq = sq[sq.len() / 2];
            if med_sq > 0.0 && med_sq.is_finite() {
                med_sq / ((m as f64) + 1.0).ln()
            } else {
                1.0
            }
        }
    }
}

/// One synchronous SVGD update of the whole cloud.
pub fn svgd_step(
    cloud: &mut ParticleCloud,
    problem: &RobustProblem,
    theta: &[f64],
    anchor: &LabeledPoint,
    kernel: &KernelBandwidth,
    eta: f64,
) -> Result<()> {
    if problem.epsilon() <= 0.0 {
        return Err(Error::InvalidConfig(
            "svgd needs epsilon > 0 (its drive scale is 2 tau / epsilon)".into(),
        ));
    }
    let m = cloud.m();
    let d = cloud.dim();
    let scale = 2.0 * problem.tau() / problem.epsilon();

    // Scaled drive (2 tau / eps) grad V~ at every current position.
    let mut scratch = anchor.clone();
    let mut drives: Vec<Vec<f64>> = Vec::with_capacity(m);
    for p in cloud.positions() {
        scratch.features.copy_from_slice(p);
        let mut g = vec![0.0; d];
        tilted_gradient_scratch(problem, theta, &scratch, &anchor.features, &mut g)?;
        if !all_finite(&g) {
            return Err(Error::DivergedSampler { iteration: 0 });
        }
        for v in g.iter_mut() {
            *v *= scale;
        }
        drives.push(g);
    }

    let h = bandwidth(cloud.positions(), kernel);
    let two_over_h = 2.0 / h;

    let mut velocities: Vec<Vec<f64>> = Vec::with_capacity(m);
    {
        let positions = cloud.positions();
        for i in 0..m {
            let mut phi = vec![0.0; d];
            for j in 0..m {
                let k = (-sq_dist(&positions[i], &positions[j]) / h).exp();
                for c in 0..d {
                    let repulsion = two_over_h * (positions[i][c] - positions[j][c]) * k;
                    phi[c] += -(k * drives[j][c]) + repulsion;
                }
            }
            let inv_m = 1.0 / m as f64;
            for v in phi.iter_mut() {
                *v *= inv_m;
            }
            velocities.push(phi);
        }
    }

    let positions = cloud.positions_mut();
    for i in 0..m {
        for c in 0..d {
            positions[i][c] += eta * velocities[i][c];
        }
        if !all_finite(&positions[i]) {
            return Err(Error::DivergedSampler { iteration: 0 });
        }
    }
    Ok(())
}
