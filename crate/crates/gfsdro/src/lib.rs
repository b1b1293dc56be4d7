//! Gradient-flow samplers for worst-case distributions in entropy-regularized
//! Wasserstein distributionally robust optimization, plus the outer robust
//! training loop, loss models, dataset generators and adversarial-robustness
//! evaluation used by the `gfsdro` CLI.
//!
//! The inner problem for an anchor `x` is sampling from the Gibbs law of the
//! tilted potential `V~(y) = -loss(theta, y) + ||y - x||^2 / (2 tau)` at
//! temperature `eps / (2 tau)`; [`samplers`] offers five interchangeable
//! methods for it. [`driver`] wraps them in projected stochastic gradient
//! descent on `theta`, and [`experiment`] turns specs into reproducible CSV
//! artifacts.

pub mod datasets;
pub mod driver;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod loss;
pub mod problem;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
