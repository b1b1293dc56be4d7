//! Parameterized loss families with exact value / d-theta / d-input oracles.
//!
//! Four families are provided:
//! - `Linear`: `theta . x`, the workhorse for samplers with a closed-form
//!   worst-case distribution;
//! - `MlpBce`: ReLU MLP with sigmoid cross-entropy on a {0,1} label;
//! - `SoftmaxLogistic`: multi-class logistic regression;
//! - `UncertainLs`: least squares with an uncertain system matrix.
//!
//! Gradients are hand-derived per family; [`finite_diff_check`] is the
//! correctness gate. Input gradients are taken with respect to the feature
//! block only — labels never carry gradient.

mod mlp;
mod softmax;
mod uncertain_ls;

pub use mlp::MlpArchitecture;
pub use uncertain_ls::{Mat, UncertainLsSystem};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{tag, RngStream};

/// Label block of a data point. Samplers never perturb it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// No label (regression-style families).
    None,
    /// Binary label in {0, 1}.
    Binary(u8),
    /// Class index for multi-class families.
    Class(usize),
}

/// A feature vector plus its fixed label block.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vec<f64>,
    pub label: Label,
}

impl LabeledPoint {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        LabeledPoint { features, label }
    }

    pub fn unlabeled(features: Vec<f64>) -> Self {
        LabeledPoint { features, label: Label::None }
    }

    /// The same label attached to different features.
    pub fn with_features(&self, features: Vec<f64>) -> Self {
        LabeledPoint { features, label: self.label }
    }
}

/// A loss family plus its shape metadata. The parameter vector is passed
/// explicitly to every evaluation, so a single oracle value can serve an
/// entire training run; evaluation is deterministic and thread-safe.
#[derive(Debug, Clone, PartialEq)]
pub enum LossOracle {
    /// `loss = theta . x`
    Linear { dim: usize },
    /// ReLU MLP with sigmoid cross-entropy.
    MlpBce(MlpArchitecture),
    /// `loss = -w_y . x + log sum_c exp(w_c . x)`
    SoftmaxLogistic { feature_dim: usize, classes: usize },
    /// `loss = ||A(xi) theta - b||^2`
    UncertainLs(UncertainLsSystem),
}

impl LossOracle {
    pub fn family_name(&self) -> &'static str {
        match self {
            LossOracle::Linear { .. } => "linear",
            LossOracle::MlpBce(_) => "mlp-bce",
            LossOracle::SoftmaxLogistic { .. } => "softmax-logistic",
            LossOracle::UncertainLs(_) => "uncertain-ls",
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            LossOracle::Linear { dim } => *dim,
            LossOracle::MlpBce(arch) => arch.input_dim,
            LossOracle::SoftmaxLogistic { feature_dim, .. } => *feature_dim,
            LossOracle::UncertainLs(_) => 1,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            LossOracle::Linear { dim } => *dim,
            LossOracle::MlpBce(arch) => arch.param_count(),
            LossOracle::SoftmaxLogistic { feature_dim, classes } => feature_dim * classes,
            LossOracle::UncertainLs(sys) => sys.param_count(),
        }
    }

    /// Number of classes for classifying families, `None` otherwise.
    pub fn class_count(&self) -> Option<usize> {
        match self {
            LossOracle::MlpBce(_) => Some(2),
            LossOracle::SoftmaxLogistic { classes, .. } => Some(*classes),
            _ => None,
        }
    }

    fn check_dims(&self, theta: &[f64], z: &LabeledPoint) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::dims(format!(
                "{}: theta has length {}, expected {}",
                self.family_name(),
                theta.len(),
                self.param_count()
            )));
        }
        if z.features.len() != self.feature_dim() {
            return Err(Error::dims(format!(
                "{}: point has {} features, expected {}",
                self.family_name(),
                z.features.len(),
                self.feature_dim()
            )));
        }
        match (self, z.label) {
            (LossOracle::MlpBce(_), Label::Binary(v)) if v <= 1 => Ok(()),
            (LossOracle::MlpBce(_), _) => Err(Error::InvalidArgument(
                "mlp-bce expects a binary {0,1} label".into(),
            )),
            (LossOracle::SoftmaxLogistic { classes, .. }, Label::Class(c)) if c < *classes => {
                Ok(())
            }
            (LossOracle::SoftmaxLogistic { classes, .. }, _) => Err(Error::InvalidArgument(
                format!("softmax-logistic expects a class label in [0, {classes})"),
            )),
            _ => Ok(()),
        }
    }

    /// Loss value at `(theta, z)`.
    pub fn value(&self, theta: &[f64], z: &LabeledPoint) -> Result<f64> {
        self.check_dims(theta, z)?;
        Ok(match self {
            LossOracle::Linear { .. } => linalg::dot(theta, &z.features),
            LossOracle::MlpBce(arch) => {
                let y = match z.label {
                    Label::Binary(v) => v as f64,
                    _ => unreachable!(),
                };
                mlp::value(arch, theta, &z.features, y)
            }
            LossOracle::SoftmaxLogistic { classes, .. } => {
                let y = match z.label {
                    Label::Class(c) => c,
                    _ => unreachable!(),
                };
                softmax::value(theta, &z.features, y, *classes)
            }
            LossOracle::UncertainLs(sys) => sys.value(theta, z.features[0]),
        })
    }

    /// Exact gradient of the loss with respect to theta.
    pub fn grad_theta(&self, theta: &[f64], z: &LabeledPoint) -> Result<Vec<f64>> {
        self.check_dims(theta, z)?;
        Ok(match self {
            LossOracle::Linear { .. } => z.features.clone(),
            LossOracle::MlpBce(arch) => {
                let y = match z.label {
                    Label::Binary(v) => v as f64,
                    _ => unreachable!(),
                };
                let mut g = vec![0.0; self.param_count()];
                mlp::grad(arch, theta, &z.features, y, Some(&mut g), None);
                g
            }
            LossOracle::SoftmaxLogistic { classes, .. } => {
                let y = match z.label {
                    Label::Class(c) => c,
                    _ => unreachable!(),
                };
                softmax::grad_theta(theta, &z.features, y, *classes)
            }
            LossOracle::UncertainLs(sys) => sys.grad_theta(theta, z.features[0]),
        })
    }

    /// Gradient of the loss with respect to the feature block of `z`.
    pub fn grad_input(&self, theta: &[f64], z: &LabeledPoint) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.feature_dim()];
        self.grad_input_into(theta, z, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`grad_input`](Self::grad_input) for inner
    /// sampling loops.
    pub fn grad_input_into(&self, theta: &[f64], z: &LabeledPoint, out: &mut [f64]) -> Result<()> {
        self.check_dims(theta, z)?;
        if out.len() != self.feature_dim() {
            return Err(Error::dims("grad_input output buffer has wrong length"));
        }
        match self {
            LossOracle::Linear { .. } => out.copy_from_slice(theta),
            LossOracle::MlpBce(arch) => {
                let y = match z.label {
                    Label::Binary(v) => v as f64,
                    _ => unreachable!(),
                };
                mlp::grad(arch, theta, &z.features, y, None, Some(out));
            }
            LossOracle::SoftmaxLogistic { classes, .. } => {
                let y = match z.label {
                    Label::Class(c) => c,
                    _ => unreachable!(),
                };
                softmax::grad_input(theta, &z.features, y, *classes, out);
            }
            LossOracle::UncertainLs(sys) => out[0] = sys.grad_xi(theta, z.features[0]),
        }
        Ok(())
    }

    /// Initial parameter vector for training: MLP weights are He-initialized
    /// from the stream, all other families start at zero.
    pub fn init_theta(&self, stream: &RngStream) -> Vec<f64> {
        match self {
            LossOracle::MlpBce(arch) => {
                let mut rng = stream.rng(&[tag::THETA_INIT]);
                mlp::init_theta(arch, &mut rng)
            }
            _ => vec![0.0; self.param_count()],
        }
    }

    /// Predicted class for classifying families; ties go to the lower index.
    pub fn predict_class(&self, theta: &[f64], features: &[f64]) -> Result<usize> {
        match self {
            LossOracle::MlpBce(arch) => {
                let z = LabeledPoint::new(features.to_vec(), Label::Binary(0));
                self.check_dims(theta, &z)?;
                // logit > 0 predicts class 1; the tie at 0 goes to class 0
                let v0 = mlp::value(arch, theta, features, 0.0);
                let v1 = mlp::value(arch, theta, features, 1.0);
                // loss(y=0) - loss(y=1) = logit
                Ok(if v0 - v1 > 0.0 { 1 } else { 0 })
            }
            LossOracle::SoftmaxLogistic { classes, .. } => {
                let z = LabeledPoint::new(features.to_vec(), Label::Class(0));
                self.check_dims(theta, &z)?;
                Ok(softmax::predict(theta, features, *classes))
            }
            _ => Err(Error::InvalidArgument(format!(
                "{} is not a classifier",
                self.family_name()
            ))),
        }
    }
}

/// Central finite-difference gradient of `f` at `x` with the given step.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut buf = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        buf[i] = xi + step;
        let up = f(&buf);
        buf[i] = xi - step;
        let down = f(&buf);
        buf[i] = xi;
        g[i] = (up - down) / (2.0 * step);
    }
    g
}

/// Relative error between two gradient vectors:
/// `||a - b|| / max(||a||, ||b||)`, and 0 when both are numerically zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let na = linalg::norm(a);
    let nb = linalg::norm(b);
    let denom = na.max(nb);
    if denom < 1e-12 {
        return 0.0;
    }
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / denom
}

/// Worst relative finite-difference error over random evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub family: String,
    pub n_points: usize,
    pub max_rel_err_theta: f64,
    pub max_rel_err_input: f64,
}

/// Compare the analytic gradients against central differences (step `1e-5`)
/// at `n_points` random `(theta, z)` pairs. With `n_points == 0` the report is
/// empty (both errors are 0).
pub fn finite_diff_check(oracle: &LossOracle, n_points: usize, seed: u64) -> Result<GradCheckReport> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    const STEP: f64 = 1e-5;
    let stream = RngStream::new(seed);
    let mut max_theta = 0.0f64;
    let mut max_input = 0.0f64;
    for k in 0..n_points {
        let mut rng = stream.rng(&[0xFD, k as u64]);
        // Scale theta draws down for the MLP so logits stay in a well-conditioned range.
        let theta_scale = match oracle {
            LossOracle::MlpBce(_) => 0.5,
            _ => 1.0,
        };
        let theta: Vec<f64> = (0..oracle.param_count())
            .map(|_| theta_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let features: Vec<f64> = match oracle {
            LossOracle::UncertainLs(_) => vec![rng.random::<f64>() - 0.5],
            _ => (0..oracle.feature_dim())
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        };
        let label = match oracle {
            LossOracle::MlpBce(_) => Label::Binary(u8::from(rng.random::<f64>() > 0.5)),
            LossOracle::SoftmaxLogistic { classes, .. } => {
                Label::Class(rng.random_range(0..*classes))
            }
            _ => Label::None,
        };
        let z = LabeledPoint::new(features.clone(), label);

        let analytic_t = oracle.grad_theta(&theta, &z)?;
        let fd_t = fd_gradient(
            |t| oracle.value(t, &z).expect("value at perturbed theta"),
            &theta,
            STEP,
        );
        max_theta = max_theta.max(relative_error(&analytic_t, &fd_t));

        let analytic_x = oracle.grad_input(&theta, &z)?;
        let fd_x = fd_gradient(
            |x| {
                oracle
                    .value(&theta, &z.with_features(x.to_vec()))
                    .expect("value at perturbed features")
            },
            &features,
            STEP,
        );
        max_input = max_input.max(relative_error(&analytic_x, &fd_x));
    }
    Ok(GradCheckReport {
        family: oracle.family_name().to_string(),
        n_points,
        max_rel_err_theta: max_theta,
        max_rel_err_input: max_input,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn all_families() -> Vec<LossOracle> {
        let mut rng = RngStream::new(77).rng(&[1]);
        use rand::Rng;
        use rand_distr::StandardNormal;
        let n = 10;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| -> Vec<f64> {
            (0..k).map(|_| rng.sample(StandardNormal)).collect()
        };
        let sys = UncertainLsSystem::new(
            Mat::new(n, n, draw(&mut rng, n * n)).unwrap(),
            Mat::new(n, n, draw(&mut rng, n * n)).unwrap(),
            draw(&mut rng, n),
        )
        .unwrap();
        let _ = rng.random::<f64>();
        vec![
            LossOracle::Linear { dim: 3 },
            LossOracle::MlpBce(MlpArchitecture::new(2, vec![4]).unwrap()),
            LossOracle::SoftmaxLogistic { feature_dim: 5, classes: 4 },
            LossOracle::UncertainLs(sys),
        ]
    }

    #[test]
    fn finite_differences_agree_for_all_families() {
        for oracle in all_families() {
            let report = finite_diff_check(&oracle, 20, 123).unwrap();
            assert!(
                report.max_rel_err_theta < 1e-5,
                "{}: theta rel err {}",
                report.family,
                report.max_rel_err_theta
            );
            assert!(
                report.max_rel_err_input < 1e-5,
                "{}: input rel err {}",
                report.family,
                report.max_rel_err_input
            );
        }
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        // Negative control: a biased analytic gradient must show up as a
        // large relative error under the same comparison.
        let oracle = LossOracle::Linear { dim: 3 };
        let theta = vec![0.4, -1.0, 2.0];
        let z = LabeledPoint::unlabeled(vec![1.0, 2.0, -0.5]);
        let mut corrupted = oracle.grad_theta(&theta, &z).unwrap();
        corrupted[0] += 0.25;
        let fd = fd_gradient(|t| oracle.value(t, &z).unwrap(), &theta, 1e-5);
        assert!(relative_error(&corrupted, &fd) > 1e-2);
    }

    #[test]
    fn empty_check_reports_zero() {
        let oracle = LossOracle::Linear { dim: 2 };
        let report = finite_diff_check(&oracle, 0, 1).unwrap();
        assert_eq!(report.n_points, 0);
        assert_eq!(report.max_rel_err_theta, 0.0);
        assert_eq!(report.max_rel_err_input, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let oracle = LossOracle::Linear { dim: 2 };
        let z = LabeledPoint::unlabeled(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            oracle.value(&[1.0, 2.0], &z),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            oracle.value(&[1.0], &LabeledPoint::unlabeled(vec![1.0, 2.0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn label_domains_are_enforced() {
        let oracle = LossOracle::SoftmaxLogistic { feature_dim: 2, classes: 3 };
        let bad = LabeledPoint::new(vec![0.0, 0.0], Label::Class(3));
        assert!(oracle.value(&vec![0.0; 6], &bad).is_err());
        let mlp = LossOracle::MlpBce(MlpArchitecture::new(2, vec![3]).unwrap());
        let bad2 = LabeledPoint::new(vec![0.0, 0.0], Label::None);
        assert!(mlp.value(&vec![0.0; mlp.param_count()], &bad2).is_err());
    }

    #[test]
    fn mlp_predict_matches_logit_sign() {
        let arch = MlpArchitecture::new(2, vec![4]).unwrap();
        let oracle = LossOracle::MlpBce(arch);
        let theta = oracle.init_theta(&RngStream::new(3));
        for f in [[0.5, 0.5], [-1.0, 2.0], [3.0, -0.2]] {
            let c = oracle.predict_class(&theta, &f).unwrap();
            let l0 = oracle
                .value(&theta, &LabeledPoint::new(f.to_vec(), Label::Binary(0)))
                .unwrap();
            let l1 = oracle
                .value(&theta, &LabeledPoint::new(f.to_vec(), Label::Binary(1)))
                .unwrap();
            assert_eq!(c, usize::from(l0 > l1));
        }
    }
}
