//! Fully-connected ReLU network with a scalar logit output and sigmoid
//! cross-entropy loss. Gradients are hand-derived backpropagation; the
//! finite-difference checker in the parent module is the correctness gate.

use crate::error::{Error, Result};

/// Layer widths of an MLP classifier: `input_dim -> hidden[0] -> ... -> 1`.
///
/// Hidden layers use ReLU; the output is a single logit fed to a sigmoid
/// cross-entropy against a {0,1} label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument("mlp input_dim must be >= 1".into()));
        }
        if hidden.is_empty() || hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument(
                "mlp needs at least one hidden layer of width >= 1".into(),
            ));
        }
        Ok(MlpArchitecture { input_dim, hidden })
    }

    /// Widths including input and the scalar output: `[d, h1, ..., hk, 1]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    /// Total parameter count: per layer `out * in` weights plus `out` biases.
    pub fn param_count(&self) -> usize {
        let w = self.widths();
        (1..w.len()).map(|l| w[l] * (w[l - 1] + 1)).sum()
    }
}

/// Offsets of (weights, biases) for layer `l` in the flat parameter vector.
/// Weights are row-major `[out][in]`, followed by the bias vector.
fn layer_offsets(widths: &[usize]) -> Vec<(usize, usize)> {
    let mut offs = Vec::new();
    let mut pos = 0;
    for l in 1..widths.len() {
        let w_at = pos;
        pos += widths[l] * widths[l - 1];
        let b_at = pos;
        pos += widths[l];
        offs.push((w_at, b_at));
    }
    offs
}

struct Forward {
    /// Post-activation of every layer; `acts[0]` is the input, the last entry
    /// is the single raw logit (no activation on the output layer).
    acts: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers, kept for the ReLU mask.
    pre: Vec<Vec<f64>>,
}

fn forward(arch: &MlpArchitecture, theta: &[f64], x: &[f64]) -> Forward {
    let widths = arch.widths();
    let offs = layer_offsets(&widths);
    let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
    let mut pre: Vec<Vec<f64>> = Vec::new();
    for l in 1..widths.len() {
        let (w_at, b_at) = offs[l - 1];
        let n_in = widths[l - 1];
        let n_out = widths[l];
        let input = acts.last().unwrap().clone();
        let mut z = vec![0.0; n_out];
        for o in 0..n_out {
            let row = &theta[w_at + o * n_in..w_at + (o + 1) * n_in];
            let mut s = theta[b_at + o];
            for i in 0..n_in {
                s += row[i] * input[i];
            }
            z[o] = s;
        }
        if l + 1 < widths.len() {
            let a = z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
            pre.push(z);
            acts.push(a);
        } else {
            acts.push(z); // raw logit
        }
    }
    Forward { acts, pre }
}

/// Stable sigmoid cross-entropy with logit `o` and label `y in {0,1}`:
/// `max(o,0) - o*y + ln(1 + exp(-|o|))`.
fn bce_with_logit(o: f64, y: f64) -> f64 {
    o.max(0.0) - o * y + (-o.abs()).exp().ln_1p()
}

fn sigmoid(o: f64) -> f64 {
    if o >= 0.0 {
        1.0 / (1.0 + (-o).exp())
    } else {
        let e = o.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn value(arch: &MlpArchitecture, theta: &[f64], x: &[f64], y: f64) -> f64 {
    let fwd = forward(arch, theta, x);
    bce_with_logit(fwd.acts.last().unwrap()[0], y)
}

/// Backpropagation producing the gradient with respect to theta and,
/// optionally, with respect to the input features.
pub(crate) fn grad(
    arch: &MlpArchitecture,
    theta: &[f64],
    x: &[f64],
    y: f64,
    grad_theta: Option<&mut [f64]>,
    grad_input: Option<&mut [f64]>,
) {
    let widths = arch.widths();
    let offs = layer_offsets(&widths);
    let fwd = forward(arch, theta, x);
    let logit = fwd.acts.last().unwrap()[0];
    // d loss / d logit
    let mut delta = vec![sigmoid(logit) - y];

    let mut gt = grad_theta;
    if let Some(g) = gt.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for l in (1..widths.len()).rev() {
        let (w_at, b_at) = offs[l - 1];
        let n_in = widths[l - 1];
        let n_out = widths[l];
        let input = &fwd.acts[l - 1];
        if let Some(g) = gt.as_deref_mut() {
            for o in 0..n_out {
                let d = delta[o];
                for i in 0..n_in {
                    g[w_at + o * n_in + i] = d * input[i];
                }
                g[b_at + o] = d;
            }
        }
        // delta for the previous layer: W^T delta, masked by ReLU'
        if l > 1 || grad_input.is_some() {
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &theta[w_at + o * n_in..w_at + (o + 1) * n_in];
                for i in 0..n_in {
                    prev[i] += d * row[i];
                }
            }
            if l > 1 {
                let z = &fwd.pre[l - 2];
                for i in 0..n_in {
                    if z[i] <= 0.0 {
                        prev[i] = 0.0;
                    }
                }
            }
            delta = prev;
        }
    }
    if let Some(g) = grad_input {
        g.copy_from_slice(&delta);
    }
}

/// He-style initialization: weights `N(0, 2/fan_in)`, biases zero.
pub(crate) fn init_theta<R: rand::Rng>(arch: &MlpArchitecture, rng: &mut R) -> Vec<f64> {
    use rand_distr::StandardNormal;
    let widths = arch.widths();
    let offs = layer_offsets(&widths);
    let mut theta = vec![0.0; arch.param_count()];
    for l in 1..widths.len() {
        let (w_at, _) = offs[l - 1];
        let n_in = widths[l - 1];
        let n_out = widths[l];
        let std = (2.0 / n_in as f64).sqrt();
        for k in 0..n_out * n_in {
            let g: f64 = rng.sample(StandardNormal);
            theta[w_at + k] = std * g;
        }
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> MlpArchitecture {
        MlpArchitecture::new(2, vec![4]).unwrap()
    }

    #[test]
    fn param_count_matches_layout() {
        // 2 -> 4 -> 1: (4*2 + 4) + (1*4 + 1) = 17
        assert_eq!(arch().param_count(), 17);
    }

    #[test]
    fn zero_weights_label_one_gives_log_two() {
        let a = arch();
        let theta = vec![0.0; a.param_count()];
        let v = value(&a, &theta, &[0.3, -0.7], 1.0);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_have_zero_input_gradient() {
        let a = arch();
        let theta = vec![0.0; a.param_count()];
        let mut gi = vec![1.0; 2];
        grad(&a, &theta, &[0.3, -0.7], 1.0, None, Some(&mut gi));
        assert_eq!(gi, vec![0.0, 0.0]);
    }

    #[test]
    fn final_layer_positive_homogeneity() {
        // Scaling the output layer scales the logit; hidden activations are
        // untouched because earlier layers are unchanged.
        let a = arch();
        let mut rng = crate::rng::RngStream::new(11).rng(&[1]);
        let theta = init_theta(&a, &mut rng);
        let x = [0.4, 1.3];
        let logit = |t: &[f64]| {
            let f = forward(&a, t, &x);
            f.acts.last().unwrap()[0]
        };
        let base = logit(&theta);
        for k in [0.5, 2.0, 7.25] {
            let mut scaled = theta.clone();
            // output layer = last 5 params (4 weights + 1 bias)
            for v in scaled[12..].iter_mut() {
                *v *= k;
            }
            let s = logit(&scaled);
            assert!(
                (s - k * base).abs() <= 1e-12 * (1.0 + (k * base).abs()),
                "logit not homogeneous: {s} vs {}",
                k * base
            );
        }
    }
}
