//! Multi-class logistic regression: `loss = -w_y . x + log(sum_c exp(w_c . x))`.
//!
//! The flat parameter vector stores one block of length `d` per class, so the
//! weight matrix columns are `theta[c*d..(c+1)*d]`.

use crate::linalg::{dot, log_sum_exp};

pub(crate) fn logits(theta: &[f64], x: &[f64], classes: usize) -> Vec<f64> {
    let d = x.len();
    (0..classes).map(|c| dot(&theta[c * d..(c + 1) * d], x)).collect()
}

fn softmax_from_logits(u: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(u);
    u.iter().map(|&v| (v - lse).exp()).collect()
}

pub(crate) fn value(theta: &[f64], x: &[f64], y: usize, classes: usize) -> f64 {
    let u = logits(theta, x, classes);
    -u[y] + log_sum_exp(&u)
}

pub(crate) fn grad_theta(theta: &[f64], x: &[f64], y: usize, classes: usize) -> Vec<f64> {
    let d = x.len();
    let p = softmax_from_logits(&logits(theta, x, classes));
    let mut g = vec![0.0; classes * d];
    for c in 0..classes {
        let coef = p[c] - if c == y { 1.0 } else { 0.0 };
        for i in 0..d {
            g[c * d + i] = coef * x[i];
        }
    }
    g
}

pub(crate) fn grad_input(theta: &[f64], x: &[f64], y: usize, classes: usize, out: &mut [f64]) {
    let d = x.len();
    let p = softmax_from_logits(&logits(theta, x, classes));
    out.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..classes {
        let coef = p[c] - if c == y { 1.0 } else { 0.0 };
        for i in 0..d {
            out[i] += coef * theta[c * d + i];
        }
    }
}

/// Argmax prediction; ties resolve to the lower class index.
pub(crate) fn predict(theta: &[f64], x: &[f64], classes: usize) -> usize {
    let u = logits(theta, x, classes);
    let mut best = 0;
    for c in 1..classes {
        if u[c] > u[best] {
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_loss_is_log_c() {
        for classes in [2usize, 5, 10] {
            let theta = vec![0.0; classes * 3];
            let v = value(&theta, &[0.1, -2.0, 0.7], 1.min(classes - 1), classes);
            assert!((v - (classes as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_grad_theta_blocks() {
        // block c: x * (1/C - [c == y])
        let classes = 4;
        let x = [1.5, -0.5];
        let y = 2;
        let theta = vec![0.0; classes * 2];
        let g = grad_theta(&theta, &x, y, classes);
        for c in 0..classes {
            let coef = 1.0 / classes as f64 - if c == y { 1.0 } else { 0.0 };
            for i in 0..2 {
                assert!((g[c * 2 + i] - coef * x[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_weights_grad_input_is_zero() {
        let mut out = vec![1.0; 2];
        grad_input(&vec![0.0; 8], &[1.0, 2.0], 0, 4, &mut out);
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn shift_invariance_per_class_constant() {
        // Adding the same vector v to every class block shifts all logits by
        // v.x, which cancels in the loss.
        let mut rng = crate::rng::RngStream::new(5).rng(&[0]);
        use rand::Rng;
        let classes = 3;
        let d = 4;
        for _ in 0..20 {
            let theta: Vec<f64> = (0..classes * d).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let x: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let mut shifted = theta.clone();
            for c in 0..classes {
                for i in 0..d {
                    shifted[c * d + i] += v[i];
                }
            }
            let a = value(&theta, &x, 1, classes);
            let b = value(&shifted, &x, 1, classes);
            assert!(
                (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                "shift invariance violated: {a} vs {b}"
            );
        }
    }

    #[test]
    fn predict_breaks_ties_low() {
        let theta = vec![0.0; 6];
        assert_eq!(predict(&theta, &[1.0, 1.0], 3), 0);
    }
}
