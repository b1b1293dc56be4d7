//! Least squares with an uncertain system matrix: `loss = ||A(xi) theta - b||^2`
//! where `A(xi) = A0 + xi * A1` and the data point is the scalar `xi`.

use crate::error::{Error, Result};
use crate::linalg::dot;

/// Dense row-major matrix, only as large as this loss family needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "matrix data length {} != {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = self * v`
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        for r in 0..self.rows {
            out[r] = dot(self.row(r), v);
        }
    }

    /// `out = self^T * v`
    pub fn matvec_t(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for r in 0..self.rows {
            let row = self.row(r);
            for c in 0..self.cols {
                out[c] += row[c] * v[r];
            }
        }
    }
}

/// The fixed problem data `(A0, A1, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainLsSystem {
    pub a0: Mat,
    pub a1: Mat,
    pub b: Vec<f64>,
}

impl UncertainLsSystem {
    pub fn new(a0: Mat, a1: Mat, b: Vec<f64>) -> Result<Self> {
        if a0.rows != a1.rows || a0.cols != a1.cols || b.len() != a0.rows {
            return Err(Error::dims(
                "uncertain-ls system shapes disagree (A0, A1 and b must match)",
            ));
        }
        Ok(UncertainLsSystem { a0, a1, b })
    }

    pub fn param_count(&self) -> usize {
        self.a0.cols
    }

    /// Residual `A(xi) theta - b`.
    fn residual(&self, theta: &[f64], xi: f64) -> Vec<f64> {
        let mut ax0 = vec![0.0; self.a0.rows];
        let mut ax1 = vec![0.0; self.a0.rows];
        self.a0.matvec(theta, &mut ax0);
        self.a1.matvec(theta, &mut ax1);
        (0..self.a0.rows).map(|r| ax0[r] + xi * ax1[r] - self.b[r]).collect()
    }

    pub(crate) fn value(&self, theta: &[f64], xi: f64) -> f64 {
        let r = self.residual(theta, xi);
        dot(&r, &r)
    }

    /// `2 A(xi)^T r`
    pub(crate) fn grad_theta(&self, theta: &[f64], xi: f64) -> Vec<f64> {
        let r = self.residual(theta, xi);
        let mut g0 = vec![0.0; self.a0.cols];
        let mut g1 = vec![0.0; self.a0.cols];
        self.a0.matvec_t(&r, &mut g0);
        self.a1.matvec_t(&r, &mut g1);
        (0..self.a0.cols).map(|c| 2.0 * (g0[c] + xi * g1[c])).collect()
    }

    /// `2 (A1 theta) . r`, the derivative with respect to the scalar `xi`.
    pub(crate) fn grad_xi(&self, theta: &[f64], xi: f64) -> f64 {
        let r = self.residual(theta, xi);
        let mut a1t = vec![0.0; self.a1.rows];
        self.a1.matvec(theta, &mut a1t);
        2.0 * dot(&a1t, &r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn system(seed: u64) -> UncertainLsSystem {
        let mut rng = crate::rng::RngStream::new(seed).rng(&[9]);
        use rand_distr::StandardNormal;
        let n = 10;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| -> Vec<f64> {
            (0..k).map(|_| rng.sample(StandardNormal)).collect()
        };
        let a0 = Mat::new(n, n, draw(&mut rng, n * n)).unwrap();
        let a1 = Mat::new(n, n, draw(&mut rng, n * n)).unwrap();
        let b = draw(&mut rng, n);
        UncertainLsSystem::new(a0, a1, b).unwrap()
    }

    #[test]
    fn zero_theta_loss_is_b_norm_squared() {
        let sys = system(1);
        let v = sys.value(&vec![0.0; 10], 0.27);
        assert!((v - dot(&sys.b, &sys.b)).abs() < 1e-12 * (1.0 + v));
    }

    #[test]
    fn grad_theta_at_zero_is_minus_two_a_t_b() {
        let sys = system(2);
        let xi = -0.4;
        let g = sys.grad_theta(&vec![0.0; 10], xi);
        let mut g0 = vec![0.0; 10];
        let mut g1 = vec![0.0; 10];
        sys.a0.matvec_t(&sys.b, &mut g0);
        sys.a1.matvec_t(&sys.b, &mut g1);
        for c in 0..10 {
            let expect = -2.0 * (g0[c] + xi * g1[c]);
            assert!((g[c] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn loss_is_exactly_quadratic_in_theta() {
        // loss(theta) - loss(0) - theta . grad(0) == ||A(xi) theta||^2
        let sys = system(3);
        let mut rng = crate::rng::RngStream::new(4).rng(&[0]);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..10).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let xi = rng.random::<f64>() - 0.5;
            let lhs = sys.value(&theta, xi)
                - sys.value(&vec![0.0; 10], xi)
                - dot(&theta, &sys.grad_theta(&vec![0.0; 10], xi));
            let mut at = vec![0.0; 10];
            let mut at1 = vec![0.0; 10];
            sys.a0.matvec(&theta, &mut at);
            sys.a1.matvec(&theta, &mut at1);
            let rhs: f64 = (0..10).map(|r| (at[r] + xi * at1[r]).powi(2)).sum();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()),
                "quadratic identity violated: {lhs} vs {rhs}"
            );
        }
    }
}
