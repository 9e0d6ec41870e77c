//! Adaptive-moment (Adam) parameter updates.
//!
//! Bias-corrected first/second moments; the update is a pure function of
//! (state, params, grads), so identical inputs give bit-identical steps.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_LEARNING_RATE: f64 = 2e-4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: u64,
    first: Vec<DenseMatrix<T>>,
    second: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shapes: &[(usize, usize)], lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr: T::from_f64_lossy(lr),
            beta1: T::from_f64_lossy(beta1),
            beta2: T::from_f64_lossy(beta2),
            eps: T::from_f64_lossy(1e-8),
            step: 0,
            first: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            second: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
        }
    }

    /// Betas (0.9, 0.999): everything except adversarial training.
    pub fn standard(shapes: &[(usize, usize)], lr: f64) -> Self {
        Self::new(shapes, lr, 0.9, 0.999)
    }

    /// Betas (0.5, 0.9): generator and discriminator updates.
    pub fn adversarial(shapes: &[(usize, usize)], lr: f64) -> Self {
        Self::new(shapes, lr, 0.5, 0.9)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    pub fn step(
        &mut self,
        params: &mut [&mut DenseMatrix<T>],
        grads: &[&DenseMatrix<T>],
    ) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(CoreError::InvalidInput(format!(
                "optimizer tracks {} tensors, got {} params / {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if (p.rows(), p.cols()) != (m.rows(), m.cols())
                || (g.rows(), g.cols()) != (m.rows(), m.cols())
            {
                return Err(CoreError::ShapeMismatch(
                    "optimizer step shapes do not match tracked state".into(),
                ));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let one = T::one();

        for i in 0..params.len() {
            let g = grads[i].data();
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            let p = params[i].data_mut();
            for j in 0..g.len() {
                m[j] = self.beta1 * m[j] + (one - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (one - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] = p[j] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = AdamState::standard(&[(2, 2)], 1e-3);
        let mut p = M::from_vec(2, 2, vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        let before = p.clone();
        let g = M::zeros(2, 2);
        state.step(&mut [&mut p], &[&g]).unwrap();
        assert_eq!(p.data(), before.data());
    }

    #[test]
    fn single_step_with_unit_gradient_moves_by_learning_rate() {
        let lr = 0.0002;
        let mut state = AdamState::standard(&[(1, 1)], lr);
        let mut p = M::from_vec(1, 1, vec![0.5]).unwrap();
        let g = M::from_vec(1, 1, vec![1.0]).unwrap();
        state.step(&mut [&mut p], &[&g]).unwrap();
        // Bias correction makes m_hat = v_hat = 1, so the step is lr/(1+eps).
        let expected = 0.5 - lr / (1.0 + 1e-8);
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut state = AdamState::adversarial(&[(2, 1)], 1e-3);
            let mut p = M::from_vec(2, 1, vec![0.1, -0.4]).unwrap();
            for k in 0..25 {
                let g = M::from_vec(2, 1, vec![(k as f64).sin(), 0.3]).unwrap();
                state.step(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        assert_eq!(run().data(), run().data());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut state = AdamState::standard(&[(2, 2)], 1e-3);
        let mut p = M::zeros(2, 3);
        let g = M::zeros(2, 2);
        assert!(state.step(&mut [&mut p], &[&g]).is_err());
    }
}
