//! Adam optimizer with bias correction.

use crate::error::{Error, Result};

use super::layers::Param;
use super::tensor::Tensor;

/// Adam moment state for a fixed, ordered list of parameters.
///
/// Moments are laid out positionally: every call to [`AdamState::step`] must
/// pass the same parameters in the same order.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::with(0.9, 0.999, 1e-8)
    }

    pub fn with(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        assert!(beta1 > 0.0 && beta1 < 1.0, "beta1 out of range");
        assert!(beta2 > 0.0 && beta2 < 1.0, "beta2 out of range");
        AdamState {
            step: 0,
            beta1,
            beta2,
            epsilon,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// One Adam update over `params` using their accumulated gradients.
    /// Gradients are consumed read-only; the caller zeroes them per batch.
    pub fn step(&mut self, lr: f64, params: &mut [&mut Param]) -> Result<()> {
        if self.first_moment.is_empty() {
            for p in params.iter() {
                self.first_moment.push(Tensor::zeros(p.value.shape()));
                self.second_moment.push(Tensor::zeros(p.value.shape()));
            }
        }
        if self.first_moment.len() != params.len() {
            return Err(Error::Shape(format!(
                "adam state tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (idx, p) in params.iter_mut().enumerate() {
            if p.grad.shape() != self.first_moment[idx].shape() {
                return Err(Error::Shape(format!(
                    "adam parameter {idx} changed shape: {:?} vs {:?}",
                    p.grad.shape(),
                    self.first_moment[idx].shape()
                )));
            }
            if !p.grad.all_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite gradient in parameter {idx} at step {}",
                    self.step
                )));
            }
            let m = self.first_moment[idx].data_mut();
            let v = self.second_moment[idx].data_mut();
            let vals = p.value.data_mut();
            let grads = p.grad.data();
            for i in 0..vals.len() {
                let g = grads[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                vals[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}
