//! Adam with decoupled weight decay.
//!
//! Standard recurrence with bias correction:
//! `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`,
//! `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(dim: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One in-place update. `params` and `grads` must match the state size.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "optimizer state has {} entries, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps)
                + self.lr * self.weight_decay * params[i];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_zero_decay_leaves_params() {
        let mut opt = AdamW::new(3, 1e-3, 0.0);
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        opt.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn single_step_hand_value() {
        // from m = v = 0 with g = 1: m_hat = g, v_hat = g^2, so the update is
        // -lr * 1/(1 + eps) - lr * wd * theta
        let lr = 1e-2;
        let wd = 0.01;
        let theta0 = 0.7;
        let mut opt = AdamW::new(1, lr, wd);
        let mut params = vec![theta0];
        opt.step(&mut params, &[1.0]).unwrap();
        let want = theta0 - lr * (1.0 / (1.0 + 1e-8)) - lr * wd * theta0;
        assert!((params[0] - want).abs() < 1e-12, "{} vs {want}", params[0]);
    }

    #[test]
    fn matches_scripted_recurrence_over_steps() {
        // independent scalar transcript of the recurrence
        let (lr, b1, b2, eps, wd) = (1e-3, 0.9, 0.999, 1e-8, 0.02);
        let grads = [1.0, -0.5, 0.25, 2.0, -1.5];
        let mut theta_ref = 0.3f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (step, &g) in grads.iter().enumerate() {
            let t = (step + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            theta_ref -= lr * m_hat / (v_hat.sqrt() + eps) + lr * wd * theta_ref;
        }

        let mut opt = AdamW::new(1, lr, wd);
        opt.weight_decay = wd;
        let mut params = vec![0.3];
        for &g in &grads {
            opt.step(&mut params, &[g]).unwrap();
        }
        assert!((params[0] - theta_ref).abs() < 1e-15);
        assert_eq!(opt.step_count(), 5);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let mut opt = AdamW::new(2, 1e-3, 0.0);
        let mut params = vec![0.0; 3];
        assert!(opt.step(&mut params, &[0.0; 3]).is_err());
    }
}
