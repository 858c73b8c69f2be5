use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every tensor of a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = || params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        AdamState {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One bias-corrected Adam update:
    /// `θ ← θ − lr · m̂ / (sqrt(v̂) + eps)`.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != self.m.len() || params.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} gradients for {} parameters", grads.len(), self.m.len()),
            ));
        }
        for (id, g) in params.ids().zip(grads) {
            if g.len() != self.m[id.0].len() {
                return Err(Error::shape(
                    "adam_step",
                    format!("gradient for {} has {} values, expected {}", params.name(id), g.len(), self.m[id.0].len()),
                ));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, g) in grads.iter().enumerate() {
            let theta = params.tensors[i].data_mut();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..g.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                theta[j] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Tensor;

    fn store(v: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("p", Tensor::vector(v.to_vec()));
        s
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = store(&[0.0, 1.0, -4.0]);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        adam.step(&mut p, &[vec![3.0, -1e-3, 250.0]]).unwrap();
        let lr = 0.001;
        let expect = [-lr, 1.0 + lr, -4.0 - lr];
        for (a, b) in p.tensors[0].data().iter().zip(expect) {
            assert!((a - b).abs() < lr * 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = store(&[0.5, -0.25]);
        let before = p.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        adam.step(&mut p, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p, before);
        adam.step(&mut p, &[vec![1.0, 0.0]]).unwrap();
        let after_one = adam.first_moment()[0][0];
        adam.step(&mut p, &[vec![0.0, 0.0]]).unwrap();
        // moments decay even without gradient
        assert!((adam.first_moment()[0][0] - 0.9 * after_one).abs() < 1e-18);
        assert!(adam.second_moment()[0].iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn three_step_trace_matches_scalar_reference() {
        // Reference: textbook Adam on a scalar, written out longhand.
        let grads = [0.3, -1.2, 0.05];
        let (lr, b1, b2, eps) = (0.001f64, 0.9f64, 0.999f64, 1e-8f64);
        let (mut theta, mut m, mut v) = (0.7f64, 0.0f64, 0.0f64);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as f64;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powf(t));
            let vh = v / (1.0 - b2.powf(t));
            theta -= lr * mh / (vh.sqrt() + eps);
        }

        let mut p = store(&[0.7]);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        for g in grads {
            adam.step(&mut p, &[vec![g]]).unwrap();
        }
        assert!((p.tensors[0].data()[0] - theta).abs() < 1e-15);
        assert_eq!(adam.steps(), 3);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = store(&[0.0, 0.0]);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        assert!(adam.step(&mut p, &[vec![1.0]]).is_err());
        assert!(adam.step(&mut p, &[]).is_err());
    }
}
