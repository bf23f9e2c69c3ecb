use log::warn;

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightDecayMode {
    /// `g ← g + λθ` before the moment updates (classic Adam).
    L2,
    /// `θ ← θ − lr·λ·θ` applied next to the Adam step (AdamW).
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    pub decay_mode: WeightDecayMode,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            decay_mode: WeightDecayMode::L2,
        }
    }
}

/// First/second moment estimates, one pair per parameter in store order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn zeros(store: &ParamStore) -> Self {
        let sizes: Vec<usize> = store.iter().map(|p| p.tensor.data().len()).collect();
        AdamState {
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn matches(&self, store: &ParamStore) -> bool {
        self.m.len() == store.len()
            && self.v.len() == store.len()
            && store
                .iter()
                .zip(self.m.iter().zip(&self.v))
                .all(|(p, (m, v))| m.len() == p.tensor.data().len() && v.len() == m.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepReport {
    pub step: u64,
    /// The update was skipped because some gradient was not finite.
    pub rejected: bool,
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    state: AdamState,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Result<Self> {
        Self::with_state(config, AdamState::zeros(store), store)
    }

    pub fn with_state(config: AdamConfig, state: AdamState, store: &ParamStore) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                config.lr
            )));
        }
        if !state.matches(store) {
            return Err(Error::InvalidArgument(
                "optimizer state does not match parameter shapes".into(),
            ));
        }
        Ok(Adam { config, state })
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    /// Applies one bias-corrected Adam update from the gradients accumulated
    /// in `store`. Parameters without a gradient buffer are left untouched.
    pub fn step(&mut self, store: &mut ParamStore) -> StepReport {
        self.state.step += 1;
        let t = self.state.step;
        let bad = store
            .iter()
            .find(|p| p.tensor.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())));
        if let Some(p) = bad {
            warn!("adam step {t}: non-finite gradient in {}, update rejected", p.name);
            return StepReport { step: t, rejected: true };
        }

        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
            decay_mode,
        } = self.config;
        let bc1 = (1.0 - f64::from(beta1).powi(t as i32)) as f32;
        let bc2 = (1.0 - f64::from(beta2).powi(t as i32)) as f32;

        for (idx, p) in store.iter_mut().enumerate() {
            let tensor = &mut p.tensor;
            if !tensor.requires_grad {
                continue;
            }
            let Some(grad) = tensor.grad().map(<[f32]>::to_vec) else {
                continue;
            };
            let m = &mut self.state.m[idx];
            let v = &mut self.state.v[idx];
            for (i, theta) in tensor.data_mut().iter_mut().enumerate() {
                let mut g = grad[i];
                match decay_mode {
                    WeightDecayMode::L2 => g += weight_decay * *theta,
                    WeightDecayMode::Decoupled => *theta -= lr * weight_decay * *theta,
                }
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        StepReport { step: t, rejected: false }
    }
}
