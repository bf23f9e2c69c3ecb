use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::conv::ConvSpec;
use super::tape::Grads;
use super::tensor::{Shape, Tensor4};
use crate::error::{Error, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor4,
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, mut tensor: Tensor4) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name {name}"
            )));
        }
        tensor.requires_grad = true;
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Param { name, tensor });
        Ok(ParamId(id))
    }

    pub fn get(&self, id: ParamId) -> &Tensor4 {
        &self.params[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor4 {
        &mut self.params[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    /// Total number of scalar parameters.
    pub fn num_elements(&self) -> usize {
        self.params.iter().map(|p| p.tensor.shape().numel()).sum()
    }

    /// Adds freshly computed gradients into each parameter's gradient buffer.
    pub fn accumulate(&mut self, grads: &Grads) -> Result<()> {
        for (id, g) in grads.param_grads() {
            let p = &mut self.params[id.0].tensor;
            if p.requires_grad {
                p.accumulate_grad(g)?;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(|p| p.tensor.zero_grad());
    }

    /// Replaces every parameter value with the one of the same name in `other`.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Checkpoint(format!(
                "parameter count {} does not match model ({})",
                other.len(),
                self.len()
            )));
        }
        for p in &mut self.params {
            let src = other
                .find(&p.name)
                .map(|id| other.get(id))
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {}", p.name)))?;
            if src.shape() != p.tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {} in checkpoint, {} in model",
                    p.name,
                    src.shape(),
                    p.tensor.shape()
                )));
            }
            p.tensor.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}

/// He normal initialisation: zero mean, variance `2 / fan_in` with
/// `fan_in = in_channels · k²`.
pub fn he_normal(spec: &ConvSpec, rng: &mut impl rand::Rng) -> Vec<f32> {
    scaled_normal(spec, 2.0, rng)
}

/// Zero-mean normal weights with variance `gain / fan_in`,
/// `fan_in = in_channels · k²`.
pub fn scaled_normal(spec: &ConvSpec, gain: f64, rng: &mut impl rand::Rng) -> Vec<f32> {
    let fan_in = (spec.in_channels * spec.kernel * spec.kernel) as f64;
    let normal = Normal::new(0.0, (gain / fan_in).sqrt()).expect("positive std");
    (0..spec.weight_len())
        .map(|_| normal.sample(rng) as f32)
        .collect()
}

/// Seeded He initialisation of one convolution; biases start at zero.
pub fn he_init(spec: &ConvSpec, transposed: bool, seed: u64) -> (Tensor4, Tensor4) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Tensor4::from_vec(spec.weight_shape(transposed), he_normal(spec, &mut rng))
        .expect("weight length matches spec");
    let b = Tensor4::zeros(Shape::new(1, 1, 1, spec.out_channels));
    (w, b)
}
