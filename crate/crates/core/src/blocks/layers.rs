use rand_chacha::ChaCha8Rng;

use crate::autodiff::{scaled_normal, ConvSpec, Graph, ParamId, ParamStore, Shape, Tensor4};
use crate::error::Result;

/// Initial PReLU slope, as in the He et al. PReLU initialisation.
pub const PRELU_INIT: f32 = 0.25;

/// Weight variance rule for a convolution, following He et al.: the
/// variance is `2 / ((1 + a²) · fan_in)` where `a` is the negative slope of
/// the rectifier applied to the layer's output. A linear layer has `a = 1`,
/// giving `1 / fan_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Followed by a PReLU starting at [`PRELU_INIT`].
    Rectified,
    /// No activation follows.
    Linear,
}

impl Init {
    pub fn gain(self) -> f64 {
        match self {
            Init::Rectified => {
                let a = f64::from(PRELU_INIT);
                2.0 / (1.0 + a * a)
            }
            Init::Linear => 1.0,
        }
    }
}

/// Registers parameters under a dotted name prefix with seeded He initialisation.
pub struct ParamBuilder<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a> ParamBuilder<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut ChaCha8Rng) -> Self {
        ParamBuilder {
            store,
            rng,
            prefix: String::new(),
        }
    }

    pub fn scope(&mut self, name: &str) -> ParamBuilder<'_> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        ParamBuilder {
            store: self.store,
            rng: self.rng,
            prefix,
        }
    }

    fn full_name(&self, leaf: &str) -> String {
        if self.prefix.is_empty() {
            leaf.to_string()
        } else {
            format!("{}.{leaf}", self.prefix)
        }
    }

    pub fn conv(&mut self, name: &str, spec: ConvSpec, transposed: bool, init: Init) -> Result<Conv> {
        spec.validate()?;
        let w = Tensor4::from_vec(spec.weight_shape(transposed), scaled_normal(&spec, init.gain(), self.rng))?;
        let b = Tensor4::zeros(Shape::new(1, 1, 1, spec.out_channels));
        let weight = self.store.add(self.full_name(&format!("{name}.weight")), w)?;
        let bias = self.store.add(self.full_name(&format!("{name}.bias")), b)?;
        Ok(Conv {
            spec,
            transposed,
            weight,
            bias,
        })
    }

    pub fn prelu(&mut self, name: &str, channels: usize) -> Result<PRelu> {
        let slope = self.store.add(
            self.full_name(&format!("{name}.slope")),
            Tensor4::full(Shape::new(1, 1, 1, channels), PRELU_INIT),
        )?;
        Ok(PRelu { slope })
    }
}

/// A convolution (direct or transposed) bound to its parameters.
#[derive(Debug, Clone, Copy)]
pub struct Conv {
    pub spec: ConvSpec,
    pub transposed: bool,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Conv {
    pub fn forward<G: Graph>(&self, g: &mut G, x: &G::Value) -> Result<G::Value> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        if self.transposed {
            g.conv_transpose2d(x, &w, &b, &self.spec)
        } else {
            g.conv2d(x, &w, &b, &self.spec)
        }
    }

    pub fn num_params(&self) -> usize {
        self.spec.weight_len() + self.spec.out_channels
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PRelu {
    pub slope: ParamId,
}

impl PRelu {
    pub fn forward<G: Graph>(&self, g: &mut G, x: &G::Value) -> Result<G::Value> {
        let a = g.param(self.slope);
        g.prelu(x, &a)
    }
}
