use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::hourglass::HourGlassModule;
use super::reconstruct::{plain_reconstruct, wr_reconstruct};
use crate::autodiff::checkpoint::Checkpoint;
use crate::autodiff::{ConvSpec, Eager, Graph, ParamStore, Shape, Tensor4};
use crate::blocks::layers::{Conv, Init, PRelu, ParamBuilder};
use crate::error::{Error, Result};
use crate::imaging::pad::{next_multiple, pad_planes};
use crate::imaging::ImageRGB;
use crate::metrics::Upscaler;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// Softmax-weighted sum of the coarse outputs.
    Wr,
    /// Concatenate the coarse outputs and apply one 3×3 convolution.
    Plain,
}

impl HeadKind {
    pub fn label(self) -> &'static str {
        match self {
            HeadKind::Wr => "WR",
            HeadKind::Plain => "Plain",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadKind::Wr => "wr",
            HeadKind::Plain => "plain",
        })
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wr" => Ok(HeadKind::Wr),
            "plain" => Ok(HeadKind::Plain),
            _ => Err(Error::Config(format!("unknown head kind {s:?} (expected wr or plain)"))),
        }
    }
}

/// Architecture hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HbpnConfig {
    /// Number of hourglass modules K.
    pub modules: usize,
    /// DBP/UBP stages per module T.
    pub depth: usize,
    /// Full-resolution feature width.
    pub base_channels: usize,
    pub head: HeadKind,
}

impl Default for HbpnConfig {
    fn default() -> Self {
        HbpnConfig {
            modules: 3,
            depth: 3,
            base_channels: 64,
            head: HeadKind::Wr,
        }
    }
}

impl fmt::Display for HbpnConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "modules={} depth={} base_channels={} head={}",
            self.modules, self.depth, self.base_channels, self.head
        )
    }
}

const HEADER_KEYS: [&str; 4] = ["model.modules", "model.depth", "model.base_channels", "model.head"];

impl HbpnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modules == 0 || self.depth == 0 || self.base_channels == 0 {
            return Err(Error::Config(format!("all architecture sizes must be positive: {self}")));
        }
        if self.depth > 8 {
            return Err(Error::Config(format!("depth {} is unreasonably large", self.depth)));
        }
        Ok(())
    }

    /// Input sides must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.depth
    }

    /// Smallest admissible input side.
    pub fn min_size(&self) -> usize {
        2 << self.depth
    }

    pub fn to_header(&self) -> BTreeMap<String, String> {
        let values = [
            self.modules.to_string(),
            self.depth.to_string(),
            self.base_channels.to_string(),
            self.head.to_string(),
        ];
        HEADER_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    pub fn from_header(header: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            header
                .get(k)
                .ok_or_else(|| Error::Checkpoint(format!("header key {k} missing")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("header key {k} is not a count")))
        };
        let config = HbpnConfig {
            modules: num(HEADER_KEYS[0])?,
            depth: num(HEADER_KEYS[1])?,
            base_channels: num(HEADER_KEYS[2])?,
            head: get(HEADER_KEYS[3])?.parse()?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn ensure_matches(&self, requested: &HbpnConfig) -> Result<()> {
        if self != requested {
            return Err(Error::ArchitectureMismatch {
                expected: requested.to_string(),
                found: self.to_string(),
            });
        }
        Ok(())
    }
}

pub struct HbpnOutput<V> {
    pub sr: V,
    pub coarse: Vec<V>,
    pub weights: Vec<V>,
    pub last_preacts: Vec<V>,
}

#[derive(Debug, Clone)]
pub struct HbpnModel {
    pub config: HbpnConfig,
    pub store: ParamStore,
    pub feature_conv: Conv,
    pub feature_act: PRelu,
    pub modules: Vec<HourGlassModule>,
    /// `global_shortcuts[k]` carries module `k`'s input features past it.
    pub global_shortcuts: Vec<Conv>,
    pub plain_head: Option<Conv>,
}

impl HbpnModel {
    /// Builds a freshly initialised model. Parameters are registered in a
    /// fixed order with the plain head last, so switching the head kind
    /// leaves every other parameter identical for the same seed.
    pub fn new(config: HbpnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ParamBuilder::new(&mut store, &mut rng);
        let c = config.base_channels;
        let feature_conv = b.scope("feature").conv("conv", ConvSpec::same3x3(3, c), false, Init::Rectified)?;
        let feature_act = b.scope("feature").prelu("act", c)?;
        let mut modules = Vec::with_capacity(config.modules);
        for k in 0..config.modules {
            modules.push(HourGlassModule::new(&mut b.scope(&format!("hg{k}")), c, config.depth)?);
        }
        let mut global_shortcuts = Vec::new();
        for k in 0..config.modules - 1 {
            global_shortcuts.push(b.conv(&format!("global{k}"), ConvSpec::pointwise(c, c), false, Init::Linear)?);
        }
        let plain_head = match config.head {
            HeadKind::Plain => Some(b.conv("plain_head", ConvSpec::same3x3(3 * config.modules, 3), false, Init::Linear)?),
            HeadKind::Wr => None,
        };
        Ok(HbpnModel {
            config,
            store,
            feature_conv,
            feature_act,
            modules,
            global_shortcuts,
            plain_head,
        })
    }

    /// Closed-form parameter count for `config`.
    pub fn param_count(config: &HbpnConfig) -> usize {
        let c = config.base_channels;
        let k = config.modules;
        let feature = 3 * c * 9 + c + c;
        let plain = match config.head {
            HeadKind::Plain => 3 * k * 3 * 9 + 3,
            HeadKind::Wr => 0,
        };
        feature + k * HourGlassModule::param_count(c, config.depth) + (k - 1) * (c * c + c) + plain
    }

    pub fn num_params(&self) -> usize {
        self.store.num_elements()
    }

    pub fn forward<G: Graph>(&self, g: &mut G, x: &G::Value) -> Result<HbpnOutput<G::Value>> {
        let s = g.shape(x);
        if s.c() != 3 {
            return Err(Error::shape("hbpn_forward", format!("channel dimension: expected 3, got {}", s.c())));
        }
        let f = self.feature_conv.forward(g, x)?;
        let mut features = self.feature_act.forward(g, &f)?;
        let k = self.modules.len();
        let mut coarse = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(k);
        let mut last_preacts = Vec::with_capacity(k);
        for (i, module) in self.modules.iter().enumerate() {
            let out = module.forward(g, &features)?;
            coarse.push(out.coarse);
            weights.push(out.weight);
            last_preacts.push(out.last_preact);
            if i + 1 < k {
                let skip = self.global_shortcuts[i].forward(g, &features)?;
                features = g.add(&out.features, &skip)?;
            }
        }
        let sr = match &self.plain_head {
            Some(head) => plain_reconstruct(g, &coarse, head)?,
            None => wr_reconstruct(g, &coarse, &weights)?,
        };
        Ok(HbpnOutput {
            sr,
            coarse,
            weights,
            last_preacts,
        })
    }

    /// Padded size accepted by the modules for an `h × w` input.
    pub fn padded_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let m = self.config.size_multiple();
        let min = self.config.min_size();
        (next_multiple(h, m).max(min), next_multiple(w, m).max(min))
    }

    /// Reflect-pads a pre-upsampled image to an admissible size.
    pub fn pad_input(&self, img: &ImageRGB) -> Result<Tensor4> {
        let (h, w) = img.dims();
        let (ph, pw) = self.padded_dims(h, w);
        let data = if (ph, pw) == (h, w) {
            img.data().to_vec()
        } else {
            pad_planes(img.data(), 3, h, w, ph, pw)
        };
        Tensor4::from_vec(Shape::new(1, 3, ph, pw), data)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            header: self.config.to_header(),
            tensors: self
                .store
                .iter()
                .map(|p| {
                    let t = Tensor4::from_vec(p.tensor.shape(), p.tensor.data().to_vec()).expect("same shape");
                    (p.name.clone(), t)
                })
                .collect(),
        }
    }

    /// Copies parameter values out of `ckpt`, which must hold exactly this model's parameters.
    pub fn load_params(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let model_params = self.store.len();
        let found = ckpt.tensors.iter().filter(|(n, _)| !n.starts_with("adam.")).count();
        if found != model_params {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {found} model tensors, model has {model_params}"
            )));
        }
        for id in self.store.ids().collect::<Vec<_>>() {
            let name = self.store.name(id).to_string();
            let t = ckpt
                .tensor(&name)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} missing")))?;
            let dst = self.store.get_mut(id);
            if t.shape() != dst.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name}: checkpoint shape {} vs model {}",
                    t.shape(),
                    dst.shape()
                )));
            }
            dst.data_mut().copy_from_slice(t.data());
        }
        Ok(())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config = HbpnConfig::from_header(&ckpt.header)?;
        let mut model = HbpnModel::new(config, 0)?;
        model.load_params(ckpt)?;
        Ok(model)
    }

    /// Gradient-free forward pass on a `(n, 3, H, W)` tensor of admissible size.
    pub fn infer_tensor(&self, x: &Tensor4) -> Result<Tensor4> {
        let mut g = Eager::new(&self.store);
        let x = g.constant(Tensor4::from_vec(x.shape(), x.data().to_vec())?);
        let out = self.forward(&mut g, &x)?;
        Ok(g.to_tensor(&out.sr))
    }
}

impl Upscaler for HbpnModel {
    fn upscale(&self, input: &ImageRGB) -> Result<ImageRGB> {
        let (h, w) = input.dims();
        let x = self.pad_input(input)?;
        let y = self.infer_tensor(&x)?;
        ImageRGB::from_tensor(&y, 0)?.crop(0, 0, h, w)
    }
}
