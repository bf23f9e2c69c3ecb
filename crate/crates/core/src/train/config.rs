//! Flat `key = value` training configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors. [`TrainConfig::to_text`] writes every key, so its output parses
//! back to the same configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::autodiff::{AdamConfig, WeightDecayMode};
use crate::error::{Error, Result};
use crate::net::{HbpnConfig, HeadKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    L1,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mse => "mse",
            LossKind::L1 => "l1",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(LossKind::Mse),
            "l1" => Ok(LossKind::L1),
            _ => Err(Error::Config(format!("unknown loss {s:?} (expected mse or l1)"))),
        }
    }
}

/// Consecutive phases of `(batch_size, iterations)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule(pub Vec<(usize, usize)>);

impl BatchSchedule {
    pub fn total_steps(&self) -> usize {
        self.0.iter().map(|&(_, n)| n).sum()
    }

    /// Batch size used at 0-based `step`, or `None` past the end.
    pub fn batch_at(&self, step: usize) -> Option<usize> {
        let mut start = 0;
        for &(b, n) in &self.0 {
            if step < start + n {
                return Some(b);
            }
            start += n;
        }
        None
    }

    /// Number of samples drawn before 0-based `step`.
    pub fn samples_before(&self, step: usize) -> usize {
        let mut left = step;
        let mut total = 0;
        for &(b, n) in &self.0 {
            let k = left.min(n);
            total += k * b;
            left -= k;
        }
        total
    }
}

impl fmt::Display for BatchSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(b, n)| format!("{b}x{n}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for BatchSchedule {
    type Err = Error;

    /// Parses `"8x500000,32x500000"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("batch_schedule {s:?}: expected BATCHxITERS[,BATCHxITERS...]"));
        let mut phases = Vec::new();
        for part in s.split(',') {
            let (b, n) = part.trim().split_once(['x', 'X']).ok_or_else(bad)?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if b == 0 || n == 0 {
                return Err(Error::Config(format!("batch_schedule {s:?}: counts must be positive")));
            }
            phases.push((b, n));
        }
        Ok(BatchSchedule(phases))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub scale: usize,
    pub model: HbpnConfig,
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    pub decoupled_weight_decay: bool,
    pub batch_schedule: BatchSchedule,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub seed: u64,
    pub dataset_root: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub checkpoint_interval: usize,
    pub log_interval: usize,
    pub loss: LossKind,
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scale: 4,
            model: HbpnConfig::default(),
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            decoupled_weight_decay: false,
            batch_schedule: BatchSchedule(vec![(8, 500_000), (32, 500_000)]),
            patch_size: 64,
            patch_stride: 64,
            seed: 0,
            dataset_root: PathBuf::from("data"),
            checkpoint_dir: PathBuf::from("checkpoints"),
            checkpoint_interval: 10_000,
            log_interval: 100,
            loss: LossKind::Mse,
            augment: true,
        }
    }
}

pub const KEYS: &[&str] = &[
    "scale",
    "modules",
    "depth",
    "base_channels",
    "head",
    "lr",
    "beta1",
    "beta2",
    "eps",
    "weight_decay",
    "decoupled_weight_decay",
    "batch_schedule",
    "patch_size",
    "patch_stride",
    "seed",
    "dataset_root",
    "checkpoint_dir",
    "checkpoint_interval",
    "log_interval",
    "loss",
    "augment",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "scale" => self.scale = parse(key, v)?,
            "modules" => self.model.modules = parse(key, v)?,
            "depth" => self.model.depth = parse(key, v)?,
            "base_channels" => self.model.base_channels = parse(key, v)?,
            "head" => self.model.head = v.parse::<HeadKind>()?,
            "lr" => self.lr = parse(key, v)?,
            "beta1" => self.beta1 = parse(key, v)?,
            "beta2" => self.beta2 = parse(key, v)?,
            "eps" => self.eps = parse(key, v)?,
            "weight_decay" => self.weight_decay = parse(key, v)?,
            "decoupled_weight_decay" => self.decoupled_weight_decay = parse_bool(key, v)?,
            "batch_schedule" => self.batch_schedule = v.parse()?,
            "patch_size" => self.patch_size = parse(key, v)?,
            "patch_stride" => self.patch_stride = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "dataset_root" => self.dataset_root = PathBuf::from(v),
            "checkpoint_dir" => self.checkpoint_dir = PathBuf::from(v),
            "checkpoint_interval" => self.checkpoint_interval = parse(key, v)?,
            "log_interval" => self.log_interval = parse(key, v)?,
            "loss" => self.loss = v.parse()?,
            "augment" => self.augment = parse_bool(key, v)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key {other:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the defaults.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?}: expected key=value")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "scale" => self.scale.to_string(),
            "modules" => self.model.modules.to_string(),
            "depth" => self.model.depth.to_string(),
            "base_channels" => self.model.base_channels.to_string(),
            "head" => self.model.head.to_string(),
            "lr" => self.lr.to_string(),
            "beta1" => self.beta1.to_string(),
            "beta2" => self.beta2.to_string(),
            "eps" => self.eps.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "decoupled_weight_decay" => self.decoupled_weight_decay.to_string(),
            "batch_schedule" => self.batch_schedule.to_string(),
            "patch_size" => self.patch_size.to_string(),
            "patch_stride" => self.patch_stride.to_string(),
            "seed" => self.seed.to_string(),
            "dataset_root" => self.dataset_root.display().to_string(),
            "checkpoint_dir" => self.checkpoint_dir.display().to_string(),
            "checkpoint_interval" => self.checkpoint_interval.to_string(),
            "log_interval" => self.log_interval.to_string(),
            "loss" => self.loss.to_string(),
            "augment" => self.augment.to_string(),
            _ => return None,
        })
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("listed key")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 8].contains(&self.scale) {
            return Err(Error::Config(format!("scale must be 2, 4 or 8, got {}", self.scale)));
        }
        self.model.validate()?;
        if self.batch_schedule.0.is_empty() {
            return Err(Error::Config("batch_schedule is empty".into()));
        }
        let m = self.model.size_multiple().max(self.scale).max(8);
        if self.patch_size == 0 || self.patch_size % m != 0 {
            return Err(Error::Config(format!(
                "patch_size {} must be a positive multiple of {m}",
                self.patch_size
            )));
        }
        if self.patch_size < self.model.min_size() {
            return Err(Error::Config(format!(
                "patch_size {} is too small for depth {} (needs at least {})",
                self.patch_size,
                self.model.depth,
                self.model.min_size()
            )));
        }
        if self.patch_stride == 0 || self.checkpoint_interval == 0 || self.log_interval == 0 {
            return Err(Error::Config("patch_stride, checkpoint_interval and log_interval must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("eps must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
            decay_mode: if self.decoupled_weight_decay {
                WeightDecayMode::Decoupled
            } else {
                WeightDecayMode::L2
            },
        }
    }
}
