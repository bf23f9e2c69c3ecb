//! One hourglass module: a chain of DBP blocks down to a bottleneck, a
//! mirrored chain of UBP blocks back up, same-scale 1×1 shortcuts between
//! the two chains, and two 3×3 output heads (coarse image, weighting map).
//!
//! Channels double at every DBP (`b → 2b → … → b·2^T`) and halve at every UBP.

use crate::autodiff::{ConvSpec, Graph, Shape};
use crate::blocks::layers::{Conv, Init, ParamBuilder};
use crate::blocks::{BackProjectionBlock, Direction};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HourGlassModule {
    pub depth: usize,
    pub base_channels: usize,
    /// `dbp[i]` takes scale `i` to scale `i + 1`.
    pub dbp: Vec<BackProjectionBlock>,
    /// `ubp[i]` takes scale `i + 1` back to scale `i`.
    pub ubp: Vec<BackProjectionBlock>,
    /// `shortcuts[i - 1]` links the DBP output at scale `i` to the UBP input
    /// at scale `i`, for `i` in `1..depth`. The bottleneck has none.
    pub shortcuts: Vec<Conv>,
    pub coarse_head: Conv,
    pub weight_head: Conv,
}

pub struct HgOutput<V> {
    pub features: V,
    pub coarse: V,
    pub weight: V,
    /// Input of the last PReLU in the module (the final UBP's outer sampler).
    pub last_preact: V,
    pub bottleneck: Shape,
}

impl HourGlassModule {
    pub fn new(b: &mut ParamBuilder<'_>, base_channels: usize, depth: usize) -> Result<Self> {
        if depth == 0 || base_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "hourglass needs depth >= 1 and base channels >= 1, got {depth}, {base_channels}"
            )));
        }
        let width = |i: usize| base_channels << i;
        let mut dbp = Vec::with_capacity(depth);
        for i in 0..depth {
            dbp.push(BackProjectionBlock::down(&mut b.scope(&format!("dbp{i}")), width(i))?);
        }
        let mut ubp = Vec::with_capacity(depth);
        for i in 0..depth {
            ubp.push(BackProjectionBlock::up(&mut b.scope(&format!("ubp{i}")), width(i + 1))?);
        }
        let mut shortcuts = Vec::new();
        for i in 1..depth {
            let c = width(i);
            shortcuts.push(b.conv(&format!("shortcut{i}"), ConvSpec::pointwise(c, c), false, Init::Linear)?);
        }
        Ok(HourGlassModule {
            depth,
            base_channels,
            dbp,
            ubp,
            shortcuts,
            coarse_head: b.conv("coarse", ConvSpec::same3x3(base_channels, 3), false, Init::Linear)?,
            weight_head: b.conv("weight", ConvSpec::same3x3(base_channels, 3), false, Init::Linear)?,
        })
    }

    pub fn param_count(base_channels: usize, depth: usize) -> usize {
        let width = |i: usize| base_channels << i;
        let mut n = 0;
        for i in 0..depth {
            n += BackProjectionBlock::param_count(Direction::Down, width(i));
            n += BackProjectionBlock::param_count(Direction::Up, width(i + 1));
        }
        for i in 1..depth {
            n += width(i) * width(i) + width(i);
        }
        n + 2 * (base_channels * 3 * 9 + 3)
    }

    pub fn num_params(&self) -> usize {
        Self::param_count(self.base_channels, self.depth)
    }

    pub fn check_input(&self, s: Shape) -> Result<()> {
        if s.c() != self.base_channels {
            return Err(Error::shape(
                "hg_forward",
                format!("channel dimension: got {}, module expects {}", s.c(), self.base_channels),
            ));
        }
        let m = 1usize << self.depth;
        for (name, len) in [("height", s.h()), ("width", s.w())] {
            if len % m != 0 || len < 2 * m {
                return Err(Error::shape(
                    "hg_forward",
                    format!("{name} {len} must be a multiple of {m} and at least {}", 2 * m),
                ));
            }
        }
        Ok(())
    }

    pub fn forward<G: Graph>(&self, g: &mut G, x: &G::Value) -> Result<HgOutput<G::Value>> {
        self.check_input(g.shape(x))?;
        let mut down = Vec::with_capacity(self.depth);
        let mut cur = x.clone();
        for block in &self.dbp {
            cur = block.forward(g, &cur)?;
            down.push(cur.clone());
        }
        let bottleneck = g.shape(&cur);
        let mut last_preact = None;
        for i in (0..self.depth).rev() {
            // `cur` is at scale i + 1.
            if i + 1 < self.depth {
                let skip = self.shortcuts[i].forward(g, &down[i])?;
                cur = g.add(&cur, &skip)?;
            }
            let traced = self.ubp[i].forward_traced(g, &cur)?;
            cur = traced.output;
            last_preact = Some(traced.last_preact);
        }
        drop(down);
        let coarse = self.coarse_head.forward(g, &cur)?;
        let weight = self.weight_head.forward(g, &cur)?;
        Ok(HgOutput {
            features: cur,
            coarse,
            weight,
            last_preact: last_preact.expect("depth >= 1"),
            bottleneck,
        })
    }
}

pub fn hg_forward<G: Graph>(g: &mut G, x: &G::Value, module: &HourGlassModule) -> Result<HgOutput<G::Value>> {
    module.forward(g, x)
}
