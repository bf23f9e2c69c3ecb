//! Up-sampling (UBP) and down-sampling (DBP) back-projection blocks.
//!
//! UBP: `y = Ω(D x) + D₂(λ x − C D x)`; DBP: `y = Ω(C x) + C₂(λ x − D C x)`,
//! where `D` is a 6×6/stride-2 transposed convolution, `C` the matching
//! strided convolution, and `λ`, `Ω` are linear 1×1 convolutions. Every 6×6
//! sampler is followed by its own PReLU. `Ω` and the outer sampler change the
//! channel count (halve for UBP, double for DBP).

use std::fmt;

use super::layers::{Conv, Init, PRelu, ParamBuilder};
use crate::autodiff::{ConvSpec, Graph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "UBP",
            Direction::Down => "DBP",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BackProjectionBlock {
    pub direction: Direction,
    pub in_channels: usize,
    pub out_channels: usize,
    pub main_sampler: Conv,
    pub main_act: PRelu,
    pub mirror_sampler: Conv,
    pub mirror_act: PRelu,
    pub second_sampler: Conv,
    pub second_act: PRelu,
    pub lambda_weight: Conv,
    pub omega_weight: Conv,
}

/// Block output together with the pre-activation of its last PReLU.
pub struct Traced<V> {
    pub output: V,
    pub last_preact: V,
}

impl BackProjectionBlock {
    /// UBP taking `in_channels` (even) to `in_channels / 2` at twice the resolution.
    pub fn up(b: &mut ParamBuilder<'_>, in_channels: usize) -> Result<Self> {
        if in_channels == 0 || in_channels % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "UBP needs an even, non-zero channel count, got {in_channels}"
            )));
        }
        let c = in_channels;
        let out = c / 2;
        Ok(BackProjectionBlock {
            direction: Direction::Up,
            in_channels: c,
            out_channels: out,
            main_sampler: b.conv("main", ConvSpec::sampler(c, c), true, Init::Rectified)?,
            main_act: b.prelu("main", c)?,
            mirror_sampler: b.conv("mirror", ConvSpec::sampler(c, c), false, Init::Rectified)?,
            mirror_act: b.prelu("mirror", c)?,
            second_sampler: b.conv("second", ConvSpec::sampler(c, out), true, Init::Rectified)?,
            second_act: b.prelu("second", out)?,
            lambda_weight: b.conv("lambda", ConvSpec::pointwise(c, c), false, Init::Linear)?,
            omega_weight: b.conv("omega", ConvSpec::pointwise(c, out), false, Init::Linear)?,
        })
    }

    /// DBP taking `in_channels` to `2 · in_channels` at half the resolution.
    pub fn down(b: &mut ParamBuilder<'_>, in_channels: usize) -> Result<Self> {
        if in_channels == 0 {
            return Err(Error::InvalidArgument("DBP with zero channels".into()));
        }
        let c = in_channels;
        let out = 2 * c;
        Ok(BackProjectionBlock {
            direction: Direction::Down,
            in_channels: c,
            out_channels: out,
            main_sampler: b.conv("main", ConvSpec::sampler(c, c), false, Init::Rectified)?,
            main_act: b.prelu("main", c)?,
            mirror_sampler: b.conv("mirror", ConvSpec::sampler(c, c), true, Init::Rectified)?,
            mirror_act: b.prelu("mirror", c)?,
            second_sampler: b.conv("second", ConvSpec::sampler(c, out), false, Init::Rectified)?,
            second_act: b.prelu("second", out)?,
            lambda_weight: b.conv("lambda", ConvSpec::pointwise(c, c), false, Init::Linear)?,
            omega_weight: b.conv("omega", ConvSpec::pointwise(c, out), false, Init::Linear)?,
        })
    }

    /// Closed-form parameter count of a block with the given direction and input width.
    pub fn param_count(direction: Direction, in_channels: usize) -> usize {
        let c = in_channels;
        let out = match direction {
            Direction::Up => c / 2,
            Direction::Down => 2 * c,
        };
        let sampler = |i: usize, o: usize| i * o * 36 + o + o; // weights, bias, PReLU slopes
        let pointwise = |i: usize, o: usize| i * o + o;
        2 * sampler(c, c) + sampler(c, out) + pointwise(c, c) + pointwise(c, out)
    }

    pub fn num_params(&self) -> usize {
        Self::param_count(self.direction, self.in_channels)
    }

    fn check_input(&self, shape: crate::autodiff::Shape) -> Result<()> {
        let op = match self.direction {
            Direction::Up => "ubp_forward",
            Direction::Down => "dbp_forward",
        };
        if self.direction == Direction::Up && shape.c() % 2 != 0 {
            return Err(Error::shape(op, format!("odd channel count {}", shape.c())));
        }
        if shape.c() != self.in_channels {
            return Err(Error::shape(
                op,
                format!(
                    "channel dimension: input has {} channels, block expects {}",
                    shape.c(),
                    self.in_channels
                ),
            ));
        }
        if self.direction == Direction::Down {
            for (name, len) in [("height", shape.h()), ("width", shape.w())] {
                if len % 2 != 0 || len < 4 {
                    return Err(Error::shape(
                        op,
                        format!("{name} {len} must be even and at least 4 (odd spatial size is not padded)"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn forward<G: Graph>(&self, g: &mut G, x: &G::Value) -> Result<G::Value> {
        Ok(self.forward_traced(g, x)?.output)
    }

    pub fn forward_traced<G: Graph>(&self, g: &mut G, x: &G::Value) -> Result<Traced<G::Value>> {
        self.check_input(g.shape(x))?;
        let sampled = self.main_sampler.forward(g, x)?;
        let sampled = self.main_act.forward(g, &sampled)?;
        let mirrored = self.mirror_sampler.forward(g, &sampled)?;
        let mirrored = self.mirror_act.forward(g, &mirrored)?;
        let weighted = self.lambda_weight.forward(g, x)?;
        let residual = g.sub(&weighted, &mirrored)?;
        let last_preact = self.second_sampler.forward(g, &residual)?;
        let correction = self.second_act.forward(g, &last_preact)?;
        let global = self.omega_weight.forward(g, &sampled)?;
        let output = g.add(&global, &correction)?;
        Ok(Traced {
            output,
            last_preact,
        })
    }
}

pub fn ubp_forward<G: Graph>(g: &mut G, x: &G::Value, block: &BackProjectionBlock) -> Result<G::Value> {
    if block.direction != Direction::Up {
        return Err(Error::InvalidArgument("ubp_forward called with a DBP block".into()));
    }
    block.forward(g, x)
}

pub fn dbp_forward<G: Graph>(g: &mut G, x: &G::Value, block: &BackProjectionBlock) -> Result<G::Value> {
    if block.direction != Direction::Down {
        return Err(Error::InvalidArgument("dbp_forward called with a UBP block".into()));
    }
    block.forward(g, x)
}
