//! Reconstruction heads combining the K coarse outputs into one image.

use crate::autodiff::{Graph, Shape};
use crate::blocks::layers::Conv;
use crate::error::{Error, Result};

fn check_list<G: Graph>(g: &G, op: &'static str, items: &[G::Value], like: Shape) -> Result<()> {
    for v in items {
        if g.shape(v) != like {
            return Err(Error::shape(op, format!("expected {like}, got {}", g.shape(v))));
        }
    }
    Ok(())
}

/// Per-pixel, per-channel softmax of the weighting maps across modules.
/// Returns shape `(K, n·3, H, W)`; slice `k` holds module `k`'s probabilities.
pub fn wr_probabilities<G: Graph>(g: &mut G, weights: &[G::Value]) -> Result<G::Value> {
    let first = weights
        .first()
        .ok_or_else(|| Error::InvalidArgument("weighted reconstruction needs at least one module".into()))?;
    let s = g.shape(first);
    check_list(g, "wr_reconstruct", weights, s)?;
    let k = weights.len();
    let stacked = g.concat(weights, 0)?;
    let stacked = g.reshape(&stacked, Shape::new(k, s.n() * s.c(), s.h(), s.w()))?;
    g.softmax(&stacked, 0)
}

/// Softmax-weighted sum of the coarse images: `Σ_k p_k ⊙ coarse_k`.
pub fn wr_reconstruct<G: Graph>(g: &mut G, coarse: &[G::Value], weights: &[G::Value]) -> Result<G::Value> {
    if coarse.len() != weights.len() {
        return Err(Error::shape(
            "wr_reconstruct",
            format!("{} coarse images but {} weighting maps", coarse.len(), weights.len()),
        ));
    }
    let probs = wr_probabilities(g, weights)?;
    let s = g.shape(&weights[0]);
    check_list(g, "wr_reconstruct", coarse, s)?;
    let k = coarse.len();
    let images = g.concat(coarse, 0)?;
    let images = g.reshape(&images, Shape::new(k, s.n() * s.c(), s.h(), s.w()))?;
    let weighted = g.mul(&probs, &images)?;
    let summed = g.sum_axis(&weighted, 0)?;
    g.reshape(&summed, s)
}

/// Channel concatenation of the coarse images followed by one convolution.
pub fn plain_reconstruct<G: Graph>(g: &mut G, coarse: &[G::Value], head: &Conv) -> Result<G::Value> {
    let first = coarse
        .first()
        .ok_or_else(|| Error::InvalidArgument("plain reconstruction needs at least one module".into()))?;
    let s = g.shape(first);
    check_list(g, "plain_reconstruct", coarse, s)?;
    let expected = s.c() * coarse.len();
    if head.spec.in_channels != expected {
        return Err(Error::shape(
            "plain_reconstruct",
            format!(
                "channel dimension: head takes {} channels, concatenation gives {expected}",
                head.spec.in_channels
            ),
        ));
    }
    let cat = g.concat(coarse, 1)?;
    head.forward(g, &cat)
}
