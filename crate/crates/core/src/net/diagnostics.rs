//! Inspection of a trained model: activation statistics, per-module coarse
//! images, weighting maps and their softmax probabilities.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::model::HbpnModel;
use super::reconstruct::wr_probabilities;
use crate::autodiff::{Eager, Graph, Tensor4};
use crate::error::{Error, Result};
use crate::imaging::{save_gray, save_image, ImageRGB};

/// Percentage of strictly positive values.
pub fn percentage_positive(values: &[f32]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let pos = values.iter().filter(|&&v| v > 0.0).count();
    100.0 * pos as f64 / values.len() as f64
}

/// For each module, the share of positive pre-activations entering its last PReLU.
pub fn activation_percentage(model: &HbpnModel, input: &Tensor4) -> Result<Vec<f64>> {
    let mut g = Eager::new(&model.store);
    let x = g.constant(input.clone());
    let out = model.forward(&mut g, &x)?;
    Ok(out.last_preacts.iter().map(|v| percentage_positive(v.data())).collect())
}

/// Min-max maps `values` onto `0..=255`. A constant input maps to all zeros.
pub fn minmax_to_u8(values: &[f32]) -> Vec<u8> {
    let (lo, hi) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![0; values.len()];
    }
    let range = f64::from(hi) - f64::from(lo);
    values
        .iter()
        .map(|&v| ((f64::from(v) - f64::from(lo)) / range * 255.0).round() as u8)
        .collect()
}

/// Lays the three `h × w` planes of `data` side by side as one `h × 3w` plane.
fn tile_planes(data: &[f32], h: usize, w: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(3 * h * w);
    for y in 0..h {
        for c in 0..3 {
            out.extend_from_slice(&data[(c * h + y) * w..(c * h + y + 1) * w]);
        }
    }
    out
}

fn crop_planes(data: &[f32], planes: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        for y in 0..oh {
            out.extend_from_slice(&data[(p * h + y) * w..(p * h + y) * w + ow]);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct DiagnoseReport {
    pub coarse_images: Vec<PathBuf>,
    pub weight_maps: Vec<PathBuf>,
    pub probability_maps: Vec<PathBuf>,
    pub table: PathBuf,
    pub activation: Vec<f64>,
    /// Largest deviation from 1 of the per-pixel probability sums.
    pub max_probability_error: f64,
}

/// Writes per-module artefacts for one pre-upsampled input into `out_dir`:
/// `coarse_k.png`, `weight_k.png` (min-max normalised, channels tiled R|G|B),
/// `prob_k.png` (probability × 255, same tiling) and `activation.txt`.
pub fn diagnose(model: &HbpnModel, input: &ImageRGB, out_dir: &Path) -> Result<DiagnoseReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (h, w) = input.dims();
    let x = model.pad_input(input)?;
    let (ph, pw) = (x.shape().h(), x.shape().w());

    let mut g = Eager::new(&model.store);
    let xv = g.constant(x);
    let out = model.forward(&mut g, &xv)?;
    let probs = wr_probabilities(&mut g, &out.weights)?;
    let k = out.coarse.len();
    let plane = 3 * ph * pw;

    let mut max_err = 0.0f64;
    for i in 0..plane {
        let s: f64 = (0..k).map(|m| f64::from(probs.data()[m * plane + i])).sum();
        max_err = max_err.max((s - 1.0).abs());
    }
    if max_err > 1e-5 {
        return Err(Error::Data(format!("probability maps deviate from 1 by {max_err}")));
    }

    let mut report = DiagnoseReport {
        coarse_images: Vec::new(),
        weight_maps: Vec::new(),
        probability_maps: Vec::new(),
        table: out_dir.join("activation.txt"),
        activation: out.last_preacts.iter().map(|v| percentage_positive(v.data())).collect(),
        max_probability_error: max_err,
    };
    for m in 0..k {
        let coarse = crop_planes(out.coarse[m].data(), 3, ph, pw, h, w);
        let p = out_dir.join(format!("coarse_{}.png", m + 1));
        save_image(&ImageRGB::from_planar(h, w, coarse)?, &p)?;
        report.coarse_images.push(p);

        let weight = crop_planes(out.weights[m].data(), 3, ph, pw, h, w);
        let p = out_dir.join(format!("weight_{}.png", m + 1));
        save_gray(&minmax_to_u8(&tile_planes(&weight, h, w)), h, 3 * w, &p)?;
        report.weight_maps.push(p);

        let prob = crop_planes(&probs.data()[m * plane..(m + 1) * plane], 3, ph, pw, h, w);
        let bytes: Vec<u8> = tile_planes(&prob, h, w)
            .iter()
            .map(|&v| crate::imaging::quantize(v))
            .collect();
        let p = out_dir.join(format!("prob_{}.png", m + 1));
        save_gray(&bytes, h, 3 * w, &p)?;
        report.probability_maps.push(p);
    }

    let mut table = String::from("module  activated(%)\n");
    for (m, pct) in report.activation.iter().enumerate() {
        let _ = writeln!(table, "HG-{:<5} {pct:>8.2}", m + 1);
    }
    std::fs::write(&report.table, table).map_err(|e| Error::io(&report.table, e))?;
    Ok(report)
}
