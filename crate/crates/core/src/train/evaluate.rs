use std::path::{Path, PathBuf};

use crate::autodiff::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::imaging::dataset::{hr_dir, list_images, lr_dir};
use crate::imaging::{bicubic_resize, load_image, save_image, ImageRGB};
use crate::metrics::{psnr_y, self_ensemble_infer, ssim_y, MetricsReport, Upscaler};
use crate::net::{HbpnConfig, HbpnModel};

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub self_ensemble: bool,
    /// Where to write the SR images, one PNG per input.
    pub save_dir: Option<PathBuf>,
}

/// Loads model weights from a checkpoint. When `expected` is given the
/// stored architecture must equal it.
pub fn load_model(path: &Path, expected: Option<&HbpnConfig>) -> Result<HbpnModel> {
    let ckpt = Checkpoint::load(path)?;
    let found = HbpnConfig::from_header(&ckpt.header)?;
    if let Some(e) = expected {
        found.ensure_matches(e)?;
    }
    HbpnModel::from_checkpoint(&ckpt)
}

/// Training scale recorded in a checkpoint, if any.
pub fn checkpoint_scale(path: &Path) -> Result<Option<usize>> {
    let ckpt = Checkpoint::load(path)?;
    Ok(ckpt.header.get("train.scale").and_then(|s| s.parse().ok()))
}

/// Bicubic enlargement of `lr` by `scale`.
pub fn pre_upsample(lr: &ImageRGB, scale: usize) -> ImageRGB {
    bicubic_resize(lr, lr.height() * scale, lr.width() * scale)
}

/// Runs the model (optionally self-ensembled) on a pre-upsampled image and
/// snaps the result to the 8-bit grid it would be saved with.
pub fn super_resolve<M: Upscaler + ?Sized>(model: &M, input: &ImageRGB, self_ensemble: bool) -> Result<ImageRGB> {
    let sr = if self_ensemble {
        self_ensemble_infer(model, input)?
    } else {
        model.upscale(input)?
    };
    Ok(sr.quantized())
}

/// `(table, records)` file names for one evaluation run.
pub fn report_paths(dir: &Path, scale: usize, self_ensemble: bool) -> (PathBuf, PathBuf) {
    let stem = if self_ensemble {
        format!("eval_x{scale}_ensemble")
    } else {
        format!("eval_x{scale}")
    };
    (dir.join(format!("{stem}.txt")), dir.join(format!("{stem}.jsonl")))
}

/// Writes the plain-text table and the per-image records of `report` into
/// `dir`, returning both paths.
pub fn write_reports(report: &MetricsReport, dir: &Path, self_ensemble: bool) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (table, records) = report_paths(dir, report.scale, self_ensemble);
    std::fs::write(&table, report.to_table()).map_err(|e| Error::io(&table, e))?;
    report.write_jsonl(&records)?;
    Ok((table, records))
}

/// Evaluates every HR image of a prepared dataset: the LR image from
/// `LRx{scale}` is bicubically enlarged, super-resolved, quantised and
/// compared with the HR image (cropped to a multiple of `scale`) on the
/// Y channel with a `scale`-pixel border excluded.
pub fn evaluate_dataset<M: Upscaler + ?Sized>(
    model: &M,
    root: &Path,
    scale: usize,
    options: &EvalOptions,
) -> Result<MetricsReport> {
    let hr_paths = list_images(&hr_dir(root))?;
    if hr_paths.is_empty() {
        return Err(Error::Data(format!("no HR images under {}", root.display())));
    }
    let lr_root = lr_dir(root, scale);
    let mut report = MetricsReport::new(scale, scale);
    for hr_path in &hr_paths {
        let stem = hr_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let hr = load_image(hr_path)?.mod_crop(scale)?;
        let lr_path = lr_root.join(format!("{stem}.png"));
        if !lr_path.is_file() {
            return Err(Error::Data(format!(
                "{} missing; run prepare-data for scale {scale}",
                lr_path.display()
            )));
        }
        let lr = load_image(&lr_path)?;
        if lr.height() * scale != hr.height() || lr.width() * scale != hr.width() {
            return Err(Error::Data(format!(
                "{}: LR size {:?} does not match HR size {:?} at scale {scale}",
                lr_path.display(),
                lr.dims(),
                hr.dims()
            )));
        }
        let sr = super_resolve(model, &pre_upsample(&lr, scale), options.self_ensemble)?;
        if let Some(dir) = &options.save_dir {
            save_image(&sr, dir.join(format!("{stem}.png")))?;
        }
        report.push(stem, psnr_y(&sr, &hr, scale)?, ssim_y(&sr, &hr, scale)?);
    }
    Ok(report)
}
