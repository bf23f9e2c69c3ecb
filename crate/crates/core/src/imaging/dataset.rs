//! Dataset tree preparation: `<root>/HR`, `<root>/LRx{s}` and `<root>/LRx{s}_up`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use super::image::ImageRGB;
use super::io::{load_image, save_image};
use super::resize::bicubic_resize;
use crate::error::{Error, Result};

pub fn hr_dir(root: &Path) -> PathBuf {
    root.join("HR")
}

pub fn lr_dir(root: &Path, scale: usize) -> PathBuf {
    root.join(format!("LRx{scale}"))
}

pub fn lr_up_dir(root: &Path, scale: usize) -> PathBuf {
    root.join(format!("LRx{scale}_up"))
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "ppm" | "pgm" | "pnm")
    )
}

/// Image files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && is_image(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn mtime(p: &Path) -> Option<SystemTime> {
    fs::metadata(p).and_then(|m| m.modified()).ok()
}

fn up_to_date(out: &Path, src: &Path) -> bool {
    match (mtime(out), mtime(src)) {
        (Some(o), Some(s)) => o >= s,
        _ => false,
    }
}

/// The bicubic LR image for `hr` at `scale` and its enlargement back to the
/// (mod-cropped) HR size. Computed on real values; quantisation happens on save.
pub fn degrade_pair(hr: &ImageRGB, scale: usize) -> Result<(ImageRGB, ImageRGB)> {
    let hr = hr.mod_crop(scale)?;
    let (h, w) = hr.dims();
    let lr = bicubic_resize(&hr, h / scale, w / scale);
    let up = bicubic_resize(&lr, h, w);
    Ok((lr, up))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrepareReport {
    pub images: usize,
    pub hr_written: usize,
    pub lr_written: usize,
    pub up_written: usize,
    pub skipped_unreadable: usize,
    pub up_to_date: usize,
}

impl PrepareReport {
    pub fn files_written(&self) -> usize {
        self.hr_written + self.lr_written + self.up_written
    }
}

/// Builds the dataset tree under `out_root` from the images in `hr_src`.
///
/// HR images are stored unmodified in `<out_root>/HR` as PNG (unless
/// `hr_src` already is that directory). For each scale `s` the HR image is
/// cropped to a multiple of `s`, downscaled into `LRx{s}` and enlarged back
/// into `LRx{s}_up`. Outputs newer than their source are left alone.
pub fn prepare_data(hr_src: &Path, scales: &[usize], out_root: &Path) -> Result<PrepareReport> {
    if scales.is_empty() || scales.contains(&0) {
        return Err(Error::InvalidArgument(format!("invalid scale list {scales:?}")));
    }
    let sources = list_images(hr_src)?;
    if sources.is_empty() {
        return Err(Error::Data(format!("no images found in {}", hr_src.display())));
    }
    let hr_out = hr_dir(out_root);
    let same_dir = match (fs::canonicalize(hr_src), fs::canonicalize(&hr_out)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    let mut dirs = vec![hr_out.clone()];
    for &s in scales {
        dirs.push(lr_dir(out_root, s));
        dirs.push(lr_up_dir(out_root, s));
    }
    for d in &dirs {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let mut report = PrepareReport::default();
    for src in &sources {
        let name = format!("{}.png", stem(src));
        let mut targets = Vec::new();
        if !same_dir {
            targets.push((hr_out.join(&name), None));
        }
        for &s in scales {
            targets.push((lr_dir(out_root, s).join(&name), Some((s, false))));
            targets.push((lr_up_dir(out_root, s).join(&name), Some((s, true))));
        }
        let stale: Vec<_> = targets.into_iter().filter(|(p, _)| !up_to_date(p, src)).collect();
        if stale.is_empty() {
            report.images += 1;
            report.up_to_date += 1;
            continue;
        }
        let hr = match load_image(src) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping unreadable image: {e}");
                report.skipped_unreadable += 1;
                continue;
            }
        };
        report.images += 1;
        for (path, kind) in stale {
            match kind {
                None => {
                    save_image(&hr, &path)?;
                    report.hr_written += 1;
                }
                Some((s, up)) => {
                    if hr.height() < s || hr.width() < s {
                        log::warn!("{}: smaller than scale {s}, skipped", src.display());
                        continue;
                    }
                    let (lr, lr_up) = degrade_pair(&hr, s)?;
                    if up {
                        save_image(&lr_up, &path)?;
                        report.up_written += 1;
                    } else {
                        save_image(&lr, &path)?;
                        report.lr_written += 1;
                    }
                }
            }
        }
    }
    if report.images == 0 {
        return Err(Error::Data(format!("no readable images in {}", hr_src.display())));
    }
    Ok(report)
}

/// Fails unless `root` holds a prepared tree for `scale`.
pub fn check_prepared(root: &Path, scale: usize) -> Result<()> {
    for d in [hr_dir(root), lr_dir(root, scale), lr_up_dir(root, scale)] {
        if !d.is_dir() || list_images(&d)?.is_empty() {
            return Err(Error::Data(format!(
                "dataset not prepared for scale {scale}: {} is missing or empty",
                d.display()
            )));
        }
    }
    Ok(())
}
