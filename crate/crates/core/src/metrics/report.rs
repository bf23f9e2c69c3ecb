use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

/// Per-image and mean Y-channel PSNR/SSIM for one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scale: usize,
    pub crop: usize,
    pub records: Vec<ImageRecord>,
}

impl MetricsReport {
    pub fn new(scale: usize, crop: usize) -> Self {
        MetricsReport {
            scale,
            crop,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, psnr: f64, ssim: f64) {
        self.records.push(ImageRecord {
            name: name.into(),
            psnr,
            ssim,
        });
    }

    fn mean(&self, f: impl Fn(&ImageRecord) -> f64) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().map(f).sum::<f64>() / self.records.len() as f64
    }

    pub fn mean_psnr(&self) -> f64 {
        self.mean(|r| r.psnr)
    }

    pub fn mean_ssim(&self) -> f64 {
        self.mean(|r| r.ssim)
    }

    pub fn to_table(&self) -> String {
        let width = self.records.iter().map(|r| r.name.len()).max().unwrap_or(0).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "scale x{}, border crop {}px", self.scale, self.crop);
        let _ = writeln!(s, "{:<width$}  {:>9}  {:>7}", "image", "PSNR(dB)", "SSIM");
        for r in &self.records {
            let _ = writeln!(s, "{:<width$}  {:>9.3}  {:>7.4}", r.name, r.psnr, r.ssim);
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:>9.3}  {:>7.4}",
            "mean",
            self.mean_psnr(),
            self.mean_ssim()
        );
        s
    }

    /// One JSON object per line: `{"name":..,"psnr":..,"ssim":..}`.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Vec<ImageRecord>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l)
                    .map_err(|e| Error::Data(format!("{}: bad record: {e}", path.display())))
            })
            .collect()
    }
}
