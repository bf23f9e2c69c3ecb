use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::config::TrainConfig;
use super::evaluate::{evaluate_dataset, EvalOptions};
use super::trainer::Trainer;
use crate::error::{Error, Result};
use crate::net::{HbpnModel, HeadKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    Head,
    Depth,
    Modules,
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationAxis::Head => "head",
            AblationAxis::Depth => "depth",
            AblationAxis::Modules => "modules",
        })
    }
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "head" | "head_kind" => Ok(AblationAxis::Head),
            "depth" => Ok(AblationAxis::Depth),
            "modules" | "module_count" => Ok(AblationAxis::Modules),
            _ => Err(Error::Config(format!("unknown ablation axis {s:?} (head, depth or modules)"))),
        }
    }
}

impl AblationAxis {
    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            AblationAxis::Head => &["plain", "wr"],
            AblationAxis::Depth => &["1", "2", "3", "4"],
            AblationAxis::Modules => &["2", "3", "4"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Applies one axis value to `config`, checking the allowed range.
    pub fn apply(self, config: &mut TrainConfig, value: &str) -> Result<String> {
        match self {
            AblationAxis::Head => {
                let head: HeadKind = value.parse()?;
                config.model.head = head;
                Ok(format!("{} model", head.label()))
            }
            AblationAxis::Depth => {
                let t: usize = value
                    .parse()
                    .map_err(|_| Error::Config(format!("depth value {value:?} is not a number")))?;
                if !(1..=4).contains(&t) {
                    return Err(Error::Config(format!("depth ablation takes 1..=4, got {t}")));
                }
                config.model.depth = t;
                Ok(format!("HG-{t} model"))
            }
            AblationAxis::Modules => {
                let k: usize = value
                    .parse()
                    .map_err(|_| Error::Config(format!("module value {value:?} is not a number")))?;
                if !(2..=4).contains(&k) {
                    return Err(Error::Config(format!("module-count ablation takes 2..=4, got {k}")));
                }
                config.model.modules = k;
                Ok(format!("{k}-module model"))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub label: String,
    pub params: usize,
    pub final_loss: Option<f32>,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub axis: AblationAxis,
    pub scale: usize,
    pub dataset: String,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Rows of `Algorithm | Scale | Params | PSNR | SSIM`, metrics grouped
    /// under the dataset name.
    pub fn to_table(&self) -> String {
        let lw = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(9);
        let mut s = String::new();
        let _ = writeln!(s, "{:<lw$}  {:>5}  {:>10}  {:^17}", "", "", "", self.dataset);
        let _ = writeln!(
            s,
            "{:<lw$}  {:>5}  {:>10}  {:>8}  {:>7}",
            "Algorithm", "Scale", "Params", "PSNR", "SSIM"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<lw$}  {:>5}  {:>10}  {:>8.2}  {:>7.3}",
                r.label, self.scale, r.params, r.psnr, r.ssim
            );
        }
        s
    }
}

/// Trains one variant per value under the same seed and schedule and
/// evaluates each on the config's dataset.
pub fn ablate(base: &TrainConfig, axis: AblationAxis, values: &[String]) -> Result<AblationReport> {
    if values.is_empty() {
        return Err(Error::Config("ablation needs at least one value".into()));
    }
    let mut variants = Vec::new();
    for v in values {
        let mut cfg = base.clone();
        let label = axis.apply(&mut cfg, v)?;
        cfg.checkpoint_dir = base.checkpoint_dir.join(format!("ablate_{axis}_{v}"));
        cfg.validate()?;
        variants.push((label, cfg));
    }
    let dataset = base
        .dataset_root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let mut rows = Vec::new();
    for (label, cfg) in variants {
        log::info!("ablation variant {label}: {}", cfg.model);
        let mut trainer = Trainer::new(cfg.clone())?;
        let outcome = trainer.run(None)?;
        let report = evaluate_dataset(&trainer.model, &cfg.dataset_root, cfg.scale, &EvalOptions::default())?;
        rows.push(AblationRow {
            label,
            params: HbpnModel::param_count(&cfg.model),
            final_loss: outcome.final_loss,
            psnr: report.mean_psnr(),
            ssim: report.mean_ssim(),
        });
    }
    Ok(AblationReport {
        axis,
        scale: base.scale,
        dataset,
        rows,
    })
}
