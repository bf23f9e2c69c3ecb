//! `hbpn`: dataset preparation, training, evaluation, inference, ablation
//! and diagnostics for the HBPN super-resolution model.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hbpn_core::imaging::{load_image, prepare_data, save_image};
use hbpn_core::metrics::{psnr_y, ssim_y, PassThrough, Upscaler};
use hbpn_core::net::{diagnose, HbpnModel};
use hbpn_core::train::{
    ablate, checkpoint_scale, evaluate_dataset, load_model, pre_upsample, super_resolve, write_reports,
    AblationAxis, EvalOptions, TrainConfig, Trainer,
};
use hbpn_core::ErrorKind;

#[derive(Parser, Debug)]
#[command(name = "hbpn", version, about = "Hierarchical back projection network for single-image super-resolution")]
struct Cli {
    /// Seed for every random choice (initialisation, patch offsets, sample order).
    /// Overrides the `seed` key of a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log verbosity: -v for debug, -vv for trace. `RUST_LOG` also works.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build `HR/`, `LRx{s}/` and `LRx{s}_up/` under an output root from a folder of HR images.
    PrepareData {
        /// Folder with the HR images (PNG, PPM or PGM).
        #[arg(long)]
        hr_dir: PathBuf,
        /// Comma-separated scale factors.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        scales: Vec<usize>,
        /// Dataset root to create or update.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a prepared dataset.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many steps even if the schedule continues.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Compute Y-channel PSNR/SSIM over a prepared dataset.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        /// Prepared dataset root.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        scale: usize,
        /// Average the outputs of the eight flipped/rotated inputs.
        #[arg(long)]
        self_ensemble: bool,
        /// Directory for the report table and per-image records.
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        /// Also save each SR image under `<out>/sr_x{scale}[_ensemble]/`.
        #[arg(long)]
        save_images: bool,
    },
    /// Super-resolve one LR image.
    Infer {
        #[command(flatten)]
        model: ModelArgs,
        /// Low-resolution input image.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        scale: usize,
        /// Where to write the SR image (format from the extension).
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        self_ensemble: bool,
        /// Ground-truth HR image; prints PSNR and SSIM against it.
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Train and evaluate variants that differ along one architecture axis.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// head, depth or modules.
        #[arg(long)]
        axis: String,
        /// Comma-separated values (default: plain,wr / 1,2,3,4 / 2,3,4).
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Also write the table to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Export per-module coarse images, weight maps, probability maps and activation rates.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input image; with `--scale` it is treated as LR and enlarged first.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        scale: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// key = value config file; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable), e.g. `--set lr=0.001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct ModelArgs {
    /// Trained checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Use plain bicubic enlargement instead of a network.
    #[arg(long)]
    bicubic: bool,
}

impl ConfigArgs {
    fn resolve(&self, seed: Option<u64>) -> Result<TrainConfig> {
        let mut config = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        config.apply_overrides(&self.overrides)?;
        if let Some(s) = seed {
            config.seed = s;
        }
        config.validate()?;
        Ok(config)
    }
}

fn print_resolved(pairs: &[(&str, String)]) {
    println!("# resolved configuration");
    for (k, v) in pairs {
        println!("{k} = {v}");
    }
}

fn print_config(config: &TrainConfig) {
    println!("# resolved configuration");
    print!("{}", config.to_text());
}

fn load_upscaler(args: &ModelArgs, scale: usize) -> Result<Box<dyn Upscaler>> {
    match &args.checkpoint {
        Some(p) => {
            if let Some(trained) = checkpoint_scale(p)? {
                if trained != scale {
                    return Err(hbpn_core::Error::InvalidArgument(format!(
                        "{} was trained for x{trained}, requested x{scale}",
                        p.display()
                    ))
                    .into());
                }
            }
            let model = load_model(p, None)?;
            println!("model = {}", model.config);
            Ok(Box::new(model))
        }
        None => Ok(Box::new(PassThrough)),
    }
}

fn model_label(args: &ModelArgs) -> String {
    args.checkpoint
        .as_ref()
        .map_or_else(|| "bicubic".to_string(), |p| p.display().to_string())
}

fn check_scale(scale: usize) -> Result<()> {
    if scale == 0 {
        return Err(hbpn_core::Error::InvalidArgument("scale must be positive".into()).into());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PrepareData { hr_dir, scales, out } => {
            print_resolved(&[
                ("hr_dir", hr_dir.display().to_string()),
                ("scales", format!("{scales:?}")),
                ("out", out.display().to_string()),
            ]);
            let r = prepare_data(&hr_dir, &scales, &out)?;
            println!(
                "{} images: {} HR, {} LR and {} enlarged files written, {} up to date, {} unreadable",
                r.images, r.hr_written, r.lr_written, r.up_written, r.up_to_date, r.skipped_unreadable
            );
        }
        Command::Train {
            config,
            resume,
            max_steps,
        } => {
            let config = config.resolve(cli.seed)?;
            print_config(&config);
            let mut trainer = match &resume {
                Some(p) => Trainer::resume(config, p)?,
                None => Trainer::new(config)?,
            };
            let outcome = trainer.run(max_steps)?;
            println!(
                "trained {} steps (now at {}/{}), final loss {}",
                outcome.steps_run,
                outcome.final_step,
                trainer.total_steps(),
                outcome.final_loss.map_or("n/a".into(), |l| format!("{l:.6}"))
            );
            for c in &outcome.checkpoints {
                println!("checkpoint {}", c.display());
            }
            println!("loss log {}", outcome.loss_log.display());
        }
        Command::Eval {
            model,
            dataset,
            scale,
            self_ensemble,
            out,
            save_images,
        } => {
            check_scale(scale)?;
            print_resolved(&[
                ("model", model_label(&model)),
                ("dataset", dataset.display().to_string()),
                ("scale", scale.to_string()),
                ("self_ensemble", self_ensemble.to_string()),
                ("out", out.display().to_string()),
            ]);
            let upscaler = load_upscaler(&model, scale)?;
            let save_dir = save_images.then(|| {
                let suffix = if self_ensemble { "_ensemble" } else { "" };
                out.join(format!("sr_x{scale}{suffix}"))
            });
            let options = EvalOptions {
                self_ensemble,
                save_dir,
            };
            let report = evaluate_dataset(upscaler.as_ref(), &dataset, scale, &options)?;
            print!("{}", report.to_table());
            let (table, records) = write_reports(&report, &out, self_ensemble)?;
            println!("report {} and {}", table.display(), records.display());
        }
        Command::Infer {
            model,
            input,
            scale,
            output,
            self_ensemble,
            gt,
        } => {
            check_scale(scale)?;
            print_resolved(&[
                ("model", model_label(&model)),
                ("input", input.display().to_string()),
                ("scale", scale.to_string()),
                ("output", output.display().to_string()),
                ("self_ensemble", self_ensemble.to_string()),
            ]);
            let upscaler = load_upscaler(&model, scale)?;
            let lr = load_image(&input)?;
            let sr = super_resolve(upscaler.as_ref(), &pre_upsample(&lr, scale), self_ensemble)?;
            save_image(&sr, &output)?;
            println!("wrote {} ({}x{})", output.display(), sr.width(), sr.height());
            if let Some(gt) = gt {
                let hr = load_image(&gt)?.mod_crop(scale)?;
                if hr.dims() != sr.dims() {
                    return Err(hbpn_core::Error::InvalidArgument(format!(
                        "ground truth {} is {}x{} after cropping to a multiple of {scale}, SR is {}x{}",
                        gt.display(),
                        hr.width(),
                        hr.height(),
                        sr.width(),
                        sr.height()
                    ))
                    .into());
                }
                println!("psnr_y = {:.4}", psnr_y(&sr, &hr, scale)?);
                println!("ssim_y = {:.4}", ssim_y(&sr, &hr, scale)?);
            }
        }
        Command::Ablate {
            config,
            axis,
            values,
            report,
        } => {
            let base = config.resolve(cli.seed)?;
            let axis: AblationAxis = axis.parse()?;
            let values = if values.is_empty() {
                axis.default_values()
            } else {
                values
            };
            print_config(&base);
            println!("ablation_axis = {axis}");
            println!("ablation_values = {}", values.join(","));
            let result = ablate(&base, axis, &values)?;
            let table = result.to_table();
            print!("{table}");
            if let Some(p) = report {
                std::fs::write(&p, &table).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Diagnose {
            checkpoint,
            input,
            scale,
            out_dir,
        } => {
            print_resolved(&[
                ("checkpoint", checkpoint.display().to_string()),
                ("input", input.display().to_string()),
                ("scale", scale.map_or("none (input already enlarged)".into(), |s| s.to_string())),
                ("out_dir", out_dir.display().to_string()),
            ]);
            let model: HbpnModel = load_model(&checkpoint, None)?;
            let img = load_image(&input)?;
            let img = match scale {
                Some(s) => {
                    check_scale(s)?;
                    pre_upsample(&img, s)
                }
                None => img,
            };
            let r = diagnose(&model, &img, &out_dir)?;
            for (k, pct) in r.activation.iter().enumerate() {
                println!("HG-{} activated {pct:.2}%", k + 1);
            }
            println!(
                "wrote {} coarse images, {} weight maps, {} probability maps and {} (max probability-sum error {:.2e})",
                r.coarse_images.len(),
                r.weight_maps.len(),
                r.probability_maps.len(),
                r.table.display(),
                r.max_probability_error
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<hbpn_core::Error>() {
            return match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    2
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
