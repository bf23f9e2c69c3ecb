use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{LossKind, TrainConfig, KEYS};
use super::data::TrainingData;
use crate::autodiff::checkpoint::Checkpoint;
use crate::autodiff::{Adam, AdamState, Graph, Tape, Tensor4};
use crate::error::{Error, Result};
use crate::net::{HbpnConfig, HbpnModel};

pub const LOSS_LOG: &str = "loss.log";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

pub fn step_checkpoint_name(step: usize) -> String {
    format!("step_{step:08}.ckpt")
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub steps_run: usize,
    pub final_step: usize,
    pub final_loss: Option<f32>,
    pub checkpoints: Vec<PathBuf>,
    pub loss_log: PathBuf,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub model: HbpnModel,
    adam: Adam,
    data: TrainingData,
    step: usize,
    /// `(step, loss)` for every step taken by this trainer, 1-based.
    pub losses: Vec<(usize, f32)>,
}

impl Trainer {
    /// Fresh run on the prepared dataset named by the config. The dataset
    /// is checked before any model is built.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let data = TrainingData::from_config(&config)?;
        Self::with_data(config, data)
    }

    pub fn with_data(config: TrainConfig, data: TrainingData) -> Result<Self> {
        config.validate()?;
        let model = HbpnModel::new(config.model, config.seed)?;
        let adam = Adam::new(config.adam(), &model.store)?;
        Ok(Trainer {
            config,
            model,
            adam,
            data,
            step: 0,
            losses: Vec::new(),
        })
    }

    /// Continues a run from a training checkpoint written by [`Trainer::save`].
    pub fn resume(config: TrainConfig, checkpoint: &Path) -> Result<Self> {
        config.validate()?;
        let ckpt = Checkpoint::load(checkpoint)?;
        Self::check_compatible(&config, &ckpt)?;
        let data = TrainingData::from_config(&config)?;
        Self::resume_with_data(config, data, &ckpt)
    }

    fn check_compatible(config: &TrainConfig, ckpt: &Checkpoint) -> Result<()> {
        HbpnConfig::from_header(&ckpt.header)?.ensure_matches(&config.model)?;
        let scale: usize = ckpt
            .header_value("train.scale")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad train.scale".into()))?;
        if scale != config.scale {
            return Err(Error::ArchitectureMismatch {
                expected: format!("scale={}", config.scale),
                found: format!("scale={scale}"),
            });
        }
        Ok(())
    }

    pub fn resume_with_data(config: TrainConfig, data: TrainingData, ckpt: &Checkpoint) -> Result<Self> {
        Self::check_compatible(&config, ckpt)?;
        let mut model = HbpnModel::new(config.model, config.seed)?;
        model.load_params(ckpt)?;
        let parse = |k: &str| -> Result<u64> {
            ckpt.header_value(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad {k}")))
        };
        let step = parse("train.step")? as usize;
        let mut state = AdamState::zeros(&model.store);
        state.step = parse("train.adam_step")?;
        for (i, p) in model.store.iter().enumerate() {
            for (prefix, dst) in [("adam.m.", &mut state.m[i]), ("adam.v.", &mut state.v[i])] {
                let name = format!("{prefix}{}", p.name);
                let t = ckpt
                    .tensor(&name)
                    .ok_or_else(|| Error::Checkpoint(format!("optimizer tensor {name} missing")))?;
                if t.data().len() != dst.len() {
                    return Err(Error::Checkpoint(format!("optimizer tensor {name} has the wrong size")));
                }
                dst.copy_from_slice(t.data());
            }
        }
        let adam = Adam::with_state(config.adam(), state, &model.store)?;
        Ok(Trainer {
            config,
            model,
            adam,
            data,
            step,
            losses: Vec::new(),
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn total_steps(&self) -> usize {
        self.config.batch_schedule.total_steps()
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.total_steps()
    }

    pub fn data(&self) -> &TrainingData {
        &self.data
    }

    /// Model, optimizer state and run position.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = self.model.to_checkpoint();
        ckpt.header.insert("train.step".into(), self.step.to_string());
        ckpt.header.insert("train.adam_step".into(), self.adam.state().step.to_string());
        ckpt.header.insert("train.scale".into(), self.config.scale.to_string());
        for k in KEYS {
            ckpt.header.insert(format!("config.{k}"), self.config.get(k).expect("listed key"));
        }
        let state = self.adam.state();
        for (i, p) in self.model.store.iter().enumerate() {
            for (prefix, src) in [("adam.m.", &state.m[i]), ("adam.v.", &state.v[i])] {
                let t = Tensor4::from_vec(p.tensor.shape(), src.clone()).expect("moment matches parameter");
                ckpt.tensors.push((format!("{prefix}{}", p.name), t));
            }
        }
        ckpt
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    /// One optimizer step; returns the loss measured before the update.
    pub fn train_step(&mut self) -> Result<f32> {
        let schedule = &self.config.batch_schedule;
        let batch = schedule
            .batch_at(self.step)
            .ok_or_else(|| Error::InvalidArgument("batch schedule exhausted".into()))?;
        let start = schedule.samples_before(self.step);
        let (x, y) = self.data.batch(start, batch)?;

        let mut tape = Tape::new(&self.model.store);
        let xv = tape.constant(x);
        let yv = tape.constant(y);
        let out = self.model.forward(&mut tape, &xv)?;
        let loss = match self.config.loss {
            LossKind::Mse => tape.mse_loss(&out.sr, &yv)?,
            LossKind::L1 => tape.l1_loss(&out.sr, &yv)?,
        };
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite { op: "training loss" });
        }
        let grads = tape.backward(loss)?;
        self.model.store.zero_grad();
        self.model.store.accumulate(&grads)?;
        drop(grads);
        self.adam.step(&mut self.model.store);
        self.step += 1;
        self.losses.push((self.step, value));
        Ok(value)
    }

    /// Keeps only log lines at or before the current step, so a resumed run
    /// produces the same file as an uninterrupted one.
    fn trim_log(&self, path: &Path) -> Result<()> {
        let kept = match fs::read_to_string(path) {
            Ok(text) => text
                .lines()
                .filter(|l| {
                    l.split_once(',')
                        .and_then(|(s, _)| s.parse::<usize>().ok())
                        .is_some_and(|s| s <= self.step)
                })
                .map(|l| format!("{l}\n"))
                .collect::<String>(),
            Err(_) => String::new(),
        };
        fs::write(path, kept).map_err(|e| Error::io(path, e))
    }

    /// Trains until the schedule ends or `max_steps` more steps were taken,
    /// writing periodic checkpoints, a final checkpoint when the schedule
    /// completes, and the `step,loss` log under the checkpoint directory.
    /// A non-finite loss stops the run with an error; checkpoints already
    /// written stay as they are.
    pub fn run(&mut self, max_steps: Option<usize>) -> Result<TrainOutcome> {
        let dir = self.config.checkpoint_dir.clone();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let log_path = dir.join(LOSS_LOG);
        self.trim_log(&log_path)?;
        let mut log = fs::OpenOptions::new()
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;

        let total = self.total_steps();
        let stop = max_steps.map_or(total, |m| (self.step + m).min(total));
        let mut outcome = TrainOutcome {
            steps_run: 0,
            final_step: self.step,
            final_loss: None,
            checkpoints: Vec::new(),
            loss_log: log_path.clone(),
        };
        while self.step < stop {
            let loss = self.train_step()?;
            outcome.steps_run += 1;
            outcome.final_loss = Some(loss);
            if self.step % self.config.log_interval == 0 || self.step == total {
                writeln!(log, "{},{loss}", self.step).map_err(|e| Error::io(&log_path, e))?;
                log::info!("step {}/{total} loss {loss:.6}", self.step);
            }
            if self.step % self.config.checkpoint_interval == 0 && self.step != total {
                let p = dir.join(step_checkpoint_name(self.step));
                self.save(&p)?;
                outcome.checkpoints.push(p);
            }
        }
        if self.step == total {
            let p = dir.join(FINAL_CHECKPOINT);
            self.save(&p)?;
            outcome.checkpoints.push(p);
        }
        outcome.final_step = self.step;
        Ok(outcome)
    }
}

/// Parses a loss log into `(step, loss)` pairs.
pub fn read_loss_log(path: &Path) -> Result<Vec<(usize, f32)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let bad = || Error::Data(format!("{}: bad loss line {l:?}", path.display()));
            let (s, v) = l.split_once(',').ok_or_else(bad)?;
            Ok((s.parse().map_err(|_| bad())?, v.parse().map_err(|_| bad())?))
        })
        .collect()
}
