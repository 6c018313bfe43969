//! Optimization loop with validation-based early stopping.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::batch::{make_batches, sequential_batches, Batch, TrainingPair};
use crate::checkpoint::{self, CheckpointInfo};
use crate::error::{NetError, Result};
use crate::graph::Graph;
use crate::loss::{total_loss, LossBreakdown};
use crate::model::CompletionModel;
use crate::optim::{clip_global_norm, Adam};
use crate::params::Gradients;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without a strict validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 400,
            learning_rate: 1e-4,
            patience: 30,
            max_epochs: 1000,
            seed: 0,
            clip_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(NetError::Config(
                "batch_size, patience and max_epochs must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Validation,
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub phase: Phase,
    pub contour: f64,
    pub point: f64,
    pub coord: f64,
    pub flag: f64,
    pub total: f64,
}

impl MetricsRow {
    pub fn new(epoch: usize, phase: Phase, b: LossBreakdown) -> Self {
        Self {
            epoch,
            phase,
            contour: b.contour,
            point: b.point,
            coord: b.coord,
            flag: b.flag,
            total: b.total,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    pub checkpoint: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val: f64,
    pub stopped_early: bool,
    pub steps: u64,
    pub clipped_steps: usize,
    pub history: Vec<MetricsRow>,
}

impl TrainReport {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &MetricsRow> {
        self.history.iter().filter(move |r| r.phase == phase)
    }
}

fn dropout_seed(seed: u64, step: u64) -> u64 {
    seed ^ step.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Forward and backward pass of one batch; returns the loss terms and the
/// parameter gradients.
pub fn batch_gradients<T: Scalar>(
    model: &CompletionModel<T>,
    batch: &Batch<T>,
    dropout_seed: Option<u64>,
) -> (LossBreakdown, Gradients<T>) {
    let mut g = match dropout_seed {
        Some(s) => Graph::training(model.params(), model.config().dropout, s),
        None => Graph::new(model.params()),
    };
    let heads = model.forward(&mut g, &batch.source, batch.decoder_input.as_ref());
    let (loss, grads) = total_loss(&heads.values(&g), &batch.targets);
    let seeds = vec![
        (heads.coords, grads.coords),
        (heads.contour, grads.contour),
        (heads.point, grads.point),
        (heads.flag, grads.flag),
    ];
    (loss, g.backward(seeds))
}

/// Teacher-forced loss of `model` on `pairs`, without dropout, averaged
/// over pairs.
pub fn evaluate_loss<T: Scalar>(
    model: &CompletionModel<T>,
    pairs: &[TrainingPair],
    batch_size: usize,
) -> Result<LossBreakdown> {
    let mut parts = Vec::new();
    for batch in sequential_batches::<T>(pairs, batch_size, model.config()) {
        let batch = batch?;
        let mut g = Graph::new(model.params());
        let heads = model.forward(&mut g, &batch.source, batch.decoder_input.as_ref());
        let (loss, _) = total_loss(&heads.values(&g), &batch.targets);
        parts.push((loss, batch.size() as f64));
    }
    Ok(LossBreakdown::weighted_mean(&parts))
}

struct MetricsLog {
    out: Option<(PathBuf, BufWriter<File>)>,
    rows: Vec<MetricsRow>,
}

impl MetricsLog {
    fn open(path: Option<&Path>) -> Result<Self> {
        let out = match path {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(|e| NetError::io(parent, e))?;
                }
                let f = File::create(p).map_err(|e| NetError::io(p, e))?;
                Some((p.to_path_buf(), BufWriter::new(f)))
            }
            None => None,
        };
        Ok(Self { out, rows: Vec::new() })
    }

    fn push(&mut self, row: MetricsRow) -> Result<()> {
        if let Some((path, w)) = &mut self.out {
            let line = serde_json::to_string(&row).expect("metrics row serializes");
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| NetError::io(path, e))?;
        }
        self.rows.push(row);
        Ok(())
    }
}

/// Trains until validation loss fails to improve for `patience` epochs or
/// `max_epochs` is reached. The model ends up holding the best-validation
/// parameters, which are also written to the checkpoint path on every
/// improvement.
pub fn train<T: Scalar>(
    model: &mut CompletionModel<T>,
    train_pairs: &[TrainingPair],
    val_pairs: &[TrainingPair],
    cfg: &TrainConfig,
    outputs: &TrainOutputs,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_pairs.is_empty() {
        return Err(NetError::EmptyData("training"));
    }
    if val_pairs.is_empty() {
        return Err(NetError::EmptyData("validation"));
    }
    let mut log = MetricsLog::open(outputs.metrics.as_deref())?;
    let mut adam = Adam::new(model.params(), cfg.learning_rate);
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = model.params().clone();
    let mut since_best = 0;
    let mut clipped_steps = 0;
    let mut epochs_run = 0;
    let mut stopped_early = false;

    let model_cfg = model.config().clone();
    for epoch in 1..=cfg.max_epochs {
        let mut parts = Vec::new();
        let mut clipped_this_epoch = 0;
        for (bi, batch) in make_batches::<T>(train_pairs, cfg.batch_size, cfg.seed, epoch, &model_cfg).enumerate() {
            let batch = batch?;
            let seed = dropout_seed(cfg.seed, adam.steps());
            let (loss, mut grads) = batch_gradients(model, &batch, Some(seed));
            if !loss.is_finite() {
                return Err(NetError::NonFinite {
                    epoch,
                    batch: bi,
                    terms: format!(
                        "contour={} point={} coord={} flag={} total={}",
                        loss.contour, loss.point, loss.coord, loss.flag, loss.total
                    ),
                });
            }
            if let Some(norm) = clip_global_norm(&mut grads, cfg.clip_norm) {
                clipped_this_epoch += 1;
                log::debug!("epoch {epoch} batch {bi}: gradient norm {norm:.3} clipped to {}", cfg.clip_norm);
            }
            adam.step(model.params_mut(), &grads);
            parts.push((loss, batch.size() as f64));
        }
        clipped_steps += clipped_this_epoch;
        let train_loss = LossBreakdown::weighted_mean(&parts);
        let val_loss = evaluate_loss(model, val_pairs, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(NetError::NonFinite {
                epoch,
                batch: 0,
                terms: format!("validation total={}", val_loss.total),
            });
        }
        log.push(MetricsRow::new(epoch, Phase::Train, train_loss))?;
        log.push(MetricsRow::new(epoch, Phase::Validation, val_loss))?;
        epochs_run = epoch;
        log::info!(
            "epoch {epoch}: train {:.4} val {:.4} (contour {:.3} point {:.3} coord {:.4} flag {:.3}){}",
            train_loss.total,
            val_loss.total,
            val_loss.contour,
            val_loss.point,
            val_loss.coord,
            val_loss.flag,
            if clipped_this_epoch > 0 {
                format!(", {clipped_this_epoch} steps clipped")
            } else {
                String::new()
            }
        );

        if val_loss.total < best_val {
            best_val = val_loss.total;
            best_epoch = epoch;
            best_params = model.params().clone();
            since_best = 0;
            if let Some(path) = &outputs.checkpoint {
                let info = CheckpointInfo {
                    step: adam.steps(),
                    epoch,
                    val_loss: Some(best_val),
                };
                checkpoint::save(path, model, info)?;
            }
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    *model.params_mut() = best_params;
    Ok(TrainReport {
        epochs_run,
        best_epoch,
        best_val,
        stopped_early,
        steps: adam.steps(),
        clipped_steps,
        history: log.rows,
    })
}
