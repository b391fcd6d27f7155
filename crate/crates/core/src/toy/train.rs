//! Mini-batch SGD with a fixed step size.
//!
//! Determinism: batches are drawn from a seeded shuffle, per-sample gradients
//! are summed in batch order, and no threads are involved, so a fixed seed
//! gives bitwise-identical parameters on a given platform (IEEE-754 binary64,
//! round-to-nearest, no fused multiply-add reordering by the compiler beyond
//! what the target's default codegen does).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::ToyModel;
use super::task::SampleRecord;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            batch_size: 32,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}

/// Trains `model` in place. When `only_learnable` is set only layers in φ move.
/// Returns the mean training loss of the last epoch (0 when nothing ran).
pub fn train(
    model: &mut ToyModel,
    data: &[SampleRecord],
    cfg: &TrainConfig,
    only_learnable: bool,
    lane: u32,
) -> Result<f64> {
    if cfg.batch_size == 0 || cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 {
        return Err(Error::InvalidConfig(
            "batch size and learning rate must be positive".into(),
        ));
    }
    if data.is_empty() || cfg.epochs == 0 {
        return Ok(0.0);
    }
    let mut rng = stream(cfg.seed, Purpose::Shuffle, lane);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut last_loss = 0.0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; model.layers.len()];
            for &i in batch {
                let (loss, grads) = model.loss_and_grad(&data[i], only_learnable)?;
                epoch_loss += loss;
                for (slot, g) in acc.iter_mut().zip(grads) {
                    let Some(g) = g else { continue };
                    match slot {
                        Some((w, b)) => {
                            w.iter_mut().zip(&g.weights).for_each(|(a, v)| *a += v);
                            b.iter_mut().zip(&g.bias).for_each(|(a, v)| *a += v);
                        }
                        None => *slot = Some((g.weights, g.bias)),
                    }
                }
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (layer, g) in model.layers.iter_mut().zip(acc) {
                let Some((gw, gb)) = g else { continue };
                layer
                    .weights
                    .iter_mut()
                    .zip(&gw)
                    .for_each(|(w, d)| *w -= step * d);
                layer
                    .bias
                    .iter_mut()
                    .zip(&gb)
                    .for_each(|(w, d)| *w -= step * d);
            }
        }
        last_loss = epoch_loss / data.len() as f64;
        if !last_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "{} model loss is {last_loss} after epoch {}",
                model.family,
                epoch + 1
            )));
        }
    }
    Ok(last_loss)
}

/// Pretrains both family members on the same corpus with the same schedule.
/// Every parameter is trained.
pub fn pretrain_family(
    mut small: ToyModel,
    mut target: ToyModel,
    corpus: &[SampleRecord],
    cfg: &TrainConfig,
) -> Result<(ToyModel, ToyModel)> {
    train(&mut small, corpus, cfg, false, 0)?;
    train(&mut target, corpus, cfg, false, 0)?;
    Ok((small, target))
}

/// Fine-tunes the learnable layers (φ) on a downstream set for `cfg.epochs`.
pub fn finetune(mut model: ToyModel, data: &[SampleRecord], cfg: &TrainConfig) -> Result<ToyModel> {
    train(&mut model, data, cfg, true, 1)?;
    Ok(model)
}
