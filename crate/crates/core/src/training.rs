//! Loss, schedules and the training loop.

use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{Batch, WindowedDataset, Windows};
use crate::error::{Error, Result};
use crate::graphs::GraphOperators;
use crate::model::{forecast, Checkpoint, DecoderFeed, ModelConfig, ModelParams};
use crate::numerics::{adam_step, clip_global_norm, AdamConfig, AdamState, Matrix, Rng, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub weight_decay: f64,
    /// `c` of the inverse-sigmoid teacher-forcing schedule; 0 disables teacher forcing.
    pub sampling_decay_steps: f64,
    pub seed: u64,
    /// Global gradient-norm bound; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            base_lr: 1e-2,
            lr_decay: 0.6,
            lr_decay_every: 10,
            weight_decay: 2e-4,
            sampling_decay_steps: 2000.0,
            seed: 0,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.lr_decay_every == 0 {
            return fail("train.epochs, train.batch_size and train.lr_decay_every must be at least 1");
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return fail("train.base_lr must be finite and non-negative");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail("train.lr_decay must lie in (0, 1]");
        }
        if !(self.weight_decay >= 0.0 && self.sampling_decay_steps >= 0.0 && self.clip_norm >= 0.0) {
            return fail("train.weight_decay, train.sampling_decay_steps and train.clip_norm must be non-negative");
        }
        Ok(())
    }

    /// `base_lr · lr_decay^⌊epoch / lr_decay_every⌋`, epochs counted from 0.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = (epoch / self.lr_decay_every.max(1)) as i32;
        self.base_lr * self.lr_decay.powi(drops)
    }
}

/// Inverse-sigmoid teacher-forcing probability `c / (c + exp(step / c))`.
/// `c = 0` means never feed the ground truth.
pub fn sampling_prob(step: u64, decay_steps: f64) -> f64 {
    if decay_steps <= 0.0 {
        return 0.0;
    }
    let c = decay_steps;
    let e = (step as f64 / c).exp();
    if e.is_infinite() {
        0.0
    } else {
        c / (c + e)
    }
}

/// Mean `|pred − target|` over entries with `target ≠ 0`; zero (with a warning)
/// when every entry is masked.
pub fn masked_mae(pred: &Matrix, target: &Matrix) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(pred.mismatch("masked_mae", target));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (p, t) in pred.as_slice().iter().zip(target.as_slice()) {
        if *t != 0.0 {
            sum += (p - t).abs();
            count += 1;
        }
    }
    if count == 0 {
        log::warn!("masked MAE over an entirely masked target");
        return Ok(0.0);
    }
    Ok(sum / count as f64)
}

/// One line of the per-epoch log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// Counted from 1.
    pub epoch: usize,
    pub lr: f64,
    pub train_mae: f64,
    pub val_mae: f64,
    /// Teacher-forcing probability at the end of the epoch.
    pub epsilon: f64,
    pub seconds: f64,
}

impl EpochLog {
    pub const HEADER: &'static str = "epoch,lr,train_mae,val_mae,epsilon,seconds";

    pub fn line(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:.3}",
            self.epoch, self.lr, self.train_mae, self.val_mae, self.epsilon, self.seconds
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation MAE.
    pub best: Checkpoint,
    /// Parameters after the last epoch.
    pub last: ModelParams,
    pub log: Vec<EpochLog>,
}

/// Summed masked absolute error of a forecast and the number of unmasked entries.
fn batch_loss(tape: &Tape, preds: &[Var], batch: &Batch) -> Result<(Var, f64)> {
    let mut total: Option<Var> = None;
    let mut count = 0.0;
    for ((pred, target), mask) in preds.iter().zip(&batch.targets).zip(&batch.masks) {
        count += mask.sum();
        let term = tape.masked_abs_sum(pred, &Rc::new(target.clone()), Some(&Rc::new(mask.clone())))?;
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(&acc, &term)?,
        });
    }
    let total = total.ok_or_else(|| Error::contract("forecast produced no outputs"))?;
    Ok((total, count))
}

/// Masked MAE in normalised units over every window of `set`, decoder running free.
pub fn dataset_mae(
    params: &ModelParams,
    config: &ModelConfig,
    ops: &GraphOperators,
    set: &WindowedDataset,
    batch_size: usize,
) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0.0);
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = set.batch(chunk);
        let tape = Tape::scoring();
        let bound = params.bind(&tape);
        let preds = forecast(&tape, &batch.inputs, ops, params, &bound, config, DecoderFeed::free())?;
        let (loss, c) = batch_loss(&tape, &preds, &batch)?;
        sum += loss.scalar();
        count += c;
    }
    Ok(if count > 0.0 { sum / count } else { 0.0 })
}

/// Trains from a seeded initialisation.
///
/// Each epoch shuffles the training windows with the run's generator, and each
/// mini-batch runs the forecaster with scheduled sampling, takes the masked MAE
/// on normalised targets, clips the global gradient norm and applies one Adam
/// step at `lr_at(epoch)`. The checkpoint with the lowest validation MAE is
/// retained (training MAE when the validation split is empty). `on_epoch` sees
/// every log line as it is produced.
pub fn train(
    model: &ModelConfig,
    cfg: &TrainConfig,
    data: &Windows,
    ops: &GraphOperators,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    model.validate()?;
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::contract("training split has no windows"));
    }
    if data.train.history() != model.history || data.train.horizon() != model.horizon {
        return Err(Error::contract(format!(
            "windows are {}→{}, model expects {}→{}",
            data.train.history(),
            data.train.horizon(),
            model.history,
            model.horizon
        )));
    }
    if data.train.node_count() != ops.node_count() || model.input_dim != 1 {
        return Err(Error::contract(format!(
            "data has {} nodes with 1 feature, graph has {} nodes and model reads {} features",
            data.train.node_count(),
            ops.node_count(),
            model.input_dim
        )));
    }
    if data.val.is_empty() {
        log::warn!("validation split is empty; selecting checkpoints by training MAE");
    }

    let mut rng = Rng::seeded(cfg.seed);
    let mut params = ModelParams::init(model, &mut rng)?;
    let mut adam = AdamState::new(
        params.values(),
        AdamConfig {
            lr: cfg.base_lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut step: u64 = 0;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<Checkpoint> = None;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = cfg.lr_at(epoch);
        adam.config.lr = lr;
        rng.shuffle(&mut order);
        let (mut sum, mut count) = (0.0, 0.0);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = data.train.batch(chunk);
            let eps = sampling_prob(step, cfg.sampling_decay_steps);
            let tape = Tape::new();
            let bound = params.bind(&tape);
            let feed = DecoderFeed::scheduled(&batch.targets, eps, &mut rng);
            let preds = forecast(&tape, &batch.inputs, ops, &params, &bound, model, feed)?;
            let (total, c) = batch_loss(&tape, &preds, &batch)?;
            step += 1;
            if c == 0.0 {
                log::warn!("batch {b} of epoch {} is entirely masked; skipped", epoch + 1);
                continue;
            }
            let loss = tape.scale(&total, 1.0 / c);
            if !loss.scalar().is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    batch: b,
                });
            }
            let grads = tape.backward(&loss)?;
            let mut g: Vec<Matrix> = bound.iter().map(|p| grads.wrt(p)).collect();
            if cfg.clip_norm > 0.0 {
                clip_global_norm(&mut g, cfg.clip_norm);
            }
            adam_step(params.values_mut(), &g, &mut adam)?;
            sum += total.scalar();
            count += c;
        }
        let train_mae = if count > 0.0 { sum / count } else { 0.0 };
        let val_mae = if data.val.is_empty() {
            train_mae
        } else {
            dataset_mae(&params, model, ops, &data.val, cfg.batch_size)?
        };
        let entry = EpochLog {
            epoch: epoch + 1,
            lr,
            train_mae,
            val_mae,
            epsilon: sampling_prob(step, cfg.sampling_decay_steps),
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!("{}", entry.line());
        on_epoch(&entry);
        if best.as_ref().is_none_or(|ck| val_mae < ck.val_mae) {
            best = Some(Checkpoint {
                config: model.clone(),
                params: params.clone(),
                scaler: data.scaler,
                seed: cfg.seed,
                epoch: epoch + 1,
                val_mae,
            });
        }
        log.push(entry);
    }
    Ok(TrainOutcome {
        best: best.expect("at least one epoch"),
        last: params,
        log,
    })
}
