//! Teacher-forced training with in-loop channel noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channels::ChannelConfig;
use crate::config::{KeyValues, TrainConfig};
use crate::data::{Batcher, EncodedPair};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, JsccModel};
use crate::optim::{AdamConfig, OptimizerState};
use crate::params::ParamId;
use crate::rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    pub valid_loss: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,step,train_loss,train_ppl,valid_loss,valid_ppl";

    /// Losses are written at full precision so a resumed run can reload
    /// them exactly.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{},{:.6}",
            self.epoch,
            self.step,
            self.train_loss,
            self.train_loss.exp(),
            self.valid_loss,
            self.valid_loss.exp()
        )
    }
}

pub struct Trainer {
    pub model: JsccModel,
    pub optimizer: OptimizerState,
    pub cfg: TrainConfig,
    /// Epochs completed so far (carried across resumes).
    pub epoch: usize,
}

impl Trainer {
    pub fn new(model: JsccModel, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let optimizer = OptimizerState::new(
            model.params(),
            AdamConfig {
                lr: cfg.lr,
                ..AdamConfig::default()
            },
        );
        Ok(Self {
            model,
            optimizer,
            cfg,
            epoch: 0,
        })
    }

    /// Resumes from a checkpoint, keeping its optimiser moments and counters.
    pub fn resume(ckpt: Checkpoint, cfg: TrainConfig) -> Result<Self> {
        let mut t = Self::new(ckpt.model, cfg)?;
        if let Some(opt) = ckpt.optimizer {
            t.optimizer = opt;
        }
        if let Some(e) = ckpt.meta.get("epoch") {
            t.epoch = e
                .parse()
                .map_err(|_| Error::Format(format!("bad epoch counter {e:?} in checkpoint")))?;
        }
        Ok(t)
    }

    pub fn step(&self) -> u64 {
        self.optimizer.step
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut meta = KeyValues::default();
        meta.set("epoch", self.epoch);
        let tkv = self.cfg.to_key_values();
        for k in tkv.keys() {
            meta.set(&format!("train.{k}"), tkv.get(k).unwrap_or_default());
        }
        Checkpoint {
            model: self.model.clone(),
            optimizer: Some(self.optimizer.clone()),
            meta,
        }
    }

    /// Channel applied to item `index` of the batch at optimiser step `step`,
    /// or `None` for a clean pass. One kind and P_e per batch.
    pub fn batch_channel(&self, step: u64, index: usize) -> Option<ChannelConfig> {
        let batch_seed = rng::derive(self.cfg.seed, rng::derive(rng::label("train-batch"), step));
        let mut r = ChaCha8Rng::seed_from_u64(batch_seed);
        let clean = r.gen::<f64>() < self.cfg.clean_fraction;
        if clean || self.cfg.channels.is_empty() || self.cfg.pe_max == 0.0 {
            return None;
        }
        let kind = self.cfg.channels[r.gen_range(0..self.cfg.channels.len())];
        let pe = r.gen::<f64>() * self.cfg.pe_max;
        ChannelConfig::new(kind, pe, rng::derive(batch_seed, index as u64)).ok()
    }

    /// Linear warmup, then cosine decay towards `final_lr_fraction · lr`
    /// at `total_steps`.
    pub fn lr_at(&self, step: u64, total_steps: u64) -> f64 {
        let (lr, w) = (self.cfg.lr, self.cfg.warmup_steps as f64);
        let s = step as f64;
        if w > 0.0 && s < w {
            return lr * (s + 1.0) / w;
        }
        let span = total_steps as f64 - w;
        if span <= 0.0 || self.cfg.final_lr_fraction >= 1.0 {
            return lr;
        }
        let t = ((s - w) / span).clamp(0.0, 1.0);
        let f = self.cfg.final_lr_fraction;
        lr * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
    }

    /// One optimiser step on `batch`; returns the mean loss.
    pub fn train_batch(&mut self, batch: &[&EncodedPair], total_steps: u64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::DegenerateBatch);
        }
        let step = self.optimizer.step;
        let channels: Vec<Option<ChannelConfig>> = (0..batch.len()).map(|i| self.batch_channel(step, i)).collect();
        let mask_seed = rng::derive(self.cfg.seed, rng::derive(rng::label("input-mask"), step));
        let model = &self.model;
        let per_item: Vec<(f64, Vec<(ParamId, Tensor)>)> = batch
            .par_iter()
            .zip(channels.par_iter())
            .enumerate()
            .map(|(i, (p, ch))| {
                let mask = (self.cfg.input_mask > 0.0)
                    .then(|| (self.cfg.input_mask, rng::derive(mask_seed, i as u64)));
                model.loss_and_grads(&p.src, &p.tgt, ch.as_ref(), mask)
            })
            .collect::<Result<_>>()?;

        // Summation in batch order keeps results independent of scheduling.
        let n = batch.len() as f64;
        let mut total = 0.0;
        let mut acc: Vec<(ParamId, Tensor)> = Vec::new();
        for (loss, grads) in per_item {
            total += loss;
            if acc.is_empty() {
                acc = grads;
                continue;
            }
            for ((ia, ta), (ib, tb)) in acc.iter_mut().zip(&grads) {
                debug_assert_eq!(ia, ib);
                ta.add_assign(tb);
            }
        }
        for (_, t) in &mut acc {
            t.scale_assign(1.0 / n);
        }
        let lr = self.lr_at(step, total_steps);
        self.optimizer.step_with_lr(self.model.params_mut(), &acc, lr);
        Ok(total / n)
    }

    /// Trains one epoch over `train`; returns the mean batch loss.
    pub fn train_epoch(&mut self, train: &Batcher) -> Result<f64> {
        let epoch = self.epoch as u64;
        let batches: Vec<Vec<&EncodedPair>> = train.epoch(epoch).collect();
        let total_steps = (self.cfg.epochs * train.num_batches()) as u64;
        let mut sum = 0.0;
        for b in &batches {
            sum += self.train_batch(b, total_steps)?;
        }
        self.epoch += 1;
        Ok(sum / batches.len().max(1) as f64)
    }

    /// Mean clean-channel teacher-forced loss over a split.
    pub fn evaluate(&self, data: &Batcher) -> Result<f64> {
        if data.pairs.is_empty() {
            return Ok(f64::NAN);
        }
        let model = &self.model;
        let losses: Vec<f64> = data
            .pairs
            .par_iter()
            .map(|p| {
                let mut g = crate::autodiff::Graph::new();
                let loss = model.teacher_forced_graph(&mut g, &p.src, &p.tgt, None)?;
                Ok(g.value(loss).get(0, 0))
            })
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }
}

/// True when the loss failed to decrease across the first three epochs.
pub fn diverging(log: &[EpochLog]) -> bool {
    log.len() >= 3 && !(log[2].train_loss < log[0].train_loss) || log.iter().any(|l| !l.train_loss.is_finite())
}
