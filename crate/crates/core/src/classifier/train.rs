use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{loss_and_gradients, ClassifierParams, ModelConfig};
use crate::cluster::SupertokenSet;
use crate::error::{invalid, Error, Result};
use crate::labels::SoftLabelMatrix;
use crate::rng::{streams, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Scenes per optimizer step.
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Learning rate reached at the end of the cosine schedule.
    pub lr_floor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 8, lr: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, lr_floor: 0.0, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid!("epochs and batch size must be ≥ 1"));
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.lr_floor < 0.0 || self.lr_floor > self.lr {
            return Err(invalid!("need 0 ≤ lr_floor ≤ lr and lr > 0"));
        }
        Ok(())
    }
}

/// `floor + (base - floor) (1 + cos(π t / t_max)) / 2`.
pub fn cosine_lr(t: usize, t_max: usize, base: f64, floor: f64) -> f64 {
    let frac = if t_max == 0 { 1.0 } else { t.min(t_max) as f64 / t_max as f64 };
    floor + 0.5 * (base - floor) * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { beta1, beta2, eps, step: 0, first: vec![0.0; len], second: vec![0.0; len] }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean scene loss over the epoch, measured before each step.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ClassifierParams,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |l| l.loss)
    }

    /// CSV `epoch,lr,loss`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,lr,loss\n");
        for l in &self.log {
            let _ = writeln!(out, "{},{},{}", l.epoch, l.lr, l.loss);
        }
        out
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        fs::write(path, self.log_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Trains a freshly initialized classifier (weights seeded from `cfg.seed`).
pub fn train(
    scenes: &[(SupertokenSet, SoftLabelMatrix)],
    model: ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let params = ClassifierParams::init(model, crate::rng::derive_seed(cfg.seed, streams::CLASSIFIER_INIT))?;
    train_from(params, scenes, cfg)
}

/// Continues training from `params`. Scenes are visited in a seeded random
/// order each epoch; the gradient of a step is the mean over its scenes.
pub fn train_from(
    mut params: ClassifierParams,
    scenes: &[(SupertokenSet, SoftLabelMatrix)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let usable: Vec<usize> = (0..scenes.len()).filter(|&s| scenes[s].1.valid_count() > 0).collect();
    if usable.is_empty() {
        return Err(invalid!("no scene has a supervised token"));
    }
    let mut order_rng = SeededRng::stream(cfg.seed, streams::TRAIN_ORDER);
    let mut adam = Adam::new(params.len(), cfg.beta1, cfg.beta2, cfg.eps);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order = usable.clone();

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, cfg.epochs, cfg.lr, cfg.lr_floor);
        for i in (1..order.len()).rev() {
            let j = order_rng.below(i + 1);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = vec![0.0; params.len()];
            for &s in batch {
                let (tokens, labels) = &scenes[s];
                let (loss, g) = loss_and_gradients(tokens, &params, labels)?;
                if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Diverged { epoch, loss });
                }
                epoch_loss += loss;
                for (a, b) in grads.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= inv);
            adam.update(&mut params.values, &grads, lr);
        }
        let loss = epoch_loss / order.len() as f64;
        log.push(EpochLog { epoch, lr, loss });
    }
    Ok(TrainOutcome { params, log })
}
