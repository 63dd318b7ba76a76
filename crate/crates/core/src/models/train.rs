use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::convnet::{ConvNet, Grads};
use super::Real;
use crate::dsp::LogMelPatch;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// How often the label-smoothing amount is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingDraw {
    #[default]
    PerBatch,
    PerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Multiplicative decay applied every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub label_smooth_min: f64,
    pub label_smooth_max: f64,
    pub smoothing_draw: SmoothingDraw,
    /// Classical momentum; 0 is plain SGD.
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.001,
            lr_decay: 0.95,
            decay_every: 10,
            batch_size: 32,
            epochs: 110,
            label_smooth_min: 0.1,
            label_smooth_max: 0.3,
            smoothing_draw: SmoothingDraw::PerBatch,
            momentum: 0.0,
            weight_decay: 0.0,
            seed: rng::DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return Err(Error::InvalidConfig(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(0.0 <= self.label_smooth_min && self.label_smooth_min <= self.label_smooth_max && self.label_smooth_max < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= smooth_min <= smooth_max < 1, got {}..{}",
                self.label_smooth_min, self.label_smooth_max
            )));
        }
        if self.batch_size == 0 || self.decay_every == 0 {
            return Err(Error::InvalidConfig("batch_size and decay_every must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        Ok(())
    }

    fn draw_eps(&self, rng: &mut Rng) -> f64 {
        if self.label_smooth_max > self.label_smooth_min {
            rng.random_range(self.label_smooth_min..self.label_smooth_max)
        } else {
            self.label_smooth_min
        }
    }
}

/// `lr0 * decay ^ floor(epoch / decay_every)`.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.lr0 * cfg.lr_decay.powi((epoch / cfg.decay_every) as i32)
}

/// SGD state (momentum buffers).
#[derive(Debug, Clone, Default)]
pub struct Sgd<T> {
    velocity: Vec<Vec<T>>,
}

impl<T: Real> Sgd<T> {
    pub fn new() -> Self {
        Self { velocity: Vec::new() }
    }

    /// Applies `param.grad` to every parameter.
    pub fn step(&mut self, net: &mut ConvNet<T>, lr: f64, momentum: f64, weight_decay: f64) {
        let params = net.params_mut();
        if self.velocity.len() != params.len() {
            self.velocity = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        }
        let (lr, mu, wd) = (T::lit(lr), T::lit(momentum), T::lit(weight_decay));
        for (p, vel) in params.into_iter().zip(&mut self.velocity) {
            let Some(grad) = p.grad.as_ref() else { continue };
            for ((w, &g), v) in p.values.iter_mut().zip(grad).zip(vel.iter_mut()) {
                let g = g + wd * *w;
                *v = mu * *v + g;
                *w = *w - lr * *v;
            }
        }
    }
}

/// One SGD update on a batch of `(patch, label)` pairs. Returns the mean
/// smoothed cross-entropy.
///
/// The smoothing amount (per batch or per sample) and each sample's dropout
/// stream are drawn from `rng` up front; per-sample gradients are then
/// computed in parallel and summed in batch order, so results do not depend on
/// the thread count.
pub fn train_step<T: Real>(
    net: &mut ConvNet<T>,
    opt: &mut Sgd<T>,
    batch: &[(&LogMelPatch, bool)],
    cfg: &TrainConfig,
    epoch: usize,
    batch_index: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty training batch".into()));
    }
    let batch_eps = cfg.draw_eps(rng);
    let draws: Vec<(f64, u64)> = batch
        .iter()
        .map(|_| {
            let eps = match cfg.smoothing_draw {
                SmoothingDraw::PerBatch => batch_eps,
                SmoothingDraw::PerSample => cfg.draw_eps(rng),
            };
            (eps, rng.random::<u64>())
        })
        .collect();

    let frozen: &ConvNet<T> = net;
    let results: Vec<Result<(f64, Grads<T>)>> = batch
        .par_iter()
        .zip(draws.par_iter())
        .map(|(&(patch, label), &(eps, seed))| {
            let x = frozen.input_from_patch(patch)?;
            let mut drop_rng = rng::stream(seed, &[]);
            frozen.loss_and_grads(&x, label, eps, Some(&mut drop_rng))
        })
        .collect();

    let mut total = net.zero_grads();
    let mut loss_sum = 0.0;
    for r in results {
        let (loss, grads) = r?;
        loss_sum += loss;
        for (acc, g) in total.iter_mut().zip(grads) {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
    }
    let loss = loss_sum / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch, batch: batch_index });
    }
    let scale = T::lit(1.0 / batch.len() as f64);
    for (p, g) in net.params_mut().into_iter().zip(total) {
        p.grad = Some(g.into_iter().map(|v| v * scale).collect());
    }
    opt.step(net, lr_at_epoch(cfg, epoch), cfg.momentum, cfg.weight_decay);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at_epoch(&cfg, 0), 0.001);
        assert_eq!(lr_at_epoch(&cfg, 9), 0.001);
        assert!((lr_at_epoch(&cfg, 10) - 0.00095).abs() < 1e-18);
        assert!((lr_at_epoch(&cfg, 109) - 0.001 * 0.95f64.powi(10)).abs() < 1e-18);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { lr0: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { label_smooth_min: 0.4, label_smooth_max: 0.3, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { label_smooth_max: 1.0, ..Default::default() }.validate().is_err());
    }
}
