//! Adam optimizer and the early-stopping training loop.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::gru::{GruForecaster, PARAM_BLOCKS};
use crate::losses::ForecastLoss;
use crate::series::{ForecastPair, Series, WindowItem, WindowedDataset};
use crate::tape::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 1000,
            patience: 10,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            grad_clip: Some(5.0),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.patience == 0 {
            return Err(invalid("patience must be at least 1"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(invalid("batch size and max epochs must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(invalid("Adam betas must lie in [0, 1) and eps must be positive"));
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return Err(invalid("gradient clip norm must be positive"));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, shapes: &[(usize, usize)]) -> Self {
        let zeros = || shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) {
        self.step += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let p = param.as_mut_slice();
            let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
            for (i, &g) in grad.as_slice().iter().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = libm::sqrt(grads.iter().map(|g| g.sum_squares()).sum());
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.as_mut_slice() {
                *x *= scale;
            }
        }
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub grad_clip: Option<f64>,
    /// Optimizer steps whose gradient norm exceeded the clip.
    pub clipped_steps: usize,
}

const EVAL_CHUNK: usize = 128;

fn divergence(what: &str) -> Error {
    Error::NumericDivergence(format!("non-finite {what}"))
}

fn pair_of(target: &Series, pred: &[f64]) -> Result<ForecastPair> {
    let pred = Series::from_slice(pred).map_err(|_| divergence("forecast"))?;
    ForecastPair::new(target.clone(), pred)
}

/// Mean loss of the model over `items`.
pub fn evaluate_loss(model: &GruForecaster, items: &[WindowItem], loss: &dyn ForecastLoss) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let horizon = items[0].target.len();
    let mut total = 0.0;
    for chunk in items.chunks(EVAL_CHUNK) {
        let inputs: Vec<&[f64]> = chunk.iter().map(|it| it.input.as_slice()).collect();
        let preds = model.forecast_batch(&inputs, horizon)?;
        for (item, pred) in chunk.iter().zip(&preds) {
            total += loss.evaluate(&pair_of(&item.target, pred)?)?.value;
        }
    }
    let mean = total / items.len() as f64;
    if !mean.is_finite() {
        return Err(divergence("validation loss"));
    }
    Ok(mean)
}

/// Mean loss over a minibatch and its parameter gradients.
pub fn batch_gradients(
    model: &GruForecaster,
    batch: &[&WindowItem],
    loss: &dyn ForecastLoss,
) -> Result<(f64, Vec<Matrix>)> {
    let inputs: Vec<&[f64]> = batch.iter().map(|it| it.input.as_slice()).collect();
    let horizon = batch[0].target.len();
    let scale = 1.0 / batch.len() as f64;
    model.backprop(&inputs, horizon, |preds| {
        let mut seed = Matrix::zeros(preds.rows(), preds.cols());
        let mut total = 0.0;
        for (r, item) in batch.iter().enumerate() {
            let lvg = loss.evaluate(&pair_of(&item.target, preds.row(r))?)?;
            total += lvg.value;
            let row = &mut seed.as_mut_slice()[r * horizon..(r + 1) * horizon];
            for (s, g) in row.iter_mut().zip(&lvg.grad) {
                *s = g * scale;
            }
        }
        let mean = total * scale;
        if !mean.is_finite() || !seed.is_finite() {
            return Err(divergence("training loss"));
        }
        Ok((mean, seed))
    })
}

pub fn train(
    model: &mut GruForecaster,
    data: &WindowedDataset,
    loss: &dyn ForecastLoss,
    cfg: &TrainerConfig,
) -> Result<TrainReport> {
    train_with_observer(model, data, loss, cfg, &mut |_| {})
}

/// Minibatch Adam with early stopping on the validation loss. The best
/// validation parameters are restored before returning.
pub fn train_with_observer(
    model: &mut GruForecaster,
    data: &WindowedDataset,
    loss: &dyn ForecastLoss,
    cfg: &TrainerConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    let (train, val) = (data.train(), data.val());
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let shapes = GruForecaster::block_shapes(model.hidden_size());
    let mut adam = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, &shapes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best = (model.clone(), f64::INFINITY, 0usize);
    let mut epochs = Vec::new();
    let mut stale = 0;
    let mut clipped_steps = 0;
    let mut early_stopped = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&WindowItem> = chunk.iter().map(|&i| &train[i]).collect();
            let (value, mut grads) = batch_gradients(model, &batch, loss)?;
            weighted += value * batch.len() as f64;
            if let Some(max_norm) = cfg.grad_clip {
                if clip_global_norm(&mut grads, max_norm) > max_norm {
                    clipped_steps += 1;
                }
            }
            let mut params: [&mut Matrix; PARAM_BLOCKS] = model.params_mut();
            adam.step(&mut params, &grads);
            if !model.is_finite() {
                return Err(divergence("parameters"));
            }
        }
        let record = EpochRecord {
            epoch,
            train_loss: weighted / train.len() as f64,
            val_loss: evaluate_loss(model, val, loss)?,
        };
        observer(&record);
        epochs.push(record);
        if record.val_loss < best.1 {
            best = (model.clone(), record.val_loss, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                early_stopped = true;
                break;
            }
        }
    }

    let stopped_epoch = epochs.len();
    let (best_model, best_val_loss, best_epoch) = best;
    *model = best_model;
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_val_loss,
        stopped_epoch,
        early_stopped,
        grad_clip: cfg.grad_clip,
        clipped_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{mse, LossValueGrad};
    use alloc::vec;

    fn constant_dataset(value: f64) -> WindowedDataset {
        let items: Vec<WindowItem> = (0..24)
            .map(|i| WindowItem {
                input: Series::new(vec![0.1 * (i % 5) as f64, 0.2, -0.1]).unwrap(),
                target: Series::new(vec![value; 3]).unwrap(),
            })
            .collect();
        WindowedDataset::from_items(items, 16, 20).unwrap()
    }

    #[test]
    fn adam_with_zero_gradients_is_a_no_op() {
        let mut a = Matrix::from_vec(1, 3, vec![1.0, -2.0, 3.0]);
        let before = a.clone();
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8, &[(1, 3)]);
        for _ in 0..5 {
            adam.step(&mut [&mut a], &[Matrix::zeros(1, 3)]);
        }
        assert_eq!(a, before);
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let mut grads = vec![Matrix::from_vec(1, 2, vec![3.0, 4.0]), Matrix::from_vec(1, 1, vec![12.0])];
        assert_eq!(clip_global_norm(&mut grads, 5.0), 13.0);
        let after: f64 = grads.iter().map(|g| g.sum_squares()).sum();
        assert!((libm::sqrt(after) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_loss_stops_after_patience() {
        let frozen = |p: &ForecastPair| -> Result<LossValueGrad> {
            Ok(LossValueGrad {
                value: 1.0,
                grad: vec![0.0; p.len()],
            })
        };
        let mut model = GruForecaster::new(4, 0).unwrap();
        let cfg = TrainerConfig {
            patience: 1,
            ..TrainerConfig::default()
        };
        let report = train(&mut model, &constant_dataset(0.5), &frozen, &cfg).unwrap();
        assert_eq!(report.stopped_epoch, 2);
        assert_eq!(report.best_epoch, 1);
        assert!(report.early_stopped);
    }

    #[test]
    fn learns_a_constant_target() {
        let mut model = GruForecaster::new(8, 3).unwrap();
        let cfg = TrainerConfig {
            learning_rate: 1e-2,
            max_epochs: 50,
            batch_size: 8,
            ..TrainerConfig::default()
        };
        let loss = |p: &ForecastPair| -> Result<LossValueGrad> { Ok(mse(p)) };
        let data = constant_dataset(0.5);
        let report = train(&mut model, &data, &loss, &cfg).unwrap();
        assert!(report.best_val_loss < 1e-4, "val mse {}", report.best_val_loss);
        assert_eq!(evaluate_loss(&model, data.val(), &loss).unwrap(), report.best_val_loss);
    }

    #[test]
    fn reruns_are_identical() {
        let loss = |p: &ForecastPair| -> Result<LossValueGrad> { Ok(mse(p)) };
        let cfg = TrainerConfig {
            max_epochs: 3,
            seed: 11,
            ..TrainerConfig::default()
        };
        let run = || {
            let mut model = GruForecaster::new(5, 2).unwrap();
            let report = train(&mut model, &constant_dataset(0.3), &loss, &cfg).unwrap();
            (model, report)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_config_and_empty_splits() {
        let loss = |p: &ForecastPair| -> Result<LossValueGrad> { Ok(mse(p)) };
        let mut model = GruForecaster::new(2, 0).unwrap();
        let bad = TrainerConfig {
            patience: 0,
            ..TrainerConfig::default()
        };
        assert!(train(&mut model, &constant_dataset(0.1), &loss, &bad).is_err());
        let data = constant_dataset(0.1);
        let no_val = WindowedDataset::from_items(data.items().to_vec(), 24, 24).unwrap();
        assert_eq!(
            train(&mut model, &no_val, &loss, &TrainerConfig::default()),
            Err(Error::EmptyDataset)
        );
    }
}
