use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{LstmModel, Scaler, WindowSample};
use crate::error::{Error, Result};
use crate::rng::{stream, Phase};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub hidden_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            rmsprop_decay: 0.9,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            hidden_size: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return bad("rmsprop_decay must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.hidden_size == 0 {
            return bad("batch_size, max_epochs and hidden_size must be positive");
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return bad("patience must lie in 1..=max_epochs");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Mini-batch RMSProp on mean squared error with early stopping on the
/// validation loss. The best-validation parameters are restored at the end.
/// Training windows are reshuffled every epoch from `cfg.seed`.
pub fn train(
    mut model: LstmModel,
    train: &[WindowSample],
    val: &[WindowSample],
    cfg: &TrainConfig,
) -> Result<(LstmModel, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Validation("no training windows".into()));
    }
    let mut history = TrainHistory::default();
    let mut mean_sq = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = stream(cfg.seed, 0, Phase::Shuffle);

    let score = |m: &LstmModel, train_loss: f64| -> Result<f64> {
        if val.is_empty() {
            Ok(train_loss)
        } else {
            m.mse(val)
        }
    };
    let initial_train = model.mse(train)?;
    let mut best = (score(&model, initial_train)?, model.params.clone());
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&WindowSample> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grad) = model.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            loss_sum += loss * batch.len() as f64;
            for ((p, s), g) in model.params.iter_mut().zip(&mut mean_sq).zip(&grad) {
                *s = cfg.rmsprop_decay * *s + (1.0 - cfg.rmsprop_decay) * g * g;
                *p -= cfg.learning_rate * g / (s.sqrt() + cfg.epsilon);
            }
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = score(&model, train_loss)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: if train_loss.is_finite() { val_loss } else { train_loss },
            });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, model.params.clone());
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    model.params = best.1;
    Ok((model, history))
}

/// One forecast, in scaled and original units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub slot_index: usize,
    pub target_scaled: f64,
    pub prediction_scaled: f64,
    pub target: f64,
    pub prediction: f64,
}

/// Predicts every (already scaled) window.
pub fn predict(model: &LstmModel, scaler: &Scaler, windows: &[WindowSample]) -> Result<Vec<Prediction>> {
    windows
        .iter()
        .map(|w| {
            let y = model.predict_one(w)?;
            Ok(Prediction {
                slot_index: w.slot_index,
                target_scaled: w.target,
                prediction_scaled: y,
                target: scaler.inverse_target(w.target),
                prediction: scaler.inverse_target(y),
            })
        })
        .collect()
}
