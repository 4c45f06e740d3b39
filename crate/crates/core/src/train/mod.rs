//! Mini-batch BPR training with Adam and early stopping on validation NDCG@10.

mod adam;
mod grad;
pub mod gradcheck;
mod triplets;

use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use grad::{bpr_loss, gradients, pair_loss, regularizer, sigmoid, softplus, touched_rows, Touched};
pub use triplets::{epoch_triplets, sample_triplets, Triplet};

use crate::data::{Split, UserId};
use crate::error::{Error, Result};
use crate::eval::{evaluate_users, Phase, ScgrecRecommender};
use crate::model::{FusionWeights, ModelConfig, ModelInputs, ModelState};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub w_context: f64,
    pub w_social: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Negatives drawn per observed interaction.
    pub negatives: usize,
    /// Validation users scored per epoch; `None` scores all of them.
    pub validation_users: Option<usize>,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: 32,
            lr: 0.03,
            batch_size: 1024,
            lambda: 1e-4,
            w_context: 0.5,
            w_social: 0.1,
            patience: 10,
            max_epochs: 200,
            negatives: 1,
            validation_users: None,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("lr must be a finite non-negative number");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be a finite non-negative number");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        self.fusion().map(|_| ())
    }

    pub fn fusion(&self) -> Result<FusionWeights> {
        FusionWeights::new(self.w_context, self.w_social)
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ndcg10: Option<f64>,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch (the last epoch without validation users).
    pub state: ModelState,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_ndcg10: Option<f64>,
}

/// Validation users scored each epoch: the first `limit` in id order.
fn validation_users(split: &Split, limit: Option<usize>) -> Vec<UserId> {
    let users = split
        .eval_users
        .iter()
        .copied()
        .filter(|u| split.validation.contains_key(u));
    match limit {
        Some(n) => users.take(n).collect(),
        None => users.collect(),
    }
}

pub fn train(split: &Split, inputs: &ModelInputs, config: &ModelConfig, hp: &Hyperparams) -> Result<TrainOutcome> {
    train_with(split, inputs, config, hp, &mut |_| {})
}

/// Trains from a seeded initialization, calling `on_epoch` after every epoch.
/// Pathways and fusion weights come from `config`; `hp` supplies the rest.
pub fn train_with(
    split: &Split,
    inputs: &ModelInputs,
    config: &ModelConfig,
    hp: &Hyperparams,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    hp.validate()?;
    let start = Instant::now();
    let mut state = ModelState::init(
        inputs.users().len(),
        inputs.games().len(),
        hp.dim,
        rng::derive_seed(hp.seed, 0),
    )?;
    let mut optimizer = Adam::new(hp.lr, &state);
    let mut sampler = rng::stream(hp.seed, 1);
    let val_users = validation_users(split, hp.validation_users);

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, ModelState)> = None;
    let mut since_best = 0;
    for epoch in 1..=hp.max_epochs {
        let batches = sample_triplets(inputs, hp.batch_size, hp.negatives, &mut sampler);
        let mut total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let (loss, grad) = gradients(&state, inputs, config, batch, hp.lambda);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss {loss} at epoch {epoch}, batch {b}")));
            }
            total += loss;
            optimizer.step(&mut state, &grad);
        }
        let val_ndcg10 = if val_users.is_empty() {
            None
        } else {
            let rec = ScgrecRecommender::new("scgrec", &state, inputs, *config);
            let m = evaluate_users(&rec, split, Phase::Validation, &val_users)?;
            m.get("ndcg", 10)
        };
        let entry = EpochLog {
            epoch,
            train_loss: total,
            val_ndcg10,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        info!(
            "epoch {epoch}: loss {total:.4}, val ndcg@10 {}",
            val_ndcg10.map_or("n/a".into(), |v| format!("{v:.5}"))
        );
        on_epoch(&entry);
        log.push(entry);

        let Some(v) = val_ndcg10 else { continue };
        if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
            best = Some((v, epoch, state.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hp.patience {
                break;
            }
        }
    }
    Ok(match best {
        Some((v, epoch, best_state)) => TrainOutcome {
            state: best_state,
            log,
            best_epoch: epoch,
            best_val_ndcg10: Some(v),
        },
        None => TrainOutcome {
            best_epoch: log.len(),
            state,
            log,
            best_val_ndcg10: None,
        },
    })
}
