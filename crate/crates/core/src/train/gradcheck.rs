//! Central finite-difference check of [`gradients`](super::gradients) against [`bpr_loss`](super::bpr_loss).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{bpr_loss, epoch_triplets, gradients, Triplet};
use crate::data::{Dataset, Engagement, GameRecord};
use crate::error::Result;
use crate::eval::{ablation_variant, Ablation};
use crate::graph::{build_context_graph, GraphConfig};
use crate::model::{ModelConfig, ModelInputs, ModelState, Normalization};
use crate::rng;

/// Magnitude below which a gradient entry is compared in absolute terms.
pub const SMALL_GRADIENT: f64 = 1e-6;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;
pub const MAX_ABSOLUTE_ERROR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub tensor: String,
    pub entries: usize,
    pub max_relative_error: f64,
    pub max_absolute_error_small: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.failures == 0)
    }

    pub fn checked_entries(&self) -> usize {
        self.tensors.iter().map(|t| t.entries).sum()
    }
}

/// Compares every analytic gradient entry with `(L(θ+h) - L(θ-h)) / 2h`.
pub fn check_gradients(
    state: &ModelState,
    inputs: &ModelInputs,
    config: &ModelConfig,
    batch: &[Triplet],
    lambda: f64,
    step: f64,
) -> GradCheckReport {
    let (_, analytic) = gradients(state, inputs, config, batch, lambda);
    let analytic: Vec<(String, Vec<f64>)> = analytic.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();
    let mut probe = state.clone();
    let mut tensors = Vec::new();
    for (t, (name, grad)) in analytic.iter().enumerate() {
        let mut check = TensorCheck {
            tensor: name.clone(),
            entries: grad.len(),
            max_relative_error: 0.0,
            max_absolute_error_small: 0.0,
            failures: 0,
        };
        #[allow(clippy::needless_range_loop)]
        for k in 0..grad.len() {
            let original = probe.tensors()[t].1[k];
            probe.tensors_mut()[t].1[k] = original + step;
            let plus = bpr_loss(&probe, inputs, config, batch, lambda);
            probe.tensors_mut()[t].1[k] = original - step;
            let minus = bpr_loss(&probe, inputs, config, batch, lambda);
            probe.tensors_mut()[t].1[k] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let a = grad[k];
            let diff = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            if scale < SMALL_GRADIENT {
                check.max_absolute_error_small = check.max_absolute_error_small.max(diff);
                if diff >= MAX_ABSOLUTE_ERROR {
                    check.failures += 1;
                }
            } else {
                let rel = diff / scale;
                check.max_relative_error = check.max_relative_error.max(rel);
                if rel >= MAX_RELATIVE_ERROR {
                    check.failures += 1;
                }
            }
        }
        tensors.push(check);
    }
    GradCheckReport { step, tensors }
}

/// Five users and eight games in which every relation has edges under
/// [`reference_graph_config`] and user 5 has no friends.
pub fn reference_dataset() -> Dataset {
    let game = |id: u64, genres: &[&str], developer: &str, publisher: &str| GameRecord {
        game_id: id,
        genres: genres.iter().map(|g| g.to_string()).collect::<BTreeSet<_>>(),
        developer: developer.into(),
        publisher: publisher.into(),
    };
    let catalog = vec![
        game(10, &["action", "rpg"], "d1", "p1"),
        game(11, &["action"], "d1", "p2"),
        game(12, &["rpg"], "d2", "p1"),
        game(13, &["puzzle"], "d3", "p3"),
        game(14, &["puzzle", "action"], "d3", "p3"),
        game(15, &["sim"], "d4", "p2"),
        game(16, &["sim", "rpg"], "d2", "p4"),
        game(17, &["racing"], "d5", "p5"),
    ];
    let rows: [(u64, u64, f64); 17] = [
        (1, 10, 120.0),
        (1, 11, 30.0),
        (1, 12, 400.0),
        (1, 15, 5.0),
        (2, 10, 90.0),
        (2, 11, 60.0),
        (2, 13, 10.0),
        (3, 12, 300.0),
        (3, 14, 45.0),
        (3, 16, 80.0),
        (3, 10, 15.0),
        (4, 13, 20.0),
        (4, 14, 25.0),
        (4, 17, 600.0),
        (5, 15, 70.0),
        (5, 16, 75.0),
        (5, 11, 8.0),
    ];
    let engagements = rows
        .iter()
        .map(|&(user_id, game_id, dwelling_minutes)| Engagement {
            user_id,
            game_id,
            dwelling_minutes,
        })
        .collect();
    Dataset::new(engagements, [(1, 2), (1, 3), (2, 3), (3, 4)], catalog).0
}

/// Keeps every candidate co-dwelling pair.
pub fn reference_graph_config() -> GraphConfig {
    GraphConfig {
        tau_p: 0.01,
        tau_t: 0.0,
        time_scale: None,
    }
}

pub fn reference_inputs(normalization: Normalization) -> Result<ModelInputs> {
    let d = reference_dataset();
    let (graph, _) = build_context_graph(&d, &reference_graph_config())?;
    ModelInputs::new(&d, &graph, normalization)
}

/// Checks the full model and every ablation on the reference instance with
/// `d = 4`, one negative per interaction and `lambda = 0.01`.
pub fn run_reference_check(seed: u64) -> Result<Vec<(String, GradCheckReport)>> {
    let inputs = reference_inputs(Normalization::Mean)?;
    let state = ModelState::init(inputs.users().len(), inputs.games().len(), 4, seed)?;
    let (batch, _) = epoch_triplets(&inputs, 1, &mut rng::stream(seed, 1));
    let full = ModelConfig::default();
    let mut configs = vec![("full".to_string(), full)];
    configs.extend(
        Ablation::ALL
            .iter()
            .map(|&a| (a.name().to_string(), ablation_variant(&full, a))),
    );
    Ok(configs
        .into_iter()
        .map(|(name, config)| {
            let report = check_gradients(&state, &inputs, &config, &batch, 1e-2, 1e-4);
            (name, report)
        })
        .collect())
}
