//! Held-out ranking evaluation, popularity baselines and ablation variants.

mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{rank_for_user, rank_metrics, RankMetrics, CUTOFFS};

use crate::data::{Dataset, GameId, Split, UserId};
use crate::error::{Error, Result};
use crate::model::{
    final_user_embedding, game_context_embeddings, user_components, FusionWeights, ModelConfig, ModelInputs, ModelState,
};

/// Anything that scores every candidate game for a user.
pub trait Recommender: Sync {
    fn name(&self) -> &str;
    /// Candidate games in ascending id order.
    fn games(&self) -> &[GameId];
    /// Scores aligned with [`Recommender::games`].
    fn scores(&self, user: UserId) -> Result<Vec<f64>>;
}

/// A trained model with game context embeddings computed once.
pub struct ScgrecRecommender<'a> {
    name: String,
    state: &'a ModelState,
    inputs: &'a ModelInputs,
    config: ModelConfig,
    game_ctx: Option<Array2<f64>>,
}

impl<'a> ScgrecRecommender<'a> {
    pub fn new(name: impl Into<String>, state: &'a ModelState, inputs: &'a ModelInputs, config: ModelConfig) -> Self {
        let game_ctx = config.use_context.then(|| game_context_embeddings(state, inputs));
        ScgrecRecommender {
            name: name.into(),
            state,
            inputs,
            config,
            game_ctx,
        }
    }

    /// Final embedding of a training user.
    pub fn user_embedding(&self, user: UserId) -> Result<Vec<f64>> {
        let u = self.inputs.user_index(user).ok_or(Error::UnknownUser(user))?;
        let parts = user_components(self.state, self.inputs, &self.config, self.game_ctx.as_ref(), u);
        Ok(final_user_embedding(&parts, &self.config.fusion))
    }
}

impl Recommender for ScgrecRecommender<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn games(&self) -> &[GameId] {
        self.inputs.games()
    }

    fn scores(&self, user: UserId) -> Result<Vec<f64>> {
        let e = self.user_embedding(user)?;
        Ok((0..self.state.num_games())
            .map(|i| crate::model::score(self.state, &e, i))
            .collect())
    }
}

/// How the popularity baseline counts a game's audience.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityKind {
    /// Number of distinct training users.
    Count,
    /// Total training minutes.
    Time,
}

/// Ranks every user's candidates by one global training-set statistic.
pub struct Popularity {
    name: String,
    games: Vec<GameId>,
    scores: Vec<f64>,
}

impl Popularity {
    pub fn new(train: &Dataset, kind: PopularityKind) -> Self {
        let games = train.games();
        let index: BTreeMap<GameId, usize> = games.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut scores = vec![0.0; games.len()];
        for e in train.engagements() {
            scores[index[&e.game_id]] += match kind {
                PopularityKind::Count => 1.0,
                PopularityKind::Time => e.dwelling_minutes,
            };
        }
        let name = match kind {
            PopularityKind::Count => "pop_count",
            PopularityKind::Time => "pop_time",
        };
        Popularity {
            name: name.into(),
            games,
            scores,
        }
    }
}

impl Recommender for Popularity {
    fn name(&self) -> &str {
        &self.name
    }

    fn games(&self) -> &[GameId] {
        &self.games
    }

    fn scores(&self, _user: UserId) -> Result<Vec<f64>> {
        Ok(self.scores.clone())
    }
}

pub fn popularity_baseline(train: &Dataset, kind: PopularityKind) -> Popularity {
    Popularity::new(train, kind)
}

/// Which held-out engagements are the relevant set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Training games are excluded from the ranking.
    Validation,
    /// Training and validation games are excluded from the ranking.
    Test,
}

/// Mean metrics of one method over the evaluated users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub users: usize,
    /// Keyed `ndcg@10`, `recall@5`, ...
    pub values: BTreeMap<String, f64>,
}

impl MethodMetrics {
    pub fn get(&self, metric: &str, k: usize) -> Option<f64> {
        self.values.get(&format!("{metric}@{k}")).copied()
    }
}

const METRIC_NAMES: [&str; 4] = ["ndcg", "recall", "hit", "precision"];

fn metric_keys() -> Vec<String> {
    METRIC_NAMES
        .iter()
        .flat_map(|m| CUTOFFS.iter().map(move |k| format!("{m}@{k}")))
        .collect()
}

/// Evaluates `rec` on every evaluation user of `split`.
pub fn evaluate(rec: &dyn Recommender, split: &Split, phase: Phase) -> Result<MethodMetrics> {
    let users: Vec<UserId> = split.eval_users.iter().copied().collect();
    evaluate_users(rec, split, phase, &users)
}

/// Evaluates `rec` on the given evaluation users. Per-user metrics are
/// computed in parallel and summed in user order.
pub fn evaluate_users(rec: &dyn Recommender, split: &Split, phase: Phase, users: &[UserId]) -> Result<MethodMetrics> {
    let max_k = *CUTOFFS.iter().max().expect("nonempty");
    let per_user: Vec<Option<Vec<RankMetrics>>> = users
        .par_iter()
        .map(|&u| {
            let held_out = match phase {
                Phase::Validation => &split.validation,
                Phase::Test => &split.test,
            };
            let relevant: BTreeSet<GameId> = match held_out.get(&u) {
                Some(es) if !es.is_empty() => es.iter().map(|e| e.game_id).collect(),
                _ => return Ok(None),
            };
            let mut exclude: BTreeSet<GameId> = split.train.user_engagements(u).iter().map(|e| e.game_id).collect();
            if phase == Phase::Test {
                if let Some(es) = split.validation.get(&u) {
                    exclude.extend(es.iter().map(|e| e.game_id));
                }
            }
            let scores = rec.scores(u)?;
            let ranked = rank_for_user(rec.games(), &scores, &exclude, max_k);
            Ok(Some(
                CUTOFFS.iter().map(|&k| rank_metrics(&ranked, &relevant, k)).collect(),
            ))
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![RankMetrics::default(); CUTOFFS.len()];
    let mut counted = 0usize;
    for metrics in per_user.into_iter().flatten() {
        counted += 1;
        for (s, m) in sums.iter_mut().zip(metrics) {
            s.ndcg += m.ndcg;
            s.recall += m.recall;
            s.hit += m.hit;
            s.precision += m.precision;
        }
    }
    let denom = counted.max(1) as f64;
    let mut values = BTreeMap::new();
    for (&k, s) in CUTOFFS.iter().zip(&sums) {
        values.insert(format!("ndcg@{k}"), s.ndcg / denom);
        values.insert(format!("recall@{k}"), s.recall / denom);
        values.insert(format!("hit@{k}"), s.hit / denom);
        values.insert(format!("precision@{k}"), s.precision / denom);
    }
    Ok(MethodMetrics {
        method: rec.name().to_string(),
        users: counted,
        values,
    })
}

/// One row per method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub phase: Phase,
    pub rows: Vec<MethodMetrics>,
}

impl MetricsReport {
    pub fn row(&self, method: &str) -> Option<&MethodMetrics> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let keys = metric_keys();
        let mut out = format!("method,users,{}\n", keys.join(","));
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.method, r.users);
            for k in &keys {
                let _ = write!(out, ",{:.6}", r.values.get(k).copied().unwrap_or(f64::NAN));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(json_path, json + "\n").map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))
    }
}

/// Reduced models used to measure each pathway's contribution. The removed
/// pathway's fusion weight moves to the personal embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ablation {
    /// No social pathway.
    A,
    /// No context pathway.
    B,
    /// Neither pathway.
    C,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::A, Ablation::B, Ablation::C];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::A => "scgrec_no_social",
            Ablation::B => "scgrec_no_context",
            Ablation::C => "scgrec_personal_only",
        }
    }
}

pub fn ablation_variant(config: &ModelConfig, variant: Ablation) -> ModelConfig {
    let (use_context, use_social) = match variant {
        Ablation::A => (config.use_context, false),
        Ablation::B => (false, config.use_social),
        Ablation::C => (false, false),
    };
    let wc = if use_context { config.fusion.context() } else { 0.0 };
    let ws = if use_social { config.fusion.social() } else { 0.0 };
    ModelConfig {
        fusion: FusionWeights::new(wc, ws).expect("subset of valid weights"),
        use_context,
        use_social,
    }
}

/// Index of a game in a recommender's candidate list.
pub fn game_position(rec: &dyn Recommender, game: GameId) -> Option<usize> {
    rec.games().binary_search(&game).ok()
}

/// Top-`k` games for a user, excluding their training games.
pub fn recommend(rec: &dyn Recommender, train: &Dataset, user: UserId, k: usize) -> Result<Vec<(GameId, f64)>> {
    let scores = rec.scores(user)?;
    let exclude: BTreeSet<GameId> = train.user_engagements(user).iter().map(|e| e.game_id).collect();
    let ranked = rank_for_user(rec.games(), &scores, &exclude, k);
    Ok(ranked
        .into_iter()
        .map(|g| {
            let i = game_position(rec, g).expect("ranked from candidates");
            (g, scores[i])
        })
        .collect())
}
