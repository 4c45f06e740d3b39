use std::collections::BTreeSet;

use crate::data::GameId;

/// Ranking cutoffs reported for every method.
pub const CUTOFFS: [usize; 3] = [5, 10, 20];

/// Top-`k` ranking metrics of one user.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RankMetrics {
    pub ndcg: f64,
    pub recall: f64,
    pub hit: f64,
    pub precision: f64,
}

fn discount(position: usize) -> f64 {
    1.0 / ((position + 2) as f64).log2()
}

/// Binary-relevance metrics of the first `k` entries of `ranked`. The ideal
/// DCG places `min(k, |relevant|)` relevant games at the top. An empty
/// relevant set scores zero everywhere.
pub fn rank_metrics(ranked: &[GameId], relevant: &BTreeSet<GameId>, k: usize) -> RankMetrics {
    if relevant.is_empty() || k == 0 {
        return RankMetrics::default();
    }
    let mut dcg = 0.0;
    let mut hits = 0usize;
    for (pos, g) in ranked.iter().take(k).enumerate() {
        if relevant.contains(g) {
            dcg += discount(pos);
            hits += 1;
        }
    }
    let idcg: f64 = (0..k.min(relevant.len())).map(discount).sum();
    RankMetrics {
        ndcg: dcg / idcg,
        recall: hits as f64 / relevant.len() as f64,
        hit: if hits > 0 { 1.0 } else { 0.0 },
        precision: hits as f64 / k as f64,
    }
}

/// The `k` best-scoring games not in `exclude`, best first. Ties go to the
/// smaller game id. `games` and `scores` are aligned.
pub fn rank_for_user(games: &[GameId], scores: &[f64], exclude: &BTreeSet<GameId>, k: usize) -> Vec<GameId> {
    let mut candidates: Vec<(GameId, f64)> = games
        .iter()
        .zip(scores)
        .filter(|(g, _)| !exclude.contains(g))
        .map(|(&g, &s)| (g, s))
        .collect();
    let order = |a: &(GameId, f64), b: &(GameId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k, order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(order);
    candidates.into_iter().map(|(g, _)| g).collect()
}
