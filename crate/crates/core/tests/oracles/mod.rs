//! Brute-force reference implementations shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scgrec::data::{Dataset, Engagement, GameId, GameRecord, UserId};

/// One random ranking instance.
pub struct MetricCase {
    pub games: Vec<GameId>,
    pub scores: Vec<f64>,
    pub exclude: BTreeSet<GameId>,
    pub relevant: BTreeSet<GameId>,
    pub k: usize,
}

/// At most 50 games and 10 relevant ones; coarse scores force ties.
pub fn metric_case(seed: u64) -> MetricCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=50usize);
    let mut ids: Vec<GameId> = (0..200).collect();
    ids.shuffle(&mut rng);
    let mut games: Vec<GameId> = ids[..n].to_vec();
    games.sort_unstable();
    let coarse = rng.random_bool(0.5);
    let scores = (0..n)
        .map(|_| {
            if coarse {
                rng.random_range(0..6) as f64 * 0.25
            } else {
                rng.random_range(-3.0..3.0)
            }
        })
        .collect();
    let exclude = games
        .iter()
        .copied()
        .filter(|_| rng.random_bool(0.2))
        .collect::<BTreeSet<_>>();
    let mut pool: Vec<GameId> = games.iter().copied().filter(|g| !exclude.contains(g)).collect();
    pool.shuffle(&mut rng);
    let r = rng.random_range(0..=10usize).min(pool.len());
    let relevant = pool[..r].iter().copied().collect();
    let k = [1, 3, 5, 10, 20, 60][rng.random_range(0..6)];
    MetricCase {
        games,
        scores,
        exclude,
        relevant,
        k,
    }
}

/// `(ndcg, recall, hit, precision)` at `k` by repeatedly extracting the best
/// remaining candidate.
pub fn brute_metrics(c: &MetricCase) -> (f64, f64, f64, f64) {
    let mut left: Vec<(GameId, f64)> = c
        .games
        .iter()
        .zip(&c.scores)
        .filter(|(g, _)| !c.exclude.contains(g))
        .map(|(&g, &s)| (g, s))
        .collect();
    let mut ranked = Vec::new();
    while ranked.len() < c.k && !left.is_empty() {
        let mut best = 0;
        for i in 1..left.len() {
            let (g, s) = left[i];
            let (bg, bs) = left[best];
            if s > bs || (s == bs && g < bg) {
                best = i;
            }
        }
        ranked.push(left.remove(best).0);
    }
    if c.relevant.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let gain = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let mut dcg = 0.0;
    let mut hits = 0.0;
    for (pos, g) in ranked.iter().enumerate() {
        if c.relevant.contains(g) {
            dcg += gain(pos);
            hits += 1.0;
        }
    }
    let mut idcg = 0.0;
    for pos in 0..c.relevant.len().min(c.k) {
        idcg += gain(pos);
    }
    let hit = if hits > 0.0 { 1.0 } else { 0.0 };
    (dcg / idcg, hits / c.relevant.len() as f64, hit, hits / c.k as f64)
}

/// 200 games with overlapping genres, developers and publishers, and 400
/// users engaging with 1 to 15 of them.
pub fn graph_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog: Vec<GameRecord> = (0..200u64)
        .map(|i| {
            let n_genres = rng.random_range(1..=3);
            GameRecord {
                game_id: 1000 + i,
                genres: (0..n_genres).map(|_| format!("g{}", rng.random_range(0..12))).collect(),
                developer: format!("d{}", rng.random_range(0..60)),
                publisher: format!("p{}", rng.random_range(0..25)),
            }
        })
        .collect();
    let mut rows = Vec::new();
    for u in 0..400u64 {
        let m = rng.random_range(1..=15);
        for _ in 0..m {
            // Skewed towards low ids so popular games share many players.
            let g = (rng.random_range(0.0f64..1.0).powi(2) * 200.0) as u64;
            rows.push(Engagement {
                user_id: u,
                game_id: 1000 + g,
                dwelling_minutes: rng.random_range(1..600) as f64,
            });
        }
    }
    Dataset::new(rows, [], catalog).0
}

/// Edges `(a, b, score)` with `a < b` for the two behaviour relations,
/// enumerated over every game pair.
pub struct BruteGraph {
    pub co_purchase: BTreeMap<(GameId, GameId), f64>,
    pub co_dwelling: BTreeMap<(GameId, GameId), f64>,
    pub time_scale: f64,
}

pub fn brute_behaviour_edges(d: &Dataset, tau_p: f64, tau_t: f64, time_scale: Option<f64>) -> BruteGraph {
    let games: Vec<GameId> = d.catalog().keys().copied().collect();
    let mut audience: BTreeMap<GameId, BTreeMap<UserId, f64>> = games.iter().map(|&g| (g, BTreeMap::new())).collect();
    for e in d.engagements() {
        audience
            .get_mut(&e.game_id)
            .unwrap()
            .insert(e.user_id, e.dwelling_minutes);
    }
    // (a, b, shared, mean_a, mean_b) for pairs with a common player.
    let mut pairs = Vec::new();
    for (x, a) in games.iter().enumerate() {
        for b in &games[x + 1..] {
            let (ua, ub) = (&audience[a], &audience[b]);
            let (mut shared, mut sa, mut sb) = (0usize, 0.0, 0.0);
            for (u, ta) in ua {
                if let Some(tb) = ub.get(u) {
                    shared += 1;
                    sa += ta;
                    sb += tb;
                }
            }
            if shared > 0 {
                pairs.push((*a, *b, shared, sa / shared as f64, sb / shared as f64));
            }
        }
    }
    let t = time_scale.unwrap_or_else(|| {
        let gap: f64 = pairs.iter().map(|p| (p.3 - p.4).abs()).sum::<f64>() / pairs.len() as f64;
        if pairs.is_empty() || gap == 0.0 {
            1.0
        } else {
            gap
        }
    });
    let mut out = BruteGraph {
        co_purchase: BTreeMap::new(),
        co_dwelling: BTreeMap::new(),
        time_scale: t,
    };
    for &(a, b, shared, ma, mb) in &pairs {
        let p = shared as f64 / (audience[&a].len() + audience[&b].len()) as f64;
        if p > tau_p {
            out.co_purchase.insert((a, b), p);
        }
        let s = (-(ma - mb).abs() / t).exp();
        if s > tau_t {
            out.co_dwelling.insert((a, b), s);
        }
    }
    out
}

/// Feature edges by comparing every pair's attributes.
pub fn brute_feature_edges(d: &Dataset) -> [BTreeSet<(GameId, GameId)>; 3] {
    let games: Vec<&GameRecord> = d.catalog().values().collect();
    let mut out: [BTreeSet<(GameId, GameId)>; 3] = Default::default();
    for (x, a) in games.iter().enumerate() {
        for b in &games[x + 1..] {
            let pair = (a.game_id, b.game_id);
            if a.genres.iter().any(|g| b.genres.contains(g)) {
                out[0].insert(pair);
            }
            if a.developer == b.developer {
                out[1].insert(pair);
            }
            if a.publisher == b.publisher {
                out[2].insert(pair);
            }
        }
    }
    out
}
