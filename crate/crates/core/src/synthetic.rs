//! Seeded generator of engagement/social/catalog tables with known latent
//! structure.
//!
//! Every user has a genre preference mixture drawn from a symmetric
//! Dirichlet(0.3). A game's affinity for a user is the mean preference over
//! the game's genres. Games are picked with probability proportional to
//! `popularity * (affinity + AFFINITY_FLOOR)`, and log playtime is
//! `BASE_LOG_MINUTES + length + dwell_scale * affinity + N(0, 1)`, where
//! `length` is a per-game offset unrelated to preference. Friendships follow
//! preference similarity with probability `homophily`.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample_weighted;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{save_dataset, Dataset, DatasetPaths, Engagement, GameId, GameRecord, SocialEdge, UserId};
use crate::error::{Error, Result};
use crate::rng;

pub const DIRICHLET_CONCENTRATION: f64 = 0.3;
/// Keeps every game reachable for every user.
pub const AFFINITY_FLOOR: f64 = 0.01;
pub const BASE_LOG_MINUTES: f64 = 5.0;
/// Standard deviation of the per-game log-popularity and log-length offsets.
pub const POPULARITY_SIGMA: f64 = 1.0;
pub const LENGTH_SIGMA: f64 = 1.0;
/// Candidate pool size for homophilous friendships.
pub const NEAREST_USERS: usize = 10;
/// Fewest engagements a generated user can have.
pub const MIN_ENGAGEMENTS: usize = 3;
/// First game id; user ids start at 1.
pub const GAME_ID_BASE: GameId = 10_000;

const GAME_STREAM: u64 = 0;
const PREFERENCE_STREAM: u64 = 1 << 32;
const ENGAGEMENT_STREAM: u64 = 2 << 32;
const SOCIAL_STREAM: u64 = 3 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_games: usize,
    pub n_genres: usize,
    pub n_developers: usize,
    pub n_publishers: usize,
    /// Mean engagements per user.
    pub engagements_per_user: usize,
    pub homophily: f64,
    pub dwell_scale: f64,
    /// Friendships initiated per user.
    pub friends_per_user: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 5000,
            n_games: 300,
            n_genres: 8,
            n_developers: 40,
            n_publishers: 20,
            engagements_per_user: 12,
            homophily: 0.7,
            dwell_scale: 3.0,
            friends_per_user: 2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_users", self.n_users),
            ("n_games", self.n_games),
            ("n_genres", self.n_genres),
            ("n_developers", self.n_developers),
            ("n_publishers", self.n_publishers),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        if self.engagements_per_user < MIN_ENGAGEMENTS {
            return Err(Error::InvalidArgument(format!(
                "engagements_per_user must be >= {MIN_ENGAGEMENTS}"
            )));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::InvalidArgument("homophily must lie in [0, 1]".into()));
        }
        if !self.dwell_scale.is_finite() {
            return Err(Error::InvalidArgument("dwell_scale must be finite".into()));
        }
        Ok(())
    }
}

/// Ground truth retained from generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Latents {
    pub user_ids: Vec<UserId>,
    pub game_ids: Vec<GameId>,
    /// Per user, a distribution over genre indices.
    pub preferences: Vec<Vec<f64>>,
    /// Per game, genre indices.
    pub game_genres: Vec<Vec<usize>>,
    pub popularity: Vec<f64>,
    pub log_length: Vec<f64>,
}

impl Latents {
    /// Mean preference of user row `u` over the genres of game row `i`.
    pub fn affinity(&self, u: usize, i: usize) -> f64 {
        let genres = &self.game_genres[i];
        genres.iter().map(|&g| self.preferences[u][g]).sum::<f64>() / genres.len() as f64
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub struct Synthetic {
    pub dataset: Dataset,
    pub latents: Latents,
}

pub fn genre_name(g: usize) -> String {
    format!("genre_{g:02}")
}

fn dirichlet<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(DIRICHLET_CONCENTRATION, 1.0).expect("valid shape");
    let mut v: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.fill(1.0 / k as f64);
    }
    v
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Generates a dataset and its latents. Deterministic for a given config.
pub fn generate(config: &SynthConfig) -> Result<Synthetic> {
    config.validate()?;
    let seed = config.seed;
    let normal = Normal::new(0.0, 1.0).expect("valid");

    let mut rng = rng::stream(seed, GAME_STREAM);
    let game_ids: Vec<GameId> = (0..config.n_games as u64).map(|i| GAME_ID_BASE + i).collect();
    let mut game_genres = Vec::with_capacity(config.n_games);
    let mut catalog = Vec::with_capacity(config.n_games);
    let mut popularity = Vec::with_capacity(config.n_games);
    let mut log_length = Vec::with_capacity(config.n_games);
    for &game_id in &game_ids {
        let primary = rng.random_range(0..config.n_genres);
        let mut genres = vec![primary];
        if config.n_genres > 1 && rng.random_bool(0.5) {
            let second = (primary + rng.random_range(1..config.n_genres)) % config.n_genres;
            genres.push(second);
        }
        // Developers specialize: each one works in a single primary genre.
        let specialists: Vec<usize> = (0..config.n_developers)
            .filter(|d| d % config.n_genres == primary % config.n_genres)
            .collect();
        let developer = if specialists.is_empty() {
            primary % config.n_developers
        } else {
            specialists[rng.random_range(0..specialists.len())]
        };
        let publisher = rng.random_range(0..config.n_publishers);
        popularity.push((POPULARITY_SIGMA * normal.sample(&mut rng)).exp());
        log_length.push(LENGTH_SIGMA * normal.sample(&mut rng));
        catalog.push(GameRecord {
            game_id,
            genres: genres.iter().map(|&g| genre_name(g)).collect::<BTreeSet<_>>(),
            developer: format!("dev_{developer:03}"),
            publisher: format!("pub_{publisher:03}"),
        });
        game_genres.push(genres);
    }

    let user_ids: Vec<UserId> = (1..=config.n_users as u64).collect();
    let preferences: Vec<Vec<f64>> = (0..config.n_users)
        .into_par_iter()
        .map(|u| dirichlet(config.n_genres, &mut rng::stream(seed, PREFERENCE_STREAM + u as u64)))
        .collect();
    let latents = Latents {
        user_ids: user_ids.clone(),
        game_ids: game_ids.clone(),
        preferences,
        game_genres,
        popularity,
        log_length,
    };

    let p = 1.0 / (config.engagements_per_user - MIN_ENGAGEMENTS + 1) as f64;
    let extra = Geometric::new(p).expect("p in (0, 1]");
    let engagements: Vec<Engagement> = (0..config.n_users)
        .into_par_iter()
        .map(|u| {
            let mut rng = rng::stream(seed, ENGAGEMENT_STREAM + u as u64);
            let count = (MIN_ENGAGEMENTS + extra.sample(&mut rng) as usize).min(config.n_games);
            let weight = |i: usize| latents.popularity[i] * (latents.affinity(u, i) + AFFINITY_FLOOR);
            let picked = sample_weighted(&mut rng, config.n_games, weight, count).expect("positive weights");
            let mut rows: Vec<Engagement> = picked
                .into_iter()
                .map(|i| {
                    let location =
                        BASE_LOG_MINUTES + latents.log_length[i] + config.dwell_scale * latents.affinity(u, i);
                    let minutes = (location + normal.sample(&mut rng)).exp().round().max(1.0);
                    Engagement {
                        user_id: user_ids[u],
                        game_id: game_ids[i],
                        dwelling_minutes: minutes,
                    }
                })
                .collect();
            rows.sort_by_key(|e| e.game_id);
            rows
        })
        .flatten()
        .collect();

    let social: Vec<(UserId, UserId)> = (0..config.n_users)
        .into_par_iter()
        .map(|u| {
            let mut rng = rng::stream(seed, SOCIAL_STREAM + u as u64);
            let mut nearest: Option<Vec<usize>> = None;
            let mut out = Vec::with_capacity(config.friends_per_user);
            if config.n_users < 2 {
                return out;
            }
            for _ in 0..config.friends_per_user {
                let v = if rng.random_bool(config.homophily) {
                    let pool = nearest.get_or_insert_with(|| nearest_users(&latents.preferences, u, NEAREST_USERS));
                    pool[rng.random_range(0..pool.len())]
                } else {
                    let v = rng.random_range(0..config.n_users - 1);
                    if v >= u {
                        v + 1
                    } else {
                        v
                    }
                };
                out.push((user_ids[u], user_ids[v]));
            }
            out
        })
        .flatten()
        .collect();
    // Repeated picks of the same friend are one connection.
    let social: BTreeSet<SocialEdge> = social.into_iter().filter_map(|(a, b)| SocialEdge::new(a, b)).collect();
    let social = social.into_iter().map(|e| (e.user_a, e.user_b));

    let (dataset, _) = Dataset::new(engagements, social, catalog);
    Ok(Synthetic { dataset, latents })
}

/// The `k` users with the most similar preferences to `u`, ties to the lower index.
fn nearest_users(preferences: &[Vec<f64>], u: usize, k: usize) -> Vec<usize> {
    let mut sims: Vec<(f64, usize)> = preferences
        .iter()
        .enumerate()
        .filter(|&(v, _)| v != u)
        .map(|(v, p)| (cosine(&preferences[u], p), v))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    let k = k.min(sims.len());
    if k < sims.len() {
        sims.select_nth_unstable_by(k, order);
        sims.truncate(k);
    }
    sims.sort_unstable_by(order);
    sims.into_iter().map(|(_, v)| v).collect()
}

/// Games ordered by the user's true affinity, best first; ties to the smaller id.
pub fn planted_relevance(latents: &Latents, user: UserId) -> Result<Vec<GameId>> {
    let u = latents
        .user_ids
        .binary_search(&user)
        .map_err(|_| Error::UnknownUser(user))?;
    let mut ranked: Vec<(f64, GameId)> = (0..latents.game_ids.len())
        .map(|i| (latents.affinity(u, i), latents.game_ids[i]))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().map(|(_, g)| g).collect())
}

/// Writes the three tables into `dir` and the latents to `dir/latents.json`.
pub fn write_synthetic(data: &Synthetic, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_dataset(&data.dataset, &DatasetPaths::in_dir(dir))?;
    data.latents.write(&dir.join("latents.json"))
}
