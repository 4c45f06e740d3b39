//! Descriptive statistics over a dataset: engagement distributions, genre
//! co-engagement, pairwise game relatedness, and how similar friends are
//! compared with random pairs of players.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GameId, UserId};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Unit-width bins `[0,1), [1,2), ..., [max, max+1)`.
    fn integer(values: impl IntoIterator<Item = usize>) -> Self {
        let values: Vec<usize> = values.into_iter().collect();
        let max = values.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0u64; max + 1];
        for v in values {
            counts[v] += 1;
        }
        Histogram {
            bin_edges: (0..=max + 1).map(|e| e as f64).collect(),
            counts,
        }
    }

    /// Fixed-width bins starting at zero, extended to cover the largest
    /// value. Negative values land in the first bin.
    fn fixed_width(values: &[f64], width: f64) -> Self {
        let index = |v: f64| (v.max(0.0) / width).floor() as usize;
        let bins = values.iter().map(|&v| index(v)).max().map_or(1, |m| m + 1);
        let mut counts = vec![0u64; bins];
        for &v in values {
            counts[index(v)] += 1;
        }
        Histogram {
            bin_edges: (0..=bins).map(|k| k as f64 * width).collect(),
            counts,
        }
    }

    /// Ten equal bins over `[0, 1]`, the last one closed; values below zero
    /// go to the first bin.
    fn unit_interval(values: &[f64]) -> Self {
        let mut counts = vec![0u64; 10];
        for &v in values {
            counts[((v.max(0.0) * 10.0).floor() as usize).min(9)] += 1;
        }
        Histogram {
            bin_edges: (0..=10).map(|k| k as f64 / 10.0).collect(),
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the bin containing `v`, if any.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let last = self.counts.len();
        (0..last).find(|&k| {
            let (lo, hi) = (self.bin_edges[k], self.bin_edges[k + 1]);
            v >= lo && (v < hi || (k + 1 == last && v == hi))
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.bin_edges[k], self.bin_edges[k + 1], c);
        }
        out
    }
}

/// Users per number of engaged games, and engagement records per
/// `ln(minutes)` in half-unit bins (minutes below one fall in the first bin).
pub fn engagement_histograms(d: &Dataset) -> (Histogram, Histogram) {
    let per_user = Histogram::integer(d.by_user().map(|(_, es)| es.len()));
    let logs: Vec<f64> = d
        .engagements()
        .iter()
        .map(|e| {
            if e.dwelling_minutes > 0.0 {
                e.dwelling_minutes.ln()
            } else {
                0.0
            }
        })
        .collect();
    (per_user, Histogram::fixed_width(&logs, 0.5))
}

/// Conditional co-engagement `P(row | column)` over genres; `None` marks a
/// column genre nobody plays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenreMatrix {
    pub genres: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl GenreMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.genres.iter().position(|g| g == a)?;
        let j = self.genres.iter().position(|g| g == b)?;
        self.values[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("genre");
        for g in &self.genres {
            let _ = write!(out, ",{g}");
        }
        out.push('\n');
        for (g, row) in self.genres.iter().zip(&self.values) {
            out.push_str(g);
            for v in row {
                match v {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Users engaged with at least one game of each genre.
fn genre_audiences(d: &Dataset) -> BTreeMap<&str, BTreeSet<UserId>> {
    let mut out: BTreeMap<&str, BTreeSet<UserId>> = BTreeMap::new();
    for g in d.catalog().values() {
        for genre in &g.genres {
            out.entry(genre.as_str()).or_default();
        }
    }
    for e in d.engagements() {
        for genre in &d.catalog()[&e.game_id].genres {
            out.get_mut(genre.as_str()).unwrap().insert(e.user_id);
        }
    }
    out
}

/// Entry `(A, B)` is the share of users playing genre `B` who also play `A`.
pub fn genre_conditional(d: &Dataset, genres: &[String]) -> Result<GenreMatrix> {
    if genres.is_empty() {
        return Err(Error::InvalidArgument("genre list is empty".into()));
    }
    let audiences = genre_audiences(d);
    let sets = genres
        .iter()
        .map(|g| {
            audiences
                .get(g.as_str())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown genre {g:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = sets
        .iter()
        .map(|a| {
            sets.iter()
                .map(|b| (!b.is_empty()).then(|| a.intersection(b).count() as f64 / b.len() as f64))
                .collect()
        })
        .collect();
    Ok(GenreMatrix {
        genres: genres.to_vec(),
        values,
    })
}

/// Genre labels ordered by number of engaged users (descending), ties by name.
pub fn genres_by_popularity(d: &Dataset) -> Vec<String> {
    let mut ranked: Vec<(&str, usize)> = genre_audiences(d).into_iter().map(|(g, s)| (g, s.len())).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().map(|(g, _)| g.to_string()).collect()
}

fn audience(d: &Dataset, game: GameId) -> Result<BTreeMap<UserId, f64>> {
    if !d.catalog().contains_key(&game) {
        return Err(Error::UnknownGame(game));
    }
    Ok(d.engagements()
        .iter()
        .filter(|e| e.game_id == game)
        .map(|e| (e.user_id, e.dwelling_minutes))
        .collect())
}

/// Shared players over the sum of both audiences; zero when both are empty.
pub fn co_purchase_score(d: &Dataset, i: GameId, j: GameId) -> Result<f64> {
    let a = audience(d, i)?;
    let b = audience(d, j)?;
    let shared = a.keys().filter(|u| b.contains_key(u)).count();
    let denom = a.len() + b.len();
    Ok(if denom == 0 { 0.0 } else { shared as f64 / denom as f64 })
}

/// `exp(-|t_i - t_j| / T)` with `t_i`, `t_j` the mean playtimes of the two
/// games among their common players. `None` when they share no player.
pub fn co_dwelling_score(d: &Dataset, i: GameId, j: GameId, time_scale: f64) -> Result<Option<f64>> {
    if !(time_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time scale must be > 0, got {time_scale}"
        )));
    }
    let a = audience(d, i)?;
    let b = audience(d, j)?;
    let (mut n, mut sum_a, mut sum_b) = (0usize, 0.0, 0.0);
    for (u, t_a) in &a {
        if let Some(t_b) = b.get(u) {
            n += 1;
            sum_a += t_a;
            sum_b += t_b;
        }
    }
    if n == 0 {
        return Ok(None);
    }
    let (t_a, t_b) = (sum_a / n as f64, sum_b / n as f64);
    Ok(Some((-(t_a - t_b).abs() / time_scale).exp()))
}

/// Pearson correlation; `None` with fewer than two points or a constant series.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocialCorrelation {
    pub game_id: GameId,
    /// Players of the game with at least one friend who also plays it.
    pub pairs: usize,
    pub friend_r: Option<f64>,
    pub random_r: Option<f64>,
}

/// Correlates each player's minutes on `game` with the mean minutes of their
/// friends on it, and with the mean of an equally sized random sample of
/// non-friend players of the same game.
pub fn social_dwelling_correlation(d: &Dataset, game: GameId, seed: u64) -> Result<SocialCorrelation> {
    let friends = d.friends();
    social_correlation_with(d, &friends, game, seed)
}

fn social_correlation_with(
    d: &Dataset,
    friends: &BTreeMap<UserId, Vec<UserId>>,
    game: GameId,
    seed: u64,
) -> Result<SocialCorrelation> {
    let players = audience(d, game)?;
    let roster: Vec<(UserId, f64)> = players.iter().map(|(&u, &t)| (u, t)).collect();
    let mut rng = rng::stream(seed, game);
    let (mut own, mut friend_mean) = (Vec::new(), Vec::new());
    let (mut own_r, mut random_mean) = (Vec::new(), Vec::new());
    for &(u, t) in &roster {
        let engaged: Vec<f64> = friends
            .get(&u)
            .map(|fs| fs.iter().filter_map(|f| players.get(f).copied()).collect())
            .unwrap_or_default();
        if engaged.is_empty() {
            continue;
        }
        own.push(t);
        friend_mean.push(engaged.iter().sum::<f64>() / engaged.len() as f64);

        let friend_set: HashSet<UserId> = friends[&u].iter().copied().collect();
        let available = roster.len() - 1 - engaged.len();
        let k = engaged.len().min(available);
        if k == 0 {
            continue;
        }
        let sampled: Vec<f64> = if 2 * k <= available {
            let mut taken = BTreeSet::new();
            while taken.len() < k {
                let (v, _) = roster[rng.random_range(0..roster.len())];
                if v != u && !friend_set.contains(&v) {
                    taken.insert(v);
                }
            }
            taken.iter().map(|v| players[v]).collect()
        } else {
            let candidates: Vec<f64> = roster
                .iter()
                .filter(|(v, _)| *v != u && !friend_set.contains(v))
                .map(|&(_, tv)| tv)
                .collect();
            rand::seq::index::sample(&mut rng, candidates.len(), k)
                .into_iter()
                .map(|x| candidates[x])
                .collect()
        };
        own_r.push(t);
        random_mean.push(sampled.iter().sum::<f64>() / sampled.len() as f64);
    }
    Ok(SocialCorrelation {
        game_id: game,
        pairs: own.len(),
        friend_r: pearson(&own, &friend_mean),
        random_r: pearson(&own_r, &random_mean),
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| dot / (na * nb))
}

/// Per-user `ln(1 + minutes)` over the given genres.
fn genre_vectors(d: &Dataset, genres: &[String]) -> HashMap<UserId, Vec<f64>> {
    let slot: HashMap<&str, usize> = genres.iter().enumerate().map(|(k, g)| (g.as_str(), k)).collect();
    let mut out: HashMap<UserId, Vec<f64>> = HashMap::new();
    for (u, es) in d.by_user() {
        let mut v = vec![0.0; genres.len()];
        for e in es {
            for g in &d.catalog()[&e.game_id].genres {
                if let Some(&k) = slot.get(g.as_str()) {
                    v[k] += e.dwelling_minutes;
                }
            }
        }
        out.insert(u, v.into_iter().map(f64::ln_1p).collect());
    }
    out
}

/// Cosine similarity of genre playtime vectors (top `top_k_genres` genres by
/// player count) over friend edges, and over an equally sized random sample
/// of non-friend pairs. Pairs involving an all-zero vector are skipped.
pub fn genre_similarity_histogram(d: &Dataset, top_k_genres: usize, seed: u64) -> Result<(Histogram, Histogram)> {
    if top_k_genres < 1 {
        return Err(Error::InvalidArgument("top_k_genres must be >= 1".into()));
    }
    let mut genres = genres_by_popularity(d);
    genres.truncate(top_k_genres);
    let vectors = genre_vectors(d, &genres);
    let sim = |a: UserId, b: UserId| cosine(&vectors[&a], &vectors[&b]);

    let friend_sims: Vec<f64> = d.social().iter().filter_map(|e| sim(e.user_a, e.user_b)).collect();

    let users = d.users();
    let mut rng = rng::stream(seed, 0);
    let mut random_sims = Vec::new();
    let mut seen = HashSet::new();
    let target = d.social().len();
    let mut attempts = 0usize;
    while seen.len() < target && users.len() >= 2 && attempts < 100 * target + 100 {
        attempts += 1;
        let a = users[rng.random_range(0..users.len())];
        let b = users[rng.random_range(0..users.len())];
        let Some(edge) = crate::data::SocialEdge::new(a, b) else {
            continue;
        };
        if d.social().contains(&edge) || !seen.insert(edge) {
            continue;
        }
        if let Some(s) = sim(a, b) {
            random_sims.push(s);
        }
    }
    Ok((
        Histogram::unit_interval(&friend_sims),
        Histogram::unit_interval(&random_sims),
    ))
}

/// Users per social-graph degree, including degree zero.
pub fn friend_count_distribution(d: &Dataset) -> Histogram {
    Histogram::integer(d.friends().values().map(Vec::len))
}

/// Headline counts of a dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub players: usize,
    pub games: usize,
    pub publishers: usize,
    pub developers: usize,
    pub interactions: usize,
    pub social_connections: usize,
}

/// Games, developers and publishers are counted over games with at least one engagement.
pub fn dataset_stats(d: &Dataset) -> DatasetStats {
    let games: BTreeSet<GameId> = d.engagements().iter().map(|e| e.game_id).collect();
    let records = games.iter().map(|g| &d.catalog()[g]);
    let developers: BTreeSet<&str> = records.clone().map(|g| g.developer.as_str()).collect();
    let publishers: BTreeSet<&str> = records.map(|g| g.publisher.as_str()).collect();
    DatasetStats {
        players: d.users().len(),
        games: games.len(),
        publishers: publishers.len(),
        developers: developers.len(),
        interactions: d.engagements().len(),
        social_connections: d.social().len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Games (most played first) included in the pairwise matrices and correlations.
    pub top_games: usize,
    pub top_genres: usize,
    pub time_scale: Option<f64>,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            top_games: 20,
            top_genres: 5,
            time_scale: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub stats: DatasetStats,
    pub top_genres: Vec<String>,
    pub time_scale: f64,
    pub social_correlation: Vec<SocialCorrelation>,
    pub friend_similarity_mean: Option<f64>,
    pub random_similarity_mean: Option<f64>,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn histogram_mean(h: &Histogram) -> Option<f64> {
    let total = h.total();
    (total > 0).then(|| {
        h.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * 0.5 * (h.bin_edges[k] + h.bin_edges[k + 1]))
            .sum::<f64>()
            / total as f64
    })
}

/// Runs every analysis and writes CSV tables plus `analysis_summary.json` to `dir`.
pub fn write_reports(d: &Dataset, options: &AnalysisOptions, dir: &Path) -> Result<AnalysisSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (games_hist, time_hist) = engagement_histograms(d);
    write(dir, "engagement_games_hist.csv", &games_hist.to_csv())?;
    write(dir, "engagement_logtime_hist.csv", &time_hist.to_csv())?;

    let genres = genres_by_popularity(d);
    write(dir, "genre_conditional.csv", &genre_conditional(d, &genres)?.to_csv())?;

    let mut popular: Vec<(GameId, usize)> = d.game_audiences().into_iter().map(|(g, a)| (g, a.len())).collect();
    popular.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let top: Vec<GameId> = popular.iter().take(options.top_games).map(|&(g, _)| g).collect();

    let time_scale = match options.time_scale {
        Some(t) => t,
        None => crate::graph::default_time_scale(&crate::graph::co_engagement_stats(d)),
    };
    let header: String = top.iter().map(|g| format!(",{g}")).collect();
    let mut copurchase = format!("game{header}\n");
    let mut codwelling = format!("game{header}\n");
    for &i in &top {
        copurchase.push_str(&i.to_string());
        codwelling.push_str(&i.to_string());
        for &j in &top {
            let _ = write!(copurchase, ",{}", co_purchase_score(d, i, j)?);
            match co_dwelling_score(d, i, j, time_scale)? {
                Some(s) => {
                    let _ = write!(codwelling, ",{s}");
                }
                None => codwelling.push(','),
            }
        }
        copurchase.push('\n');
        codwelling.push('\n');
    }
    write(dir, "copurchase_matrix.csv", &copurchase)?;
    write(dir, "codwelling_matrix.csv", &codwelling)?;

    let friends = d.friends();
    let correlations = top
        .par_iter()
        .map(|&g| social_correlation_with(d, &friends, g, options.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("game_id,pairs,friend_r,random_r\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &correlations {
        let _ = writeln!(csv, "{},{},{},{}", c.game_id, c.pairs, opt(c.friend_r), opt(c.random_r));
    }
    write(dir, "social_correlation.csv", &csv)?;

    let (friend_hist, random_hist) = genre_similarity_histogram(d, options.top_genres, options.seed)?;
    let mut csv = String::from("bin_start,bin_end,friend_count,random_count\n");
    for k in 0..friend_hist.counts.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            friend_hist.bin_edges[k],
            friend_hist.bin_edges[k + 1],
            friend_hist.counts[k],
            random_hist.counts[k]
        );
    }
    write(dir, "genre_similarity.csv", &csv)?;
    write(dir, "friend_count.csv", &friend_count_distribution(d).to_csv())?;

    let summary = AnalysisSummary {
        stats: dataset_stats(d),
        top_genres: genres.into_iter().take(options.top_genres).collect(),
        time_scale,
        social_correlation: correlations,
        friend_similarity_mean: histogram_mean(&friend_hist),
        random_similarity_mean: histogram_mean(&random_hist),
    };
    write(dir, "analysis_summary.json", &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
