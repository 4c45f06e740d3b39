//! The multi-relation game context graph: three relations from catalog
//! attributes (genre, developer, publisher) and two from player behaviour
//! (shared audiences and similar playtime among shared players).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GameId, GameRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    CoGenre,
    CoDeveloper,
    CoPublisher,
    CoPurchase,
    CoDwelling,
}

impl RelationKind {
    /// Canonical relation order used for parameters and files.
    pub const ALL: [RelationKind; 5] = [
        RelationKind::CoGenre,
        RelationKind::CoDeveloper,
        RelationKind::CoPublisher,
        RelationKind::CoPurchase,
        RelationKind::CoDwelling,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::CoGenre => "co_genre",
            RelationKind::CoDeveloper => "co_developer",
            RelationKind::CoPublisher => "co_publisher",
            RelationKind::CoPurchase => "co_purchase",
            RelationKind::CoDwelling => "co_dwelling",
        }
    }

    pub fn is_feature_based(self) -> bool {
        matches!(
            self,
            RelationKind::CoGenre | RelationKind::CoDeveloper | RelationKind::CoPublisher
        )
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Undirected scored edges of one relation, keyed by `(min, max)` game id.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationEdges {
    pub kind: RelationKind,
    pub edges: BTreeMap<(GameId, GameId), f64>,
}

impl RelationEdges {
    pub fn new(kind: RelationKind) -> Self {
        RelationEdges {
            kind,
            edges: BTreeMap::new(),
        }
    }

    /// Adds an undirected edge; self-loops are ignored. Returns whether the
    /// edge was new.
    pub fn insert(&mut self, a: GameId, b: GameId, score: f64) -> bool {
        if a == b {
            return false;
        }
        self.edges.insert((a.min(b), a.max(b)), score).is_none()
    }

    pub fn contains(&self, a: GameId, b: GameId) -> bool {
        self.edges.contains_key(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Connects every pair of games sharing a genre label, a developer or a
/// publisher, depending on `kind`. Feature edges carry score 1.
pub fn build_feature_relation(catalog: &BTreeMap<GameId, GameRecord>, kind: RelationKind) -> Result<RelationEdges> {
    let mut groups: BTreeMap<&str, Vec<GameId>> = BTreeMap::new();
    for g in catalog.values() {
        match kind {
            RelationKind::CoGenre => {
                for genre in &g.genres {
                    groups.entry(genre).or_default().push(g.game_id);
                }
            }
            RelationKind::CoDeveloper => groups.entry(&g.developer).or_default().push(g.game_id),
            RelationKind::CoPublisher => groups.entry(&g.publisher).or_default().push(g.game_id),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{kind} is not a feature-based relation"
                )))
            }
        }
    }
    let mut out = RelationEdges::new(kind);
    for members in groups.values() {
        for (x, &a) in members.iter().enumerate() {
            for &b in &members[x + 1..] {
                out.insert(a, b, 1.0);
            }
        }
    }
    Ok(out)
}

/// Shared-audience statistics for one unordered game pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStats {
    pub a: GameId,
    pub b: GameId,
    pub shared_users: usize,
    /// Mean minutes on `a` over the shared users.
    pub mean_a: f64,
    /// Mean minutes on `b` over the shared users.
    pub mean_b: f64,
}

/// Enumerates every game pair with at least one common player. Work is
/// proportional to the sum of squared per-user engagement counts; pairs
/// without shared users are never visited. Per-pair sums accumulate in
/// ascending user order.
pub fn co_engagement_stats(train: &Dataset) -> Vec<PairStats> {
    let games = train.games();
    let game_index: HashMap<GameId, usize> = games.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let per_user: HashMap<u64, Vec<(usize, f64)>> = train
        .by_user()
        .map(|(u, es)| {
            let list = es
                .iter()
                .map(|e| (game_index[&e.game_id], e.dwelling_minutes))
                .collect();
            (u, list)
        })
        .collect();
    let mut audiences: Vec<Vec<(u64, f64)>> = vec![Vec::new(); games.len()];
    for e in train.engagements() {
        audiences[game_index[&e.game_id]].push((e.user_id, e.dwelling_minutes));
    }

    let n = games.len();
    (0..n)
        .into_par_iter()
        .map(|a| {
            let mut count = vec![0usize; n];
            let mut sum_a = vec![0.0f64; n];
            let mut sum_b = vec![0.0f64; n];
            for (user, t_a) in &audiences[a] {
                for &(b, t_b) in &per_user[user] {
                    if b > a {
                        count[b] += 1;
                        sum_a[b] += t_a;
                        sum_b[b] += t_b;
                    }
                }
            }
            (a + 1..n)
                .filter(|&b| count[b] > 0)
                .map(|b| PairStats {
                    a: games[a],
                    b: games[b],
                    shared_users: count[b],
                    mean_a: sum_a[b] / count[b] as f64,
                    mean_b: sum_b[b] / count[b] as f64,
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn audience_sizes(train: &Dataset) -> HashMap<GameId, usize> {
    let mut sizes = HashMap::new();
    for e in train.engagements() {
        *sizes.entry(e.game_id).or_insert(0) += 1;
    }
    sizes
}

fn co_purchase_from_stats(train: &Dataset, stats: &[PairStats], tau_p: f64) -> RelationEdges {
    let sizes = audience_sizes(train);
    let mut out = RelationEdges::new(RelationKind::CoPurchase);
    for s in stats {
        let score = s.shared_users as f64 / (sizes[&s.a] + sizes[&s.b]) as f64;
        if score > tau_p {
            out.insert(s.a, s.b, score);
        }
    }
    out
}

/// Mean absolute gap between the two average playtimes over all pairs with a
/// common player. Falls back to 1 when there are no pairs or the gap is zero.
pub fn default_time_scale(stats: &[PairStats]) -> f64 {
    if stats.is_empty() {
        return 1.0;
    }
    let gap = stats.iter().map(|s| (s.mean_a - s.mean_b).abs()).sum::<f64>() / stats.len() as f64;
    if gap > 0.0 && gap.is_finite() {
        gap
    } else {
        1.0
    }
}

fn co_dwelling_from_stats(stats: &[PairStats], tau_t: f64, time_scale: f64) -> RelationEdges {
    let mut out = RelationEdges::new(RelationKind::CoDwelling);
    for s in stats {
        let score = (-(s.mean_a - s.mean_b).abs() / time_scale).exp();
        if score > tau_t {
            out.insert(s.a, s.b, score);
        }
    }
    out
}

/// Edges whose co-purchase score (shared players over the sum of both
/// audiences) strictly exceeds `tau_p`.
pub fn build_co_purchase(train: &Dataset, tau_p: f64) -> Result<RelationEdges> {
    if !(tau_p >= 0.0) {
        return Err(Error::InvalidArgument(format!("tau_p must be >= 0, got {tau_p}")));
    }
    Ok(co_purchase_from_stats(train, &co_engagement_stats(train), tau_p))
}

/// Edges between games with at least one common player whose co-dwelling
/// score `exp(-|t_a - t_b| / T)` strictly exceeds `tau_t`. `T` defaults to
/// [`default_time_scale`]; the value used is returned alongside the edges.
pub fn build_co_dwelling(train: &Dataset, tau_t: f64, time_scale: Option<f64>) -> Result<(RelationEdges, f64)> {
    if !(0.0..1.0).contains(&tau_t) {
        return Err(Error::InvalidArgument(format!("tau_t must lie in [0, 1), got {tau_t}")));
    }
    let stats = co_engagement_stats(train);
    let t = resolve_time_scale(&stats, time_scale)?;
    Ok((co_dwelling_from_stats(&stats, tau_t, t), t))
}

fn resolve_time_scale(stats: &[PairStats], time_scale: Option<f64>) -> Result<f64> {
    match time_scale {
        Some(t) if t > 0.0 && t.is_finite() => Ok(t),
        Some(t) => Err(Error::InvalidArgument(format!("time scale T must be > 0, got {t}"))),
        None => Ok(default_time_scale(stats)),
    }
}

/// Compressed adjacency of one relation over dense game indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    scores: Vec<f64>,
}

impl Adjacency {
    fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(a, b, _) in edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        let mut scores = vec![0.0; offsets[n]];
        for &(a, b, s) in edges {
            for (x, y) in [(a, b), (b, a)] {
                neighbors[fill[x]] = y;
                scores[fill[x]] = s;
                fill[x] += 1;
            }
        }
        // Sort each row by neighbor index.
        for i in 0..n {
            let range = offsets[i]..offsets[i + 1];
            let mut row: Vec<(usize, f64)> = neighbors[range.clone()]
                .iter()
                .copied()
                .zip(scores[range.clone()].iter().copied())
                .collect();
            row.sort_by_key(|&(j, _)| j);
            for (k, (j, s)) in row.into_iter().enumerate() {
                neighbors[range.start + k] = j;
                scores[range.start + k] = s;
            }
        }
        Adjacency {
            offsets,
            neighbors,
            scores,
        }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn scores(&self, i: usize) -> &[f64] {
        &self.scores[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }
}

/// Five symmetric, self-loop-free adjacency structures over the catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextGraph {
    games: Vec<GameId>,
    index: HashMap<GameId, usize>,
    relations: Vec<Adjacency>,
}

impl ContextGraph {
    /// Assembles one edge set per relation kind over `games`. Each kind must
    /// appear exactly once; edges naming games outside `games` are rejected.
    pub fn assemble(games: &[GameId], relations: Vec<RelationEdges>) -> Result<Self> {
        let mut games = games.to_vec();
        games.sort_unstable();
        games.dedup();
        let index: HashMap<GameId, usize> = games.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut slots: Vec<Option<Adjacency>> = vec![None; RelationKind::ALL.len()];
        for rel in relations {
            let slot = &mut slots[rel.kind.index()];
            if slot.is_some() {
                return Err(Error::Graph(format!("relation {} given twice", rel.kind)));
            }
            let mut edges = Vec::with_capacity(rel.edges.len());
            for (&(a, b), &score) in &rel.edges {
                let ia = *index.get(&a).ok_or(Error::UnknownGame(a))?;
                let ib = *index.get(&b).ok_or(Error::UnknownGame(b))?;
                if ia != ib {
                    edges.push((ia, ib, score));
                }
            }
            *slot = Some(Adjacency::from_edges(games.len(), &edges));
        }
        let relations = slots
            .into_iter()
            .zip(RelationKind::ALL)
            .map(|(slot, kind)| slot.ok_or_else(|| Error::Graph(format!("relation {kind} missing"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(ContextGraph {
            games,
            index,
            relations,
        })
    }

    /// Sorted game ids; position is the dense game index.
    pub fn games(&self) -> &[GameId] {
        &self.games
    }

    pub fn game_index(&self, game: GameId) -> Option<usize> {
        self.index.get(&game).copied()
    }

    pub fn relation(&self, kind: RelationKind) -> &Adjacency {
        &self.relations[kind.index()]
    }

    pub fn neighbors(&self, kind: RelationKind, i: usize) -> &[usize] {
        self.relations[kind.index()].neighbors(i)
    }

    pub fn degree(&self, kind: RelationKind, i: usize) -> usize {
        self.relations[kind.index()].degree(i)
    }

    /// Edges of one relation as `(a, b, score)` with `a < b`.
    pub fn edges(&self, kind: RelationKind) -> Vec<(GameId, GameId, f64)> {
        let adj = self.relation(kind);
        let mut out = Vec::with_capacity(adj.edge_count());
        for i in 0..self.games.len() {
            for (&j, &s) in adj.neighbors(i).iter().zip(adj.scores(i)) {
                if i < j {
                    out.push((self.games[i], self.games[j], s));
                }
            }
        }
        out
    }
}

/// Thresholds for the behaviour-based relations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub tau_p: f64,
    pub tau_t: f64,
    /// `None` selects the mean absolute playtime gap over candidate pairs.
    pub time_scale: Option<f64>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            tau_p: 0.01,
            tau_t: 0.5,
            time_scale: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphManifest {
    pub tau_p: f64,
    pub tau_t: f64,
    pub time_scale: f64,
    pub games: usize,
    pub edge_counts: BTreeMap<String, usize>,
}

/// Builds all five relations from the catalog and the training engagements.
pub fn build_context_graph(train: &Dataset, config: &GraphConfig) -> Result<(ContextGraph, GraphManifest)> {
    if !(config.tau_p >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau_p must be >= 0, got {}",
            config.tau_p
        )));
    }
    if !(0.0..1.0).contains(&config.tau_t) {
        return Err(Error::InvalidArgument(format!(
            "tau_t must lie in [0, 1), got {}",
            config.tau_t
        )));
    }
    let mut relations = Vec::with_capacity(5);
    for kind in [
        RelationKind::CoGenre,
        RelationKind::CoDeveloper,
        RelationKind::CoPublisher,
    ] {
        relations.push(build_feature_relation(train.catalog(), kind)?);
    }
    let stats = co_engagement_stats(train);
    let time_scale = resolve_time_scale(&stats, config.time_scale)?;
    relations.push(co_purchase_from_stats(train, &stats, config.tau_p));
    relations.push(co_dwelling_from_stats(&stats, config.tau_t, time_scale));

    let edge_counts = relations.iter().map(|r| (r.kind.name().to_string(), r.len())).collect();
    let graph = ContextGraph::assemble(&train.games(), relations)?;
    let manifest = GraphManifest {
        tau_p: config.tau_p,
        tau_t: config.tau_t,
        time_scale,
        games: graph.games().len(),
        edge_counts,
    };
    Ok((graph, manifest))
}

/// Writes one `game_i\tgame_j\tscore` file per relation and `graph_manifest.json`.
pub fn save_graph(dir: &Path, graph: &ContextGraph, manifest: &GraphManifest) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for kind in RelationKind::ALL {
        let path = dir.join(format!("{}.tsv", kind.name()));
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        for (a, b, s) in graph.edges(kind) {
            writeln!(w, "{a}\t{b}\t{s}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("graph_manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(manifest)?).map_err(|e| Error::io(&path, e))
}

/// Reads the files written by [`save_graph`] back into a graph over `games`.
pub fn load_graph(dir: &Path, games: &[GameId]) -> Result<(ContextGraph, GraphManifest)> {
    let path = dir.join("graph_manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: GraphManifest = serde_json::from_str(&text)?;
    let mut relations = Vec::new();
    for kind in RelationKind::ALL {
        let path = dir.join(format!("{}.tsv", kind.name()));
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut rel = RelationEdges::new(kind);
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Parse {
                path: path.clone(),
                line: n + 1,
                message: "expected game_i<TAB>game_j<TAB>score".into(),
            };
            let mut it = line.split('\t');
            let (Some(a), Some(b), Some(s), None) = (it.next(), it.next(), it.next(), it.next()) else {
                return Err(bad());
            };
            let a: GameId = a.parse().map_err(|_| bad())?;
            let b: GameId = b.parse().map_err(|_| bad())?;
            let s: f64 = s.parse().map_err(|_| bad())?;
            rel.insert(a, b, s);
        }
        relations.push(rel);
    }
    Ok((ContextGraph::assemble(games, relations)?, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::{eng, game};
    use proptest::prelude::*;

    fn toy_catalog() -> Vec<GameRecord> {
        vec![
            game(1, &["Action"], "Valve", "Valve"),
            game(2, &["Action", "RPG"], "Valve", "Valve"),
            game(3, &["RPG"], "Bethesda", "Valve"),
            game(4, &["Puzzle"], "Indie", "Self"),
        ]
    }

    #[test]
    fn feature_relations() {
        let (d, _) = Dataset::new(vec![], [], toy_catalog());
        let dev = build_feature_relation(d.catalog(), RelationKind::CoDeveloper).unwrap();
        assert_eq!(dev.len(), 1);
        assert!(dev.contains(2, 1));
        let publisher = build_feature_relation(d.catalog(), RelationKind::CoPublisher).unwrap();
        assert_eq!(publisher.len(), 3);
        let genre = build_feature_relation(d.catalog(), RelationKind::CoGenre).unwrap();
        assert_eq!(genre.len(), 2);
        assert!(genre.edges.keys().all(|&(a, b)| a != 4 && b != 4));
        assert!(build_feature_relation(d.catalog(), RelationKind::CoPurchase).is_err());
    }

    /// Game 1 played by users {A,B,C}, game 2 by {B,C,D,E}: score 2/7.
    fn two_sevenths() -> Dataset {
        let rows = vec![
            eng(1, 1, 10.0),
            eng(2, 1, 20.0),
            eng(3, 1, 30.0),
            eng(2, 2, 50.0),
            eng(3, 2, 70.0),
            eng(4, 2, 10.0),
            eng(5, 2, 10.0),
        ];
        Dataset::new(rows, [], toy_catalog()).0
    }

    #[test]
    fn co_purchase_thresholds() {
        let d = two_sevenths();
        let low = build_co_purchase(&d, 0.2).unwrap();
        assert!(low.contains(1, 2));
        assert!((low.edges[&(1, 2)] - 2.0 / 7.0).abs() < 1e-15);
        assert!(build_co_purchase(&d, 0.5).unwrap().is_empty());
        assert_eq!(build_co_purchase(&d, 0.0).unwrap().len(), 1);
        assert!(build_co_purchase(&d, -1.0).is_err());
    }

    #[test]
    fn co_dwelling_uses_common_players_only() {
        let d = two_sevenths();
        // Common users 2 and 3: mean on game 1 = 25, on game 2 = 60.
        let stats = co_engagement_stats(&d);
        assert_eq!(stats.len(), 1);
        assert_eq!((stats[0].mean_a, stats[0].mean_b), (25.0, 60.0));
        let (edges, t) = build_co_dwelling(&d, 0.5, Some(35.0)).unwrap();
        assert_eq!(t, 35.0);
        // exp(-1) < 0.5
        assert!(edges.is_empty());
        let (edges, _) = build_co_dwelling(&d, 0.3, Some(35.0)).unwrap();
        assert!((edges.edges[&(1, 2)] - (-1.0f64).exp()).abs() < 1e-15);
        let (_, t) = build_co_dwelling(&d, 0.3, None).unwrap();
        assert_eq!(t, 35.0);
        assert!(build_co_dwelling(&d, 1.0, None).is_err());
    }

    #[test]
    fn equal_means_always_connect() {
        let rows = vec![eng(1, 1, 10.0), eng(1, 2, 10.0), eng(2, 3, 5.0)];
        let (d, _) = Dataset::new(rows, [], toy_catalog());
        let (edges, _) = build_co_dwelling(&d, 0.99, Some(1.0)).unwrap();
        assert_eq!(edges.len(), 1);
        assert!(edges.contains(1, 2));
    }

    #[test]
    fn assemble_requires_every_relation() {
        let games = [1, 2, 3];
        let rels: Vec<_> = RelationKind::ALL[..4].iter().map(|&k| RelationEdges::new(k)).collect();
        assert!(matches!(ContextGraph::assemble(&games, rels), Err(Error::Graph(_))));
        let mut rels: Vec<_> = RelationKind::ALL.iter().map(|&k| RelationEdges::new(k)).collect();
        rels.push(RelationEdges::new(RelationKind::CoGenre));
        assert!(ContextGraph::assemble(&games, rels).is_err());
    }

    #[test]
    fn empty_and_deduplicated() {
        let games = [1, 2, 3];
        let rels: Vec<_> = RelationKind::ALL.iter().map(|&k| RelationEdges::new(k)).collect();
        let g = ContextGraph::assemble(&games, rels).unwrap();
        for kind in RelationKind::ALL {
            for i in 0..3 {
                assert_eq!(g.degree(kind, i), 0);
            }
        }
        let mut rels: Vec<_> = RelationKind::ALL.iter().map(|&k| RelationEdges::new(k)).collect();
        rels[0].insert(1, 2, 1.0);
        rels[0].insert(2, 1, 1.0);
        rels[0].insert(3, 3, 1.0);
        let g = ContextGraph::assemble(&games, rels).unwrap();
        assert_eq!(g.relation(RelationKind::CoGenre).edge_count(), 1);
        assert_eq!(g.neighbors(RelationKind::CoGenre, 0), &[1]);
        assert_eq!(g.degree(RelationKind::CoGenre, 2), 0);
    }

    #[test]
    fn unknown_edge_endpoint_is_rejected() {
        let mut rels: Vec<_> = RelationKind::ALL.iter().map(|&k| RelationEdges::new(k)).collect();
        rels[3].insert(1, 9, 0.5);
        assert!(matches!(
            ContextGraph::assemble(&[1, 2], rels),
            Err(Error::UnknownGame(9))
        ));
    }

    #[test]
    fn degree_matches_brute_force_scan_on_200_games() {
        let genres = ["a", "b", "c", "d", "e", "f", "g"];
        let catalog: Vec<GameRecord> = (0..200u64)
            .map(|i| {
                let g1 = genres[(i * 7 % 7) as usize];
                let g2 = genres[(i * 13 / 3 % 7) as usize];
                game(i, &[g1, g2], &format!("dev{}", i % 11), &format!("pub{}", i % 5))
            })
            .collect();
        let (d, _) = Dataset::new(vec![], [], catalog.clone());
        let rels = RelationKind::ALL
            .iter()
            .map(|&k| {
                if k.is_feature_based() {
                    build_feature_relation(d.catalog(), k).unwrap()
                } else {
                    RelationEdges::new(k)
                }
            })
            .collect();
        let g = ContextGraph::assemble(&d.games(), rels).unwrap();
        for (i, a) in catalog.iter().enumerate() {
            let brute = catalog
                .iter()
                .filter(|b| b.game_id != a.game_id && !a.genres.is_disjoint(&b.genres))
                .count();
            assert_eq!(g.degree(RelationKind::CoGenre, i), brute);
            let brute_dev = catalog
                .iter()
                .filter(|b| b.game_id != a.game_id && a.developer == b.developer)
                .count();
            assert_eq!(g.degree(RelationKind::CoDeveloper, i), brute_dev);
        }
    }

    #[test]
    fn save_and_load() {
        let d = two_sevenths();
        let (g, m) = build_context_graph(
            &d,
            &GraphConfig {
                tau_p: 0.0,
                tau_t: 0.0,
                time_scale: Some(35.0),
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_graph(dir.path(), &g, &m).unwrap();
        let (again, m2) = load_graph(dir.path(), &d.games()).unwrap();
        assert_eq!(g, again);
        assert_eq!(m, m2);
    }

    fn random_dataset(rows: Vec<(u64, u64, f64)>) -> Dataset {
        let catalog: Vec<_> = (0..12).map(|g| game(g, &["x"], "d", "p")).collect();
        let rows = rows.into_iter().map(|(u, g, t)| eng(u, g, t)).collect();
        Dataset::new(rows, [], catalog).0
    }

    proptest! {
        #[test]
        fn adjacency_symmetric_and_loop_free(rows in prop::collection::vec((0u64..15, 0u64..12, 0.0f64..500.0), 0..80)) {
            let d = random_dataset(rows);
            let (g, _) = build_context_graph(&d, &GraphConfig { tau_p: 0.05, tau_t: 0.3, time_scale: None }).unwrap();
            for kind in RelationKind::ALL {
                for i in 0..g.games().len() {
                    for &j in g.neighbors(kind, i) {
                        prop_assert!(i != j);
                        prop_assert!(g.neighbors(kind, j).contains(&i));
                    }
                }
            }
        }

        #[test]
        fn raising_thresholds_never_adds_edges(
            rows in prop::collection::vec((0u64..15, 0u64..12, 0.0f64..500.0), 0..80),
            lo in 0.0f64..0.5, delta in 0.0f64..0.4,
        ) {
            let d = random_dataset(rows);
            let p_lo = build_co_purchase(&d, lo).unwrap();
            let p_hi = build_co_purchase(&d, lo + delta).unwrap();
            prop_assert!(p_hi.edges.keys().all(|k| p_lo.edges.contains_key(k)));
            let (t_lo, _) = build_co_dwelling(&d, lo, Some(50.0)).unwrap();
            let (t_hi, _) = build_co_dwelling(&d, lo + delta, Some(50.0)).unwrap();
            prop_assert!(t_hi.edges.keys().all(|k| t_lo.edges.contains_key(k)));
        }
    }
}
