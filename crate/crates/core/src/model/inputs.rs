use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::percentile::{time_weights, PercentileIndex};
use crate::data::{Dataset, GameId, UserId};
use crate::error::{Error, Result};
use crate::graph::{ContextGraph, RelationKind};

/// Neighbor normalization in the per-relation convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `1 / |N(i)|`: a plain neighborhood mean.
    #[default]
    Mean,
    /// `1 / sqrt(|N(i)| |N(j)|)`.
    Symmetric,
}

/// One relation's adjacency with per-entry convolution coefficients.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ConvAdjacency {
    pub offsets: Vec<usize>,
    pub neighbors: Vec<usize>,
    /// Coefficient of neighbor `j` in row `i`'s aggregate.
    pub coef: Vec<f64>,
    /// Coefficient of row `i` in neighbor `j`'s aggregate, aligned with `neighbors`;
    /// used when scattering gradients back to neighbor features.
    pub coef_transposed: Vec<f64>,
}

impl ConvAdjacency {
    fn new(graph: &ContextGraph, kind: RelationKind, normalization: Normalization) -> Self {
        let n = graph.games().len();
        let degree = |i: usize| graph.degree(kind, i) as f64;
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        let mut coef = Vec::new();
        let mut coef_transposed = Vec::new();
        for i in 0..n {
            for &j in graph.neighbors(kind, i) {
                neighbors.push(j);
                let (c, ct) = match normalization {
                    Normalization::Mean => (1.0 / degree(i), 1.0 / degree(j)),
                    Normalization::Symmetric => {
                        let s = 1.0 / (degree(i).sqrt() * degree(j).sqrt());
                        (s, s)
                    }
                };
                coef.push(c);
                coef_transposed.push(ct);
            }
            offsets.push(neighbors.len());
        }
        ConvAdjacency {
            offsets,
            neighbors,
            coef,
            coef_transposed,
        }
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// Everything the forward pass reads besides the parameters: dense user and
/// game indices, each user's training games with time weights, friend lists
/// and the normalized context graph.
#[derive(Clone, Debug)]
pub struct ModelInputs {
    users: Vec<UserId>,
    user_index: HashMap<UserId, usize>,
    games: Vec<GameId>,
    game_index: HashMap<GameId, usize>,
    pub(crate) engaged: Vec<Vec<(usize, f64)>>,
    pub(crate) friends: Vec<Vec<usize>>,
    pub(crate) conv: Vec<ConvAdjacency>,
    percentiles: PercentileIndex,
    normalization: Normalization,
}

impl ModelInputs {
    /// Indexes users of `train` and the games of `graph`. Time weights use
    /// training playtimes only.
    pub fn new(train: &Dataset, graph: &ContextGraph, normalization: Normalization) -> Result<Self> {
        let games = graph.games().to_vec();
        let game_index: HashMap<GameId, usize> = games.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let users = train.users();
        let user_index: HashMap<UserId, usize> = users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let percentiles = PercentileIndex::build(train);

        let mut engaged = Vec::with_capacity(users.len());
        for (_, es) in train.by_user() {
            let pairs: Vec<(GameId, f64)> = es.iter().map(|e| (e.game_id, e.dwelling_minutes)).collect();
            let gammas = time_weights(&pairs, &percentiles)?;
            let list = pairs
                .iter()
                .zip(gammas)
                .map(|(&(g, _), w)| Ok((*game_index.get(&g).ok_or(Error::UnknownGame(g))?, w)))
                .collect::<Result<Vec<_>>>()?;
            engaged.push(list);
        }

        let mut friends = vec![Vec::new(); users.len()];
        for edge in train.social() {
            let a = *user_index.get(&edge.user_a).ok_or(Error::UnknownUser(edge.user_a))?;
            let b = *user_index.get(&edge.user_b).ok_or(Error::UnknownUser(edge.user_b))?;
            friends[a].push(b);
            friends[b].push(a);
        }
        for list in &mut friends {
            list.sort_unstable();
        }

        let conv = RelationKind::ALL
            .iter()
            .map(|&kind| ConvAdjacency::new(graph, kind, normalization))
            .collect();
        Ok(ModelInputs {
            users,
            user_index,
            games,
            game_index,
            engaged,
            friends,
            conv,
            percentiles,
            normalization,
        })
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn games(&self) -> &[GameId] {
        &self.games
    }

    pub fn user_index(&self, user: UserId) -> Option<usize> {
        self.user_index.get(&user).copied()
    }

    pub fn game_index(&self, game: GameId) -> Option<usize> {
        self.game_index.get(&game).copied()
    }

    /// Training games of a user with their time weights.
    pub fn engaged(&self, u: usize) -> &[(usize, f64)] {
        &self.engaged[u]
    }

    pub fn friends(&self, u: usize) -> &[usize] {
        &self.friends[u]
    }

    pub fn percentiles(&self) -> &PercentileIndex {
        &self.percentiles
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Neighbors of game `i` under `kind` with their convolution coefficients.
    pub fn neighborhood(&self, kind: RelationKind, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let adj = &self.conv[kind.index()];
        let r = adj.range(i);
        adj.neighbors[r.clone()]
            .iter()
            .copied()
            .zip(adj.coef[r].iter().copied())
    }
}
