//! Dataset types: engagements, the friendship graph and the game catalog,
//! plus the preprocessing steps (filtering, sampling, hold-out splitting).

mod io;
mod split;

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

pub use io::{load_dataset, save_dataset, write_engagements, DatasetPaths};
pub use split::{filter_users, sample_users, split_holdout, splittable_users, Split};

pub type UserId = u64;
pub type GameId = u64;

/// One user's total playtime on one game.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Engagement {
    pub user_id: UserId,
    pub game_id: GameId,
    pub dwelling_minutes: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub game_id: GameId,
    pub genres: BTreeSet<String>,
    pub developer: String,
    pub publisher: String,
}

/// Undirected friendship, stored with `user_a < user_b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SocialEdge {
    pub user_a: UserId,
    pub user_b: UserId,
}

impl SocialEdge {
    /// Normalizes endpoint order. Self-loops are rejected.
    pub fn new(a: UserId, b: UserId) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(SocialEdge { user_a: a, user_b: b }),
            std::cmp::Ordering::Greater => Some(SocialEdge { user_a: b, user_b: a }),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// Rows dropped or merged while enforcing referential integrity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub merged_duplicate_engagements: usize,
    pub dropped_unknown_game: usize,
    pub dropped_social_unknown_user: usize,
    pub dropped_social_self_loop: usize,
    pub dropped_social_duplicate: usize,
}

impl IntegrityReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped_unknown_game
            + self.dropped_social_unknown_user
            + self.dropped_social_self_loop
            + self.dropped_social_duplicate
    }
}

/// Immutable engagement table, friendship graph and catalog.
///
/// Engagements are kept sorted by `(user_id, game_id)` with at most one row
/// per pair, which lets per-user views be contiguous slices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    engagements: Vec<Engagement>,
    social: BTreeSet<SocialEdge>,
    catalog: BTreeMap<GameId, GameRecord>,
}

impl Dataset {
    /// Builds a dataset, enforcing its invariants. Duplicate engagement rows
    /// are merged by summing minutes; engagements on unknown games and social
    /// edges touching users without engagements are dropped.
    pub fn new(
        engagements: Vec<Engagement>,
        social: impl IntoIterator<Item = (UserId, UserId)>,
        catalog: impl IntoIterator<Item = GameRecord>,
    ) -> (Self, IntegrityReport) {
        let mut report = IntegrityReport::default();
        let catalog: BTreeMap<GameId, GameRecord> = catalog.into_iter().map(|g| (g.game_id, g)).collect();

        let mut engagements: Vec<Engagement> = engagements
            .into_iter()
            .filter(|e| {
                let known = catalog.contains_key(&e.game_id);
                if !known {
                    report.dropped_unknown_game += 1;
                }
                known
            })
            .collect();
        engagements.sort_by_key(|e| (e.user_id, e.game_id));
        let mut merged: Vec<Engagement> = Vec::with_capacity(engagements.len());
        for e in engagements {
            match merged.last_mut() {
                Some(last) if last.user_id == e.user_id && last.game_id == e.game_id => {
                    last.dwelling_minutes += e.dwelling_minutes;
                    report.merged_duplicate_engagements += 1;
                }
                _ => merged.push(e),
            }
        }

        let mut dataset = Dataset {
            engagements: merged,
            social: BTreeSet::new(),
            catalog,
        };
        let users: BTreeSet<UserId> = dataset.users().into_iter().collect();
        for (a, b) in social {
            let Some(edge) = SocialEdge::new(a, b) else {
                report.dropped_social_self_loop += 1;
                continue;
            };
            if !users.contains(&edge.user_a) || !users.contains(&edge.user_b) {
                report.dropped_social_unknown_user += 1;
            } else if !dataset.social.insert(edge) {
                report.dropped_social_duplicate += 1;
            }
        }

        if report.merged_duplicate_engagements > 0 {
            warn!(
                "merged {} duplicate engagement rows",
                report.merged_duplicate_engagements
            );
        }
        if report.total_dropped() > 0 {
            warn!("dropped rows while loading dataset: {:?}", report);
        }
        (dataset, report)
    }

    /// Restricts engagements and social edges to `keep`. The catalog is unchanged.
    pub(crate) fn restrict_users(&self, keep: &BTreeSet<UserId>) -> Dataset {
        Dataset {
            engagements: self
                .engagements
                .iter()
                .filter(|e| keep.contains(&e.user_id))
                .copied()
                .collect(),
            social: self
                .social
                .iter()
                .filter(|s| keep.contains(&s.user_a) && keep.contains(&s.user_b))
                .copied()
                .collect(),
            catalog: self.catalog.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(
        engagements: Vec<Engagement>,
        social: BTreeSet<SocialEdge>,
        catalog: BTreeMap<GameId, GameRecord>,
    ) -> Dataset {
        debug_assert!(engagements
            .windows(2)
            .all(|w| (w[0].user_id, w[0].game_id) < (w[1].user_id, w[1].game_id)));
        Dataset {
            engagements,
            social,
            catalog,
        }
    }

    pub fn engagements(&self) -> &[Engagement] {
        &self.engagements
    }

    pub fn social(&self) -> &BTreeSet<SocialEdge> {
        &self.social
    }

    pub fn catalog(&self) -> &BTreeMap<GameId, GameRecord> {
        &self.catalog
    }

    /// Sorted ids of users with at least one engagement.
    pub fn users(&self) -> Vec<UserId> {
        let mut users: Vec<UserId> = self.engagements.iter().map(|e| e.user_id).collect();
        users.dedup();
        users
    }

    /// Sorted catalog game ids.
    pub fn games(&self) -> Vec<GameId> {
        self.catalog.keys().copied().collect()
    }

    /// Contiguous per-user engagement slices in ascending user order.
    pub fn by_user(&self) -> impl Iterator<Item = (UserId, &[Engagement])> + '_ {
        self.engagements
            .chunk_by(|a, b| a.user_id == b.user_id)
            .map(|chunk| (chunk[0].user_id, chunk))
    }

    pub fn user_engagements(&self, user: UserId) -> &[Engagement] {
        let start = self.engagements.partition_point(|e| e.user_id < user);
        let end = self.engagements.partition_point(|e| e.user_id <= user);
        &self.engagements[start..end]
    }

    /// Friend lists keyed by user, covering every user (friendless users map to empty).
    pub fn friends(&self) -> BTreeMap<UserId, Vec<UserId>> {
        let mut friends: BTreeMap<UserId, Vec<UserId>> = self.users().into_iter().map(|u| (u, Vec::new())).collect();
        for edge in &self.social {
            friends.entry(edge.user_a).or_default().push(edge.user_b);
            friends.entry(edge.user_b).or_default().push(edge.user_a);
        }
        for list in friends.values_mut() {
            list.sort_unstable();
        }
        friends
    }

    /// Engaged users per catalog game as `(user, minutes)`, users ascending.
    pub fn game_audiences(&self) -> BTreeMap<GameId, Vec<(UserId, f64)>> {
        let mut audiences: BTreeMap<GameId, Vec<(UserId, f64)>> =
            self.catalog.keys().map(|&g| (g, Vec::new())).collect();
        for e in &self.engagements {
            audiences
                .entry(e.game_id)
                .or_default()
                .push((e.user_id, e.dwelling_minutes));
        }
        audiences
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn game(id: GameId, genres: &[&str], developer: &str, publisher: &str) -> GameRecord {
        GameRecord {
            game_id: id,
            genres: genres.iter().map(|s| s.to_string()).collect(),
            developer: developer.to_string(),
            publisher: publisher.to_string(),
        }
    }

    pub(crate) fn eng(user_id: UserId, game_id: GameId, minutes: f64) -> Engagement {
        Engagement {
            user_id,
            game_id,
            dwelling_minutes: minutes,
        }
    }

    #[test]
    fn duplicate_rows_are_merged() {
        let (d, report) = Dataset::new(
            vec![eng(1, 10, 5.0), eng(1, 10, 7.5), eng(1, 11, 1.0)],
            [],
            [game(10, &["A"], "x", "y"), game(11, &["A"], "x", "y")],
        );
        assert_eq!(report.merged_duplicate_engagements, 1);
        assert_eq!(d.engagements().len(), 2);
        assert_eq!(d.engagements()[0].dwelling_minutes, 12.5);
    }

    #[test]
    fn social_edges_are_normalized_and_deduplicated() {
        let (d, report) = Dataset::new(
            vec![eng(1, 10, 5.0), eng(2, 10, 5.0)],
            [(2, 1), (1, 2), (1, 1), (1, 7)],
            [game(10, &["A"], "x", "y")],
        );
        assert_eq!(d.social().len(), 1);
        assert_eq!(report.dropped_social_duplicate, 1);
        assert_eq!(report.dropped_social_self_loop, 1);
        assert_eq!(report.dropped_social_unknown_user, 1);
        assert_eq!(d.friends()[&1], vec![2]);
    }

    #[test]
    fn unknown_game_rows_are_dropped() {
        let (d, report) = Dataset::new(vec![eng(1, 10, 5.0), eng(1, 99, 5.0)], [], [game(10, &["A"], "x", "y")]);
        assert_eq!(report.dropped_unknown_game, 1);
        assert_eq!(d.engagements().len(), 1);
    }

    #[test]
    fn per_user_slices() {
        let (d, _) = Dataset::new(
            vec![eng(2, 10, 1.0), eng(1, 11, 1.0), eng(1, 10, 1.0)],
            [],
            [game(10, &["A"], "x", "y"), game(11, &["A"], "x", "y")],
        );
        let groups: Vec<(UserId, usize)> = d.by_user().map(|(u, es)| (u, es.len())).collect();
        assert_eq!(groups, vec![(1, 2), (2, 1)]);
        assert_eq!(d.user_engagements(1).len(), 2);
        assert!(d.user_engagements(5).is_empty());
    }
}
