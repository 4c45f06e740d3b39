use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Engagement, UserId};
use crate::error::{Error, Result};

/// Train table plus per-user held-out validation and test engagements.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub validation: BTreeMap<UserId, Vec<Engagement>>,
    pub test: BTreeMap<UserId, Vec<Engagement>>,
    pub eval_users: BTreeSet<UserId>,
}

/// Keeps users with at least `min_games` engagements and at least
/// `min_total_minutes` of total playtime. A single pass: no game-side
/// filtering and no re-filtering after edges disappear.
pub fn filter_users(d: &Dataset, min_games: usize, min_total_minutes: f64) -> Result<Dataset> {
    if min_games < 1 {
        return Err(Error::InvalidArgument("min_games must be >= 1".into()));
    }
    if !(min_total_minutes >= 0.0) {
        return Err(Error::InvalidArgument("min_total_minutes must be >= 0".into()));
    }
    let keep: BTreeSet<UserId> = d
        .by_user()
        .filter(|(_, es)| {
            let total: f64 = es.iter().map(|e| e.dwelling_minutes).sum();
            es.len() >= min_games && total >= min_total_minutes
        })
        .map(|(u, _)| u)
        .collect();
    Ok(d.restrict_users(&keep))
}

/// Uniform sample of `floor(fraction * |U|)` users without replacement.
pub fn sample_users(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut users = d.users();
    if fraction == 1.0 {
        return Ok(d.clone());
    }
    let count = (fraction * users.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    users.shuffle(&mut rng);
    let keep: BTreeSet<UserId> = users.into_iter().take(count).collect();
    Ok(d.restrict_users(&keep))
}

/// Number of engagements moved to each of validation and test for a user
/// with `n` engagements: `ceil(fraction * n)`, at least one.
fn holdout_count(n: usize, fraction: f64) -> usize {
    // The epsilon keeps e.g. 0.1 * 30 = 3.0000000000000004 from rounding up.
    ((fraction * n as f64 - 1e-9).ceil() as usize).max(1)
}

fn can_hold_out(n: usize, fraction: f64) -> bool {
    n >= 3 && 2 * holdout_count(n, fraction) < n
}

/// Users whose engagements can be split three ways at `holdout_fraction`.
pub fn splittable_users(d: &Dataset, holdout_fraction: f64) -> usize {
    d.by_user()
        .filter(|(_, es)| can_hold_out(es.len(), holdout_fraction))
        .count()
}

/// Picks `num_eval_users` users at random and moves two disjoint random
/// subsets of their engagements to validation and test. Users that cannot
/// keep one engagement in every partition are skipped and another user is drawn.
pub fn split_holdout(d: &Dataset, num_eval_users: usize, holdout_fraction: f64, seed: u64) -> Result<Split> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction must lie in (0, 0.5), got {holdout_fraction}"
        )));
    }
    let mut users = d.users();
    if num_eval_users > users.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {num_eval_users} evaluation users but the dataset has {}",
            users.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    users.shuffle(&mut rng);

    let mut validation = BTreeMap::new();
    let mut test = BTreeMap::new();
    let mut held_out: BTreeSet<(UserId, u64)> = BTreeSet::new();
    for user in users {
        if validation.len() == num_eval_users {
            break;
        }
        let es = d.user_engagements(user);
        let k = holdout_count(es.len(), holdout_fraction);
        if !can_hold_out(es.len(), holdout_fraction) {
            continue;
        }
        let mut order: Vec<usize> = (0..es.len()).collect();
        order.shuffle(&mut rng);
        let mut val: Vec<Engagement> = order[..k].iter().map(|&i| es[i]).collect();
        let mut tst: Vec<Engagement> = order[k..2 * k].iter().map(|&i| es[i]).collect();
        val.sort_by_key(|e| e.game_id);
        tst.sort_by_key(|e| e.game_id);
        held_out.extend(val.iter().chain(&tst).map(|e| (user, e.game_id)));
        validation.insert(user, val);
        test.insert(user, tst);
    }
    if validation.len() < num_eval_users {
        return Err(Error::Split(format!(
            "only {} users have enough engagements for a three-way split, {} requested",
            validation.len(),
            num_eval_users
        )));
    }

    let train = Dataset::from_parts_unchecked(
        d.engagements()
            .iter()
            .filter(|e| !held_out.contains(&(e.user_id, e.game_id)))
            .copied()
            .collect(),
        d.social().clone(),
        d.catalog().clone(),
    );
    let eval_users = validation.keys().copied().collect();
    Ok(Split {
        train,
        validation,
        test,
        eval_users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::{eng, game};
    use proptest::prelude::*;

    fn dataset(per_user: &[(UserId, usize, f64)]) -> Dataset {
        let games: Vec<_> = (0..50).map(|g| game(g, &["A"], "d", "p")).collect();
        let mut rows = Vec::new();
        for &(u, n, minutes) in per_user {
            for g in 0..n as u64 {
                rows.push(eng(u, g, minutes));
            }
        }
        Dataset::new(rows, [], games).0
    }

    #[test]
    fn filter_thresholds() {
        let d = dataset(&[(1, 4, 100.0), (2, 5, 60.0), (3, 6, 5.0)]);
        let f = filter_users(&d, 5, 60.0).unwrap();
        // user 1: 4 games; user 2: 5 games / 300 minutes; user 3: 30 minutes total.
        assert_eq!(f.users(), vec![2]);
    }

    #[test]
    fn filter_drops_edges_to_removed_users() {
        let games: Vec<_> = (0..5).map(|g| game(g, &["A"], "d", "p")).collect();
        let rows = vec![eng(1, 0, 100.0), eng(1, 1, 100.0), eng(2, 0, 1.0)];
        let (d, _) = Dataset::new(rows, [(1, 2)], games);
        let f = filter_users(&d, 2, 0.0).unwrap();
        assert!(f.social().is_empty());
        assert!(filter_users(&d, 0, 0.0).is_err());
    }

    #[test]
    fn sample_counts_and_determinism() {
        let d = dataset(&(1..=10).map(|u| (u, 3, 10.0)).collect::<Vec<_>>());
        assert_eq!(sample_users(&d, 1.0, 3).unwrap(), d);
        let half = sample_users(&d, 0.5, 3).unwrap();
        assert_eq!(half.users().len(), 5);
        assert_eq!(sample_users(&d, 0.5, 3).unwrap(), half);
        assert!(sample_users(&d, 0.0, 3).is_err());
        assert!(sample_users(&d, 1.5, 3).is_err());
    }

    #[test]
    fn ten_percent_holdout() {
        let d = dataset(&[(1, 10, 10.0)]);
        let s = split_holdout(&d, 1, 0.1, 9).unwrap();
        assert_eq!(s.validation[&1].len(), 1);
        assert_eq!(s.test[&1].len(), 1);
        assert_eq!(s.train.user_engagements(1).len(), 8);
        assert_eq!(holdout_count(30, 0.1), 3);
    }

    #[test]
    fn splittable_users_need_a_training_engagement_left() {
        let d = dataset(&[(1, 2, 10.0), (2, 3, 10.0), (3, 10, 10.0)]);
        assert_eq!(splittable_users(&d, 0.1), 2);
        // ceil(0.45 * 3) = 2 and ceil(0.45 * 10) = 5 leave nothing to train on.
        assert_eq!(splittable_users(&d, 0.45), 0);
        assert!(split_holdout(&d, 2, 0.1, 0).is_ok());
    }

    #[test]
    fn zero_eval_users_keeps_everything_in_train() {
        let d = dataset(&[(1, 10, 10.0), (2, 4, 10.0)]);
        let s = split_holdout(&d, 0, 0.1, 1).unwrap();
        assert!(s.validation.is_empty() && s.test.is_empty() && s.eval_users.is_empty());
        assert_eq!(s.train, d);
    }

    #[test]
    fn sparse_users_are_redrawn_or_rejected() {
        let d = dataset(&[(1, 2, 10.0), (2, 2, 10.0), (3, 5, 10.0)]);
        let s = split_holdout(&d, 1, 0.1, 4).unwrap();
        assert_eq!(s.eval_users.iter().copied().collect::<Vec<_>>(), vec![3]);
        assert!(matches!(split_holdout(&d, 2, 0.1, 4), Err(Error::Split(_))));
        assert!(split_holdout(&d, 4, 0.1, 4).is_err());
        assert!(split_holdout(&d, 1, 0.5, 4).is_err());
    }

    #[test]
    fn hundred_user_split_is_a_partition() {
        let rows: Vec<_> = (1..=100u64)
            .flat_map(|u| (0..(3 + u % 17)).map(move |g| eng(u, g, (u * 7 + g) as f64)))
            .collect();
        let games: Vec<_> = (0..50).map(|g| game(g, &["A"], "d", "p")).collect();
        let (d, _) = Dataset::new(rows, [], games);
        let s = split_holdout(&d, 100, 0.1, 17).unwrap();
        for (u, es) in d.by_user() {
            let train: BTreeSet<u64> = s.train.user_engagements(u).iter().map(|e| e.game_id).collect();
            let val: BTreeSet<u64> = s.validation[&u].iter().map(|e| e.game_id).collect();
            let tst: BTreeSet<u64> = s.test[&u].iter().map(|e| e.game_id).collect();
            assert!(val.is_disjoint(&tst) && val.is_disjoint(&train) && tst.is_disjoint(&train));
            assert!(!train.is_empty());
            let all: BTreeSet<u64> = es.iter().map(|e| e.game_id).collect();
            let union: BTreeSet<u64> = train.union(&val).chain(&tst).copied().collect();
            assert_eq!(union, all);
        }
    }

    proptest! {
        #[test]
        fn filtered_users_satisfy_thresholds(
            sizes in prop::collection::vec((1usize..12, 0.0f64..40.0), 1..30),
            min_games in 1usize..8,
            min_minutes in 0.0f64..200.0,
        ) {
            let per_user: Vec<_> = sizes.iter().enumerate().map(|(u, &(n, m))| (u as u64, n, m)).collect();
            let d = dataset(&per_user);
            let f = filter_users(&d, min_games, min_minutes).unwrap();
            for (_, es) in f.by_user() {
                prop_assert!(es.len() >= min_games);
                prop_assert!(es.iter().map(|e| e.dwelling_minutes).sum::<f64>() >= min_minutes);
            }
            let expected = per_user.iter().filter(|&&(_, n, m)| n >= min_games && (0..n).map(|_| m).sum::<f64>() >= min_minutes).count();
            prop_assert_eq!(f.users().len(), expected);
        }

        #[test]
        fn split_is_reproducible(seed in any::<u64>()) {
            let d = dataset(&(1..=20).map(|u| (u, 3 + (u as usize % 5), 1.0)).collect::<Vec<_>>());
            prop_assert_eq!(split_holdout(&d, 10, 0.2, seed).unwrap(), split_holdout(&d, 10, 0.2, seed).unwrap());
        }
    }
}
