use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::ModelInputs;

/// A training user, one of their games, and a game they never played.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub user: usize,
    pub positive: usize,
    pub negative: usize,
}

/// One pass over every training interaction in random order, each paired
/// with `negatives` uniformly drawn unplayed games. Users who played every
/// game cannot be paired and are skipped; the number skipped is returned.
pub fn epoch_triplets<R: Rng>(inputs: &ModelInputs, negatives: usize, rng: &mut R) -> (Vec<Triplet>, usize) {
    let n_games = inputs.games().len();
    let mut positives: Vec<(usize, usize)> = Vec::new();
    let mut skipped = 0;
    for u in 0..inputs.users().len() {
        let engaged = inputs.engaged(u);
        if engaged.len() >= n_games {
            skipped += engaged.len();
            continue;
        }
        positives.extend(engaged.iter().map(|&(i, _)| (u, i)));
    }
    if skipped > 0 {
        warn!("skipped {skipped} interactions of users who played every game");
    }
    positives.shuffle(rng);

    let mut out = Vec::with_capacity(positives.len() * negatives);
    for (user, positive) in positives {
        let engaged = inputs.engaged(user);
        for _ in 0..negatives {
            let negative = loop {
                let j = rng.random_range(0..n_games);
                if engaged.binary_search_by_key(&j, |&(i, _)| i).is_err() {
                    break j;
                }
            };
            out.push(Triplet {
                user,
                positive,
                negative,
            });
        }
    }
    (out, skipped)
}

/// An epoch of triplets cut into mini-batches of at most `batch` triplets.
pub fn sample_triplets<R: Rng>(inputs: &ModelInputs, batch: usize, negatives: usize, rng: &mut R) -> Vec<Vec<Triplet>> {
    let (all, _) = epoch_triplets(inputs, negatives, rng);
    all.chunks(batch.max(1)).map(<[Triplet]>::to_vec).collect()
}
