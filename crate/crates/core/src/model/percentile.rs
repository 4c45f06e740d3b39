use std::collections::BTreeMap;

use crate::data::{Dataset, GameId};
use crate::error::{Error, Result};

/// Sorted training playtimes per game.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PercentileIndex {
    times: BTreeMap<GameId, Vec<f64>>,
}

impl PercentileIndex {
    pub fn build(train: &Dataset) -> Self {
        let mut times: BTreeMap<GameId, Vec<f64>> = BTreeMap::new();
        for e in train.engagements() {
            times.entry(e.game_id).or_default().push(e.dwelling_minutes);
        }
        for list in times.values_mut() {
            list.sort_by(f64::total_cmp);
        }
        PercentileIndex { times }
    }

    pub fn records(&self, game: GameId) -> Option<&[f64]> {
        self.times.get(&game).map(Vec::as_slice)
    }
}

/// Share of training records on `game` not exceeding `t`.
pub fn percentile(index: &PercentileIndex, game: GameId, t: f64) -> Result<f64> {
    let records = index
        .records(game)
        .filter(|r| !r.is_empty())
        .ok_or(Error::NoRecords(game))?;
    let at_most = records.partition_point(|&v| v <= t);
    Ok(at_most as f64 / records.len() as f64)
}

/// Percentiles of a user's `(game, minutes)` engagements, normalized to sum to one.
pub fn time_weights(engagements: &[(GameId, f64)], index: &PercentileIndex) -> Result<Vec<f64>> {
    if engagements.is_empty() {
        return Err(Error::InvalidArgument(
            "time weights need at least one engagement".into(),
        ));
    }
    let raw = engagements
        .iter()
        .map(|&(g, t)| percentile(index, g, t))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        let uniform = 1.0 / raw.len() as f64;
        return Ok(vec![uniform; raw.len()]);
    }
    Ok(raw.into_iter().map(|p| p / total).collect())
}
