//! Collapsing several raters' scores on an item into one ordinal group score.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, MetricError};
use crate::ratings::{LikertScale, RatingTable};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    /// Mode of the scores; ties broken by a keyed draw over the tied modes.
    #[default]
    Plurality,
    /// Lower median.
    Median,
    /// Arithmetic mean rounded half-up.
    Mean,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AggregationPolicy {
    #[serde(default)]
    pub kind: AggregationKind,
    #[serde(default)]
    pub seed: u64,
}

impl AggregationPolicy {
    pub fn plurality(seed: u64) -> Self {
        AggregationPolicy {
            kind: AggregationKind::Plurality,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupScore {
    pub score: u8,
    /// Number of ratings that went into the score.
    pub support: u32,
}

/// One aggregated score per item the group rated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupScoreTable {
    pub scale: LikertScale,
    pub entries: BTreeMap<String, GroupScore>,
}

impl GroupScoreTable {
    pub fn get(&self, item_id: &str) -> Option<GroupScore> {
        self.entries.get(item_id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Single-rater scores as a group table with unit support.
    pub fn from_scores(
        scale: LikertScale,
        scores: impl IntoIterator<Item = (String, u8)>,
    ) -> Result<Self, MetricError> {
        let mut entries = BTreeMap::new();
        for (item, score) in scores {
            if score > scale.k_max() {
                return Err(MetricError::ScoreOutsideScale {
                    score,
                    k_max: scale.k_max(),
                });
            }
            entries.insert(item, GroupScore { score, support: 1 });
        }
        Ok(GroupScoreTable { scale, entries })
    }

    /// CSV export as `item_id,score,support`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let err = |e: csv::Error| DataError::Write(e.to_string());
        w.write_record(["item_id", "score", "support"]).map_err(err)?;
        for (item, g) in &self.entries {
            w.write_record([item.as_str(), &g.score.to_string(), &g.support.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| DataError::Write(e.to_string()))
    }
}

/// Group score of one item from its score histogram (`hist[s]` = ratings with score `s`).
///
/// Returns `None` when the histogram is empty. `item_hash` keys the plurality tie-break.
pub fn score_from_histogram(hist: &[u32], item_hash: u64, policy: &AggregationPolicy) -> Option<GroupScore> {
    let n: u32 = hist.iter().sum();
    if n == 0 {
        return None;
    }
    let score = match policy.kind {
        AggregationKind::Plurality => {
            let top = *hist.iter().max().expect("non-empty histogram");
            let modes: Vec<usize> = (0..hist.len()).filter(|&s| hist[s] == top).collect();
            if modes.len() == 1 {
                modes[0]
            } else {
                let mut r = rng::stream(policy.seed, "plurality-tie", item_hash);
                modes[r.random_range(0..modes.len() as u32) as usize]
            }
        }
        AggregationKind::Median => {
            let target = (n - 1) / 2;
            let mut cum = 0;
            let mut median = 0;
            for (s, &c) in hist.iter().enumerate() {
                cum += c;
                if cum > target {
                    median = s;
                    break;
                }
            }
            median
        }
        AggregationKind::Mean => {
            let sum: u64 = hist.iter().enumerate().map(|(s, &c)| s as u64 * c as u64).sum();
            ((2 * sum + n as u64) / (2 * n as u64)) as usize
        }
    };
    Some(GroupScore {
        score: score as u8,
        support: n,
    })
}

/// Per-item group scores for raters flagged in `mask` (indexed like `table.raters()`).
pub fn aggregate_masked(table: &RatingTable, mask: &[bool], policy: &AggregationPolicy) -> Vec<Option<GroupScore>> {
    let mut hist = vec![0u32; table.scale().points()];
    (0..table.items().len())
        .map(|i| {
            hist.iter_mut().for_each(|h| *h = 0);
            for e in table.ratings_for_item(i) {
                if mask[e.rater as usize] {
                    hist[e.score as usize] += 1;
                }
            }
            score_from_histogram(&hist, table.item_hash(i), policy)
        })
        .collect()
}

/// Aggregates the selected raters' scores per item; items none of them rated are omitted.
pub fn aggregate(
    table: &RatingTable,
    raters: &BTreeSet<String>,
    policy: &AggregationPolicy,
) -> Result<GroupScoreTable, MetricError> {
    if raters.is_empty() {
        return Err(MetricError::EmptyRaterSet);
    }
    let mask = table.rater_mask(raters);
    let entries = aggregate_masked(table, &mask, policy)
        .into_iter()
        .zip(table.items())
        .filter_map(|(g, item)| g.map(|g| (item.clone(), g)))
        .collect();
    Ok(GroupScoreTable {
        scale: table.scale(),
        entries,
    })
}
