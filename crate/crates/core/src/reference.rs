//! Binary reference construction.
//!
//! A [`ReferencePairSet`] holds the `(s, u)` instances for one evaluated unit: `s` is the
//! unit's score on an item and `u` is one reference rating of that item. All pairs of an
//! item share `s`, so the set is stored per item as counts of `u = 1` and `u = 0`
//! instances; [`ReferencePairSet::pairs`] expands it back to individual pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aggregation::GroupScoreTable;
use crate::error::{DataError, MetricError};
use crate::ratings::{BinaryRecord, LikertScale, RatingTable};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReferencePair {
    pub item_id: String,
    pub s: u8,
    pub u: u8,
}

/// Cut point `t` in `1..=K`; crowd ratings `>= t` count as `u = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Boundary(u8);

impl Boundary {
    pub fn new(t: u8, scale: LikertScale) -> Result<Self, MetricError> {
        if t == 0 || t > scale.k_max() {
            return Err(MetricError::ScoreOutsideScale {
                score: t,
                k_max: scale.k_max(),
            });
        }
        Ok(Boundary(t))
    }

    pub fn t(&self) -> u8 {
        self.0
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Boundaries `1..=K` in ascending order.
pub fn all_boundaries(scale: LikertScale) -> Vec<Boundary> {
    (1..=scale.k_max()).map(Boundary).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Guideline,
    Crowd,
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceKind::Guideline => "guideline",
            ReferenceKind::Crowd => "crowd",
        })
    }
}

/// All reference instances of one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemPairs {
    pub item_id: String,
    pub s: u8,
    pub ones: u32,
    pub zeros: u32,
}

impl ItemPairs {
    pub fn count(&self) -> u64 {
        self.ones as u64 + self.zeros as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferencePairSet {
    scale: LikertScale,
    kind: ReferenceKind,
    boundary: Option<Boundary>,
    unit: String,
    items: Vec<ItemPairs>,
}

impl ReferencePairSet {
    /// Builds a set from item-level counts. Items are kept in `item_id` order.
    pub fn from_items(
        scale: LikertScale,
        kind: ReferenceKind,
        boundary: Option<Boundary>,
        unit: impl Into<String>,
        mut items: Vec<ItemPairs>,
    ) -> Result<Self, MetricError> {
        if (kind == ReferenceKind::Crowd) != boundary.is_some() {
            return Err(MetricError::InconsistentPairSets);
        }
        if let Some(b) = boundary {
            Boundary::new(b.t(), scale)?;
        }
        for it in &items {
            if it.s > scale.k_max() {
                return Err(MetricError::ScoreOutsideScale {
                    score: it.s,
                    k_max: scale.k_max(),
                });
            }
        }
        items.retain(|it| it.count() > 0);
        items.sort_by(|a, b| (&a.item_id, a.s).cmp(&(&b.item_id, b.s)));
        Ok(ReferencePairSet {
            scale,
            kind,
            boundary,
            unit: unit.into(),
            items,
        })
    }

    /// Builds a set from individual pairs.
    pub fn from_pairs(
        scale: LikertScale,
        kind: ReferenceKind,
        boundary: Option<Boundary>,
        unit: impl Into<String>,
        pairs: impl IntoIterator<Item = ReferencePair>,
    ) -> Result<Self, MetricError> {
        let mut grouped: BTreeMap<(String, u8), (u32, u32)> = BTreeMap::new();
        for p in pairs {
            if p.u > 1 {
                return Err(MetricError::InconsistentPairSets);
            }
            let e = grouped.entry((p.item_id, p.s)).or_default();
            if p.u == 1 {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        let items = grouped
            .into_iter()
            .map(|((item_id, s), (ones, zeros))| ItemPairs {
                item_id,
                s,
                ones,
                zeros,
            })
            .collect();
        Self::from_items(scale, kind, boundary, unit, items)
    }

    pub fn scale(&self) -> LikertScale {
        self.scale
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn boundary(&self) -> Option<Boundary> {
        self.boundary
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn items(&self) -> &[ItemPairs] {
        &self.items
    }

    pub fn pair_count(&self) -> u64 {
        self.items.iter().map(ItemPairs::count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Individual pairs, `u = 1` instances of an item first.
    pub fn pairs(&self) -> impl Iterator<Item = ReferencePair> + '_ {
        self.items.iter().flat_map(|it| {
            let ones = std::iter::repeat_n(1u8, it.ones as usize);
            let zeros = std::iter::repeat_n(0u8, it.zeros as usize);
            ones.chain(zeros).map(move |u| ReferencePair {
                item_id: it.item_id.clone(),
                s: it.s,
                u,
            })
        })
    }

    /// Scores and labels as parallel vectors, for rank-based routines.
    pub fn columns(&self) -> (Vec<u8>, Vec<u8>) {
        self.pairs().map(|p| (p.s, p.u)).unzip()
    }

    /// One pair per item carrying the majority reference label (half or more positive → 1).
    pub fn collapse_majority(&self) -> ReferencePairSet {
        let items = self
            .items
            .iter()
            .map(|it| {
                let positive = it.ones >= it.zeros;
                ItemPairs {
                    item_id: it.item_id.clone(),
                    s: it.s,
                    ones: positive as u32,
                    zeros: !positive as u32,
                }
            })
            .collect();
        ReferencePairSet {
            items,
            unit: self.unit.clone(),
            ..*self
        }
    }

    /// Same items, each replicated `weights[i]` times (a bootstrap replica).
    pub fn reweighted(&self, weights: &[u32]) -> ReferencePairSet {
        debug_assert_eq!(weights.len(), self.items.len());
        let items = self
            .items
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0)
            .map(|(it, &w)| ItemPairs {
                item_id: it.item_id.clone(),
                s: it.s,
                ones: it.ones * w,
                zeros: it.zeros * w,
            })
            .collect();
        ReferencePairSet {
            items,
            unit: self.unit.clone(),
            ..*self
        }
    }

    /// Audit dump as `item_id,s,u`, one row per pair.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let err = |e: csv::Error| DataError::Write(e.to_string());
        w.write_record(["item_id", "s", "u"]).map_err(err)?;
        for p in self.pairs() {
            w.write_record([p.item_id.as_str(), &p.s.to_string(), &p.u.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| DataError::Write(e.to_string()))
    }
}

/// Guideline-based reference: every trained label on an item the group scored becomes
/// one pair carrying the group's score.
pub fn guideline_pairs(
    group_scores: &GroupScoreTable,
    binary: &[BinaryRecord],
) -> Result<ReferencePairSet, MetricError> {
    let mut counts: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for b in binary {
        if group_scores.entries.contains_key(&b.item_id) {
            let e = counts.entry(b.item_id.as_str()).or_default();
            if b.label == 1 {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    if counts.is_empty() {
        return Err(MetricError::NoSharedItems);
    }
    let items = counts
        .into_iter()
        .map(|(item, (ones, zeros))| ItemPairs {
            item_id: item.to_string(),
            s: group_scores.entries[item].score,
            ones,
            zeros,
        })
        .collect();
    ReferencePairSet::from_items(group_scores.scale, ReferenceKind::Guideline, None, "", items)
}

/// Crowd-based reference at boundary `t`: every rating by a rater outside
/// `evaluated_raters` on an item the unit scored is binarized at `>= t`.
pub fn crowd_pairs(
    table: &RatingTable,
    evaluated_raters: &BTreeSet<String>,
    unit_scores: &GroupScoreTable,
    t: Boundary,
) -> Result<ReferencePairSet, MetricError> {
    let excluded = table.rater_mask(evaluated_raters);
    if excluded.iter().all(|&e| e) {
        return Err(MetricError::EmptyReferencePopulation);
    }
    let mut items = Vec::new();
    let mut dropped = 0usize;
    for (item_id, g) in &unit_scores.entries {
        let Some(idx) = table.item_index(item_id) else {
            dropped += 1;
            continue;
        };
        let (mut ones, mut zeros) = (0u32, 0u32);
        for e in table.ratings_for_item(idx) {
            if excluded[e.rater as usize] {
                continue;
            }
            if e.score >= t.t() {
                ones += 1;
            } else {
                zeros += 1;
            }
        }
        if ones + zeros == 0 {
            dropped += 1;
            continue;
        }
        items.push(ItemPairs {
            item_id: item_id.clone(),
            s: g.score,
            ones,
            zeros,
        });
    }
    if dropped > 0 {
        log::debug!("crowd reference at t={t}: dropped {dropped} items without reference ratings");
    }
    if items.is_empty() {
        return Err(MetricError::EmptyPairSet);
    }
    ReferencePairSet::from_items(table.scale(), ReferenceKind::Crowd, Some(t), "", items)
}
