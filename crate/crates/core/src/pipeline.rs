//! Aggregate → reference → metric for a rater subset, with the reference side
//! precomputed once per table.
//!
//! Permutation tests and rater rankings re-run the whole chain for many rater subsets.
//! [`GroupPipeline`] walks the table's item-major layout directly and accumulates a
//! [`ScoreConfusion`] per boundary without materialising pair sets. Its output equals
//! the [`aggregate`](crate::aggregation::aggregate) + [`guideline_pairs`] /
//! [`crowd_pairs`] + [`evaluate_unit`] route.
//!
//! [`guideline_pairs`]: crate::reference::guideline_pairs
//! [`crowd_pairs`]: crate::reference::crowd_pairs
//! [`evaluate_unit`]: crate::responsiveness::evaluate_unit

use std::collections::BTreeSet;

use crate::aggregation::{score_from_histogram, AggregationPolicy};
use crate::error::MetricError;
use crate::ratings::{BinaryRecord, RatingTable};
use crate::reference::{all_boundaries, Boundary, ReferenceKind};
use crate::responsiveness::{metrics, ScoreConfusion, UnitMetrics};

enum Prepared {
    Guideline {
        ones: Vec<u32>,
        zeros: Vec<u32>,
    },
    Crowd {
        boundaries: Vec<Boundary>,
        totals: Vec<u32>,
    },
}

pub struct GroupPipeline<'a> {
    table: &'a RatingTable,
    policy: AggregationPolicy,
    prepared: Prepared,
}

impl<'a> GroupPipeline<'a> {
    /// Guideline-based reference from trained-rater labels.
    pub fn guideline(table: &'a RatingTable, binary: &[BinaryRecord], policy: AggregationPolicy) -> Self {
        let n = table.items().len();
        let (mut ones, mut zeros) = (vec![0u32; n], vec![0u32; n]);
        for b in binary {
            if let Some(i) = table.item_index(&b.item_id) {
                if b.label == 1 {
                    ones[i] += 1;
                } else {
                    zeros[i] += 1;
                }
            }
        }
        GroupPipeline {
            table,
            policy,
            prepared: Prepared::Guideline { ones, zeros },
        }
    }

    /// Crowd-based reference over every boundary `1..=K`, excluding the evaluated raters.
    pub fn crowd(table: &'a RatingTable, policy: AggregationPolicy) -> Self {
        let points = table.scale().points();
        let mut totals = vec![0u32; table.items().len() * points];
        for i in 0..table.items().len() {
            for e in table.ratings_for_item(i) {
                totals[i * points + e.score as usize] += 1;
            }
        }
        GroupPipeline {
            table,
            policy,
            prepared: Prepared::Crowd {
                boundaries: all_boundaries(table.scale()),
                totals,
            },
        }
    }

    pub fn table(&self) -> &RatingTable {
        self.table
    }

    pub fn kind(&self) -> ReferenceKind {
        match self.prepared {
            Prepared::Guideline { .. } => ReferenceKind::Guideline,
            Prepared::Crowd { .. } => ReferenceKind::Crowd,
        }
    }

    /// One confusion per boundary (a single one for the guideline reference).
    pub fn confusions(&self, mask: &[bool]) -> Result<Vec<(Option<Boundary>, ScoreConfusion)>, MetricError> {
        let table = self.table;
        let scale = table.scale();
        let points = scale.points();
        let mut hist = vec![0u32; points];
        match &self.prepared {
            Prepared::Guideline { ones, zeros } => {
                let mut c = ScoreConfusion::new(scale);
                for i in 0..table.items().len() {
                    if ones[i] + zeros[i] == 0 {
                        continue;
                    }
                    hist.iter_mut().for_each(|h| *h = 0);
                    for e in table.ratings_for_item(i) {
                        if mask[e.rater as usize] {
                            hist[e.score as usize] += 1;
                        }
                    }
                    if let Some(g) = score_from_histogram(&hist, table.item_hash(i), &self.policy) {
                        c.add(g.score, ones[i] as u64, zeros[i] as u64);
                    }
                }
                if c.pair_count() == 0 {
                    return Err(MetricError::NoSharedItems);
                }
                Ok(vec![(None, c)])
            }
            Prepared::Crowd { boundaries, totals } => {
                if mask.iter().all(|&m| m) {
                    return Err(MetricError::EmptyReferencePopulation);
                }
                let mut out: Vec<ScoreConfusion> = boundaries.iter().map(|_| ScoreConfusion::new(scale)).collect();
                let mut rest = vec![0u32; points];
                for i in 0..table.items().len() {
                    hist.iter_mut().for_each(|h| *h = 0);
                    for e in table.ratings_for_item(i) {
                        if mask[e.rater as usize] {
                            hist[e.score as usize] += 1;
                        }
                    }
                    let Some(g) = score_from_histogram(&hist, table.item_hash(i), &self.policy) else {
                        continue;
                    };
                    let row = &totals[i * points..(i + 1) * points];
                    for k in 0..points {
                        rest[k] = row[k] - hist[k];
                    }
                    let total_rest: u32 = rest.iter().sum();
                    if total_rest == 0 {
                        continue;
                    }
                    // boundaries are 1..=K; walking down accumulates rest[t..]
                    let mut at_or_above = 0u32;
                    for (b, c) in boundaries.iter().zip(out.iter_mut()).rev() {
                        at_or_above += rest[b.t() as usize];
                        c.add(g.score, at_or_above as u64, (total_rest - at_or_above) as u64);
                    }
                }
                if out[0].pair_count() == 0 {
                    return Err(MetricError::EmptyPairSet);
                }
                Ok(boundaries.iter().map(|&b| Some(b)).zip(out).collect())
            }
        }
    }

    /// Macro-averaged responsiveness of the raters flagged in `mask`.
    pub fn evaluate_mask(&self, mask: &[bool]) -> Result<UnitMetrics, MetricError> {
        let parts: Vec<UnitMetrics> = self.confusions(mask)?.iter().map(|(_, c)| metrics(c)).collect();
        UnitMetrics::macro_average(&parts).ok_or(MetricError::NoPairSets)
    }

    pub fn evaluate(&self, raters: &BTreeSet<String>) -> Result<UnitMetrics, MetricError> {
        if raters.is_empty() {
            return Err(MetricError::EmptyRaterSet);
        }
        self.evaluate_mask(&self.table.rater_mask(raters))
    }
}
