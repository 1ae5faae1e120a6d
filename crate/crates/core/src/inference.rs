//! Item-level bootstrap intervals, rater-level permutation tests and macro averaging.
//!
//! Replicate `i` of any driver draws from [`rng::stream`]`(seed, domain, i)`, so results
//! are identical for any number of worker threads.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::pipeline::GroupPipeline;
use crate::reference::ReferencePairSet;
use crate::responsiveness::Metric;
use crate::rng;

/// Share of undefined replicates above which an interval is reported as undefined.
pub const MAX_UNDEFINED_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleConfig {
    pub bootstrap_trials: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            bootstrap_trials: 100,
            permutations: 1000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.bootstrap_trials < 1 {
            return Err(MetricError::InvalidConfig("bootstrap_trials must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MetricError::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Percentile bootstrap interval around the full-data point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalResult {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermutationResult {
    pub observed_diff: f64,
    pub p_value: f64,
    /// Permutations on which the statistic was defined for both groups.
    pub permutations: usize,
}

impl PermutationResult {
    /// Whether the result survives a Bonferroni correction over `tests` comparisons.
    pub fn bonferroni_significant(&self, alpha: f64, tests: usize) -> bool {
        self.p_value < alpha / tests.max(1) as f64
    }
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Multiplicity of each of `n_items` in bootstrap replicate `trial`.
pub fn replicate_weights(n_items: usize, seed: u64, trial: usize) -> Vec<u32> {
    let mut r = rng::stream(seed, "bootstrap", trial as u64);
    let mut weights = vec![0u32; n_items];
    for _ in 0..n_items {
        weights[r.random_range(0..n_items as u32) as usize] += 1;
    }
    weights
}

/// Bootstrap over `n_items` resampling units for several statistics at once.
///
/// `stats` maps a weight vector (multiplicity per unit) to one value per statistic;
/// the all-ones vector gives the point estimates. Each statistic gets its own interval,
/// or [`MetricError::TooManyUndefined`] when it is undefined on more than 20% of replicates.
pub fn bootstrap_items<F>(
    n_items: usize,
    cfg: &ResampleConfig,
    stats: F,
) -> Result<Vec<Result<IntervalResult, MetricError>>, MetricError>
where
    F: Fn(&[u32]) -> Vec<Option<f64>> + Sync,
{
    cfg.validate()?;
    if n_items == 0 {
        return Err(MetricError::EmptyPairSet);
    }
    let point = stats(&vec![1u32; n_items]);
    let replicates: Vec<Vec<Option<f64>>> = (0..cfg.bootstrap_trials)
        .into_par_iter()
        .map(|trial| stats(&replicate_weights(n_items, cfg.seed, trial)))
        .collect();
    Ok(point
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let p = p.ok_or(MetricError::UndefinedPoint)?;
            let mut values: Vec<f64> = replicates.iter().filter_map(|r| r[k]).collect();
            let undefined = cfg.bootstrap_trials - values.len();
            if undefined as f64 > MAX_UNDEFINED_SHARE * cfg.bootstrap_trials as f64 {
                return Err(MetricError::TooManyUndefined {
                    undefined,
                    trials: cfg.bootstrap_trials,
                });
            }
            values.sort_by(f64::total_cmp);
            Ok(IntervalResult {
                point: p,
                lo: quantile(&values, cfg.alpha / 2.0),
                hi: quantile(&values, 1.0 - cfg.alpha / 2.0),
                trials: cfg.bootstrap_trials,
            })
        })
        .collect())
}

/// Bootstrap interval of `metric` over pair sets sharing one item universe (for example
/// one crowd pair set per boundary). Items are resampled jointly across all sets: every
/// pair of a drawn item enters the replicate together.
pub fn bootstrap_ci_sets<F>(
    metric: F,
    sets: &[ReferencePairSet],
    cfg: &ResampleConfig,
) -> Result<IntervalResult, MetricError>
where
    F: Fn(&[ReferencePairSet]) -> Option<f64> + Sync,
{
    let many = bootstrap_ci_sets_multi(|s| vec![metric(s)], sets, cfg)?;
    many.into_iter().next().expect("one statistic")
}

/// [`bootstrap_ci_sets`] for several statistics sharing the same replicates.
pub fn bootstrap_ci_sets_multi<F>(
    metrics: F,
    sets: &[ReferencePairSet],
    cfg: &ResampleConfig,
) -> Result<Vec<Result<IntervalResult, MetricError>>, MetricError>
where
    F: Fn(&[ReferencePairSet]) -> Vec<Option<f64>> + Sync,
{
    if sets.is_empty() {
        return Err(MetricError::NoPairSets);
    }
    let universe: BTreeSet<&str> = sets
        .iter()
        .flat_map(|s| s.items().iter().map(|i| i.item_id.as_str()))
        .collect();
    let position: BTreeMap<&str, usize> = universe.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let maps: Vec<Vec<usize>> = sets
        .iter()
        .map(|s| s.items().iter().map(|i| position[i.item_id.as_str()]).collect())
        .collect();
    bootstrap_items(universe.len(), cfg, |weights| {
        let replica: Vec<ReferencePairSet> = sets
            .iter()
            .zip(&maps)
            .map(|(set, map)| {
                let w: Vec<u32> = map.iter().map(|&u| weights[u]).collect();
                set.reweighted(&w)
            })
            .collect();
        metrics(&replica)
    })
}

/// Bootstrap interval of `metric` on one pair set, resampling items.
pub fn bootstrap_ci<F>(metric: F, pairs: &ReferencePairSet, cfg: &ResampleConfig) -> Result<IntervalResult, MetricError>
where
    F: Fn(&ReferencePairSet) -> Option<f64> + Sync,
{
    bootstrap_ci_sets(|s| metric(&s[0]), std::slice::from_ref(pairs), cfg)
}

/// Two-sided permutation test of `statistic(a) - statistic(b)` that exchanges whole
/// raters between the groups, keeping group sizes.
///
/// `statistic` receives a membership mask over `table` rater indices (length `n_raters`).
pub fn permutation_test_with<F>(
    n_raters: usize,
    group_a: &[u32],
    group_b: &[u32],
    cfg: &ResampleConfig,
    statistic: F,
) -> Result<PermutationResult, MetricError>
where
    F: Fn(&[bool]) -> Option<f64> + Sync,
{
    cfg.validate()?;
    if group_a.is_empty() || group_b.is_empty() {
        return Err(MetricError::InsufficientRaters(
            "each group needs at least one rater with ratings".into(),
        ));
    }
    let mask_of = |members: &[u32]| {
        let mut m = vec![false; n_raters];
        members.iter().for_each(|&r| m[r as usize] = true);
        m
    };
    let diff = |a: &[u32], b: &[u32]| -> Option<f64> { Some(statistic(&mask_of(a))? - statistic(&mask_of(b))?) };
    let observed = diff(group_a, group_b).ok_or(MetricError::UndefinedPoint)?;
    let pool: Vec<u32> = group_a.iter().chain(group_b).copied().collect();
    let na = group_a.len();
    let diffs: Vec<Option<f64>> = (0..cfg.permutations)
        .into_par_iter()
        .map(|i| {
            let mut shuffled = pool.clone();
            shuffled.shuffle(&mut rng::stream(cfg.seed, "permutation", i as u64));
            diff(&shuffled[..na], &shuffled[na..])
        })
        .collect();
    let tolerance = 1e-12 * observed.abs().max(1.0);
    let defined: Vec<f64> = diffs.into_iter().flatten().collect();
    let extreme = defined.iter().filter(|d| d.abs() >= observed.abs() - tolerance).count();
    Ok(PermutationResult {
        observed_diff: observed,
        p_value: (1 + extreme) as f64 / (1 + defined.len()) as f64,
        permutations: defined.len(),
    })
}

/// Permutation test of a responsiveness metric between two disjoint rater groups; every
/// permutation re-runs aggregation, reference construction and metric evaluation.
pub fn permutation_test(
    metric: Metric,
    pipeline: &GroupPipeline<'_>,
    group_a: &BTreeSet<String>,
    group_b: &BTreeSet<String>,
    cfg: &ResampleConfig,
) -> Result<PermutationResult, MetricError> {
    if let Some(shared) = group_a.intersection(group_b).next() {
        return Err(MetricError::OverlappingGroups(shared.clone()));
    }
    let table = pipeline.table();
    let indices = |g: &BTreeSet<String>| -> Vec<u32> { g.iter().filter_map(|r| table.rater_index(r)).collect() };
    let (a, b) = (indices(group_a), indices(group_b));
    permutation_test_with(table.raters().len(), &a, &b, cfg, |mask| {
        pipeline.evaluate_mask(mask).ok().map(|m| m.get(metric))
    })
}

/// Arithmetic mean, optionally weighted.
pub fn macro_average(results: &[f64], weights: Option<&[f64]>) -> Result<f64, MetricError> {
    if results.is_empty() {
        return Err(MetricError::EmptyAverage);
    }
    match weights {
        None => Ok(results.iter().sum::<f64>() / results.len() as f64),
        Some(w) => {
            let total: f64 = w.iter().sum();
            if w.len() != results.len() || total <= 0.0 {
                return Err(MetricError::InvalidConfig(
                    "weights must match results and sum to > 0".into(),
                ));
            }
            Ok(results.iter().zip(w).map(|(r, w)| r * w).sum::<f64>() / total)
        }
    }
}
