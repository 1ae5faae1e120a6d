//! Synthetic rater populations for comparing responsiveness metrics.
//!
//! Items carry a latent severity `V ~ N(0, 1)`; crowd rater `j` perceives
//! `V + b_j (+ optional noise)` with `b_j ~ N(0, sigma_b^2)` and scores it under one of
//! three patterns:
//!
//! - normal: `K` thresholds at the equal-probability quantiles of the rater's own
//!   perception marginal, so every score is used about equally often;
//! - downward shift: normal scores in `2..=K` are lowered by one with probability
//!   `shift_proportion`;
//! - conservative: items perceived above the rater's `conservative_quantile` get a
//!   uniform random score in `1..=K`, all others get 0.
//!
//! Trained raters label an item 1 when its severity lies above their personal
//! percentile `p_j`, drawn from a normal distribution truncated to `[50, 90]`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baselines::baselines_from;
use crate::error::MetricError;
use crate::inference::{bootstrap_items, IntervalResult, ResampleConfig};
use crate::ratings::{BinaryRecord, LikertScale, RatingRecord, RatingTable};
use crate::responsiveness::{metrics, ScoreConfusion};
use crate::rng;

pub const TRAINED_PERCENTILE_RANGE: [f64; 2] = [50.0, 90.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_items: usize,
    pub n_crowd: usize,
    pub n_trained: usize,
    pub k_max: u8,
    /// Spread of rater tendencies `b_j`.
    pub sigma_b: f64,
    pub shift_proportion: f64,
    pub conservative_quantile: f64,
    pub trained_percentile_mean: f64,
    pub trained_percentile_sd: f64,
    pub trained_percentile_range: [f64; 2],
    /// Standard deviation of per-(rater, item) perception noise; 0 gives step response
    /// functions.
    pub perception_noise_sd: f64,
    pub bootstrap_trials: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_items: 1000,
            n_crowd: 30,
            n_trained: 30,
            k_max: 4,
            sigma_b: 0.5,
            shift_proportion: 0.5,
            conservative_quantile: 0.7,
            trained_percentile_mean: 70.0,
            trained_percentile_sd: 10.0,
            trained_percentile_range: TRAINED_PERCENTILE_RANGE,
            perception_noise_sd: 0.0,
            bootstrap_trials: 100,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    // Negated comparisons reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |m: &str| Err(MetricError::InvalidConfig(m.to_string()));
        if self.n_items < 2 || self.n_crowd < 1 || self.n_trained < 1 {
            return bad("need at least 2 items, 1 crowd rater and 1 trained rater");
        }
        if self.k_max < 1 {
            return bad("k_max must be >= 1");
        }
        if !(self.sigma_b >= 0.0) || !(self.perception_noise_sd >= 0.0) {
            return bad("sigma_b and perception_noise_sd must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.shift_proportion) {
            return bad("shift_proportion must lie in [0, 1]");
        }
        if !(self.conservative_quantile > 0.0 && self.conservative_quantile < 1.0) {
            return bad("conservative_quantile must lie in (0, 1)");
        }
        if self.trained_percentile_range != TRAINED_PERCENTILE_RANGE {
            return bad("trained_percentile_range is fixed to [50, 90]");
        }
        let [lo, hi] = TRAINED_PERCENTILE_RANGE;
        if !(lo..=hi).contains(&self.trained_percentile_mean) || !(self.trained_percentile_sd >= 0.0) {
            return bad("trained percentile mean must lie in [50, 90] and sd must be >= 0");
        }
        if self.bootstrap_trials < 1 {
            return bad("bootstrap_trials must be >= 1");
        }
        Ok(())
    }

    pub fn scale(&self) -> LikertScale {
        LikertScale::new(self.k_max as i64).expect("k_max validated")
    }

    fn perception_sd(&self) -> f64 {
        (1.0 + self.perception_noise_sd * self.perception_noise_sd).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedItem {
    pub item_id: String,
    /// Latent severity.
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedRater {
    pub rater_id: String,
    pub index: usize,
    /// Additive perception tendency.
    pub b: f64,
    /// Ascending normal-pattern thresholds; the score is the number strictly below the
    /// perceived severity.
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedRater {
    pub rater_id: String,
    /// Percentile of the severity sample below which this rater labels items safe.
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub items: Vec<SimulatedItem>,
    pub crowd: Vec<SimulatedRater>,
    pub trained: Vec<TrainedRater>,
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len()
}

/// Draws items, crowd raters and trained raters from the keyed generator of `cfg.seed`.
pub fn generate_world(cfg: &SimulationConfig) -> Result<World, MetricError> {
    cfg.validate()?;
    let mut r = rng::stream(cfg.seed, "severity", 0);
    let w = width(cfg.n_items);
    let items = (0..cfg.n_items)
        .map(|i| SimulatedItem {
            item_id: format!("item_{i:0w$}"),
            v: StandardNormal.sample(&mut r),
        })
        .collect();

    let mut r = rng::stream(cfg.seed, "tendency", 0);
    let sd = cfg.perception_sd();
    let k = cfg.k_max as usize;
    let w = width(cfg.n_crowd);
    let crowd = (0..cfg.n_crowd)
        .map(|j| {
            let z: f64 = StandardNormal.sample(&mut r);
            let b = cfg.sigma_b * z;
            let marginal = Normal::new(b, sd).expect("finite parameters");
            SimulatedRater {
                rater_id: format!("crowd_{j:0w$}"),
                index: j,
                b,
                thresholds: (1..=k)
                    .map(|q| marginal.inverse_cdf(q as f64 / (k + 1) as f64))
                    .collect(),
            }
        })
        .collect();

    let mut r = rng::stream(cfg.seed, "percentile", 0);
    let [lo, hi] = TRAINED_PERCENTILE_RANGE;
    let w = width(cfg.n_trained);
    let trained = (0..cfg.n_trained)
        .map(|j| {
            let percentile = loop {
                let z: f64 = StandardNormal.sample(&mut r);
                let p = cfg.trained_percentile_mean + cfg.trained_percentile_sd * z;
                if (lo..=hi).contains(&p) {
                    break p;
                }
            };
            TrainedRater {
                rater_id: format!("trained_{j:0w$}"),
                percentile,
            }
        })
        .collect();
    Ok(World { items, crowd, trained })
}

/// Perceived severities `V_i + b_j (+ noise)` of one rater.
pub fn perceive(items: &[SimulatedItem], rater: &SimulatedRater, cfg: &SimulationConfig) -> Vec<f64> {
    if cfg.perception_noise_sd == 0.0 {
        return items.iter().map(|it| it.v + rater.b).collect();
    }
    let mut r = rng::stream(cfg.seed, "perception", rater.index as u64);
    items
        .iter()
        .map(|it| {
            let e: f64 = StandardNormal.sample(&mut r);
            it.v + rater.b + cfg.perception_noise_sd * e
        })
        .collect()
}

pub fn score_normal(items: &[SimulatedItem], rater: &SimulatedRater, cfg: &SimulationConfig) -> Vec<u8> {
    perceive(items, rater, cfg)
        .into_iter()
        .map(|v| rater.thresholds.iter().filter(|&&t| t < v).count() as u8)
        .collect()
}

/// Lowers each score in `2..=K` by one with probability `shift_proportion`.
pub fn apply_downward_shift(scores: &[u8], rater: &SimulatedRater, cfg: &SimulationConfig) -> Vec<u8> {
    let mut r = rng::stream(cfg.seed, "downward-shift", rater.index as u64);
    scores
        .iter()
        .map(|&s| {
            let u: f64 = r.random();
            if s >= 2 && u < cfg.shift_proportion {
                s - 1
            } else {
                s
            }
        })
        .collect()
}

/// Uniform scores in `1..=K` above the rater's conservative quantile, 0 elsewhere.
pub fn apply_conservative(items: &[SimulatedItem], rater: &SimulatedRater, cfg: &SimulationConfig) -> Vec<u8> {
    let cutoff = Normal::new(rater.b, cfg.perception_sd())
        .expect("finite parameters")
        .inverse_cdf(cfg.conservative_quantile);
    let mut r = rng::stream(cfg.seed, "conservative", rater.index as u64);
    perceive(items, rater, cfg)
        .into_iter()
        .map(|v| {
            let draw = r.random_range(1..=cfg.k_max);
            if v > cutoff {
                draw
            } else {
                0
            }
        })
        .collect()
}

/// Nearest-rank percentile threshold of `sorted` (ascending).
fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Trained labels: 1 iff the item's severity exceeds the rater's percentile threshold.
pub fn trained_reference(items: &[SimulatedItem], trained: &[TrainedRater]) -> Vec<BinaryRecord> {
    let mut sorted: Vec<f64> = items.iter().map(|i| i.v).collect();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(items.len() * trained.len());
    for t in trained {
        let threshold = nearest_rank(&sorted, t.percentile);
        for it in items {
            out.push(BinaryRecord::new(
                it.item_id.clone(),
                t.rater_id.clone(),
                it.v > threshold,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Normal,
    DownwardShift,
    Conservative,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::Normal, Pattern::DownwardShift, Pattern::Conservative];

    pub fn name(&self) -> &'static str {
        match self {
            Pattern::Normal => "normal",
            Pattern::DownwardShift => "downward_shift",
            Pattern::Conservative => "conservative",
        }
    }
}

/// Scores of one crowd rater under `pattern`.
pub fn score_with(
    items: &[SimulatedItem],
    rater: &SimulatedRater,
    pattern: Pattern,
    cfg: &SimulationConfig,
) -> Vec<u8> {
    match pattern {
        Pattern::Normal => score_normal(items, rater, cfg),
        Pattern::DownwardShift => apply_downward_shift(&score_normal(items, rater, cfg), rater, cfg),
        Pattern::Conservative => apply_conservative(items, rater, cfg),
    }
}

/// Scores of every crowd rater under `pattern`, indexed `[rater][item]`.
pub fn pattern_scores(world: &World, pattern: Pattern, cfg: &SimulationConfig) -> Vec<Vec<u8>> {
    mixed_scores(world, |_| pattern, cfg)
}

/// Scores of every crowd rater under the pattern `assign` picks for its index.
pub fn mixed_scores<F>(world: &World, assign: F, cfg: &SimulationConfig) -> Vec<Vec<u8>>
where
    F: Fn(usize) -> Pattern + Sync,
{
    world
        .crowd
        .par_iter()
        .map(|rater| score_with(&world.items, rater, assign(rater.index), cfg))
        .collect()
}

/// Crowd scores of one pattern as a rating table.
pub fn scenario_table(world: &World, scores: &[Vec<u8>], cfg: &SimulationConfig) -> RatingTable {
    let records = world.crowd.iter().zip(scores).flat_map(|(rater, s)| {
        world
            .items
            .iter()
            .zip(s)
            .map(|(it, &score)| RatingRecord::new(it.item_id.clone(), rater.rater_id.clone(), score))
    });
    RatingTable::from_records(cfg.scale(), records).expect("simulated scores lie on the scale")
}

/// The seven compared metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricSet<T> {
    pub mpa: T,
    pub wra: T,
    pub hm: T,
    pub tau_b: T,
    pub spearman_rho: T,
    pub auroc: T,
    pub aucpr: T,
}

impl<T: Copy> MetricSet<T> {
    fn to_vec(self) -> Vec<T> {
        vec![
            self.mpa,
            self.wra,
            self.hm,
            self.tau_b,
            self.spearman_rho,
            self.auroc,
            self.aucpr,
        ]
    }

    fn from_vec(v: &[T]) -> Self {
        MetricSet {
            mpa: v[0],
            wra: v[1],
            hm: v[2],
            tau_b: v[3],
            spearman_rho: v[4],
            auroc: v[5],
            aucpr: v[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaterMetrics {
    pub rater_id: String,
    #[serde(flatten)]
    pub metrics: MetricSet<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub pattern: Pattern,
    /// Means over raters (each metric over the raters where it is defined).
    pub means: MetricSet<Option<f64>>,
    /// Item-bootstrap intervals of the means.
    pub ci: MetricSet<Option<IntervalResult>>,
    pub score_histogram: Vec<u64>,
    pub per_rater: Vec<RaterMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub config: SimulationConfig,
    pub scenarios: Vec<ScenarioResult>,
}

impl ScenarioReport {
    pub fn scenario(&self, pattern: Pattern) -> &ScenarioResult {
        self.scenarios
            .iter()
            .find(|s| s.pattern == pattern)
            .expect("all patterns are run")
    }
}

/// Guideline reference counts per item: (labels 1, labels 0).
pub fn reference_counts(world: &World, labels: &[BinaryRecord]) -> Vec<(u32, u32)> {
    let index: BTreeMap<&str, usize> = world
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.item_id.as_str(), i))
        .collect();
    let mut counts = vec![(0u32, 0u32); world.items.len()];
    for b in labels {
        let c = &mut counts[index[b.item_id.as_str()]];
        if b.label == 1 {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    counts
}

/// Confusion of one rater's scores against item-level reference counts, each item
/// replicated `weights[i]` times.
pub fn weighted_confusion(
    scale: LikertScale,
    scores: &[u8],
    reference: &[(u32, u32)],
    weights: &[u32],
) -> ScoreConfusion {
    let mut c = ScoreConfusion::new(scale);
    for ((&s, &(ones, zeros)), &w) in scores.iter().zip(reference).zip(weights) {
        if w > 0 {
            c.add(s, ones as u64 * w as u64, zeros as u64 * w as u64);
        }
    }
    c
}

fn rater_metrics(c: &ScoreConfusion) -> MetricSet<Option<f64>> {
    let m = metrics(c);
    let b = baselines_from(c);
    MetricSet {
        mpa: Some(m.mpa),
        wra: Some(m.wra),
        hm: Some(m.hm),
        tau_b: b.tau_b,
        spearman_rho: b.spearman_rho,
        auroc: b.auroc,
        aucpr: b.aucpr,
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn means(per_rater: &[MetricSet<Option<f64>>]) -> MetricSet<Option<f64>> {
    let columns: Vec<Option<f64>> = (0..7)
        .map(|k| mean_defined(per_rater.iter().map(|m| m.to_vec()[k])))
        .collect();
    MetricSet::from_vec(&columns)
}

/// Metrics of every crowd rater against the trained reference, for one pattern.
pub fn evaluate_pattern(
    world: &World,
    pattern: Pattern,
    reference: &[(u32, u32)],
    cfg: &SimulationConfig,
) -> ScenarioResult {
    let scale = cfg.scale();
    let scores = pattern_scores(world, pattern, cfg);
    let ones = vec![1u32; world.items.len()];
    let per_rater_metrics: Vec<MetricSet<Option<f64>>> = scores
        .iter()
        .map(|s| rater_metrics(&weighted_confusion(scale, s, reference, &ones)))
        .collect();
    let resample = ResampleConfig {
        bootstrap_trials: cfg.bootstrap_trials,
        seed: cfg.seed,
        ..ResampleConfig::default()
    };
    let intervals = bootstrap_items(world.items.len(), &resample, |weights| {
        let per: Vec<_> = scores
            .iter()
            .map(|s| rater_metrics(&weighted_confusion(scale, s, reference, weights)))
            .collect();
        means(&per).to_vec()
    })
    .expect("validated configuration");
    let ci: Vec<Option<IntervalResult>> = intervals.into_iter().map(Result::ok).collect();
    let mut score_histogram = vec![0u64; scale.points()];
    scores.iter().flatten().for_each(|&s| score_histogram[s as usize] += 1);
    ScenarioResult {
        pattern,
        means: means(&per_rater_metrics),
        ci: MetricSet::from_vec(&ci),
        score_histogram,
        per_rater: world
            .crowd
            .iter()
            .zip(per_rater_metrics)
            .map(|(r, metrics)| RaterMetrics {
                rater_id: r.rater_id.clone(),
                metrics,
            })
            .collect(),
    }
}

/// Runs all three scoring patterns on one generated world.
pub fn run_scenarios(cfg: &SimulationConfig) -> Result<ScenarioReport, MetricError> {
    let world = generate_world(cfg)?;
    let labels = trained_reference(&world.items, &world.trained);
    let reference = reference_counts(&world, &labels);
    let scenarios = Pattern::ALL
        .iter()
        .map(|&p| evaluate_pattern(&world, p, &reference, cfg))
        .collect();
    Ok(ScenarioReport {
        config: cfg.clone(),
        scenarios,
    })
}
