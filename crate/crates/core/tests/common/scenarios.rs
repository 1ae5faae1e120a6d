//! Simulation studies shared by the property tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand_distr::{Distribution, StandardNormal};
use scaleresp_core::aggregation::AggregationPolicy;
use scaleresp_core::inference::{permutation_test, PermutationResult, ResampleConfig};
use scaleresp_core::pipeline::GroupPipeline;
use scaleresp_core::ratings::{BinaryRecord, RatingRecord, RatingTable};
use scaleresp_core::responsiveness::{metrics, Metric};
use scaleresp_core::rng;
use scaleresp_core::simulation::{
    generate_world, mixed_scores, reference_counts, run_scenarios, score_normal, trained_reference, weighted_confusion,
    Pattern, SimulatedItem, SimulationConfig, World,
};

/// Seed-averaged scenario means of every metric, keyed by pattern then metric name.
pub fn directional_means(k_max: u8, seeds: &[u64]) -> BTreeMap<Pattern, BTreeMap<&'static str, f64>> {
    let mut out: BTreeMap<Pattern, BTreeMap<&'static str, f64>> = BTreeMap::new();
    for &seed in seeds {
        let cfg = SimulationConfig {
            k_max,
            seed,
            bootstrap_trials: 1,
            ..Default::default()
        };
        let report = run_scenarios(&cfg).expect("default config is valid");
        for s in &report.scenarios {
            let m = s.means;
            let named = [
                ("mpa", m.mpa),
                ("wra", m.wra),
                ("hm", m.hm),
                ("tau_b", m.tau_b),
                ("spearman_rho", m.spearman_rho),
                ("auroc", m.auroc),
                ("aucpr", m.aucpr),
            ];
            let row = out.entry(s.pattern).or_default();
            for (name, v) in named {
                *row.entry(name).or_default() += v.expect("defined on simulated data") / seeds.len() as f64;
            }
        }
    }
    out
}

/// Outcome of each directional inequality, in a fixed order.
pub fn directional_checks(m: &BTreeMap<Pattern, BTreeMap<&'static str, f64>>) -> Vec<(String, bool)> {
    let (n, d, c) = (
        &m[&Pattern::Normal],
        &m[&Pattern::DownwardShift],
        &m[&Pattern::Conservative],
    );
    let mut out = vec![
        (
            format!("|mpa_shift - mpa_normal| = {:.4} <= 0.05", (d["mpa"] - n["mpa"]).abs()),
            (d["mpa"] - n["mpa"]).abs() <= 0.05,
        ),
        (
            format!("wra_normal - wra_shift = {:.4} >= 0.1", n["wra"] - d["wra"]),
            n["wra"] - d["wra"] >= 0.1,
        ),
        (
            format!("mpa_normal - mpa_conservative = {:.4} >= 0.1", n["mpa"] - c["mpa"]),
            n["mpa"] - c["mpa"] >= 0.1,
        ),
        (
            format!(
                "|wra_conservative - wra_normal| = {:.4} <= 0.05",
                (c["wra"] - n["wra"]).abs()
            ),
            (c["wra"] - n["wra"]).abs() <= 0.05,
        ),
    ];
    let wra_dir = (d["wra"] - n["wra"]).signum();
    for t in ["tau_b", "spearman_rho", "auroc", "aucpr"] {
        let shift = d[t] - n[t];
        out.push((
            format!("{t}: shift moves {shift:+.4} with wra ({:+.4})", d["wra"] - n["wra"]),
            shift.signum() == wra_dir,
        ));
        let cons = c[t] - n[t];
        out.push((
            format!("{t}: |conservative - normal| = {:.4} <= 0.05", cons.abs()),
            cons.abs() <= 0.05,
        ));
    }
    out
}

pub const PERMUTATION_ITEMS: usize = 2000;
pub const PERMUTATION_GROUP: usize = 10;
pub const PERMUTATION_NOISE: f64 = 0.5;
pub const PERMUTATION_COUNT: usize = 500;

/// One permutation study: two groups of `PERMUTATION_GROUP` raters from one simulated
/// population; with `shift_b` the second group scores under the downward-shift pattern.
pub fn permutation_run(seed: u64, shift_b: bool, metric: Metric) -> PermutationResult {
    let cfg = SimulationConfig {
        n_items: PERMUTATION_ITEMS,
        n_crowd: 2 * PERMUTATION_GROUP,
        perception_noise_sd: PERMUTATION_NOISE,
        seed,
        ..Default::default()
    };
    let world = generate_world(&cfg).expect("valid config");
    let labels = trained_reference(&world.items, &world.trained);
    let scores = mixed_scores(
        &world,
        |j| {
            if shift_b && j >= PERMUTATION_GROUP {
                Pattern::DownwardShift
            } else {
                Pattern::Normal
            }
        },
        &cfg,
    );
    let table = crowd_table(&world, &scores, &cfg);
    let pipeline = GroupPipeline::guideline(&table, &labels, AggregationPolicy::plurality(seed));
    let ids =
        |r: std::ops::Range<usize>| -> BTreeSet<String> { world.crowd[r].iter().map(|c| c.rater_id.clone()).collect() };
    let resample = ResampleConfig {
        permutations: PERMUTATION_COUNT,
        seed,
        ..Default::default()
    };
    permutation_test(
        metric,
        &pipeline,
        &ids(0..PERMUTATION_GROUP),
        &ids(PERMUTATION_GROUP..2 * PERMUTATION_GROUP),
        &resample,
    )
    .expect("well-formed groups")
}

pub fn crowd_table(world: &World, scores: &[Vec<u8>], cfg: &SimulationConfig) -> RatingTable {
    let records = world.crowd.iter().zip(scores).flat_map(|(r, s)| {
        world
            .items
            .iter()
            .zip(s)
            .map(|(it, &x)| RatingRecord::new(it.item_id.clone(), r.rater_id.clone(), x))
    });
    RatingTable::from_records(cfg.scale(), records).expect("simulated scores are on the scale")
}

fn fresh_items(n: usize, seed: u64, replication: u64) -> Vec<SimulatedItem> {
    let mut r = rng::stream(seed, "consistency-items", replication);
    (0..n)
        .map(|i| SimulatedItem {
            item_id: format!("item_{i:06}"),
            v: StandardNormal.sample(&mut r),
        })
        .collect()
}

/// (mpa, wra) of the first crowd rater of `world` against its trained panel on `items`.
fn estimate(world: &World, items: &[SimulatedItem], cfg: &SimulationConfig) -> (f64, f64) {
    let scores = score_normal(items, &world.crowd[0], cfg);
    let labels: Vec<BinaryRecord> = trained_reference(items, &world.trained);
    let sample = World {
        items: items.to_vec(),
        crowd: world.crowd.clone(),
        trained: world.trained.clone(),
    };
    let reference = reference_counts(&sample, &labels);
    let c = weighted_confusion(cfg.scale(), &scores, &reference, &vec![1; items.len()]);
    let m = metrics(&c);
    (m.mpa, m.wra)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation from the large-sample value of (mpa, wra) estimates
/// at each sample size, over `replications` fresh item samples. Raters and trained
/// panel stay fixed.
pub fn consistency_study(sizes: &[usize], replications: u64) -> Vec<(usize, f64, f64)> {
    let cfg = SimulationConfig {
        n_items: 2,
        seed: 17,
        ..Default::default()
    };
    let world = generate_world(&cfg).expect("valid config");
    let (true_mpa, true_wra) = estimate(&world, &fresh_items(400_000, cfg.seed, u64::MAX), &cfg);
    sizes
        .iter()
        .map(|&n| {
            let (dm, dw): (Vec<f64>, Vec<f64>) = (0..replications)
                .map(|r| {
                    let (m, w) = estimate(&world, &fresh_items(n, cfg.seed, r * 1000 + n as u64), &cfg);
                    ((m - true_mpa).abs(), (w - true_wra).abs())
                })
                .unzip();
            (n, median(dm), median(dw))
        })
        .collect()
}
