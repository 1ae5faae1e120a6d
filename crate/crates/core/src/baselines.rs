//! Traditional comparison metrics on the same `(S, U)` pairs.
//!
//! Since `S` takes `K + 1` values and `U` two, every rank statistic here is a function of
//! the `2 x (K + 1)` contingency table held by a [`ScoreConfusion`], which makes them
//! `O(K)` once the table is built. [`rank`] has general `O(n log n)` versions for
//! arbitrary paired samples.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::aggregation::GroupScoreTable;
use crate::ratings::RatingTable;
use crate::reference::ReferencePairSet;
use crate::responsiveness::{confusion, ScoreConfusion};

/// Concordant and discordant pair counts between `S` and `U`.
fn concordance(c: &ScoreConfusion) -> (u128, u128) {
    let (mut conc, mut disc) = (0u128, 0u128);
    let (mut zeros_below, mut ones_below) = (0u128, 0u128);
    for s in 0..=c.k_max() {
        conc += c.ones()[s] as u128 * zeros_below;
        disc += c.zeros()[s] as u128 * ones_below;
        zeros_below += c.zeros()[s] as u128;
        ones_below += c.ones()[s] as u128;
    }
    (conc, disc)
}

fn choose2(n: u128) -> u128 {
    n * n.saturating_sub(1) / 2
}

/// Kendall's tau-b. `None` when either marginal is constant.
pub fn tau_b_from(c: &ScoreConfusion) -> Option<f64> {
    let n = c.pair_count() as u128;
    let pairs = choose2(n);
    let ties_s: u128 = (0..=c.k_max()).map(|s| choose2(c.n(s) as u128)).sum();
    let ties_u = choose2(c.total_ones() as u128) + choose2(c.total_zeros() as u128);
    if pairs == ties_s || pairs == ties_u {
        return None;
    }
    let (conc, disc) = concordance(c);
    let denom = (((pairs - ties_s) as f64) * ((pairs - ties_u) as f64)).sqrt();
    Some((conc as f64 - disc as f64) / denom)
}

/// Kendall's tau-a: `(C - D) / (n choose 2)`, without tie correction.
pub fn tau_a_from(c: &ScoreConfusion) -> Option<f64> {
    let pairs = choose2(c.pair_count() as u128);
    if pairs == 0 {
        return None;
    }
    let (conc, disc) = concordance(c);
    Some((conc as f64 - disc as f64) / pairs as f64)
}

/// Spearman's rho as the Pearson correlation of midranks.
pub fn spearman_from(c: &ScoreConfusion) -> Option<f64> {
    let n = c.pair_count() as f64;
    let (u1, u0) = (c.total_ones() as f64, c.total_zeros() as f64);
    let mean = (n + 1.0) / 2.0;
    let rank_u0 = (u0 + 1.0) / 2.0 - mean;
    let rank_u1 = u0 + (u1 + 1.0) / 2.0 - mean;
    let (mut cov, mut var_s) = (0.0, 0.0);
    let mut below = 0.0;
    for s in 0..=c.k_max() {
        let ns = c.n(s) as f64;
        if ns == 0.0 {
            continue;
        }
        let r = below + (ns + 1.0) / 2.0 - mean;
        cov += r * (c.ones()[s] as f64 * rank_u1 + c.zeros()[s] as f64 * rank_u0);
        var_s += ns * r * r;
        below += ns;
    }
    let var_u = u0 * rank_u0 * rank_u0 + u1 * rank_u1 * rank_u1;
    if var_s <= 0.0 || var_u <= 0.0 {
        return None;
    }
    Some(cov / (var_s * var_u).sqrt())
}

/// AUROC as `(wins + ties / 2) / (U1 * U0)`.
pub fn auroc_from(c: &ScoreConfusion) -> Option<f64> {
    let (u1, u0) = (c.total_ones() as u128, c.total_zeros() as u128);
    if u1 == 0 || u0 == 0 {
        return None;
    }
    let (wins, _) = concordance(c);
    let ties: u128 = (0..=c.k_max())
        .map(|s| c.ones()[s] as u128 * c.zeros()[s] as u128)
        .sum();
    Some((wins as f64 + 0.5 * ties as f64) / (u1 as f64 * u0 as f64))
}

/// Empirical ROC points `(FPR, TPR)` for thresholds `S >= s`, from `s = K + 1` down to 0.
pub fn roc_points(c: &ScoreConfusion) -> Option<Vec<(f64, f64)>> {
    let (u1, u0) = (c.total_ones() as f64, c.total_zeros() as f64);
    if u1 == 0.0 || u0 == 0.0 {
        return None;
    }
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for s in (0..=c.k_max()).rev() {
        tp += c.ones()[s];
        fp += c.zeros()[s];
        points.push((fp as f64 / u0, tp as f64 / u1));
    }
    Some(points)
}

/// Trapezoidal area under [`roc_points`].
pub fn auroc_trapezoid(c: &ScoreConfusion) -> Option<f64> {
    let pts = roc_points(c)?;
    Some(
        pts.windows(2)
            .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
            .sum(),
    )
}

/// Non-interpolated average precision over descending score thresholds.
pub fn aucpr_from(c: &ScoreConfusion) -> Option<f64> {
    let u1 = c.total_ones();
    if u1 == 0 {
        return None;
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for s in (0..=c.k_max()).rev() {
        if c.n(s) == 0 {
            continue;
        }
        tp += c.ones()[s];
        fp += c.zeros()[s];
        let recall = tp as f64 / u1 as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

pub fn kendall_tau_b(pairs: &ReferencePairSet) -> Option<f64> {
    confusion(pairs).ok().as_ref().and_then(tau_b_from)
}

pub fn kendall_tau_a(pairs: &ReferencePairSet) -> Option<f64> {
    confusion(pairs).ok().as_ref().and_then(tau_a_from)
}

pub fn spearman_rho(pairs: &ReferencePairSet) -> Option<f64> {
    confusion(pairs).ok().as_ref().and_then(spearman_from)
}

pub fn auroc(pairs: &ReferencePairSet) -> Option<f64> {
    confusion(pairs).ok().as_ref().and_then(auroc_from)
}

pub fn aucpr(pairs: &ReferencePairSet) -> Option<f64> {
    confusion(pairs).ok().as_ref().and_then(aucpr_from)
}

/// Baseline metrics of one pair set; `None` marks a degenerate marginal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BaselineResult {
    pub tau_b: Option<f64>,
    pub tau_a: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub auroc: Option<f64>,
    pub aucpr: Option<f64>,
}

pub fn baselines_from(c: &ScoreConfusion) -> BaselineResult {
    BaselineResult {
        tau_b: tau_b_from(c),
        tau_a: tau_a_from(c),
        spearman_rho: spearman_from(c),
        auroc: auroc_from(c),
        aucpr: aucpr_from(c),
    }
}

pub fn baselines(pairs: &ReferencePairSet) -> BaselineResult {
    match confusion(pairs) {
        Ok(c) => baselines_from(&c),
        Err(_) => BaselineResult::default(),
    }
}

impl BaselineResult {
    /// Field-wise mean over the parts where each field is defined in every part.
    pub fn macro_average(parts: &[BaselineResult]) -> BaselineResult {
        fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
            let v: Option<Vec<f64>> = values.collect();
            v.filter(|v| !v.is_empty())
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        }
        BaselineResult {
            tau_b: mean(parts.iter().map(|p| p.tau_b)),
            tau_a: mean(parts.iter().map(|p| p.tau_a)),
            spearman_rho: mean(parts.iter().map(|p| p.spearman_rho)),
            auroc: mean(parts.iter().map(|p| p.auroc)),
            aucpr: mean(parts.iter().map(|p| p.aucpr)),
        }
    }
}

/// Per-item mean score of the raters outside `evaluated_raters`.
pub fn rest_scores(table: &RatingTable, evaluated_raters: &BTreeSet<String>) -> BTreeMap<String, f64> {
    let excluded = table.rater_mask(evaluated_raters);
    let mut out = BTreeMap::new();
    for (i, item) in table.items().iter().enumerate() {
        let (mut sum, mut n) = (0u64, 0u64);
        for e in table.ratings_for_item(i) {
            if !excluded[e.rater as usize] {
                sum += e.score as u64;
                n += 1;
            }
        }
        if n > 0 {
            out.insert(item.clone(), sum as f64 / n as f64);
        }
    }
    out
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n
}

/// Unit-versus-rest scalability coefficient `cov(S, R) / cov_max(S, R)`, where `cov_max`
/// pairs both variables in ascending order.
pub fn mokken_h(unit_scores: &GroupScoreTable, rest_scores: &BTreeMap<String, f64>) -> Option<f64> {
    let (s, r): (Vec<f64>, Vec<f64>) = unit_scores
        .entries
        .iter()
        .filter_map(|(item, g)| rest_scores.get(item).map(|&r| (g.score as f64, r)))
        .unzip();
    mokken_h_values(&s, &r)
}

/// [`mokken_h`] on paired slices.
pub fn mokken_h_values(s: &[f64], r: &[f64]) -> Option<f64> {
    if s.len() < 2 || s.len() != r.len() {
        return None;
    }
    let mut s_sorted = s.to_vec();
    let mut r_sorted = r.to_vec();
    s_sorted.sort_by(f64::total_cmp);
    r_sorted.sort_by(f64::total_cmp);
    let cov_max = covariance(&s_sorted, &r_sorted);
    if cov_max <= 1e-15 {
        return None;
    }
    Some(covariance(s, r) / cov_max)
}

/// General rank statistics for arbitrary paired samples.
pub mod rank {
    /// Midranks (1-based, ties averaged) of `x`.
    pub fn midranks<T: PartialOrd>(x: &[T]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("comparable values"));
        let mut ranks = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let r = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = r;
            }
            i = j + 1;
        }
        ranks
    }

    pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len() as f64;
        if x.len() < 2 || x.len() != y.len() {
            return None;
        }
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        if sxx <= 0.0 || syy <= 0.0 {
            return None;
        }
        Some(sxy / (sxx * syy).sqrt())
    }

    pub fn spearman<T: PartialOrd, U: PartialOrd>(x: &[T], y: &[U]) -> Option<f64> {
        pearson(&midranks(x), &midranks(y))
    }

    fn tie_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
        let mut total = 0u64;
        let mut run = 1u64;
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    }

    /// Sorts `v` in place and returns the number of inversions (merge sort).
    fn sort_counting_swaps<T: Ord + Copy>(v: &mut [T], buf: &mut Vec<T>) -> u64 {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut swaps = sort_counting_swaps(&mut v[..mid], buf) + sort_counting_swaps(&mut v[mid..], buf);
        buf.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            if v[j] < v[i] {
                buf.push(v[j]);
                swaps += (mid - i) as u64;
                j += 1;
            } else {
                buf.push(v[i]);
                i += 1;
            }
        }
        buf.extend_from_slice(&v[i..mid]);
        buf.extend_from_slice(&v[j..n]);
        v.copy_from_slice(buf);
        swaps
    }

    /// Kendall's tau-b in `O(n log n)` (Knight's algorithm). `None` when either sample
    /// is constant or shorter than 2.
    pub fn tau_b<T: Ord + Copy, U: Ord + Copy>(x: &[T], y: &[U]) -> Option<f64> {
        let n = x.len() as u64;
        if x.len() != y.len() || n < 2 {
            return None;
        }
        let mut pairs: Vec<(T, U)> = x.iter().copied().zip(y.iter().copied()).collect();
        pairs.sort();
        let n0 = n * (n - 1) / 2;
        let xs: Vec<T> = pairs.iter().map(|p| p.0).collect();
        let ties_x = tie_pairs(&xs);
        let ties_xy = tie_pairs(&pairs);
        let mut ys: Vec<U> = pairs.iter().map(|p| p.1).collect();
        let mut buf = Vec::with_capacity(ys.len());
        let swaps = sort_counting_swaps(&mut ys, &mut buf);
        let ties_y = tie_pairs(&ys);
        if n0 == ties_x || n0 == ties_y {
            return None;
        }
        // concordant - discordant = n0 - ties_x - ties_y + ties_xy - 2 * swaps
        let num = n0 as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64 - 2.0 * swaps as f64;
        Some(num / (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt())
    }
}
