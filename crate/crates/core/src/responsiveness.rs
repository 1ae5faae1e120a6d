//! Monotonic Precision Area (MPA), Weighted Recall Area (WRA) and their harmonic mean.
//!
//! Both metrics are computed from a [`ScoreConfusion`]: for every scale point `s`, the
//! number of reference instances with `u = 1` and `u = 0` among pairs with score `s`.
//!
//! - `Precision(s) = n1_s / n_s`, undefined when `s` is unused.
//! - `Y_so(s)` adds, over every used score `j < s`, `Precision(s)` minus the running
//!   maximum of the used precisions up to `j`. Unused `s`, or `s` without any used score
//!   below it, give `Y_so(s) = 0`.
//! - `Y_d(s) = P(S < s | U = 0) * P(S = s | U = 1)`, taken as 0 when either class is absent.
//!
//! Each curve gets a terminal `(K + 1, 0)` point and is integrated with the trapezoidal
//! rule over unit spacing. MPA is divided by `ceil((K+1)/2) * floor((K+1)/2)` and clamped
//! below at 0; WRA needs no normalisation.

use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::ratings::LikertScale;
use crate::reference::{ReferenceKind, ReferencePairSet};

/// Per-score counts of reference instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreConfusion {
    scale: LikertScale,
    ones: Vec<u64>,
    zeros: Vec<u64>,
}

impl ScoreConfusion {
    pub fn new(scale: LikertScale) -> Self {
        ScoreConfusion {
            scale,
            ones: vec![0; scale.points()],
            zeros: vec![0; scale.points()],
        }
    }

    pub fn from_counts(scale: LikertScale, ones: Vec<u64>, zeros: Vec<u64>) -> Result<Self, MetricError> {
        if ones.len() != scale.points() || zeros.len() != scale.points() {
            return Err(MetricError::InconsistentPairSets);
        }
        Ok(ScoreConfusion { scale, ones, zeros })
    }

    /// Adds `ones` positive and `zeros` negative instances at score `s`.
    #[inline]
    pub fn add(&mut self, s: u8, ones: u64, zeros: u64) {
        self.ones[s as usize] += ones;
        self.zeros[s as usize] += zeros;
    }

    pub fn scale(&self) -> LikertScale {
        self.scale
    }

    pub fn k_max(&self) -> usize {
        self.scale.k_max() as usize
    }

    pub fn ones(&self) -> &[u64] {
        &self.ones
    }

    pub fn zeros(&self) -> &[u64] {
        &self.zeros
    }

    pub fn n(&self, s: usize) -> u64 {
        self.ones[s] + self.zeros[s]
    }

    pub fn total_ones(&self) -> u64 {
        self.ones.iter().sum()
    }

    pub fn total_zeros(&self) -> u64 {
        self.zeros.iter().sum()
    }

    pub fn pair_count(&self) -> u64 {
        self.total_ones() + self.total_zeros()
    }

    /// `P(U = 1 | S = s)`; `None` when score `s` is unused.
    pub fn precision_at(&self, s: usize) -> Option<f64> {
        let n = self.n(s);
        (n > 0).then(|| self.ones[s] as f64 / n as f64)
    }

    /// `P(S = s | U = 1)`; `None` without positive instances.
    pub fn recall_at(&self, s: usize) -> Option<f64> {
        let u1 = self.total_ones();
        (u1 > 0).then(|| self.ones[s] as f64 / u1 as f64)
    }
}

/// Tabulates a pair set.
pub fn confusion(pairs: &ReferencePairSet) -> Result<ScoreConfusion, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyPairSet);
    }
    let mut c = ScoreConfusion::new(pairs.scale());
    for it in pairs.items() {
        c.add(it.s, it.ones as u64, it.zeros as u64);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Precision,
    Recall,
    YSo,
    YD,
}

impl CurveKind {
    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::Precision => "precision",
            CurveKind::Recall => "recall",
            CurveKind::YSo => "y_so",
            CurveKind::YD => "y_d",
        }
    }
}

/// Curve values at integer scores. `None` marks an undefined point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoints {
    pub kind: CurveKind,
    pub xs: Vec<u32>,
    pub ys: Vec<Option<f64>>,
}

/// Area under unit-spaced points by the trapezoidal rule.
pub fn trapezoid(ys: &[f64]) -> f64 {
    ys.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum()
}

/// Largest attainable MPA area on a `0..=k_max` scale.
pub fn mpa_normalizer(k_max: usize) -> f64 {
    let points = k_max + 1;
    (points.div_ceil(2) * (points / 2)) as f64
}

fn y_so(c: &ScoreConfusion) -> Vec<f64> {
    let k = c.k_max();
    let mut ys = Vec::with_capacity(k + 2);
    // running maxima of the used precisions seen so far, one entry per used score
    let mut running: Vec<f64> = Vec::with_capacity(k + 1);
    let mut current_max = f64::NEG_INFINITY;
    for s in 0..=k {
        let y = match c.precision_at(s) {
            Some(p) if !running.is_empty() => running.iter().map(|m| p - m).sum(),
            _ => 0.0,
        };
        ys.push(y);
        if let Some(p) = c.precision_at(s) {
            current_max = current_max.max(p);
            running.push(current_max);
        }
    }
    ys.push(0.0);
    ys
}

fn y_d(c: &ScoreConfusion) -> Vec<f64> {
    let k = c.k_max();
    let (u1, u0) = (c.total_ones(), c.total_zeros());
    let mut ys = Vec::with_capacity(k + 2);
    let mut zeros_below = 0u64;
    for s in 0..=k {
        let zero_recall_below = if u0 > 0 { zeros_below as f64 / u0 as f64 } else { 0.0 };
        let one_recall_at = if u1 > 0 { c.ones()[s] as f64 / u1 as f64 } else { 0.0 };
        ys.push(zero_recall_below * one_recall_at);
        zeros_below += c.zeros()[s];
    }
    ys.push(0.0);
    ys
}

fn as_curve(kind: CurveKind, ys: Vec<f64>) -> CurvePoints {
    CurvePoints {
        kind,
        xs: (0..ys.len() as u32).collect(),
        ys: ys.into_iter().map(Some).collect(),
    }
}

/// Monotonic Precision Area and its `Y_so` curve (`K + 2` points).
pub fn mpa(c: &ScoreConfusion) -> (f64, CurvePoints) {
    let ys = y_so(c);
    let value = (trapezoid(&ys) / mpa_normalizer(c.k_max())).max(0.0);
    (value, as_curve(CurveKind::YSo, ys))
}

/// Weighted Recall Area and its `Y_d` curve (`K + 2` points).
pub fn wra(c: &ScoreConfusion) -> (f64, CurvePoints) {
    let ys = y_d(c);
    (trapezoid(&ys), as_curve(CurveKind::YD, ys))
}

pub fn precision_curve(c: &ScoreConfusion) -> CurvePoints {
    CurvePoints {
        kind: CurveKind::Precision,
        xs: (0..=c.k_max() as u32).collect(),
        ys: (0..=c.k_max()).map(|s| c.precision_at(s)).collect(),
    }
}

pub fn recall_curve(c: &ScoreConfusion) -> CurvePoints {
    CurvePoints {
        kind: CurveKind::Recall,
        xs: (0..=c.k_max() as u32).collect(),
        ys: (0..=c.k_max()).map(|s| c.recall_at(s)).collect(),
    }
}

/// `2ab / (a + b)`, and 0 when both are 0.
pub fn harmonic_mean(mpa: f64, wra: f64) -> f64 {
    if mpa + wra > 0.0 {
        2.0 * mpa * wra / (mpa + wra)
    } else {
        0.0
    }
}

/// Metric values without curves, for resampling loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitMetrics {
    pub mpa: f64,
    pub wra: f64,
    pub hm: f64,
    pub pair_count: u64,
}

impl UnitMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Mpa => self.mpa,
            Metric::Wra => self.wra,
            Metric::Hm => self.hm,
        }
    }

    /// Unweighted mean of each metric; `pair_count` is the largest count.
    pub fn macro_average(parts: &[UnitMetrics]) -> Option<UnitMetrics> {
        if parts.is_empty() {
            return None;
        }
        let n = parts.len() as f64;
        Some(UnitMetrics {
            mpa: parts.iter().map(|p| p.mpa).sum::<f64>() / n,
            wra: parts.iter().map(|p| p.wra).sum::<f64>() / n,
            hm: parts.iter().map(|p| p.hm).sum::<f64>() / n,
            pair_count: parts.iter().map(|p| p.pair_count).max().unwrap_or(0),
        })
    }
}

/// Which responsiveness metric a comparison or ranking uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mpa,
    Wra,
    Hm,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mpa" => Ok(Metric::Mpa),
            "wra" => Ok(Metric::Wra),
            "hm" => Ok(Metric::Hm),
            other => Err(format!("unknown metric `{other}` (expected mpa, wra or hm)")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Mpa => "mpa",
            Metric::Wra => "wra",
            Metric::Hm => "hm",
        })
    }
}

pub fn metrics(c: &ScoreConfusion) -> UnitMetrics {
    let m = mpa(c).0;
    let w = wra(c).0;
    UnitMetrics {
        mpa: m,
        wra: w,
        hm: harmonic_mean(m, w),
        pair_count: c.pair_count(),
    }
}

/// Metrics and curves of a single pair set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryResult {
    pub boundary: Option<u8>,
    pub mpa: f64,
    pub wra: f64,
    pub hm: f64,
    pub pair_count: u64,
    #[serde(skip)]
    pub curves: Vec<CurvePoints>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponsivenessResult {
    pub reference_kind: ReferenceKind,
    pub mpa: f64,
    pub wra: f64,
    pub hm: f64,
    pub pair_count: u64,
    pub per_boundary: Vec<BoundaryResult>,
}

impl ResponsivenessResult {
    pub fn summary(&self) -> UnitMetrics {
        UnitMetrics {
            mpa: self.mpa,
            wra: self.wra,
            hm: self.hm,
            pair_count: self.pair_count,
        }
    }
}

pub fn evaluate_set(pairs: &ReferencePairSet) -> Result<BoundaryResult, MetricError> {
    let c = confusion(pairs)?;
    let (m, y_so) = mpa(&c);
    let (w, y_d) = wra(&c);
    Ok(BoundaryResult {
        boundary: pairs.boundary().map(|b| b.t()),
        mpa: m,
        wra: w,
        hm: harmonic_mean(m, w),
        pair_count: c.pair_count(),
        curves: vec![precision_curve(&c), recall_curve(&c), y_so, y_d],
    })
}

/// Evaluates one guideline pair set, or macro-averages crowd pair sets over boundaries.
pub fn evaluate_unit(pairs_by_boundary: &[ReferencePairSet]) -> Result<ResponsivenessResult, MetricError> {
    let first = pairs_by_boundary.first().ok_or(MetricError::NoPairSets)?;
    if pairs_by_boundary
        .iter()
        .any(|p| p.kind() != first.kind() || p.scale() != first.scale())
    {
        return Err(MetricError::InconsistentPairSets);
    }
    let per_boundary = pairs_by_boundary
        .iter()
        .map(evaluate_set)
        .collect::<Result<Vec<_>, _>>()?;
    let parts: Vec<UnitMetrics> = per_boundary
        .iter()
        .map(|b| UnitMetrics {
            mpa: b.mpa,
            wra: b.wra,
            hm: b.hm,
            pair_count: b.pair_count,
        })
        .collect();
    let avg = UnitMetrics::macro_average(&parts).expect("non-empty");
    Ok(ResponsivenessResult {
        reference_kind: first.kind(),
        mpa: avg.mpa,
        wra: avg.wra,
        hm: avg.hm,
        pair_count: avg.pair_count,
        per_boundary,
    })
}
