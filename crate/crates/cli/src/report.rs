//! Report schema, JSON rendering and the flat CSV view.
//!
//! JSON keys follow struct field order; floats are rounded to 9 significant digits and
//! undefined values are `null`.

use std::io::{Read, Write};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use scaleresp_core::aggregation::AggregationPolicy;
use scaleresp_core::baselines::BaselineResult;
use scaleresp_core::inference::ResampleConfig;
use scaleresp_core::reference::ReferenceKind;
use scaleresp_core::responsiveness::Metric;

pub const SCHEMA_VERSION: u32 = 1;

pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub aggregation: AggregationPolicy,
    pub resample: ResampleConfig,
}

impl RunMeta {
    pub fn new(
        command: &'static str,
        config_hash: String,
        aggregation: AggregationPolicy,
        resample: ResampleConfig,
    ) -> Self {
        RunMeta {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash,
            seed: resample.seed,
            aggregation,
            resample,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub k_max: u8,
    pub ratings: usize,
    pub items: usize,
    pub raters: usize,
    pub binary_labels: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Intervals {
    pub trials: usize,
    pub mpa: Option<Interval>,
    pub wra: Option<Interval>,
    pub hm: Option<Interval>,
    /// Why an interval is missing, when one is.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub boundary: u8,
    pub items: usize,
    pub pair_count: u64,
    pub mpa: f64,
    pub wra: f64,
    pub hm: f64,
    pub baselines: BaselineResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub group: String,
    pub reference_kind: ReferenceKind,
    pub tag: Option<String>,
    pub raters: usize,
    pub status: RowStatus,
    pub reason: Option<String>,
    /// Items contributing at least one pair (the largest count over boundaries).
    pub items: usize,
    pub pair_count: u64,
    pub mpa: Option<f64>,
    pub wra: Option<f64>,
    pub hm: Option<f64>,
    pub intervals: Intervals,
    pub baselines: BaselineResult,
    pub boundaries: Vec<BoundaryRow>,
}

impl ReportRow {
    pub fn undefined(
        group: String,
        reference_kind: ReferenceKind,
        tag: Option<String>,
        raters: usize,
        reason: String,
    ) -> Self {
        ReportRow {
            group,
            reference_kind,
            tag,
            raters,
            status: RowStatus::Undefined,
            reason: Some(reason),
            items: 0,
            pair_count: 0,
            mpa: None,
            wra: None,
            hm: None,
            intervals: Intervals::default(),
            baselines: BaselineResult::default(),
            boundaries: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub group_a: String,
    pub group_b: String,
    pub reference_kind: ReferenceKind,
    pub tag: Option<String>,
    pub metric: Metric,
    pub observed_diff: Option<f64>,
    pub p_value: Option<f64>,
    pub permutations: usize,
    /// Significant after Bonferroni correction over every comparison in the report.
    pub significant: Option<bool>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub meta: RunMeta,
    pub inputs: InputSummary,
    pub rows: Vec<ReportRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

pub const CSV_COLUMNS: [&str; 21] = [
    "group",
    "reference_kind",
    "tag",
    "status",
    "raters",
    "items",
    "pair_count",
    "mpa",
    "wra",
    "hm",
    "mpa_lo",
    "mpa_hi",
    "wra_lo",
    "wra_hi",
    "hm_lo",
    "hm_hi",
    "tau_b",
    "tau_a",
    "spearman_rho",
    "auroc",
    "aucpr",
];

/// One line of the CSV report; fields follow [`CSV_COLUMNS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub group: String,
    pub reference_kind: String,
    pub tag: Option<String>,
    pub status: RowStatus,
    pub raters: usize,
    pub items: usize,
    pub pair_count: u64,
    pub mpa: Option<f64>,
    pub wra: Option<f64>,
    pub hm: Option<f64>,
    pub mpa_lo: Option<f64>,
    pub mpa_hi: Option<f64>,
    pub wra_lo: Option<f64>,
    pub wra_hi: Option<f64>,
    pub hm_lo: Option<f64>,
    pub hm_hi: Option<f64>,
    pub tau_b: Option<f64>,
    pub tau_a: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub auroc: Option<f64>,
    pub aucpr: Option<f64>,
}

impl CsvRow {
    pub fn from_row(r: &ReportRow) -> Self {
        let rd = |v: Option<f64>| v.map(round_sig);
        let lo = |i: &Option<Interval>| i.map(|i| round_sig(i.lo));
        let hi = |i: &Option<Interval>| i.map(|i| round_sig(i.hi));
        CsvRow {
            group: r.group.clone(),
            reference_kind: r.reference_kind.to_string(),
            tag: r.tag.clone(),
            status: r.status,
            raters: r.raters,
            items: r.items,
            pair_count: r.pair_count,
            mpa: rd(r.mpa),
            wra: rd(r.wra),
            hm: rd(r.hm),
            mpa_lo: lo(&r.intervals.mpa),
            mpa_hi: hi(&r.intervals.mpa),
            wra_lo: lo(&r.intervals.wra),
            wra_hi: hi(&r.intervals.wra),
            hm_lo: lo(&r.intervals.hm),
            hm_hi: hi(&r.intervals.hm),
            tau_b: rd(r.baselines.tau_b),
            tau_a: rd(r.baselines.tau_a),
            spearman_rho: rd(r.baselines.spearman_rho),
            auroc: rd(r.baselines.auroc),
            aucpr: rd(r.baselines.aucpr),
        }
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(CsvRow::from_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("report row {}", i + 1)))
        .collect()
}
