//! Orchestration of the subcommands over loaded inputs.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use scaleresp_core::aggregation::{aggregate, AggregationPolicy};
use scaleresp_core::baselines::{baselines_from, BaselineResult};
use scaleresp_core::inference::{bootstrap_ci_sets_multi, permutation_test, ResampleConfig};
use scaleresp_core::pipeline::GroupPipeline;
use scaleresp_core::ratings::{
    load_attributes, load_binary, load_items, load_ratings, AttributeTable, BinaryRecord, GroupKey, ItemTable,
    LikertScale, RatingTable,
};
use scaleresp_core::reference::{all_boundaries, crowd_pairs, guideline_pairs, ReferenceKind, ReferencePairSet};
use scaleresp_core::responsiveness::{confusion, evaluate_unit, Metric};
use scaleresp_core::{DataError, MetricError};

use crate::config::{parse_keys, GroupsSpec, LoadedConfig, ReferenceChoice, TagFilter};
use crate::report::{BoundaryRow, ComparisonRow, InputSummary, Interval, Intervals, ReportRow, RowStatus};

/// A load or validation failure tied to an input file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub file: Option<PathBuf>,
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{}: ", file.display())?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for Diagnostic {}

impl Diagnostic {
    fn from_data(file: &Path, e: DataError) -> Self {
        Diagnostic {
            file: Some(file.to_path_buf()),
            line: e.line(),
            message: e.to_string(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Diagnostic {
            file: None,
            line: None,
            message: message.into(),
        }
    }
}

fn load_one<T>(
    cfg: &LoadedConfig,
    relative: &Path,
    errors: &mut Vec<Diagnostic>,
    load: impl FnOnce(&Path) -> Result<T, DataError>,
) -> Option<T> {
    load(&cfg.resolve(relative))
        .map_err(|e| errors.push(Diagnostic::from_data(relative, e)))
        .ok()
}

pub struct Inputs {
    pub table: RatingTable,
    pub binary: Option<Vec<BinaryRecord>>,
    pub attributes: Option<AttributeTable>,
    pub items: Option<ItemTable>,
}

impl Inputs {
    /// Loads every configured input, collecting one diagnostic per failing file.
    pub fn load(cfg: &LoadedConfig) -> Result<Self, Vec<Diagnostic>> {
        let c = &cfg.config;
        let mut errors = Vec::new();
        let scale = match LikertScale::new(c.k_max) {
            Ok(s) => Some(s),
            Err(e) => {
                errors.push(Diagnostic::general(e.to_string()));
                None
            }
        };
        let table = scale.and_then(|scale| load_one(cfg, &c.inputs.ratings, &mut errors, |p| load_ratings(p, scale)));
        let binary = c
            .inputs
            .binary
            .as_ref()
            .and_then(|b| load_one(cfg, b, &mut errors, |p| load_binary(p)));
        let attributes = c
            .inputs
            .attributes
            .as_ref()
            .and_then(|a| load_one(cfg, a, &mut errors, |p| load_attributes(p)));
        let items = c
            .inputs
            .items
            .as_ref()
            .and_then(|i| load_one(cfg, i, &mut errors, |p| load_items(p)));
        match table {
            Some(table) if errors.is_empty() => Ok(Inputs {
                table,
                binary,
                attributes,
                items,
            }),
            _ => Err(errors),
        }
    }

    pub fn summary(&self) -> InputSummary {
        let s = self.table.summary();
        InputSummary {
            k_max: self.table.scale().k_max(),
            ratings: s.rows,
            items: s.items,
            raters: s.raters,
            binary_labels: self.binary.as_ref().map(Vec::len),
        }
    }

    /// Raters of `key` that have at least one rating.
    pub fn group_raters(&self, key: &GroupKey) -> Result<BTreeSet<String>, DataError> {
        if key.is_all() {
            return Ok(self.table.raters().iter().cloned().collect());
        }
        let selected = match &self.attributes {
            Some(a) => a.select(key)?,
            None => return Err(DataError::UnknownAxis(key.selectors()[0].0.clone())),
        };
        Ok(selected
            .into_iter()
            .filter(|r| self.table.rater_index(r).is_some())
            .collect())
    }

    /// The table restricted to items carrying `filter`.
    pub fn tagged_table(&self, filter: &TagFilter) -> RatingTable {
        let keep = self
            .items
            .as_ref()
            .map(|t| t.matching(&filter.tag, &filter.value))
            .unwrap_or_default();
        self.table.filter_items(|id| keep.contains(id))
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedGroup {
    pub key: GroupKey,
    pub raters: BTreeSet<String>,
}

pub fn resolve_groups(cfg: &LoadedConfig, inputs: &Inputs) -> Result<Vec<ResolvedGroup>, Diagnostic> {
    let keys = match &cfg.config.groups {
        GroupsSpec::Explicit(keys) => parse_keys(keys).map_err(|e| Diagnostic::general(format!("{e:#}")))?,
        GroupsSpec::Combinations { combinations_over } => inputs
            .attributes
            .as_ref()
            .ok_or_else(|| Diagnostic::general("combinations need an attributes input"))?
            .combinations(combinations_over)
            .map_err(|e| Diagnostic::general(e.to_string()))?,
    };
    keys.into_iter()
        .map(|key| {
            let raters = inputs
                .group_raters(&key)
                .map_err(|e| Diagnostic::general(format!("group `{key}`: {e}")))?;
            Ok(ResolvedGroup { key, raters })
        })
        .collect()
}

pub fn reference_kinds(choice: ReferenceChoice) -> Vec<ReferenceKind> {
    match choice {
        ReferenceChoice::Guideline => vec![ReferenceKind::Guideline],
        ReferenceChoice::Crowd => vec![ReferenceKind::Crowd],
        ReferenceChoice::Both => vec![ReferenceKind::Guideline, ReferenceKind::Crowd],
    }
}

/// Reference pair sets of one group: a single guideline set, or one crowd set per boundary.
pub fn pair_sets(
    table: &RatingTable,
    binary: Option<&[BinaryRecord]>,
    raters: &BTreeSet<String>,
    kind: ReferenceKind,
    policy: &AggregationPolicy,
) -> Result<Vec<ReferencePairSet>, String> {
    if raters.is_empty() {
        return Err("group has no raters with ratings".into());
    }
    let scores = aggregate(table, raters, policy).map_err(|e| e.to_string())?;
    let sets = match kind {
        ReferenceKind::Guideline => {
            let binary = binary.ok_or("no binary reference labels configured")?;
            vec![guideline_pairs(&scores, binary).map_err(|e| e.to_string())?]
        }
        ReferenceKind::Crowd => all_boundaries(table.scale())
            .into_iter()
            .map(|b| crowd_pairs(table, raters, &scores, b))
            .collect::<Result<Vec<_>, MetricError>>()
            .map_err(|e| e.to_string())?,
    };
    Ok(sets)
}

fn interval(r: &Result<scaleresp_core::inference::IntervalResult, MetricError>) -> Option<Interval> {
    r.as_ref().ok().map(|i| Interval { lo: i.lo, hi: i.hi })
}

/// One report row; failures become an undefined row carrying the reason.
pub fn evaluate_row(
    table: &RatingTable,
    binary: Option<&[BinaryRecord]>,
    group: &ResolvedGroup,
    kind: ReferenceKind,
    tag: Option<&TagFilter>,
    policy: &AggregationPolicy,
    resample: &ResampleConfig,
) -> ReportRow {
    let label = group.key.to_string();
    let tag_label = tag.map(TagFilter::label);
    let undefined =
        |reason: String| ReportRow::undefined(label.clone(), kind, tag_label.clone(), group.raters.len(), reason);
    let sets = match pair_sets(table, binary, &group.raters, kind, policy) {
        Ok(s) => s,
        Err(reason) => return undefined(reason),
    };
    let result = match evaluate_unit(&sets) {
        Ok(r) => r,
        Err(e) => return undefined(e.to_string()),
    };
    let per_set_baselines: Vec<BaselineResult> = sets
        .iter()
        .map(|s| confusion(s).map(|c| baselines_from(&c)).unwrap_or_default())
        .collect();
    let boundaries = match kind {
        ReferenceKind::Guideline => Vec::new(),
        ReferenceKind::Crowd => result
            .per_boundary
            .iter()
            .zip(&sets)
            .zip(&per_set_baselines)
            .map(|((b, set), base)| BoundaryRow {
                boundary: b.boundary.expect("crowd sets carry a boundary"),
                items: distinct_items(set),
                pair_count: b.pair_count,
                mpa: b.mpa,
                wra: b.wra,
                hm: b.hm,
                baselines: *base,
            })
            .collect(),
    };
    let intervals = match bootstrap_ci_sets_multi(
        |s| match evaluate_unit(s) {
            Ok(r) => vec![Some(r.mpa), Some(r.wra), Some(r.hm)],
            Err(_) => vec![None; 3],
        },
        &sets,
        resample,
    ) {
        Ok(cis) => {
            let note = cis.iter().find_map(|c| c.as_ref().err()).map(|e| e.to_string());
            Intervals {
                trials: resample.bootstrap_trials,
                mpa: interval(&cis[0]),
                wra: interval(&cis[1]),
                hm: interval(&cis[2]),
                note,
            }
        }
        Err(e) => Intervals {
            trials: resample.bootstrap_trials,
            note: Some(e.to_string()),
            ..Default::default()
        },
    };
    ReportRow {
        group: label,
        reference_kind: kind,
        tag: tag_label,
        raters: group.raters.len(),
        status: RowStatus::Ok,
        reason: None,
        items: sets.iter().map(distinct_items).max().unwrap_or(0),
        pair_count: result.pair_count,
        mpa: Some(result.mpa),
        wra: Some(result.wra),
        hm: Some(result.hm),
        intervals,
        baselines: BaselineResult::macro_average(&per_set_baselines),
        boundaries,
    }
}

fn distinct_items(set: &ReferencePairSet) -> usize {
    let ids: BTreeSet<&str> = set.items().iter().map(|i| i.item_id.as_str()).collect();
    ids.len()
}

/// The item views to analyse: the full table, then one per tag filter.
pub fn views<'a>(inputs: &Inputs, filters: &'a [TagFilter]) -> Vec<(Option<&'a TagFilter>, RatingTable)> {
    std::iter::once((None, inputs.table.clone()))
        .chain(filters.iter().map(|f| (Some(f), inputs.tagged_table(f))))
        .collect()
}

/// Every (group, reference, tag) row, in configuration order.
pub fn metrics_rows(cfg: &LoadedConfig, inputs: &Inputs, groups: &[ResolvedGroup]) -> Vec<ReportRow> {
    let c = &cfg.config;
    let views = views(inputs, &c.filters);
    let kinds = reference_kinds(c.reference_kind);
    let mut jobs = Vec::new();
    for g in groups {
        for &k in &kinds {
            for (vi, _) in views.iter().enumerate() {
                jobs.push((g, k, vi));
            }
        }
    }
    let binary = inputs.binary.as_deref();
    jobs.par_iter()
        .map(|&(g, k, vi)| {
            let (tag, table) = &views[vi];
            evaluate_row(table, binary, g, k, *tag, &c.aggregation, &c.resample)
        })
        .collect()
}

/// Permutation test of `metric` between two groups for every reference and tag view.
pub fn compare_groups(
    cfg: &LoadedConfig,
    inputs: &Inputs,
    a: &ResolvedGroup,
    b: &ResolvedGroup,
    metric: Metric,
) -> Vec<ComparisonRow> {
    let c = &cfg.config;
    let mut out = Vec::new();
    for (tag, table) in views(inputs, &c.filters) {
        for kind in reference_kinds(c.reference_kind) {
            let mut row = ComparisonRow {
                group_a: a.key.to_string(),
                group_b: b.key.to_string(),
                reference_kind: kind,
                tag: tag.map(TagFilter::label),
                metric,
                observed_diff: None,
                p_value: None,
                permutations: 0,
                significant: None,
                reason: None,
            };
            let pipeline = match (kind, inputs.binary.as_deref()) {
                (ReferenceKind::Guideline, Some(binary)) => {
                    Some(GroupPipeline::guideline(&table, binary, c.aggregation))
                }
                (ReferenceKind::Guideline, None) => None,
                (ReferenceKind::Crowd, _) => Some(GroupPipeline::crowd(&table, c.aggregation)),
            };
            match pipeline {
                None => row.reason = Some("no binary reference labels configured".into()),
                Some(p) => match permutation_test(metric, &p, &a.raters, &b.raters, &c.resample) {
                    Ok(r) => {
                        row.observed_diff = Some(r.observed_diff);
                        row.p_value = Some(r.p_value);
                        row.permutations = r.permutations;
                    }
                    Err(e) => row.reason = Some(e.to_string()),
                },
            }
            out.push(row);
        }
    }
    out
}

/// Marks each comparison significant at `alpha` after Bonferroni correction over all of them.
pub fn apply_bonferroni(rows: &mut [ComparisonRow], alpha: f64) {
    let tests = rows.iter().filter(|r| r.p_value.is_some()).count().max(1);
    for r in rows {
        r.significant = r.p_value.map(|p| p < alpha / tests as f64);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectedRater {
    pub rank: usize,
    pub rater_id: String,
    pub mpa: f64,
    pub wra: f64,
    pub hm: f64,
    pub pair_count: u64,
    /// Another rater in the group has the same hm.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnrankedRater {
    pub rater_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSelection {
    pub group: String,
    pub raters: usize,
    pub requested: usize,
    /// Fewer ranked raters than requested.
    pub shortfall: bool,
    pub selected: Vec<SelectedRater>,
    pub unranked: Vec<UnrankedRater>,
}

const TIE_TOLERANCE: f64 = 1e-12;

/// Ranks each rater of `group` by hm against the crowd reference formed by everyone else.
pub fn select_raters(
    table: &RatingTable,
    group: &ResolvedGroup,
    per_group: usize,
    policy: AggregationPolicy,
) -> GroupSelection {
    let pipeline = GroupPipeline::crowd(table, policy);
    let raters: Vec<&String> = group.raters.iter().collect();
    let evaluated: Vec<_> = raters
        .par_iter()
        .map(|r| (*r, pipeline.evaluate(&BTreeSet::from([(*r).clone()]))))
        .collect();
    let mut ranked = Vec::new();
    let mut unranked = Vec::new();
    for (r, m) in evaluated {
        match m {
            Ok(m) => ranked.push((r.clone(), m)),
            Err(e) => unranked.push(UnrankedRater {
                rater_id: r.clone(),
                reason: e.to_string(),
            }),
        }
    }
    ranked.sort_by(|a, b| b.1.hm.total_cmp(&a.1.hm).then_with(|| a.0.cmp(&b.0)));
    let mut take = per_group.min(ranked.len());
    if take > 0 {
        let cut = ranked[take - 1].1.hm;
        while take < ranked.len() && (ranked[take].1.hm - cut).abs() <= TIE_TOLERANCE {
            take += 1;
        }
    }
    let tied = |i: usize| {
        ranked
            .iter()
            .enumerate()
            .any(|(j, o)| j != i && (o.1.hm - ranked[i].1.hm).abs() <= TIE_TOLERANCE)
    };
    let selected = (0..take)
        .map(|i| SelectedRater {
            rank: i + 1,
            rater_id: ranked[i].0.clone(),
            mpa: ranked[i].1.mpa,
            wra: ranked[i].1.wra,
            hm: ranked[i].1.hm,
            pair_count: ranked[i].1.pair_count,
            tie: tied(i),
        })
        .collect();
    GroupSelection {
        group: group.key.to_string(),
        raters: group.raters.len(),
        requested: per_group,
        shortfall: ranked.len() < per_group,
        selected,
        unranked,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCoverage {
    pub group: String,
    pub raters: usize,
    pub items_rated: usize,
    pub ratings: usize,
}

pub fn coverage(table: &RatingTable, group: &ResolvedGroup) -> GroupCoverage {
    let mask = table.rater_mask(&group.raters);
    let (mut items, mut ratings) = (0, 0);
    for i in 0..table.items().len() {
        let n = table
            .ratings_for_item(i)
            .iter()
            .filter(|e| mask[e.rater as usize])
            .count();
        ratings += n;
        items += usize::from(n > 0);
    }
    GroupCoverage {
        group: group.key.to_string(),
        raters: group.raters.len(),
        items_rated: items,
        ratings,
    }
}
