//! Subcommand implementations. Each returns the process exit status.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use scaleresp_core::ratings::{write_binary, write_ratings, GroupKey};
use scaleresp_core::reference::ReferenceKind;
use scaleresp_core::responsiveness::{evaluate_set, CurveKind, Metric};
use scaleresp_core::simulation::{
    generate_world, pattern_scores, run_scenarios, scenario_table, trained_reference, Pattern, ScenarioReport,
    SimulationConfig,
};

use crate::analysis::{
    apply_bonferroni, compare_groups, coverage, metrics_rows, pair_sets, reference_kinds, resolve_groups,
    select_raters, views, Diagnostic, GroupCoverage, GroupSelection, Inputs, ResolvedGroup,
};
use crate::config::{InputPaths, LoadedConfig, ReferenceChoice, RunConfig};
use crate::curves::{curves_csv, render_svg};
use crate::report::{self, ComparisonRow, InputSummary, MetricsReport, RowStatus, RunMeta, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_WARNINGS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Global {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// An input problem reported on stderr before exiting with status 2.
#[derive(Debug)]
pub struct InputFailure(pub Vec<Diagnostic>);

impl std::fmt::Display for InputFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lines: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", lines.join("\n"))
    }
}

impl std::error::Error for InputFailure {}

fn input_failure(message: impl Into<String>) -> anyhow::Error {
    InputFailure(vec![Diagnostic::general(message)]).into()
}

fn load_config(g: &Global) -> Result<LoadedConfig> {
    let path = g.config.as_ref().ok_or_else(|| input_failure("--config is required"))?;
    let mut cfg = LoadedConfig::load(path).map_err(|e| input_failure(format!("{e:#}")))?;
    if let Some(seed) = g.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn out_dir(g: &Global, cfg: Option<&LoadedConfig>) -> Result<PathBuf> {
    let dir = match (
        &g.out,
        cfg.and_then(|c| c.config.output_dir.as_ref().map(|d| c.resolve(d))),
    ) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d,
        (None, None) => PathBuf::from("scaleresp-out"),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn load_inputs(cfg: &LoadedConfig) -> Result<(Inputs, Vec<ResolvedGroup>)> {
    let inputs = Inputs::load(cfg).map_err(InputFailure)?;
    let groups = resolve_groups(cfg, &inputs).map_err(|d| InputFailure(vec![d]))?;
    Ok((inputs, groups))
}

fn empty_group_warnings(groups: &[ResolvedGroup]) -> Vec<String> {
    groups
        .iter()
        .filter(|g| g.raters.is_empty())
        .map(|g| format!("group `{}` has no raters with ratings", g.key))
        .collect()
}

fn status(warnings: &[String]) -> i32 {
    for w in warnings {
        warn!("{w}");
    }
    if warnings.is_empty() {
        EXIT_OK
    } else {
        EXIT_WARNINGS
    }
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    schema_version: u32,
    status: &'static str,
    errors: Vec<Diagnostic>,
    warnings: Vec<String>,
    inputs: Option<InputSummary>,
    coverage: Vec<GroupCoverage>,
    references: Option<ReferenceAvailability>,
}

#[derive(Debug, Serialize)]
struct ReferenceAvailability {
    guideline_labels: Option<usize>,
    guideline_items_shared: Option<usize>,
    crowd_raters: usize,
}

/// Loads everything and prints machine-readable diagnostics to stdout.
pub fn validate(g: &Global) -> Result<i32> {
    let mut report = ValidationReport {
        schema_version: SCHEMA_VERSION,
        status: "ok",
        errors: Vec::new(),
        warnings: Vec::new(),
        inputs: None,
        coverage: Vec::new(),
        references: None,
    };
    let outcome = load_config(g).and_then(|cfg| load_inputs(&cfg).map(|(i, gs)| (cfg, i, gs)));
    match outcome {
        Err(e) => {
            report.errors = match e.downcast::<InputFailure>() {
                Ok(InputFailure(d)) => d,
                Err(e) => vec![Diagnostic::general(format!("{e:#}"))],
            };
        }
        Ok((cfg, inputs, groups)) => {
            report.warnings = empty_group_warnings(&groups);
            let table = &inputs.table;
            if let Some(binary) = &inputs.binary {
                let labelled: BTreeSet<&str> = binary.iter().map(|b| b.item_id.as_str()).collect();
                let unknown = labelled.iter().filter(|i| table.item_index(i).is_none()).count();
                if unknown > 0 {
                    report
                        .warnings
                        .push(format!("{unknown} labelled items have no ratings"));
                }
            }
            if let Some(attrs) = &inputs.attributes {
                let known: BTreeSet<&str> = attrs.raters.iter().map(|r| r.rater_id.as_str()).collect();
                let missing = table.raters().iter().filter(|r| !known.contains(r.as_str())).count();
                if missing > 0 {
                    report.warnings.push(format!("{missing} raters have no attribute row"));
                }
            }
            for (tag, view) in views(&inputs, &cfg.config.filters) {
                if let (Some(tag), true) = (tag, view.is_empty()) {
                    report
                        .warnings
                        .push(format!("filter `{}` matches no rated items", tag.label()));
                }
            }
            report.references = Some(ReferenceAvailability {
                guideline_labels: inputs.binary.as_ref().map(Vec::len),
                guideline_items_shared: inputs.binary.as_ref().map(|b| {
                    let ids: BTreeSet<&str> = b
                        .iter()
                        .map(|r| r.item_id.as_str())
                        .filter(|i| table.item_index(i).is_some())
                        .collect();
                    ids.len()
                }),
                crowd_raters: table.raters().len(),
            });
            if inputs.binary.is_none() && cfg.config.reference_kind == ReferenceChoice::Both {
                report
                    .warnings
                    .push("no binary input: guideline rows will be undefined".into());
            }
            report.coverage = groups.iter().map(|gr| coverage(table, gr)).collect();
            report.inputs = Some(inputs.summary());
        }
    }
    let code = if !report.errors.is_empty() {
        report.status = "errors";
        EXIT_INPUT
    } else if !report.warnings.is_empty() {
        report.status = "warnings";
        EXIT_WARNINGS
    } else {
        EXIT_OK
    };
    print!("{}", report::to_json(&report)?);
    Ok(code)
}

fn meta(command: &'static str, cfg: &LoadedConfig) -> RunMeta {
    RunMeta::new(command, cfg.hash(), cfg.config.aggregation, cfg.config.resample)
}

fn find_group(groups: &[ResolvedGroup], inputs: &Inputs, key: &str) -> Result<ResolvedGroup> {
    let key: GroupKey = key
        .parse()
        .map_err(|e| input_failure(format!("group key `{key}`: {e}")))?;
    if let Some(g) = groups.iter().find(|g| g.key == key) {
        return Ok(g.clone());
    }
    let raters = inputs
        .group_raters(&key)
        .map_err(|e| input_failure(format!("group `{key}`: {e}")))?;
    Ok(ResolvedGroup { key, raters })
}

fn run_comparisons(cfg: &LoadedConfig, inputs: &Inputs, groups: &[ResolvedGroup]) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for c in &cfg.config.comparisons {
        let a = find_group(groups, inputs, &c.group_a)?;
        let b = find_group(groups, inputs, &c.group_b)?;
        rows.extend(compare_groups(cfg, inputs, &a, &b, c.metric));
    }
    apply_bonferroni(&mut rows, cfg.config.resample.alpha);
    Ok(rows)
}

/// Per-group metrics for every configured reference and tag, as JSON and CSV.
pub fn metrics(g: &Global) -> Result<i32> {
    let cfg = load_config(g)?;
    let (inputs, groups) = load_inputs(&cfg)?;
    let rows = metrics_rows(&cfg, &inputs, &groups);
    let comparisons = run_comparisons(&cfg, &inputs, &groups)?;
    let mut warnings = empty_group_warnings(&groups);
    for r in rows.iter().filter(|r| r.status == RowStatus::Undefined) {
        warnings.push(format!(
            "row ({}, {}, {}) undefined: {}",
            r.group,
            r.reference_kind,
            r.tag.as_deref().unwrap_or("all items"),
            r.reason.as_deref().unwrap_or("")
        ));
    }
    let report = MetricsReport {
        schema_version: SCHEMA_VERSION,
        meta: meta("metrics", &cfg),
        inputs: inputs.summary(),
        rows,
        comparisons,
        warnings: warnings.clone(),
    };
    let dir = out_dir(g, Some(&cfg))?;
    write(&dir.join("report.json"), &report::to_json(&report)?)?;
    let mut csv = Vec::new();
    report::write_csv(&report.rows, &mut csv)?;
    write(&dir.join("report.csv"), &String::from_utf8(csv)?)?;
    Ok(status(&warnings))
}

#[derive(Debug, Serialize)]
struct CompareReport {
    schema_version: u32,
    meta: RunMeta,
    comparisons: Vec<ComparisonRow>,
}

/// Permutation test between two groups, printed and written as `compare.json`.
pub fn compare(g: &Global, group_a: &str, group_b: &str, metric: Metric) -> Result<i32> {
    let cfg = load_config(g)?;
    let (inputs, groups) = load_inputs(&cfg)?;
    let a = find_group(&groups, &inputs, group_a)?;
    let b = find_group(&groups, &inputs, group_b)?;
    let mut rows = compare_groups(&cfg, &inputs, &a, &b, metric);
    apply_bonferroni(&mut rows, cfg.config.resample.alpha);
    let warnings: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            r.reason
                .as_ref()
                .map(|why| format!("{} reference: {why}", r.reference_kind))
        })
        .collect();
    let report = CompareReport {
        schema_version: SCHEMA_VERSION,
        meta: meta("compare", &cfg),
        comparisons: rows,
    };
    let json = report::to_json(&report)?;
    write(&out_dir(g, Some(&cfg))?.join("compare.json"), &json)?;
    print!("{json}");
    Ok(status(&warnings))
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Precision, recall, `Y_so` and `Y_d` points per group and reference, as CSV and SVG.
pub fn curves(g: &Global, group: Option<&str>) -> Result<i32> {
    let cfg = load_config(g)?;
    let (inputs, groups) = load_inputs(&cfg)?;
    let selected = match group {
        Some(key) => vec![find_group(&groups, &inputs, key)?],
        None => groups,
    };
    let dir = out_dir(g, Some(&cfg))?.join("curves");
    fs::create_dir_all(&dir)?;
    let mut warnings = Vec::new();
    for kind in reference_kinds(cfg.config.reference_kind) {
        let mut series = Vec::new();
        for grp in &selected {
            let sets = match pair_sets(
                &inputs.table,
                inputs.binary.as_deref(),
                &grp.raters,
                kind,
                &cfg.config.aggregation,
            ) {
                Ok(s) => s,
                Err(why) => {
                    warnings.push(format!("curves for `{}` ({kind}) skipped: {why}", grp.key));
                    continue;
                }
            };
            for set in &sets {
                let result = evaluate_set(set).map_err(|e| anyhow!(e))?;
                let suffix = set.boundary().map(|b| format!("_t{}", b.t())).unwrap_or_default();
                let name = format!("{}_{kind}{suffix}", slug(&grp.key.to_string()));
                write(&dir.join(format!("{name}.csv")), &curves_csv(&result.curves))?;
                let label = match set.boundary() {
                    Some(b) => format!("{} (t={})", grp.key, b.t()),
                    None => grp.key.to_string(),
                };
                series.push((label, result.curves));
            }
        }
        if series.is_empty() {
            continue;
        }
        for (i, curve_kind) in [CurveKind::Precision, CurveKind::Recall, CurveKind::YSo, CurveKind::YD]
            .into_iter()
            .enumerate()
        {
            let lines: Vec<(String, &_)> = series.iter().map(|(l, c)| (l.clone(), &c[i])).collect();
            let title = format!("{} ({kind} reference)", curve_kind.name());
            write(
                &dir.join(format!("{}_{kind}.svg", curve_kind.name())),
                &render_svg(curve_kind, &title, &lines),
            )?;
        }
    }
    Ok(status(&warnings))
}

#[derive(Debug, Serialize)]
struct SimulationOutput<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    #[serde(flatten)]
    report: &'a ScenarioReport,
}

/// Synthetic scenario datasets plus `scenario_metrics.json`.
pub fn simulate(g: &Global) -> Result<i32> {
    let mut sim: SimulationConfig = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| input_failure(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| input_failure(format!("{}: {e}", path.display())))?
        }
        None => SimulationConfig::default(),
    };
    if let Some(seed) = g.seed {
        sim.seed = seed;
    }
    sim.validate().map_err(|e| input_failure(e.to_string()))?;
    let dir = out_dir(g, None)?;
    let world = generate_world(&sim)?;
    let labels = trained_reference(&world.items, &world.trained);
    let mut binary = Vec::new();
    write_binary(&labels, &mut binary)?;
    write(&dir.join("binary.csv"), &String::from_utf8(binary)?)?;
    for pattern in Pattern::ALL {
        let pdir = dir.join(pattern.name());
        fs::create_dir_all(&pdir)?;
        let table = scenario_table(&world, &pattern_scores(&world, pattern, &sim), &sim);
        let mut ratings = Vec::new();
        write_ratings(&table, &mut ratings)?;
        write(&pdir.join("ratings.csv"), &String::from_utf8(ratings)?)?;
        let run = RunConfig {
            inputs: InputPaths {
                ratings: "ratings.csv".into(),
                binary: Some("../binary.csv".into()),
                attributes: None,
                items: None,
            },
            k_max: sim.k_max as i64,
            groups: Default::default(),
            reference_kind: ReferenceChoice::Both,
            aggregation: Default::default(),
            resample: Default::default(),
            filters: Vec::new(),
            comparisons: Vec::new(),
            select_per_group: 5,
            output_dir: None,
        };
        write(
            &pdir.join("run.json"),
            &format!("{}\n", serde_json::to_string_pretty(&run)?),
        )?;
    }
    let report = run_scenarios(&sim)?;
    let hash = hex::encode(Sha256::digest(serde_json::to_vec(&sim)?));
    let out = SimulationOutput {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "simulate",
        config_hash: hash,
        report: &report,
    };
    write(&dir.join("scenario_metrics.json"), &report::to_json(&out)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SelectionReport {
    schema_version: u32,
    meta: RunMeta,
    reference_kind: ReferenceKind,
    per_group: usize,
    groups: Vec<GroupSelection>,
    warnings: Vec<String>,
}

/// Top raters by hm within each group, against the crowd reference.
pub fn select(g: &Global, per_group: Option<usize>) -> Result<i32> {
    let cfg = load_config(g)?;
    let (inputs, groups) = load_inputs(&cfg)?;
    let n = per_group.unwrap_or(cfg.config.select_per_group);
    if n == 0 {
        return Err(input_failure("--per-group must be at least 1"));
    }
    let mut warnings = Vec::new();
    let mut selections = Vec::new();
    for grp in &groups {
        if grp.raters.is_empty() {
            warnings.push(format!("group `{}` has no raters; skipped", grp.key));
            continue;
        }
        let s = select_raters(&inputs.table, grp, n, cfg.config.aggregation);
        if s.shortfall {
            warnings.push(format!(
                "group `{}` has {} rankable raters, fewer than {n}",
                s.group,
                s.selected.len()
            ));
        }
        selections.push(s);
    }
    let report = SelectionReport {
        schema_version: SCHEMA_VERSION,
        meta: meta("select-raters", &cfg),
        reference_kind: ReferenceKind::Crowd,
        per_group: n,
        groups: selections,
        warnings: warnings.clone(),
    };
    write(
        &out_dir(g, Some(&cfg))?.join("selection.json"),
        &report::to_json(&report)?,
    )?;
    Ok(status(&warnings))
}
