//! Run configuration read from a JSON file.
//!
//! Input paths are resolved against the directory holding the config file. The config
//! hash is taken over the parsed config (paths as written, output directory excluded),
//! so reports do not change when a run is relocated.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scaleresp_core::aggregation::AggregationPolicy;
use scaleresp_core::inference::ResampleConfig;
use scaleresp_core::ratings::GroupKey;
use scaleresp_core::responsiveness::Metric;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub ratings: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<PathBuf>,
}

/// Explicit group keys, or every observed combination over the named axes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum GroupsSpec {
    Explicit(Vec<String>),
    Combinations { combinations_over: Vec<String> },
}

impl Default for GroupsSpec {
    fn default() -> Self {
        GroupsSpec::Explicit(vec!["all".to_string()])
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceChoice {
    Guideline,
    Crowd,
    #[default]
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct TagFilter {
    pub tag: String,
    pub value: String,
}

impl TagFilter {
    pub fn label(&self) -> String {
        format!("{}={}", self.tag, self.value)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub group_a: String,
    pub group_b: String,
    #[serde(default = "default_metric")]
    pub metric: Metric,
}

fn default_metric() -> Metric {
    Metric::Hm
}

fn default_per_group() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: InputPaths,
    pub k_max: i64,
    #[serde(default)]
    pub groups: GroupsSpec,
    #[serde(default)]
    pub reference_kind: ReferenceChoice,
    #[serde(default)]
    pub aggregation: AggregationPolicy,
    #[serde(default)]
    pub resample: ResampleConfig,
    /// Each filter adds a row per group and reference restricted to matching items.
    #[serde(default)]
    pub filters: Vec<TagFilter>,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
    #[serde(default = "default_per_group")]
    pub select_per_group: usize,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

/// A parsed config together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = LoadedConfig { config, base_dir };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let i = &c.inputs;
        for p in std::iter::once(&i.ratings)
            .chain(&i.binary)
            .chain(&i.attributes)
            .chain(&i.items)
        {
            let full = self.resolve(p);
            if !full.is_file() {
                bail!("input file {} does not exist", full.display());
            }
        }
        match &c.groups {
            GroupsSpec::Explicit(keys) if keys.is_empty() => bail!("`groups` must not be empty"),
            GroupsSpec::Combinations { combinations_over } if combinations_over.is_empty() => {
                bail!("`combinations_over` must name at least one axis")
            }
            _ => {}
        }
        let needs_attributes = match &c.groups {
            GroupsSpec::Explicit(keys) => parse_keys(keys)?.iter().any(|k| !k.is_all()),
            GroupsSpec::Combinations { .. } => true,
        };
        if needs_attributes && i.attributes.is_none() {
            bail!("group keys with selectors need an `attributes` input");
        }
        if !c.filters.is_empty() && i.items.is_none() {
            bail!("tag filters need an `items` input");
        }
        if c.reference_kind == ReferenceChoice::Guideline && i.binary.is_none() {
            bail!("the guideline reference needs a `binary` input");
        }
        for cmp in &c.comparisons {
            parse_keys([&cmp.group_a, &cmp.group_b])?;
        }
        c.resample.validate().map_err(anyhow::Error::msg)?;
        Ok(())
    }

    /// Applies the global `--seed` override to every seeded component.
    pub fn override_seed(&mut self, seed: u64) {
        self.config.aggregation.seed = seed;
        self.config.resample.seed = seed;
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.config).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

pub fn parse_keys<I, S>(keys: I) -> Result<Vec<GroupKey>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    keys.into_iter()
        .map(|k| {
            k.as_ref()
                .parse::<GroupKey>()
                .with_context(|| format!("group key `{}`", k.as_ref()))
        })
        .collect()
}
