//! Rating data model: scales, long-format ratings, trained-rater labels, rater
//! attributes, item metadata and demographic group keys.
//!
//! Ratings are stored in a compact, sorted, interned form so that a table compares equal
//! regardless of input row order and can be shared read-only across worker threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::rng::stable_hash;

/// A `0..=k_max` Likert scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct LikertScale {
    k_max: u8,
}

impl LikertScale {
    pub fn new(k_max: i64) -> Result<Self, DataError> {
        if !(1..=255).contains(&k_max) {
            return Err(DataError::InvalidScale(k_max));
        }
        Ok(LikertScale { k_max: k_max as u8 })
    }

    pub fn k_max(&self) -> u8 {
        self.k_max
    }

    /// Number of scale points, `K + 1`.
    pub fn points(&self) -> usize {
        self.k_max as usize + 1
    }

    pub fn contains(&self, score: i64) -> bool {
        (0..=self.k_max as i64).contains(&score)
    }

    pub fn scores(&self) -> std::ops::RangeInclusive<u8> {
        0..=self.k_max
    }
}

impl TryFrom<i64> for LikertScale {
    type Error = DataError;

    fn try_from(k: i64) -> Result<Self, Self::Error> {
        LikertScale::new(k)
    }
}

impl From<LikertScale> for i64 {
    fn from(s: LikertScale) -> i64 {
        s.k_max as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RatingRecord {
    pub item_id: String,
    pub rater_id: String,
    pub score: u8,
}

impl RatingRecord {
    pub fn new(item_id: impl Into<String>, rater_id: impl Into<String>, score: u8) -> Self {
        RatingRecord {
            item_id: item_id.into(),
            rater_id: rater_id.into(),
            score,
        }
    }
}

/// A trained rater's safe (0) / unsafe (1) label for one item.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BinaryRecord {
    pub item_id: String,
    pub rater_id: String,
    pub label: u8,
}

impl BinaryRecord {
    pub fn new(item_id: impl Into<String>, rater_id: impl Into<String>, label: bool) -> Self {
        BinaryRecord {
            item_id: item_id.into(),
            rater_id: rater_id.into(),
            label: label as u8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterAttributes {
    pub rater_id: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub item_id: String,
    pub tags: BTreeMap<String, String>,
}

/// Conjunction of `(axis, category)` selectors. The empty key selects every rater.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, String)>", into = "Vec<(String, String)>")]
pub struct GroupKey {
    selectors: Vec<(String, String)>,
}

impl GroupKey {
    pub fn new(selectors: Vec<(String, String)>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for (axis, _) in &selectors {
            if axis.is_empty() {
                return Err(DataError::EmptyAxis);
            }
            if !seen.insert(axis.as_str()) {
                return Err(DataError::DuplicateAxis(axis.clone()));
            }
        }
        Ok(GroupKey { selectors })
    }

    pub fn all() -> Self {
        GroupKey::default()
    }

    pub fn selectors(&self) -> &[(String, String)] {
        &self.selectors
    }

    pub fn is_all(&self) -> bool {
        self.selectors.is_empty()
    }

    pub fn matches(&self, attributes: &BTreeMap<String, String>) -> bool {
        self.selectors
            .iter()
            .all(|(axis, value)| attributes.get(axis) == Some(value))
    }
}

impl TryFrom<Vec<(String, String)>> for GroupKey {
    type Error = DataError;

    fn try_from(v: Vec<(String, String)>) -> Result<Self, Self::Error> {
        GroupKey::new(v)
    }
}

impl From<GroupKey> for Vec<(String, String)> {
    fn from(k: GroupKey) -> Self {
        k.selectors
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.selectors.is_empty() {
            return f.write_str("all");
        }
        for (i, (axis, value)) in self.selectors.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{axis}={value}")?;
        }
        Ok(())
    }
}

/// Parses `axis=value,axis=value`; `all` or the empty string is the empty key.
impl FromStr for GroupKey {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "all" {
            return Ok(GroupKey::all());
        }
        let mut selectors = Vec::new();
        for part in s.split(',') {
            let (axis, value) = part
                .split_once('=')
                .ok_or_else(|| DataError::InvalidGroupKey(s.to_string()))?;
            selectors.push((axis.trim().to_string(), value.trim().to_string()));
        }
        GroupKey::new(selectors)
    }
}

/// One rating inside a [`RatingTable`]; the item is implied by its position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub rater: u32,
    pub score: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TableSummary {
    pub rows: usize,
    pub items: usize,
    pub raters: usize,
}

/// Long-format ordinal ratings, validated against a scale.
///
/// Items and raters are interned in sorted order; the ratings of item `i` are the
/// contiguous run `entries[item_offsets[i]..item_offsets[i + 1]]`, sorted by rater.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingTable {
    scale: LikertScale,
    items: Vec<String>,
    item_hashes: Vec<u64>,
    raters: Vec<String>,
    entries: Vec<Entry>,
    item_offsets: Vec<usize>,
}

impl RatingTable {
    /// Builds a table from in-memory records. Error line numbers are 1-based record indices.
    pub fn from_records(
        scale: LikertScale,
        records: impl IntoIterator<Item = RatingRecord>,
    ) -> Result<Self, DataError> {
        let rows = records
            .into_iter()
            .enumerate()
            .map(|(i, r)| (i as u64 + 1, r))
            .collect::<Vec<_>>();
        for (line, r) in &rows {
            if !scale.contains(r.score as i64) {
                return Err(DataError::ScoreOutOfRange {
                    line: *line,
                    score: r.score as i64,
                    k_max: scale.k_max(),
                });
            }
        }
        Self::build(scale, rows)
    }

    fn build(scale: LikertScale, mut rows: Vec<(u64, RatingRecord)>) -> Result<Self, DataError> {
        rows.sort_by(|a, b| (&a.1.item_id, &a.1.rater_id, a.0).cmp(&(&b.1.item_id, &b.1.rater_id, b.0)));
        for w in rows.windows(2) {
            if w[0].1.item_id == w[1].1.item_id && w[0].1.rater_id == w[1].1.rater_id {
                return Err(DataError::DuplicateKey {
                    line: w[1].0,
                    item_id: w[1].1.item_id.clone(),
                    rater_id: w[1].1.rater_id.clone(),
                });
            }
        }
        let raters: Vec<String> = rows
            .iter()
            .map(|(_, r)| r.rater_id.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect();
        let mut items: Vec<String> = Vec::new();
        let mut item_offsets = vec![0];
        let mut entries = Vec::with_capacity(rows.len());
        for (_, r) in &rows {
            if items.last() != Some(&r.item_id) {
                if !items.is_empty() {
                    item_offsets.push(entries.len());
                }
                items.push(r.item_id.clone());
            }
            let rater = raters.binary_search(&r.rater_id).expect("rater interned") as u32;
            entries.push(Entry { rater, score: r.score });
        }
        item_offsets.push(entries.len());
        if items.is_empty() {
            item_offsets = vec![0];
        }
        let item_hashes = items.iter().map(|i| stable_hash(i)).collect();
        Ok(RatingTable {
            scale,
            items,
            item_hashes,
            raters,
            entries,
            item_offsets,
        })
    }

    pub fn scale(&self) -> LikertScale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn summary(&self) -> TableSummary {
        TableSummary {
            rows: self.entries.len(),
            items: self.items.len(),
            raters: self.raters.len(),
        }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn item_hash(&self, item: usize) -> u64 {
        self.item_hashes[item]
    }

    pub fn item_index(&self, item_id: &str) -> Option<usize> {
        self.items.binary_search_by(|i| i.as_str().cmp(item_id)).ok()
    }

    pub fn rater_index(&self, rater_id: &str) -> Option<u32> {
        self.raters
            .binary_search_by(|r| r.as_str().cmp(rater_id))
            .ok()
            .map(|i| i as u32)
    }

    /// Ratings of item `item`, sorted by rater index.
    pub fn ratings_for_item(&self, item: usize) -> &[Entry] {
        &self.entries[self.item_offsets[item]..self.item_offsets[item + 1]]
    }

    /// Membership mask over rater indices. Ids absent from the table are ignored.
    pub fn rater_mask<'a>(&self, raters: impl IntoIterator<Item = &'a String>) -> Vec<bool> {
        let mut mask = vec![false; self.raters.len()];
        for r in raters {
            if let Some(i) = self.rater_index(r) {
                mask[i as usize] = true;
            }
        }
        mask
    }

    pub fn records(&self) -> impl Iterator<Item = RatingRecord> + '_ {
        (0..self.items.len()).flat_map(move |i| {
            self.ratings_for_item(i).iter().map(move |e| RatingRecord {
                item_id: self.items[i].clone(),
                rater_id: self.raters[e.rater as usize].clone(),
                score: e.score,
            })
        })
    }

    /// Number of ratings per rater, indexed like [`RatingTable::raters`].
    pub fn ratings_per_rater(&self) -> Vec<usize> {
        let mut counts = vec![0; self.raters.len()];
        for e in &self.entries {
            counts[e.rater as usize] += 1;
        }
        counts
    }

    /// Sub-table keeping only items accepted by `keep`.
    pub fn filter_items(&self, mut keep: impl FnMut(&str) -> bool) -> RatingTable {
        let rows = self
            .records()
            .filter(|r| keep(&r.item_id))
            .enumerate()
            .map(|(i, r)| (i as u64 + 1, r))
            .collect();
        Self::build(self.scale, rows).expect("subset of a valid table is valid")
    }

    /// Sub-table without any rating by the given raters.
    pub fn without_raters(&self, raters: &BTreeSet<String>) -> RatingTable {
        let rows = self
            .records()
            .filter(|r| !raters.contains(&r.rater_id))
            .enumerate()
            .map(|(i, r)| (i as u64 + 1, r))
            .collect();
        Self::build(self.scale, rows).expect("subset of a valid table is valid")
    }
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn csv_error(err: csv::Error) -> DataError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    DataError::Malformed {
        line,
        message: err.to_string(),
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn required<'r>(row: &'r csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<&'r str, DataError> {
    match row.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(DataError::Malformed {
            line,
            message: format!("empty `{name}`"),
        }),
    }
}

fn parse_score(raw: &str, line: u64, scale: LikertScale) -> Result<u8, DataError> {
    let score: i64 = raw.parse().map_err(|_| DataError::Malformed {
        line,
        message: format!("score `{raw}` is not an integer"),
    })?;
    if !scale.contains(score) {
        return Err(DataError::ScoreOutOfRange {
            line,
            score,
            k_max: scale.k_max(),
        });
    }
    Ok(score as u8)
}

/// Reads `item_id,rater_id,score` CSV from any reader.
pub fn read_ratings<R: Read>(reader: R, scale: LikertScale) -> Result<RatingTable, DataError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (ci, cr, cs) = (
        column(&headers, "item_id")?,
        column(&headers, "rater_id")?,
        column(&headers, "score")?,
    );
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let item_id = required(&row, ci, line, "item_id")?.to_string();
        let rater_id = required(&row, cr, line, "rater_id")?.to_string();
        let score = parse_score(required(&row, cs, line, "score")?, line, scale)?;
        rows.push((
            line,
            RatingRecord {
                item_id,
                rater_id,
                score,
            },
        ));
    }
    RatingTable::build(scale, rows)
}

/// Loads a ratings CSV and logs its row / item / rater counts.
pub fn load_ratings(path: impl AsRef<Path>, scale: LikertScale) -> Result<RatingTable, DataError> {
    let path = path.as_ref();
    let table = read_ratings(open(path)?, scale)?;
    let s = table.summary();
    log::info!(
        "{}: {} ratings, {} items, {} raters",
        path.display(),
        s.rows,
        s.items,
        s.raters
    );
    Ok(table)
}

#[derive(Deserialize)]
struct JsonRating {
    item_id: String,
    rater_id: String,
    score: i64,
}

/// JSON-lines twin of [`load_ratings`]: one `{"item_id", "rater_id", "score"}` object per line.
pub fn load_ratings_jsonl(path: impl AsRef<Path>, scale: LikertScale) -> Result<RatingTable, DataError> {
    let reader = BufReader::new(open(path.as_ref())?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| DataError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: JsonRating = serde_json::from_str(&line).map_err(|e| DataError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if !scale.contains(r.score) {
            return Err(DataError::ScoreOutOfRange {
                line: line_no,
                score: r.score,
                k_max: scale.k_max(),
            });
        }
        rows.push((
            line_no,
            RatingRecord {
                item_id: r.item_id,
                rater_id: r.rater_id,
                score: r.score as u8,
            },
        ));
    }
    RatingTable::build(scale, rows)
}

/// Reads `item_id,rater_id,label` CSV.
pub fn read_binary<R: Read>(reader: R) -> Result<Vec<BinaryRecord>, DataError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (ci, cr, cl) = (
        column(&headers, "item_id")?,
        column(&headers, "rater_id")?,
        column(&headers, "label")?,
    );
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let item_id = required(&row, ci, line, "item_id")?.to_string();
        let rater_id = required(&row, cr, line, "rater_id")?.to_string();
        let label = match required(&row, cl, line, "label")? {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(DataError::NonBinaryLabel {
                    line,
                    value: other.to_string(),
                })
            }
        };
        out.push(BinaryRecord {
            item_id,
            rater_id,
            label,
        });
    }
    Ok(out)
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<Vec<BinaryRecord>, DataError> {
    let path = path.as_ref();
    let records = read_binary(open(path)?)?;
    if records.is_empty() {
        log::warn!("{}: no binary labels (header only)", path.display());
    }
    Ok(records)
}

/// Rater attributes with the axis names declared by the file header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTable {
    pub axes: Vec<String>,
    pub raters: Vec<RaterAttributes>,
}

impl AttributeTable {
    pub fn select(&self, key: &GroupKey) -> Result<BTreeSet<String>, DataError> {
        for (axis, _) in key.selectors() {
            if !self.axes.contains(axis) {
                return Err(DataError::UnknownAxis(axis.clone()));
            }
        }
        Ok(matching(&self.raters, key))
    }

    /// Every observed combination of values over `axes`, in sorted order.
    pub fn combinations(&self, axes: &[String]) -> Result<Vec<GroupKey>, DataError> {
        for axis in axes {
            if !self.axes.contains(axis) {
                return Err(DataError::UnknownAxis(axis.clone()));
            }
        }
        let combos: BTreeSet<Vec<(String, String)>> = self
            .raters
            .iter()
            .filter_map(|r| {
                axes.iter()
                    .map(|a| r.attributes.get(a).map(|v| (a.clone(), v.clone())))
                    .collect::<Option<Vec<_>>>()
            })
            .collect();
        combos.into_iter().map(GroupKey::new).collect()
    }
}

fn matching(attrs: &[RaterAttributes], key: &GroupKey) -> BTreeSet<String> {
    attrs
        .iter()
        .filter(|r| key.matches(&r.attributes))
        .map(|r| r.rater_id.clone())
        .collect()
}

/// Raters matching every selector of `key`; the empty key returns every rater.
pub fn select_raters(attrs: &[RaterAttributes], key: &GroupKey) -> Result<BTreeSet<String>, DataError> {
    for (axis, _) in key.selectors() {
        if !attrs.iter().any(|r| r.attributes.contains_key(axis)) {
            return Err(DataError::UnknownAxis(axis.clone()));
        }
    }
    Ok(matching(attrs, key))
}

type WideRows = Vec<(String, BTreeMap<String, String>)>;

/// Reads a keyed wide CSV (`<id_column>,<col1>,...`) into id → column → value.
fn read_wide<R: Read>(reader: R, id_column: &str) -> Result<(Vec<String>, WideRows), DataError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let id_idx = column(&headers, id_column)?;
    let mut names = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i == id_idx {
            continue;
        }
        if h.is_empty() {
            return Err(DataError::EmptyAxis);
        }
        if names.iter().any(|n| n == h) {
            return Err(DataError::DuplicateAxis(h.to_string()));
        }
        names.push(h.to_string());
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let id = required(&row, id_idx, line, id_column)?.to_string();
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId(id));
        }
        let mut values = BTreeMap::new();
        let mut name_iter = names.iter();
        for (i, v) in row.iter().enumerate() {
            if i == id_idx {
                continue;
            }
            let name = name_iter.next().expect("row width checked by csv");
            if !v.is_empty() {
                values.insert(name.clone(), v.to_string());
            }
        }
        rows.push((id, values));
    }
    Ok((names, rows))
}

pub fn read_attributes<R: Read>(reader: R) -> Result<AttributeTable, DataError> {
    let (axes, rows) = read_wide(reader, "rater_id")?;
    let raters = rows
        .into_iter()
        .map(|(rater_id, attributes)| RaterAttributes { rater_id, attributes })
        .collect();
    Ok(AttributeTable { axes, raters })
}

pub fn load_attributes(path: impl AsRef<Path>) -> Result<AttributeTable, DataError> {
    read_attributes(open(path.as_ref())?)
}

/// Item metadata with the tag names declared by the file header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemTable {
    pub tags: Vec<String>,
    pub items: Vec<ItemMeta>,
}

impl ItemTable {
    pub fn tag_of(&self, item_id: &str, tag: &str) -> Option<&str> {
        self.items
            .iter()
            .find(|m| m.item_id == item_id)
            .and_then(|m| m.tags.get(tag))
            .map(String::as_str)
    }

    /// Ids of items whose `tag` equals `value`.
    pub fn matching(&self, tag: &str, value: &str) -> BTreeSet<String> {
        self.items
            .iter()
            .filter(|m| m.tags.get(tag).map(String::as_str) == Some(value))
            .map(|m| m.item_id.clone())
            .collect()
    }
}

pub fn read_items<R: Read>(reader: R) -> Result<ItemTable, DataError> {
    let (tags, rows) = read_wide(reader, "item_id")?;
    let items = rows
        .into_iter()
        .map(|(item_id, tags)| ItemMeta { item_id, tags })
        .collect();
    Ok(ItemTable { tags, items })
}

pub fn load_items(path: impl AsRef<Path>) -> Result<ItemTable, DataError> {
    read_items(open(path.as_ref())?)
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

fn write_err(e: impl fmt::Display) -> DataError {
    DataError::Write(e.to_string())
}

/// Writes ratings in canonical order (item, then rater).
pub fn write_ratings<W: Write>(table: &RatingTable, writer: W) -> Result<(), DataError> {
    let mut w = csv_writer(writer);
    w.write_record(["item_id", "rater_id", "score"]).map_err(write_err)?;
    for r in table.records() {
        w.write_record([r.item_id.as_str(), r.rater_id.as_str(), &r.score.to_string()])
            .map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

pub fn write_binary<W: Write>(records: &[BinaryRecord], writer: W) -> Result<(), DataError> {
    let mut w = csv_writer(writer);
    w.write_record(["item_id", "rater_id", "label"]).map_err(write_err)?;
    for r in records {
        w.write_record([r.item_id.as_str(), r.rater_id.as_str(), &r.label.to_string()])
            .map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

fn write_wide<'a, W: Write>(
    writer: W,
    id_column: &str,
    names: &[String],
    rows: impl Iterator<Item = (&'a str, &'a BTreeMap<String, String>)>,
) -> Result<(), DataError> {
    let mut w = csv_writer(writer);
    let mut header = vec![id_column.to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(write_err)?;
    for (id, values) in rows {
        let mut rec = vec![id.to_string()];
        rec.extend(names.iter().map(|n| values.get(n).cloned().unwrap_or_default()));
        w.write_record(&rec).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

pub fn write_attributes<W: Write>(table: &AttributeTable, writer: W) -> Result<(), DataError> {
    write_wide(
        writer,
        "rater_id",
        &table.axes,
        table.raters.iter().map(|r| (r.rater_id.as_str(), &r.attributes)),
    )
}

pub fn write_items<W: Write>(table: &ItemTable, writer: W) -> Result<(), DataError> {
    write_wide(
        writer,
        "item_id",
        &table.tags,
        table.items.iter().map(|m| (m.item_id.as_str(), &m.tags)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k4() -> LikertScale {
        LikertScale::new(4).unwrap()
    }

    #[test]
    fn minimal_table() {
        let t = read_ratings("item_id,rater_id,score\ni1,r1,3\ni1,r2,0\n".as_bytes(), k4()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(
            t.summary(),
            TableSummary {
                rows: 2,
                items: 1,
                raters: 2
            }
        );
    }

    #[test]
    fn out_of_range_reports_line() {
        let err = read_ratings("item_id,rater_id,score\ni0,r0,1\ni1,r1,5\n".as_bytes(), k4()).unwrap_err();
        assert!(err.to_string().contains("score out of range"), "{err}");
        assert_eq!(err.line(), Some(3));
        let err = read_ratings("item_id,rater_id,score\ni1,r1,-1\n".as_bytes(), k4()).unwrap_err();
        assert!(matches!(err, DataError::ScoreOutOfRange { score: -1, .. }));
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = read_ratings("item_id,rater_id,score\ni1,r1,2\ni1,r1,2\n".as_bytes(), k4()).unwrap_err();
        assert!(err.to_string().contains("duplicate (item, rater)"), "{err}");
        assert_eq!(err.line(), Some(3));
    }

    #[test]
    fn malformed_rows() {
        let err = read_ratings("item_id,rater_id,score\ni1,r1\n".as_bytes(), k4()).unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err:?}");
        let err = read_ratings("item_id,rater_id,score\ni1,r1,x\n".as_bytes(), k4()).unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }));
        let err = read_ratings("item,rater_id,score\n".as_bytes(), k4()).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(c) if c == "item_id"));
    }

    #[test]
    fn binary_labels() {
        let b = read_binary("item_id,rater_id,label\ni1,e1,1\ni1,e2,0\n".as_bytes()).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].label, 1);
        let err = read_binary("item_id,rater_id,label\ni1,e1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::NonBinaryLabel { line: 2, .. }));
        assert!(read_binary("item_id,rater_id,label\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn empty_binary_file_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        std::fs::write(&p, "item_id,rater_id,label\n").unwrap();
        assert!(load_binary(&p).unwrap().is_empty());
    }

    fn attrs() -> AttributeTable {
        read_attributes(
            "rater_id,ethnicity,age,gender\n\
             r1,Latinx,GenZ,Man\n\
             r2,Latinx,GenZ,Woman\n\
             r3,East-Asian,GenX,Man\n\
             r4,East-Asian,GenZ,Woman\n"
                .as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn selection_semantics() {
        let a = attrs();
        let tri: GroupKey = "ethnicity=Latinx,age=GenZ,gender=Man".parse().unwrap();
        assert_eq!(a.select(&tri).unwrap(), BTreeSet::from(["r1".to_string()]));
        let top: GroupKey = "ethnicity=East-Asian".parse().unwrap();
        assert_eq!(
            select_raters(&a.raters, &top).unwrap(),
            BTreeSet::from(["r3".to_string(), "r4".to_string()])
        );
        assert_eq!(select_raters(&a.raters, &GroupKey::all()).unwrap().len(), 4);
        let bad: GroupKey = "religion=x".parse().unwrap();
        assert!(matches!(select_raters(&a.raters, &bad), Err(DataError::UnknownAxis(_))));
        assert!(matches!(a.select(&bad), Err(DataError::UnknownAxis(_))));
    }

    #[test]
    fn group_key_parsing() {
        assert!(GroupKey::from_str("a=1,a=2").is_err());
        assert!(GroupKey::from_str("a").is_err());
        assert!(GroupKey::from_str("=1").is_err());
        let k: GroupKey = "age=GenZ,gender=Man".parse().unwrap();
        assert_eq!(k.to_string(), "age=GenZ,gender=Man");
        assert_eq!(GroupKey::all().to_string(), "all");
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<GroupKey>(&json).unwrap(), k);
    }

    #[test]
    fn trisection_enumeration() {
        let a = attrs();
        let axes: Vec<String> = ["ethnicity", "age"].map(String::from).to_vec();
        let combos = a.combinations(&axes).unwrap();
        assert_eq!(combos.len(), 3);
        assert_eq!(combos[0].to_string(), "ethnicity=East-Asian,age=GenX");
    }

    #[test]
    fn items_and_attributes_round_trip() {
        let src = "item_id,violation_type,source\ni1,sexual,a\ni2,bias,\n";
        let items = read_items(src.as_bytes()).unwrap();
        assert_eq!(items.tag_of("i1", "violation_type"), Some("sexual"));
        assert_eq!(items.tag_of("i2", "source"), None);
        let mut out = Vec::new();
        write_items(&items, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), src);

        let src = "rater_id,ethnicity,age,gender\nr1,Latinx,GenZ,Man\nr2,White,,Woman\n";
        let a = read_attributes(src.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_attributes(&a, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), src);
    }

    #[test]
    fn jsonl_mirrors_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        std::fs::write(
            &p,
            "{\"item_id\":\"i1\",\"rater_id\":\"r1\",\"score\":3}\n\n{\"item_id\":\"i1\",\"rater_id\":\"r2\",\"score\":0}\n",
        )
        .unwrap();
        let a = load_ratings_jsonl(&p, k4()).unwrap();
        let b = read_ratings("item_id,rater_id,score\ni1,r2,0\ni1,r1,3\n".as_bytes(), k4()).unwrap();
        assert_eq!(a, b);
        std::fs::write(&p, "{\"item_id\":\"i1\",\"rater_id\":\"r1\",\"score\":9}\n").unwrap();
        assert!(matches!(
            load_ratings_jsonl(&p, k4()),
            Err(DataError::ScoreOutOfRange { line: 1, .. })
        ));
    }

    #[test]
    fn filters() {
        let t = read_ratings("item_id,rater_id,score\ni1,r1,3\ni1,r2,0\ni2,r1,1\n".as_bytes(), k4()).unwrap();
        let f = t.filter_items(|i| i == "i2");
        assert_eq!(
            f.summary(),
            TableSummary {
                rows: 1,
                items: 1,
                raters: 1
            }
        );
        let w = t.without_raters(&BTreeSet::from(["r1".to_string()]));
        assert_eq!(
            w.summary(),
            TableSummary {
                rows: 1,
                items: 1,
                raters: 1
            }
        );
        assert_eq!(t.ratings_per_rater(), vec![2, 1]);
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(u8, u8, i64)>> {
        proptest::collection::vec((0u8..6, 0u8..6, -2i64..8), 0..40)
    }

    proptest! {
        #[test]
        fn loaded_tables_respect_scale(rows in arb_rows()) {
            let mut csv = String::from("item_id,rater_id,score\n");
            for (i, r, s) in &rows {
                csv.push_str(&format!("i{i},r{r},{s}\n"));
            }
            let mut keys = BTreeSet::new();
            let valid = rows.iter().all(|(i, r, s)| (0..=4).contains(s) && keys.insert((*i, *r)));
            match read_ratings(csv.as_bytes(), k4()) {
                Ok(t) => {
                    prop_assert!(valid);
                    prop_assert!(t.records().all(|r| r.score <= 4));
                }
                Err(_) => prop_assert!(!valid),
            }
        }

        #[test]
        fn loading_is_order_insensitive(rows in arb_rows(), rot in 0usize..40) {
            let mut seen = BTreeSet::new();
            let mut rows: Vec<_> = rows
                .into_iter()
                .filter(|(i, r, s)| (0..=4).contains(s) && seen.insert((*i, *r)))
                .collect();
            let to_csv = |rows: &[(u8, u8, i64)]| {
                let mut csv = String::from("item_id,rater_id,score\n");
                for (i, r, s) in rows {
                    csv.push_str(&format!("i{i},r{r},{s}\n"));
                }
                csv
            };
            let a = read_ratings(to_csv(&rows).as_bytes(), k4()).unwrap();
            if !rows.is_empty() {
                let n = rows.len();
                rows.rotate_left(rot % n);
                rows.reverse();
            }
            let b = read_ratings(to_csv(&rows).as_bytes(), k4()).unwrap();
            prop_assert_eq!(&a, &b);
            let mut out = Vec::new();
            write_ratings(&a, &mut out).unwrap();
            let c = read_ratings(out.as_slice(), k4()).unwrap();
            let mut again = Vec::new();
            write_ratings(&c, &mut again).unwrap();
            prop_assert_eq!(out, again);
            prop_assert_eq!(a, c);
        }

        #[test]
        fn trisection_is_subset_of_top_level(seed in 0u64..500) {
            let vals = |k: u64, n: u64| format!("v{}", (seed / k) % n);
            let raters: Vec<RaterAttributes> = (0..12u64)
                .map(|i| RaterAttributes {
                    rater_id: format!("r{i}"),
                    attributes: BTreeMap::from([
                        ("a".to_string(), vals(i + 1, 2)),
                        ("b".to_string(), vals(i + 3, 3)),
                        ("c".to_string(), vals(i + 7, 2)),
                    ]),
                })
                .collect();
            let r0 = &raters[(seed % 12) as usize].attributes;
            let tri = GroupKey::new(r0.iter().map(|(k, v)| (k.clone(), v.clone())).collect()).unwrap();
            let tri_set = select_raters(&raters, &tri).unwrap();
            prop_assert!(!tri_set.is_empty());
            for sel in tri.selectors() {
                let top = GroupKey::new(vec![sel.clone()]).unwrap();
                prop_assert!(tri_set.is_subset(&select_raters(&raters, &top).unwrap()));
            }
        }
    }
}
