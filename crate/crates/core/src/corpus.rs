//! Use-pair instances, human judgments, gold filtering and seeded splits.
//!
//! Files are UTF-8, tab-separated, LF-terminated, with a header row. Fields
//! are never quoted; tabs and newlines inside fields are not representable.
//!
//! * instances: `instance_id lemma sentence1 sentence2 [target_offsets1 target_offsets2]`
//! * judgments: `instance_id annotator label` (label `1`-`4`, or `0`/`-` for CannotDecide)
//! * gold: the instance columns followed by `gold_label annotator_count`
//! * tutorial: `instance_id lemma sentence1 sentence2 label`

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scale::{Label, RawLabel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("empty input: no header row")]
    MissingHeader,
    #[error("line {line}: expected {expected} fields, found {found}")]
    MalformedRow { line: usize, expected: usize, found: usize },
    #[error("line {line}: field `{field}` must not be empty")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: invalid offset span `{value}`")]
    MalformedOffset { line: usize, value: String },
    #[error("line {line}: offset span {start}:{end} exceeds sentence length {len}")]
    OffsetOutOfBounds { line: usize, start: usize, end: usize, len: usize },
    #[error("duplicate instance id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: unknown label `{value}`")]
    UnknownLabel { line: usize, value: String },
    #[error("line {line}: invalid annotator count `{value}`")]
    InvalidCount { line: usize, value: String },
    #[error("judgment references unknown instance `{0}`")]
    DanglingJudgment(String),
    #[error("split sizes {dev}+{train}+{test} do not sum to the gold size {total}")]
    SizeMismatch { dev: usize, train: usize, test: usize, total: usize },
}

/// Character span `[start, end)` of the target token within a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn range(self) -> Range<usize> {
        self.start..self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

/// One annotation instance: two usages of the same target lemma.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsePair {
    pub instance_id: String,
    pub lemma: String,
    pub sentence1: String,
    pub sentence2: String,
    pub target_offsets1: Option<Span>,
    pub target_offsets2: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgmentRecord {
    pub instance_id: String,
    pub annotator: String,
    pub label: RawLabel,
}

/// A use pair whose label is fixed by unanimous human agreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldInstance {
    pub pair: UsePair,
    pub gold_label: Label,
    pub annotator_count: usize,
}

impl GoldInstance {
    pub fn instance_id(&self) -> &str {
        &self.pair.instance_id
    }
}

/// A pre-labelled instance used as an in-prompt demonstration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TutorialExample {
    pub pair: UsePair,
    pub label: RawLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub dev: usize,
    pub train: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.dev + self.train + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub dev: Vec<GoldInstance>,
    pub train: Vec<GoldInstance>,
    pub test: Vec<GoldInstance>,
    pub seed: u64,
}

/// Per-label counts over the 4-point scale. Serialized as a map keyed by
/// label, e.g. `{"1":3,"2":0,"3":1,"4":7}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "HistogramMap", into = "HistogramMap")]
pub struct LabelHistogram(pub [usize; 4]);

#[derive(Serialize, Deserialize)]
struct HistogramMap {
    #[serde(rename = "1")]
    one: usize,
    #[serde(rename = "2")]
    two: usize,
    #[serde(rename = "3")]
    three: usize,
    #[serde(rename = "4")]
    four: usize,
}

impl From<HistogramMap> for LabelHistogram {
    fn from(m: HistogramMap) -> Self {
        LabelHistogram([m.one, m.two, m.three, m.four])
    }
}

impl From<LabelHistogram> for HistogramMap {
    fn from(h: LabelHistogram) -> Self {
        let [one, two, three, four] = h.0;
        HistogramMap { one, two, three, four }
    }
}

impl LabelHistogram {
    pub fn count(&self, label: Label) -> usize {
        self.0[label.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn add(&mut self, label: Label) {
        self.0[label.index()] += 1;
    }
}

impl FromIterator<Label> for LabelHistogram {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        let mut hist = LabelHistogram::default();
        for label in iter {
            hist.add(label);
        }
        hist
    }
}

pub fn label_distribution(labels: &[Label]) -> LabelHistogram {
    labels.iter().copied().collect()
}

struct Table<'a> {
    columns: HashMap<&'a str, usize>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

impl<'a> Table<'a> {
    fn parse(content: &'a str, required: &[&str]) -> Result<Self, CorpusError> {
        let mut lines = content
            .split('\n')
            .enumerate()
            .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines.next().ok_or(CorpusError::MissingHeader)?;
        let header: Vec<&str> = header.split('\t').collect();
        let columns: HashMap<&str, usize> =
            header.iter().enumerate().map(|(i, name)| (*name, i)).collect();
        if let Some(missing) = required.iter().find(|c| !columns.contains_key(*c)) {
            return Err(CorpusError::MissingColumn(missing.to_string()));
        }
        let width = header.len();
        let mut rows = Vec::new();
        for (line, text) in lines {
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != width {
                return Err(CorpusError::MalformedRow { line, expected: width, found: fields.len() });
            }
            rows.push((line, fields));
        }
        Ok(Table { columns, rows })
    }

    fn get(&self, fields: &[&'a str], column: &str) -> Option<&'a str> {
        self.columns.get(column).map(|&i| fields[i])
    }
}

fn required_field<'a>(
    table: &Table<'a>,
    fields: &[&'a str],
    line: usize,
    column: &'static str,
) -> Result<&'a str, CorpusError> {
    let value = table.get(fields, column).unwrap_or_default();
    if value.is_empty() {
        return Err(CorpusError::EmptyField { line, field: column });
    }
    Ok(value)
}

fn parse_span(value: &str, sentence: &str, line: usize) -> Result<Option<Span>, CorpusError> {
    if value.is_empty() {
        return Ok(None);
    }
    let malformed = || CorpusError::MalformedOffset { line, value: value.to_string() };
    let (start, end) = value.split_once(':').ok_or_else(malformed)?;
    let start: usize = start.parse().map_err(|_| malformed())?;
    let end: usize = end.parse().map_err(|_| malformed())?;
    let len = sentence.chars().count();
    if start > end || end > len {
        return Err(CorpusError::OffsetOutOfBounds { line, start, end, len });
    }
    Ok(Some(Span { start, end }))
}

fn pair_from_row<'a>(
    table: &Table<'a>,
    fields: &[&'a str],
    line: usize,
) -> Result<UsePair, CorpusError> {
    let instance_id = required_field(table, fields, line, "instance_id")?;
    let lemma = required_field(table, fields, line, "lemma")?;
    let sentence1 = required_field(table, fields, line, "sentence1")?;
    let sentence2 = required_field(table, fields, line, "sentence2")?;
    let offsets1 = table.get(fields, "target_offsets1").unwrap_or_default();
    let offsets2 = table.get(fields, "target_offsets2").unwrap_or_default();
    Ok(UsePair {
        instance_id: instance_id.to_string(),
        lemma: lemma.to_string(),
        sentence1: sentence1.to_string(),
        sentence2: sentence2.to_string(),
        target_offsets1: parse_span(offsets1, sentence1, line)?,
        target_offsets2: parse_span(offsets2, sentence2, line)?,
    })
}

const PAIR_COLUMNS: [&str; 4] = ["instance_id", "lemma", "sentence1", "sentence2"];

fn check_unique<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Parses an instances file into use pairs, preserving file order.
pub fn parse_instances(content: &str) -> Result<Vec<UsePair>, CorpusError> {
    let table = Table::parse(content, &PAIR_COLUMNS)?;
    let pairs = table
        .rows
        .iter()
        .map(|(line, fields)| pair_from_row(&table, fields, *line))
        .collect::<Result<Vec<_>, _>>()?;
    check_unique(pairs.iter().map(|p| p.instance_id.as_str()))?;
    Ok(pairs)
}

pub fn parse_judgments(content: &str) -> Result<Vec<JudgmentRecord>, CorpusError> {
    let table = Table::parse(content, &["instance_id", "annotator", "label"])?;
    table
        .rows
        .iter()
        .map(|(line, fields)| {
            let instance_id = required_field(&table, fields, *line, "instance_id")?;
            let annotator = required_field(&table, fields, *line, "annotator")?;
            let raw = table.get(fields, "label").unwrap_or_default();
            let label = RawLabel::parse(raw)
                .ok_or_else(|| CorpusError::UnknownLabel { line: *line, value: raw.to_string() })?;
            Ok(JudgmentRecord {
                instance_id: instance_id.to_string(),
                annotator: annotator.to_string(),
                label,
            })
        })
        .collect()
}

/// Keeps instances with no CannotDecide judgment, at least two distinct
/// annotators, and a single label shared by every judgment.
pub fn filter_gold(
    instances: &[UsePair],
    judgments: &[JudgmentRecord],
) -> Result<Vec<GoldInstance>, CorpusError> {
    let mut by_instance: HashMap<&str, Vec<&JudgmentRecord>> =
        instances.iter().map(|p| (p.instance_id.as_str(), Vec::new())).collect();
    for judgment in judgments {
        by_instance
            .get_mut(judgment.instance_id.as_str())
            .ok_or_else(|| CorpusError::DanglingJudgment(judgment.instance_id.clone()))?
            .push(judgment);
    }

    let mut gold = Vec::new();
    for pair in instances {
        let records = &by_instance[pair.instance_id.as_str()];
        let labels: Option<Vec<Label>> = records.iter().map(|r| r.label.label()).collect();
        let Some(labels) = labels else { continue };
        let annotators: HashSet<&str> = records.iter().map(|r| r.annotator.as_str()).collect();
        if annotators.len() < 2 {
            continue;
        }
        let first = labels[0];
        if labels.iter().all(|&l| l == first) {
            gold.push(GoldInstance {
                pair: pair.clone(),
                gold_label: first,
                annotator_count: annotators.len(),
            });
        }
    }
    Ok(gold)
}

/// Shuffles the gold set with a ChaCha8 stream seeded from `seed`, then
/// partitions it into dev, train and test in that order.
pub fn split(gold: &[GoldInstance], sizes: SplitSizes, seed: u64) -> Result<DataSplit, CorpusError> {
    if sizes.total() != gold.len() {
        return Err(CorpusError::SizeMismatch {
            dev: sizes.dev,
            train: sizes.train,
            test: sizes.test,
            total: gold.len(),
        });
    }
    let mut shuffled = gold.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let test = shuffled.split_off(sizes.dev + sizes.train);
    let train = shuffled.split_off(sizes.dev);
    Ok(DataSplit { dev: shuffled, train, test, seed })
}

fn span_field(span: Option<Span>) -> String {
    span.map(|s| s.to_string()).unwrap_or_default()
}

pub const GOLD_HEADER: &str =
    "instance_id\tlemma\tsentence1\tsentence2\ttarget_offsets1\ttarget_offsets2\tgold_label\tannotator_count";

pub fn write_gold(gold: &[GoldInstance]) -> String {
    let mut out = String::from(GOLD_HEADER);
    out.push('\n');
    for g in gold {
        let p = &g.pair;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            p.instance_id,
            p.lemma,
            p.sentence1,
            p.sentence2,
            span_field(p.target_offsets1),
            span_field(p.target_offsets2),
            g.gold_label,
            g.annotator_count
        ));
    }
    out
}

pub fn parse_gold(content: &str) -> Result<Vec<GoldInstance>, CorpusError> {
    let table = Table::parse(content, &[&PAIR_COLUMNS[..], &["gold_label"]].concat())?;
    let gold = table
        .rows
        .iter()
        .map(|(line, fields)| {
            let pair = pair_from_row(&table, fields, *line)?;
            let raw = table.get(fields, "gold_label").unwrap_or_default();
            let gold_label = raw
                .parse::<Label>()
                .map_err(|_| CorpusError::UnknownLabel { line: *line, value: raw.to_string() })?;
            let annotator_count = match table.get(fields, "annotator_count") {
                None => 2,
                Some(raw) => match raw.parse::<usize>() {
                    Ok(n) if n >= 2 => n,
                    _ => {
                        return Err(CorpusError::InvalidCount { line: *line, value: raw.to_string() })
                    }
                },
            };
            Ok(GoldInstance { pair, gold_label, annotator_count })
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_unique(gold.iter().map(|g| g.instance_id()))?;
    Ok(gold)
}

pub fn parse_tutorial(content: &str) -> Result<Vec<TutorialExample>, CorpusError> {
    let table = Table::parse(content, &[&PAIR_COLUMNS[..], &["label"]].concat())?;
    table
        .rows
        .iter()
        .map(|(line, fields)| {
            let pair = pair_from_row(&table, fields, *line)?;
            let raw = table.get(fields, "label").unwrap_or_default();
            let label = RawLabel::parse(raw)
                .ok_or_else(|| CorpusError::UnknownLabel { line: *line, value: raw.to_string() })?;
            Ok(TutorialExample { pair, label })
        })
        .collect()
}
