//! Human annotation guidelines and tutorial examples.
//!
//! Example tables inside a guideline document are fenced by a line holding
//! only `<<<table` and a line holding only `>>>`. Each non-blank line between
//! the fences is one example, tab-separated as
//! `sentence1 sentence2 target judgment`.

use std::ops::Range;

use thiserror::Error;

use crate::corpus::TutorialExample;
use crate::scale::RawLabel;

pub const TUTORIAL_HEADER: &str = "Here are few sample instances and their corresponding judgements:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuidelineError {
    #[error("table opened on line {line} is never closed")]
    UnterminatedTableBlock { line: usize },
    #[error("line {line}: table row has {found} fields, expected 4")]
    MalformedTableRow { line: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableMarkers<'a> {
    pub open: &'a str,
    pub close: &'a str,
}

impl Default for TableMarkers<'static> {
    fn default() -> Self {
        TableMarkers { open: "<<<table", close: ">>>" }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub sentence1: String,
    pub sentence2: String,
    pub target: String,
    pub judgment: String,
    /// Byte range of the row's line (including its newline) in the raw text.
    line: Range<usize>,
}

impl TableRow {
    pub fn is_cannot_decide(&self) -> bool {
        is_cannot_decide(&self.judgment)
    }
}

/// Whether a guideline judgment cell denotes "cannot decide": the sentinels
/// `0` and `-` (optionally followed by a gloss), or the phrase itself.
pub fn is_cannot_decide(judgment: &str) -> bool {
    let text = judgment.trim();
    let head = text.split_whitespace().next().unwrap_or_default();
    head == "0" || head == "-" || text.to_lowercase().contains("cannot decide")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableBlock {
    pub rows: Vec<TableRow>,
    /// Byte range from the opening fence through the closing fence line.
    span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidelineDoc {
    pub raw_text: String,
    pub tables: Vec<TableBlock>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeOptions {
    pub remove_cannot_decide: bool,
    pub linearize_tables: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedGuidelines {
    pub text: String,
    pub removed_cannot_decide: bool,
    pub linearized_tables: bool,
}

impl NormalizedGuidelines {
    /// Guideline text used verbatim, without any rewriting.
    pub fn verbatim(text: impl Into<String>) -> Self {
        NormalizedGuidelines { text: text.into(), removed_cannot_decide: false, linearized_tables: false }
    }
}

fn lines_with_offsets(text: &str) -> impl Iterator<Item = (usize, Range<usize>, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').enumerate().map(move |(i, line)| {
        let range = offset..offset + line.len();
        offset += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        (i + 1, range, content)
    })
}

pub fn load_guidelines(content: &str, markers: TableMarkers<'_>) -> Result<GuidelineDoc, GuidelineError> {
    let mut tables = Vec::new();
    let mut open: Option<(usize, usize, Vec<TableRow>)> = None;
    for (line_no, range, line) in lines_with_offsets(content) {
        match open.as_mut() {
            None => {
                if line.trim_end() == markers.open {
                    open = Some((line_no, range.start, Vec::new()));
                }
            }
            Some((_, start, rows)) => {
                if line.trim_end() == markers.close {
                    tables.push(TableBlock { rows: std::mem::take(rows), span: *start..range.end });
                    open = None;
                } else if !line.trim().is_empty() {
                    let fields: Vec<&str> = line.split('\t').collect();
                    let [s1, s2, target, judgment] = fields[..] else {
                        return Err(GuidelineError::MalformedTableRow { line: line_no, found: fields.len() });
                    };
                    rows.push(TableRow {
                        sentence1: s1.to_string(),
                        sentence2: s2.to_string(),
                        target: target.to_string(),
                        judgment: judgment.to_string(),
                        line: range,
                    });
                }
            }
        }
    }
    if let Some((line, _, _)) = open {
        return Err(GuidelineError::UnterminatedTableBlock { line });
    }
    Ok(GuidelineDoc { raw_text: content.to_string(), tables })
}

fn push_example(out: &mut String, sentence1: &str, sentence2: &str, target: &str, judgment: &str) {
    out.push_str("Sentence 1: ");
    out.push_str(sentence1);
    out.push_str("\nSentence 2: ");
    out.push_str(sentence2);
    out.push_str("\nTarget word: ");
    out.push_str(target);
    out.push_str("\nJudgment: ");
    out.push_str(judgment);
}

fn linearize(rows: &[&TableRow], ends_with_newline: bool) -> String {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        push_example(&mut out, &row.sentence1, &row.sentence2, &row.target, &row.judgment);
    }
    if ends_with_newline && !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Rewrites the example tables; prose outside the tables is copied unchanged.
pub fn normalize_guidelines(doc: &GuidelineDoc, options: NormalizeOptions) -> NormalizedGuidelines {
    let raw = doc.raw_text.as_str();
    let mut text = String::with_capacity(raw.len());
    let mut cursor = 0;
    for block in &doc.tables {
        text.push_str(&raw[cursor..block.span.start]);
        let kept: Vec<&TableRow> = block
            .rows
            .iter()
            .filter(|r| !(options.remove_cannot_decide && r.is_cannot_decide()))
            .collect();
        if options.linearize_tables {
            text.push_str(&linearize(&kept, raw[block.span.clone()].ends_with('\n')));
        } else {
            let mut inner = block.span.start;
            for row in block.rows.iter().filter(|r| !kept.contains(r)) {
                text.push_str(&raw[inner..row.line.start]);
                inner = row.line.end;
            }
            text.push_str(&raw[inner..block.span.end]);
        }
        cursor = block.span.end;
    }
    text.push_str(&raw[cursor..]);
    NormalizedGuidelines {
        text,
        removed_cannot_decide: options.remove_cannot_decide,
        linearized_tables: options.linearize_tables,
    }
}

/// Renders tutorial examples as a demonstration block. CannotDecide examples
/// are skipped; with nothing left to show the block is empty.
pub fn render_tutorial(examples: &[TutorialExample]) -> String {
    let mut out = String::new();
    for example in examples {
        let RawLabel::Scale(label) = example.label else { continue };
        if out.is_empty() {
            out.push_str(TUTORIAL_HEADER);
        }
        out.push('\n');
        let p = &example.pair;
        push_example(&mut out, &p.sentence1, &p.sentence2, &p.lemma, &label.to_string());
    }
    out
}
