//! CSV ingestion, text cleaning, train/validation/test splitting and the
//! partial label mask.

mod split;
pub mod text;

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{make_label_mask, split, LabelMask, Role, SplitAssignment, DEFAULT_RATIOS};
pub use text::TextPipeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Real, Label::Fake];

    /// Column index in the classifier output. Fake is the positive class.
    pub fn index(self) -> usize {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }
}

/// Column names and label encoding for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub id_column: String,
    pub title_column: String,
    pub body_column: String,
    pub label_column: String,
    pub label_map: BTreeMap<String, Label>,
}

impl DatasetSchema {
    pub fn map_label(&self, raw: &str) -> Option<Label> {
        self.label_map
            .get(raw)
            .or_else(|| self.label_map.get(raw.trim()))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub title: String,
    pub body: String,
    pub label_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DropCounts {
    pub missing_title: usize,
    pub missing_body: usize,
    pub bad_label: usize,
    pub duplicate_id: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.missing_title + self.missing_body + self.bad_label + self.duplicate_id
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedDataset {
    pub records: Vec<RawRecord>,
    pub dropped: DropCounts,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::config(format!("column `{name}` not found in CSV header")))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

/// Reads a headed CSV and keeps rows with a title, a body and a label the
/// schema recognizes. Later duplicates of an id are dropped.
pub fn parse_dataset<R: Read>(input: R, schema: &DatasetSchema) -> Result<ParsedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let id_col = column(&headers, &schema.id_column)?;
    let title_col = column(&headers, &schema.title_column)?;
    let body_col = column(&headers, &schema.body_column)?;
    let label_col = column(&headers, &schema.label_column)?;

    let mut out = ParsedDataset::default();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let field = |c: usize| row.get(c).unwrap_or("").to_owned();
        let rec = RawRecord {
            id: field(id_col),
            title: field(title_col),
            body: field(body_col),
            label_text: field(label_col),
        };
        if rec.title.trim().is_empty() {
            out.dropped.missing_title += 1;
        } else if rec.body.trim().is_empty() {
            out.dropped.missing_body += 1;
        } else if schema.map_label(&rec.label_text).is_none() {
            out.dropped.bad_label += 1;
        } else if !seen.insert(rec.id.clone()) {
            log::warn!("duplicate id `{}` dropped", rec.id);
            out.dropped.duplicate_id += 1;
        } else {
            out.records.push(rec);
        }
    }
    Ok(out)
}

/// Cleans one record into a [`Document`]. `None` means the record is dropped:
/// its label is unmappable or no token survives cleaning.
pub fn preprocess(
    record: &RawRecord,
    pipeline: &TextPipeline,
    schema: &DatasetSchema,
) -> Option<Document> {
    let label = schema.map_label(&record.label_text)?;
    let mut tokens = pipeline.process(&record.title);
    tokens.extend(pipeline.process(&record.body));
    if tokens.is_empty() {
        return None;
    }
    Some(Document {
        id: record.id.clone(),
        tokens,
        label: Some(label),
    })
}

/// One line of the canonical corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Option<Label>,
    pub role: Role,
    pub masked_visible: bool,
}

impl CorpusEntry {
    pub fn document(&self) -> Document {
        Document {
            id: self.id.clone(),
            tokens: self.tokens.clone(),
            label: self.label,
        }
    }
}

pub fn build_entries(
    docs: &[Document],
    split: &SplitAssignment,
    mask: &LabelMask,
) -> Vec<CorpusEntry> {
    docs.iter()
        .zip(split.roles())
        .map(|(d, &role)| CorpusEntry {
            id: d.id.clone(),
            tokens: d.tokens.clone(),
            label: d.label,
            role,
            masked_visible: mask.contains(&d.id),
        })
        .collect()
}

pub fn write_corpus<W: Write>(mut w: W, entries: &[CorpusEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(entry);
    }
    Ok(out)
}
