use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::label::RelevanceLabel;
use crate::trainer::{ExampleSource, LabeledExample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExample {
    pub id: String,
    pub text: String,
    pub label: RelevanceLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub examples: Vec<RawExample>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, examples: Vec<RawExample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::Dataset(format!("duplicate example id {:?}", ex.id)));
            }
        }
        Ok(Corpus {
            name: name.into(),
            examples,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Counts per label, in (Relevant, Not Relevant, Can't Decide) order.
    pub fn histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for ex in &self.examples {
            h[ex.label.index()] += 1;
        }
        h
    }

    /// Cleans, tokenizes and embeds every example.
    pub fn vectorize(&self, table: &EmbeddingTable, max_len: usize) -> Vec<LabeledExample> {
        self.examples
            .iter()
            .map(|ex| LabeledExample::from_text(&ex.id, &ex.text, ex.label, ExampleSource::Dataset, table, max_len))
            .collect()
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<Box<dyn Read>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(Box::new(file) as Box<dyn Read>))
}

fn find_column(headers: &csv::ByteRecord, candidates: &[String]) -> Option<usize> {
    let names: Vec<String> = headers
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim().trim_start_matches('\u{feff}').to_lowercase())
        .collect();
    candidates
        .iter()
        .find_map(|c| names.iter().position(|n| *n == c.trim().to_lowercase()))
}

fn field(record: &csv::ByteRecord, idx: usize) -> String {
    record
        .get(idx)
        .map(|b| String::from_utf8_lossy(b).into_owned())
        .unwrap_or_default()
}

struct Columns {
    id: Option<usize>,
    text: usize,
    label: usize,
}

fn read_rows(
    path: &Path,
    resolve: impl FnOnce(&csv::ByteRecord) -> Result<Columns>,
    mut to_label: impl FnMut(&str) -> Option<RelevanceLabel>,
) -> Result<Corpus> {
    let mut reader = open_csv(path)?;
    let headers = reader
        .byte_headers()
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?
        .clone();
    let cols = resolve(&headers)?;
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in reader.byte_records().enumerate() {
        let record = record.map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(row as u64 + 2);
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let raw_label = field(&record, cols.label);
        let label = to_label(raw_label.trim())
            .ok_or_else(|| row_err(format!("unknown label value {:?}", raw_label.trim())))?;
        let mut id = cols
            .id
            .map(|i| field(&record, i).trim().trim_matches('\'').to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| format!("row{line}"));
        if !seen.insert(id.clone()) {
            // Retweets repeat ids in some exports; keep both rows apart.
            id = format!("{id}#row{line}");
            seen.insert(id.clone());
        }
        examples.push(RawExample {
            id,
            text: field(&record, cols.text),
            label,
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Corpus::new(name, examples)
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Loads the crowd-labeled disaster corpus: columns `text` and `choose_one`
/// (`Relevant`, `Not Relevant`, `Can't Decide`). `_unit_id` or `id`, when
/// present, supplies example ids; otherwise the line number does.
pub fn load_figure_eight(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    read_rows(
        path,
        |headers| {
            let missing = |name: &str| Error::Dataset(format!("{}: missing column {name:?}", path.display()));
            Ok(Columns {
                id: find_column(headers, &strings(&["_unit_id", "id", "tweetid"])),
                text: find_column(headers, &strings(&["text"])).ok_or_else(|| missing("text"))?,
                label: find_column(headers, &strings(&["choose_one"])).ok_or_else(|| missing("choose_one"))?,
            })
        },
        |s| s.parse().ok(),
    )
}

/// Informativeness value → relevance label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping(pub BTreeMap<String, RelevanceLabel>);

impl Default for LabelMapping {
    fn default() -> Self {
        LabelMapping(
            [
                ("Related and informative", RelevanceLabel::Relevant),
                ("Related - but not informative", RelevanceLabel::Relevant),
                ("Not related", RelevanceLabel::NotRelevant),
                ("Not applicable", RelevanceLabel::CantDecide),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        )
    }
}

impl LabelMapping {
    pub fn get(&self, value: &str) -> Option<RelevanceLabel> {
        let value = value.trim();
        self.0
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(value))
            .map(|(_, v)| *v)
    }

    pub fn set(&mut self, value: impl Into<String>, label: RelevanceLabel) {
        self.0.insert(value.into(), label);
    }
}

/// Candidate header names per role, matched case-insensitively after trimming.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrisisLexColumns {
    pub id: Vec<String>,
    pub text: Vec<String>,
    pub informativeness: Vec<String>,
}

impl Default for CrisisLexColumns {
    fn default() -> Self {
        CrisisLexColumns {
            id: strings(&["Tweet ID", "tweet_id", "id"]),
            text: strings(&["Tweet Text", "tweet_text", "text"]),
            informativeness: strings(&["Informativeness", "informativeness", "label"]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrisisLexOptions {
    pub mapping: LabelMapping,
    pub columns: CrisisLexColumns,
}

/// Loads a CrisisLexT26-style event file, labeling rows through the
/// configured informativeness mapping.
pub fn load_crisislex(path: impl AsRef<Path>, options: &CrisisLexOptions) -> Result<Corpus> {
    let path = path.as_ref();
    read_rows(
        path,
        |headers| {
            let missing = |role: &str, names: &[String]| {
                Error::Dataset(format!("{}: no {role} column among {names:?}", path.display()))
            };
            let c = &options.columns;
            Ok(Columns {
                id: find_column(headers, &c.id),
                text: find_column(headers, &c.text).ok_or_else(|| missing("text", &c.text))?,
                label: find_column(headers, &c.informativeness)
                    .ok_or_else(|| missing("informativeness", &c.informativeness))?,
            })
        },
        |s| options.mapping.get(s),
    )
}
