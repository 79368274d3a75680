//! Tweet cleaning, tokenization and sentence-matrix construction.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;

/// Default cap on sentence-matrix rows.
pub const DEFAULT_MAX_LEN: usize = 64;

/// Lowercase text holding only letters, digits and single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CleanText(String);

impl CleanText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<str> for CleanText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap())
}

fn mention_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w*").unwrap())
}

/// Normalizes raw tweet text.
///
/// Rule order: URLs are removed, `@mentions` are removed, `#` markers are
/// dropped (the tag word stays), apostrophes are deleted and every other
/// non-alphanumeric character becomes a space, the text is lowercased and
/// whitespace is collapsed. The function is idempotent.
pub fn clean(raw: &str) -> CleanText {
    let no_urls = url_pattern().replace_all(raw, " ");
    let no_mentions = mention_pattern().replace_all(&no_urls, " ");

    let mut out = String::with_capacity(no_mentions.len());
    let mut pending_space = false;
    for ch in no_mentions.chars() {
        if matches!(ch, '\'' | '\u{2019}') {
            continue;
        }
        let mut wrote = false;
        for lower in ch.to_lowercase() {
            if lower.is_alphanumeric() && !lower.is_uppercase() {
                if pending_space && !out.is_empty() {
                    out.push(' ');
                }
                pending_space = false;
                out.push(lower);
                wrote = true;
            }
        }
        if !wrote {
            pending_space = true;
        }
    }
    CleanText(out)
}

/// Splits cleaned text on single spaces.
pub fn tokenize(text: &CleanText) -> Vec<String> {
    text.0
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// `max_len × dim` input matrix. Rows `0..length` hold token embeddings in
/// order, the remaining rows are zero padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceMatrix {
    max_len: usize,
    dim: usize,
    length: usize,
    data: Vec<f32>,
}

impl SentenceMatrix {
    pub fn zeros(max_len: usize, dim: usize) -> Self {
        SentenceMatrix {
            max_len,
            dim,
            length: 0,
            data: vec![0.0; max_len * dim],
        }
    }

    /// Builds a matrix from its real rows; the rest is padded with zeros.
    pub fn from_rows(max_len: usize, dim: usize, rows: &[f32]) -> Option<Self> {
        if dim == 0 || !rows.len().is_multiple_of(dim) || rows.len() / dim > max_len {
            return None;
        }
        let mut m = SentenceMatrix::zeros(max_len, dim);
        m.data[..rows.len()].copy_from_slice(rows);
        m.length = rows.len() / dim;
        Some(m)
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of real (non-padding) rows.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn is_degenerate(&self) -> bool {
        self.length == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// All `max_len × dim` values, row-major.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// The `length × dim` prefix of real rows.
    pub fn real_rows(&self) -> &[f32] {
        &self.data[..self.length * self.dim]
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.max_len).map(|i| i < self.length).collect()
    }
}

/// Embeds tokens row by row. Tokens missing from the table are skipped and
/// only the first `max_len` embeddable tokens are kept.
pub fn to_matrix(tokens: &[String], table: &EmbeddingTable, max_len: usize) -> SentenceMatrix {
    assert!(max_len >= 1, "max_len must be positive");
    let dim = table.dim();
    let mut m = SentenceMatrix::zeros(max_len, dim);
    for token in tokens {
        if m.length == max_len {
            break;
        }
        match table.lookup(token) {
            Some(v) => {
                let start = m.length * dim;
                m.data[start..start + dim].copy_from_slice(v);
                m.length += 1;
            }
            None => log::debug!("skipping out-of-vocabulary token {token:?}"),
        }
    }
    m
}

/// Raw text straight to tokens and matrix.
pub fn vectorize(raw: &str, table: &EmbeddingTable, max_len: usize) -> (Vec<String>, SentenceMatrix) {
    let tokens = tokenize(&clean(raw));
    let matrix = to_matrix(&tokens, table, max_len);
    (tokens, matrix)
}
