//! Pre-trained word-embedding tables in word2vec binary and text layouts.
//!
//! Binary layout: ASCII `"<vocab_size> <dim>\n"`, then per word the UTF-8
//! token bytes, a single `0x20`, `dim` little-endian `f32` values and an
//! optional `'\n'`. Text layout: one `token v1 .. vdim` record per line, with
//! an optional `"<vocab_size> <dim>"` header line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Immutable word → vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vocab: HashMap<String, usize>,
    words: Vec<String>,
    vectors: Vec<f32>,
}

impl EmbeddingTable {
    pub fn empty(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vocab: HashMap::new(),
            words: Vec::new(),
            vectors: Vec::new(),
        }
    }

    /// Builds a table from `(token, vector)` pairs.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(Error::EmbeddingFormat("dimension must be positive".into()));
        }
        let mut table = EmbeddingTable::empty(dim);
        for (pos, (token, vector)) in entries.into_iter().enumerate() {
            let token = token.into();
            if vector.len() != dim {
                return Err(Error::EmbeddingFormat(format!(
                    "entry {pos} ({token:?}) has {} components, expected {dim}",
                    vector.len()
                )));
            }
            table.insert(pos, token, &vector)?;
        }
        Ok(table)
    }

    fn insert(&mut self, pos: usize, token: String, vector: &[f32]) -> Result<()> {
        if token.is_empty() {
            return Err(Error::EmbeddingFormat(format!("empty token at entry {pos}")));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::EmbeddingFormat(format!(
                "non-finite component in vector for {token:?} at entry {pos}"
            )));
        }
        if let Some(prev) = self.vocab.get(&token) {
            return Err(Error::EmbeddingFormat(format!(
                "duplicate token {token:?} at entry {pos} (first seen at entry {prev})"
            )));
        }
        self.vocab.insert(token.clone(), self.words.len());
        self.words.push(token);
        self.vectors.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Tokens in file order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Exact, case-sensitive lookup.
    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.vocab.get(token).map(|&idx| self.vector(idx))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains_key(token)
    }

    fn vector(&self, idx: usize) -> &[f32] {
        &self.vectors[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Loads either layout, choosing binary unless the extension is
    /// `.txt`/`.vec`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("vec") => Self::load_text(path),
            _ => Self::load_binary(path),
        }
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(&mut BufReader::new(file))
    }

    pub fn read_binary<R: BufRead>(reader: &mut R) -> Result<Self> {
        let mut header = Vec::new();
        reader
            .read_until(b'\n', &mut header)
            .map_err(|e| Error::EmbeddingFormat(format!("reading header: {e}")))?;
        let header = String::from_utf8_lossy(&header);
        let (vocab_size, dim) = parse_header(header.trim_end())
            .ok_or_else(|| Error::EmbeddingFormat(format!("malformed header {:?}", header.trim_end())))?;
        if dim == 0 {
            return Err(Error::EmbeddingFormat("dimension must be positive".into()));
        }

        let mut table = EmbeddingTable {
            dim,
            vocab: HashMap::with_capacity(vocab_size),
            words: Vec::with_capacity(vocab_size),
            vectors: Vec::with_capacity(vocab_size * dim),
        };
        let mut raw = vec![0u8; dim * 4];
        let mut vector = vec![0f32; dim];
        let mut token_buf = Vec::new();
        for pos in 0..vocab_size {
            token_buf.clear();
            reader
                .read_until(b' ', &mut token_buf)
                .map_err(|e| Error::EmbeddingFormat(format!("reading token at entry {pos}: {e}")))?;
            if token_buf.last() != Some(&b' ') {
                return Err(Error::EmbeddingFormat(format!(
                    "unexpected end of file at entry {pos} of {vocab_size}"
                )));
            }
            token_buf.pop();
            // Writers disagree on whether a newline follows each vector.
            let start = token_buf.iter().take_while(|&&b| b == b'\n').count();
            let token = String::from_utf8_lossy(&token_buf[start..]).into_owned();

            reader.read_exact(&mut raw).map_err(|_| {
                Error::EmbeddingFormat(format!(
                    "truncated vector for token {token:?} at entry {pos}"
                ))
            })?;
            for (dst, chunk) in vector.iter_mut().zip(raw.chunks_exact(4)) {
                *dst = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            }
            table.insert(pos, token, &vector)?;
        }
        Ok(table)
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        self.write_binary(&mut writer).map_err(|e| Error::io(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_binary<W: Write>(&self, writer: &mut W) -> std::io::Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (idx, word) in self.words.iter().enumerate() {
            writer.write_all(word.as_bytes())?;
            writer.write_all(b" ")?;
            for v in self.vector(idx) {
                writer.write_all(&v.to_le_bytes())?;
            }
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(file))
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        let mut declared: Option<(usize, usize)> = None;
        let mut vector = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::EmbeddingFormat(format!("line {}: {e}", lineno + 1)))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                if let Some(header) = parse_header(line) {
                    declared = Some(header);
                    continue;
                }
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap_or_default().to_string();
            vector.clear();
            for field in fields {
                let value: f32 = field.parse().map_err(|_| {
                    Error::EmbeddingFormat(format!(
                        "line {}: non-numeric component {field:?} for token {token:?}",
                        lineno + 1
                    ))
                })?;
                vector.push(value);
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::empty(vector.len()));
            if vector.is_empty() || vector.len() != table.dim {
                return Err(Error::EmbeddingFormat(format!(
                    "line {}: token {token:?} has {} components, expected {}",
                    lineno + 1,
                    vector.len(),
                    table.dim
                )));
            }
            let pos = table.len();
            table.insert(pos, token, &vector)?;
        }

        let table = match (table, declared) {
            (Some(t), _) => t,
            (None, Some((_, dim))) if dim > 0 => EmbeddingTable::empty(dim),
            _ => return Err(Error::EmbeddingFormat("no vectors and no header".into())),
        };
        if let Some((n, dim)) = declared {
            if n != table.len() || dim != table.dim {
                return Err(Error::EmbeddingFormat(format!(
                    "header declares {n}x{dim}, file holds {}x{}",
                    table.len(),
                    table.dim
                )));
            }
        }
        Ok(table)
    }

    pub fn write_text<W: Write>(&self, writer: &mut W) -> std::io::Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (idx, word) in self.words.iter().enumerate() {
            write!(writer, "{word}")?;
            for v in self.vector(idx) {
                // `{:?}` on f32 prints the shortest representation that round-trips.
                write!(writer, " {v:?}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let n = parts.next()?.parse().ok()?;
    let dim = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((n, dim))
}
