use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{anyhow, Context};
use relevance_core::simulation::{load_crisislex, load_figure_eight, Corpus, CrisisLexOptions, LabelMapping};
use relevance_core::{EmbeddingTable, RelevanceLabel};
use relevance_server::wire::StreamItem;

use crate::cli::DataFormat;
use crate::error::CliError;

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, CliError> {
    let table = EmbeddingTable::load(path)
        .map_err(|e| CliError::data(anyhow!(e).context(format!("embeddings {}", path.display()))))?;
    log::info!("{} embeddings of dim {} from {}", table.len(), table.dim(), path.display());
    Ok(table)
}

/// Parses `VALUE=LABEL` overrides on top of the default mapping.
pub fn label_mapping(overrides: &[String]) -> Result<LabelMapping, CliError> {
    let mut mapping = LabelMapping::default();
    for entry in overrides {
        let (value, label) = entry
            .rsplit_once('=')
            .ok_or_else(|| CliError::Config(format!("--map expects VALUE=LABEL, got {entry:?}")))?;
        let label: RelevanceLabel = label
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("--map: unknown label {label:?}")))?;
        mapping.set(value.trim(), label);
    }
    Ok(mapping)
}

fn header_line(path: &Path) -> Result<String, CliError> {
    let file = File::open(path).with_context(|| format!("cannot open dataset {}", path.display())).map_err(CliError::Data)?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .with_context(|| format!("cannot read dataset {}", path.display()))
        .map_err(CliError::Data)?;
    Ok(line)
}

/// Prefixes the path unless the message already carries it.
fn with_path(e: relevance_core::Error, path: &Path) -> CliError {
    let shown = path.display().to_string();
    if e.to_string().contains(&shown) {
        CliError::data(e)
    } else {
        CliError::data(anyhow!(e).context(format!("dataset {shown}")))
    }
}

pub fn load_corpus(path: &Path, format: DataFormat, mapping: &LabelMapping) -> Result<Corpus, CliError> {
    let format = match format {
        DataFormat::Auto if header_line(path)?.to_ascii_lowercase().contains("choose_one") => DataFormat::FigureEight,
        DataFormat::Auto => DataFormat::Crisislex,
        f => f,
    };
    let corpus = match format {
        DataFormat::FigureEight => load_figure_eight(path),
        _ => load_crisislex(
            path,
            &CrisisLexOptions {
                mapping: mapping.clone(),
                ..CrisisLexOptions::default()
            },
        ),
    }
    .map_err(|e| with_path(e, path))?;
    log::info!("{} examples from {} (histogram {:?})", corpus.len(), path.display(), corpus.histogram());
    Ok(corpus)
}

const ID_COLUMNS: &[&str] = &["tweet id", "tweet_id", "_unit_id", "id", "tweetid"];
const TEXT_COLUMNS: &[&str] = &["tweet text", "tweet_text", "text"];

/// Reads `(id, text)` pairs from any CSV with a recognizable text column;
/// labels, if present, are ignored.
pub fn load_stream_items(path: &Path) -> Result<Vec<StreamItem>, CliError> {
    let ctx = || format!("dataset {}", path.display());
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .with_context(ctx)
        .map_err(CliError::Data)?;
    let headers: Vec<String> = rdr
        .headers()
        .with_context(ctx)
        .map_err(CliError::Data)?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let find = |names: &[&str]| names.iter().find_map(|n| headers.iter().position(|h| h == n));
    let text_col = find(TEXT_COLUMNS)
        .ok_or_else(|| CliError::Data(anyhow!("{}: no text column among {TEXT_COLUMNS:?}", path.display())))?;
    let id_col = find(ID_COLUMNS);
    let mut items = Vec::new();
    for (i, record) in rdr.byte_records().enumerate() {
        let record = record.with_context(ctx).map_err(CliError::Data)?;
        let field = |c: usize| String::from_utf8_lossy(record.get(c).unwrap_or_default()).into_owned();
        let id = id_col
            .map(|c| field(c).trim().trim_matches('\'').to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| format!("row{}", i + 2));
        items.push(StreamItem { id, text: field(text_col) });
    }
    Ok(items)
}
