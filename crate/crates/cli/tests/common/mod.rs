#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relevance_core::simulation::synthetic_corpus;

pub const DIM: usize = 8;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_relevance"));
    for var in [
        "RELEVANCE_CONFIG",
        "RELEVANCE_DATASET",
        "RELEVANCE_EMBEDDINGS",
        "RELEVANCE_SEED",
        "RELEVANCE_LISTEN",
        "RELEVANCE_DATA_DIR",
        "RELEVANCE_TARGET",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub embeddings: PathBuf,
    pub dataset: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Synthetic marker corpus written as a crowd-labeled CSV plus text embeddings.
pub fn fixture(n: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let (table, corpus) = synthetic_corpus(n, DIM, 40, 3).unwrap();
    let embeddings = dir.path().join("vectors.txt");
    let mut f = fs::File::create(&embeddings).unwrap();
    table.write_text(&mut f).unwrap();
    let dataset = dir.path().join("events.csv");
    write_figure_eight(&dataset, corpus.examples.iter().map(|e| (e.id.as_str(), e.text.as_str(), e.label.as_str())));
    Fixture {
        dir,
        embeddings,
        dataset,
    }
}

pub fn write_figure_eight<'a>(path: &Path, rows: impl Iterator<Item = (&'a str, &'a str, &'a str)>) {
    let mut s = String::from("_unit_id,choose_one,text\n");
    for (id, text, label) in rows {
        s.push_str(&format!("{id},{},{}\n", quote(label), quote(text)));
    }
    fs::write(path, s).unwrap();
}
