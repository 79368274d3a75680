use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::report::{ReportFormat, SimulationReport};
use super::split::Split;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{ClassifierModel, HyperparameterOverrides, Hyperparameters, ModelType};
use crate::trainer::{simulate_stream, LabeledExample, StreamConfig};

/// Candidate configurations for a random search.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchSpace {
    pub configs: Vec<Hyperparameters>,
}

impl SearchSpace {
    pub fn new(configs: Vec<Hyperparameters>) -> Self {
        SearchSpace { configs }
    }

    /// The nine tuned configurations.
    pub fn tuned() -> Self {
        SearchSpace::new(Hyperparameters::tuned())
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Parses a TOML search space.
    ///
    /// ```toml
    /// [base]              # applied to every candidate
    /// model_type = "CNN"
    ///
    /// [grid]              # cartesian product, keys in sorted order
    /// learning_rate = [0.001, 0.01]
    /// batch_size = [10, 50]
    ///
    /// [[config]]          # explicit extra candidates, layered over [base]
    /// model_type = "LSTM"
    /// dropout = 0.4
    /// ```
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let doc: toml::Table = src
            .parse()
            .map_err(|e| Error::Hyperparameters(format!("search space: {e}")))?;
        let mut base = toml::Table::new();
        let mut grid: BTreeMap<String, Vec<toml::Value>> = BTreeMap::new();
        let mut explicit = Vec::new();
        for (key, value) in doc {
            match (key.as_str(), value) {
                ("base", toml::Value::Table(t)) => base = t,
                ("grid", toml::Value::Table(t)) => {
                    for (k, v) in t {
                        let values = match v {
                            toml::Value::Array(a) if !a.is_empty() => a,
                            toml::Value::Array(_) => {
                                return Err(Error::Hyperparameters(format!("search space: grid.{k} is empty")))
                            }
                            scalar => vec![scalar],
                        };
                        grid.insert(k, values);
                    }
                }
                ("config", toml::Value::Array(a)) => {
                    for v in a {
                        match v {
                            toml::Value::Table(t) => explicit.push(t),
                            _ => return Err(Error::Hyperparameters("search space: config entries must be tables".into())),
                        }
                    }
                }
                (other, _) => return Err(Error::Hyperparameters(format!("search space: unexpected key {other:?}"))),
            }
        }

        let mut tables = Vec::new();
        if !grid.is_empty() {
            let mut combos = vec![base.clone()];
            for (k, values) in &grid {
                combos = combos
                    .into_iter()
                    .flat_map(|t| {
                        values.iter().map(move |v| {
                            let mut t = t.clone();
                            t.insert(k.clone(), v.clone());
                            t
                        })
                    })
                    .collect();
            }
            tables.extend(combos);
        }
        for t in explicit {
            let mut merged = base.clone();
            merged.extend(t);
            tables.push(merged);
        }
        if tables.is_empty() && !base.is_empty() {
            tables.push(base);
        }

        let configs = tables
            .into_iter()
            .map(|t| {
                let o: HyperparameterOverrides = toml::Value::Table(t)
                    .try_into()
                    .map_err(|e| Error::Hyperparameters(format!("search space: {e}")))?;
                let hp = o.resolve(ModelType::Cnn);
                hp.validate()?;
                Ok(hp)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SearchSpace { configs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&src)
    }

    /// Up to `n` distinct candidates (after normalization), drawn without
    /// replacement with a seeded shuffle. Returns indices into `configs`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<usize> {
        let mut seen: Vec<Hyperparameters> = Vec::new();
        let mut distinct = Vec::new();
        for (i, hp) in self.configs.iter().enumerate() {
            let norm = hp.normalized();
            if !seen.contains(&norm) {
                seen.push(norm);
                distinct.push(i);
            }
        }
        distinct.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        distinct.truncate(n);
        distinct
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedRun {
    pub rank: usize,
    /// Index of the configuration in the search space.
    pub index: usize,
    pub hyperparameters: Hyperparameters,
    pub report: SimulationReport,
}

impl RankedRun {
    pub fn f1(&self) -> f64 {
        self.report.average.f1
    }

    pub fn without_timing(&self) -> Self {
        RankedRun {
            report: self.report.without_timing(),
            ..self.clone()
        }
    }
}

/// Runs a simulated stream per sampled configuration, scoring on the
/// validation partition, and ranks by average F1 (descending), then mean
/// CPU time per iteration, then configuration index.
pub fn grid_search(
    split: &Split,
    table: &EmbeddingTable,
    space: &SearchSpace,
    n_samples: usize,
    seed: u64,
    stream: StreamConfig,
    jobs: usize,
) -> Result<Vec<RankedRun>> {
    if split.validation.is_empty() {
        return Err(Error::InvalidArgument("grid search needs a validation partition".into()));
    }
    let picks = space.sample(n_samples, seed);
    let mut vectorized: BTreeMap<usize, (Vec<LabeledExample>, Vec<LabeledExample>)> = BTreeMap::new();
    for &i in &picks {
        let max_len = space.configs[i].max_len;
        vectorized
            .entry(max_len)
            .or_insert_with(|| (split.train.vectorize(table, max_len), split.validation.vectorize(table, max_len)));
    }

    let run = |i: usize| -> Result<RankedRun> {
        let hp = Hyperparameters {
            embedding_dim: table.dim(),
            ..space.configs[i].clone()
        };
        let (train, validation) = &vectorized[&hp.max_len];
        let mut model = ClassifierModel::build(hp.clone())?;
        let report = simulate_stream(&mut model, train, validation, stream)?;
        log::info!("config {i}: {} average F1 {:.4}", hp.model_type, report.average.f1);
        Ok(RankedRun {
            rank: 0,
            index: i,
            hyperparameters: hp,
            report,
        })
    };

    let results: Mutex<Vec<(usize, Result<RankedRun>)>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, picks.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = picks.get(k) else { break };
                let r = run(i);
                results.lock().unwrap_or_else(|e| e.into_inner()).push((k, r));
            });
        }
    });
    let mut results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    results.sort_by_key(|(k, _)| *k);
    let mut runs = results.into_iter().map(|(_, r)| r).collect::<Result<Vec<_>>>()?;
    rank_runs(&mut runs);
    Ok(runs)
}

/// Sorts by average F1 (descending), mean CPU seconds, then configuration
/// index, and renumbers `rank` from 1.
pub fn rank_runs(runs: &mut [RankedRun]) {
    runs.sort_by(|a, b| {
        b.f1()
            .total_cmp(&a.f1())
            .then(a.report.mean_cpu_seconds().total_cmp(&b.report.mean_cpu_seconds()))
            .then(a.index.cmp(&b.index))
    });
    for (r, run) in runs.iter_mut().enumerate() {
        run.rank = r + 1;
    }
}

const COLUMNS: [&str; 15] = [
    "rank",
    "model",
    "learning_rate",
    "batch_size",
    "epochs",
    "dropout",
    "recurrent_dropout",
    "filters",
    "kernel",
    "optimizer",
    "precision",
    "recall",
    "f1",
    "mean_cpu_seconds",
    "crossing_n",
];

fn row(run: &RankedRun) -> [String; 15] {
    let hp = &run.hyperparameters;
    let rec = hp.model_type.is_recurrent();
    let dash = || "-".to_string();
    let a = run.report.average;
    [
        run.rank.to_string(),
        hp.model_type.to_string(),
        hp.learning_rate.to_string(),
        hp.batch_size.to_string(),
        hp.epochs.to_string(),
        if rec { hp.dropout.to_string() } else { dash() },
        if rec { hp.recurrent_dropout.to_string() } else { dash() },
        if rec { dash() } else { hp.filter_size.to_string() },
        if rec { dash() } else { hp.kernel_size.to_string() },
        hp.optimizer.to_string(),
        a.precision.to_string(),
        a.recall.to_string(),
        a.f1.to_string(),
        run.report.mean_cpu_seconds().to_string(),
        run.report.crossing_n().map(|n| n.to_string()).unwrap_or_else(dash),
    ]
}

pub fn ranking_to_string(runs: &[RankedRun], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&COLUMNS.join(","));
            out.push('\n');
            for run in runs {
                out.push_str(&row(run).join(","));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len()));
            for run in runs {
                let _ = writeln!(out, "| {} |", row(run).join(" | "));
            }
        }
    }
    out
}

pub fn write_ranking(runs: &[RankedRun], path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ranking_to_string(runs, format)).map_err(|e| Error::io(path, e))
}
