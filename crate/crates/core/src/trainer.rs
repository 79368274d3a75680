//! Incremental training protocol.
//!
//! Every submission appends the newly labeled examples to a bounded window
//! (110 by default, oldest evicted first) and retrains for `epochs` shuffled
//! passes over the whole window in mini-batches of `batch_size`.

use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cputime;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::label::{LabelDistribution, RelevanceLabel};
use crate::metrics::{average_f1, confusion, fit_log, score, AverageMode, ScoreTriple};
use crate::model::{unix_now, ClassifierModel};
use crate::simulation::{IterationRecord, ReportConfig, SimulationReport};
use crate::text::{vectorize, SentenceMatrix};

pub const DEFAULT_WINDOW_CAPACITY: usize = 110;
pub const DEFAULT_DELIVERY_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleSource {
    #[default]
    User,
    Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub tokens: Vec<String>,
    pub matrix: SentenceMatrix,
    pub label: RelevanceLabel,
    pub source: ExampleSource,
}

impl LabeledExample {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        matrix: SentenceMatrix,
        label: RelevanceLabel,
        source: ExampleSource,
    ) -> Self {
        LabeledExample {
            id: id.into(),
            tokens,
            matrix,
            label,
            source,
        }
    }

    /// Runs the text pipeline on `raw`.
    pub fn from_text(
        id: impl Into<String>,
        raw: &str,
        label: RelevanceLabel,
        source: ExampleSource,
        table: &EmbeddingTable,
        max_len: usize,
    ) -> Self {
        let (tokens, matrix) = vectorize(raw, table, max_len);
        LabeledExample::new(id, tokens, matrix, label, source)
    }

    pub fn is_degenerate(&self) -> bool {
        self.matrix.is_degenerate()
    }
}

/// Bounded arrival-ordered buffer of labeled examples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    capacity: usize,
    buffer: VecDeque<LabeledExample>,
}

impl Default for TrainingWindow {
    fn default() -> Self {
        TrainingWindow::new(DEFAULT_WINDOW_CAPACITY)
    }
}

impl TrainingWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        TrainingWindow {
            capacity,
            buffer: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledExample> {
        self.buffer.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.buffer.iter().map(|e| e.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&LabeledExample> {
        self.buffer.iter().find(|e| e.id == id)
    }

    /// Appends `example` as the newest entry. An existing entry with the
    /// same id is dropped first, so the latest label wins. Returns the
    /// examples evicted for capacity.
    pub fn push(&mut self, example: LabeledExample) -> Vec<LabeledExample> {
        if let Some(pos) = self.buffer.iter().position(|e| e.id == example.id) {
            self.buffer.remove(pos);
        }
        self.buffer.push_back(example);
        let mut evicted = Vec::new();
        while self.buffer.len() > self.capacity {
            evicted.extend(self.buffer.pop_front());
        }
        evicted
    }

    pub fn extend(&mut self, batch: impl IntoIterator<Item = LabeledExample>) -> Vec<LabeledExample> {
        batch.into_iter().flat_map(|e| self.push(e)).collect()
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub n_trained: u64,
    pub accepted: usize,
    /// Ids rejected because they have no embeddable tokens.
    pub rejected: Vec<String>,
    /// Mean loss of each epoch.
    pub loss_trace: Vec<f64>,
    pub window_len: usize,
    #[serde(with = "duration_secs")]
    pub duration: Duration,
    pub cpu_seconds: f64,
}

mod duration_secs {
    use serde::Serializer;
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

fn submission_seed(seed: u64, submission: u64) -> u64 {
    seed ^ submission.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Adds a batch of labeled examples to the model's window and retrains.
///
/// Degenerate examples (no embeddable tokens) are rejected; within the
/// batch a repeated id keeps its last label. `n_trained` grows by the
/// number of distinct accepted ids.
pub fn submit_labels(model: &mut ClassifierModel, batch: Vec<LabeledExample>) -> Result<TrainReport> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (accepted, rejected): (Vec<_>, Vec<_>) = batch.into_iter().partition(|e| !e.is_degenerate());
    let rejected: Vec<String> = rejected.into_iter().map(|e| e.id).collect();
    if accepted.is_empty() {
        return Err(Error::DegenerateBatch { ids: rejected });
    }
    for id in &rejected {
        log::debug!("rejecting example {id:?}: no embeddable tokens");
    }
    let hp = model.hp.clone();
    for ex in &accepted {
        if ex.matrix.max_len() != hp.max_len || ex.matrix.dim() != hp.embedding_dim {
            return Err(Error::Shape(format!(
                "example {:?} is {}x{}, model expects {}x{}",
                ex.id,
                ex.matrix.max_len(),
                ex.matrix.dim(),
                hp.max_len,
                hp.embedding_dim
            )));
        }
    }
    let distinct = accepted.iter().map(|e| e.id.as_str()).collect::<HashSet<_>>().len();

    let wall = Instant::now();
    let cpu_start = cputime::thread_cpu_time();
    let ClassifierModel {
        net,
        optimizer,
        window,
        ..
    } = model;
    window.extend(accepted);

    let mut rng = ChaCha8Rng::seed_from_u64(submission_seed(hp.seed, model.submissions));
    let examples: Vec<&LabeledExample> = window.iter().collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_trace = Vec::with_capacity(hp.epochs);
    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<&LabeledExample> = chunk.iter().map(|&i| examples[i]).collect();
            let loss = ClassifierModel::fit_minibatch(net, optimizer, &hp, &batch, &mut rng)?;
            weighted += loss * batch.len() as f64;
        }
        loss_trace.push(weighted / examples.len() as f64);
    }
    let window_len = examples.len();

    model.n_trained += distinct as u64;
    model.submissions += 1;
    model.updated_at = unix_now();
    Ok(TrainReport {
        n_trained: model.n_trained,
        accepted: distinct,
        rejected,
        loss_trace,
        window_len,
        duration: wall.elapsed(),
        cpu_seconds: cputime::thread_cpu_time().saturating_sub(cpu_start).as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: RelevanceLabel,
    pub distribution: LabelDistribution,
    /// Why the prediction fell back to Can't Decide, if it did.
    pub diagnostic: Option<String>,
}

/// Labels each text by the argmax of its predicted distribution, ties going
/// to Relevant, then Not Relevant. Texts without embeddable tokens get the
/// uniform distribution and Can't Decide.
pub fn predict_batch<S: AsRef<str>>(model: &ClassifierModel, table: &EmbeddingTable, texts: &[S]) -> Vec<Prediction> {
    let max_len = model.hp.max_len;
    texts
        .iter()
        .map(|text| {
            let (_, matrix) = vectorize(text.as_ref(), table, max_len);
            predict_matrix(model, &matrix)
        })
        .collect()
}

/// [`predict_batch`] for an already vectorized sentence.
pub fn predict_matrix(model: &ClassifierModel, matrix: &SentenceMatrix) -> Prediction {
    if matrix.is_degenerate() {
        return Prediction {
            label: RelevanceLabel::CantDecide,
            distribution: LabelDistribution::uniform(),
            diagnostic: Some("no embeddable tokens".into()),
        };
    }
    match model.predict(matrix) {
        Ok(distribution) => Prediction {
            label: distribution.argmax(),
            distribution,
            diagnostic: None,
        },
        Err(e) => Prediction {
            label: RelevanceLabel::CantDecide,
            distribution: LabelDistribution::uniform(),
            diagnostic: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    /// Newly labeled examples delivered per iteration.
    pub delivery_size: usize,
    pub mode: AverageMode,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            delivery_size: DEFAULT_DELIVERY_SIZE,
            mode: AverageMode::Macro,
        }
    }
}

/// Scores `model` on `test` with the given averaging.
pub fn evaluate(model: &ClassifierModel, test: &[LabeledExample], mode: AverageMode) -> Result<ScoreTriple> {
    let truth: Vec<RelevanceLabel> = test.iter().map(|e| e.label).collect();
    let predicted: Vec<RelevanceLabel> = test.iter().map(|e| predict_matrix(model, &e.matrix).label).collect();
    Ok(score(&confusion(&truth, &predicted)?, mode))
}

/// Replays `train` in consecutive chunks of `delivery_size`, retraining after
/// each chunk and scoring on the full `test` set. A trailing partial chunk
/// is not delivered.
pub fn simulate_stream(
    model: &mut ClassifierModel,
    train: &[LabeledExample],
    test: &[LabeledExample],
    cfg: StreamConfig,
) -> Result<SimulationReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("training and test sets must be non-empty".into()));
    }
    if cfg.delivery_size == 0 || train.len() < cfg.delivery_size {
        return Err(Error::InvalidArgument(format!(
            "training set of {} cannot supply batches of {}",
            train.len(),
            cfg.delivery_size
        )));
    }
    let train_ids: HashSet<&str> = train.iter().map(|e| e.id.as_str()).collect();
    if let Some(e) = test.iter().find(|e| train_ids.contains(e.id.as_str())) {
        return Err(Error::Overlap(e.id.clone()));
    }

    let mut iterations = Vec::with_capacity(train.len() / cfg.delivery_size);
    for (i, chunk) in train.chunks_exact(cfg.delivery_size).enumerate() {
        let (result, cpu_seconds) = cputime::measure(|| -> Result<ScoreTriple> {
            match submit_labels(model, chunk.to_vec()) {
                Ok(_) | Err(Error::DegenerateBatch { .. }) => {}
                Err(e) => return Err(e),
            }
            evaluate(model, test, cfg.mode)
        });
        iterations.push(IterationRecord {
            iteration: i + 1,
            n_tweets: (i + 1) * cfg.delivery_size,
            scores: result?,
            cpu_seconds,
        });
    }

    let per_iter: Vec<ScoreTriple> = iterations.iter().map(|r| r.scores).collect();
    let average = average_f1(&per_iter)?;
    let points: Vec<(f64, f64)> = iterations.iter().map(|r| (r.n_tweets as f64, r.scores.f1)).collect();
    let trendline = if points.len() >= 2 {
        Some(fit_log(&points)?.with_target(average.f1))
    } else {
        None
    };
    Ok(SimulationReport {
        config: ReportConfig {
            hyperparameters: model.hp.clone(),
            delivery_size: cfg.delivery_size,
            window_capacity: model.window.capacity(),
            mode: cfg.mode,
            train_size: train.len(),
            test_size: test.len(),
        },
        total_cpu_seconds: iterations.iter().map(|r| r.cpu_seconds).sum(),
        iterations,
        average,
        trendline,
    })
}
