//! Online relevance classification for short crisis-related texts.
//!
//! A [`ClassifierModel`] (CNN, LSTM or Elman RNN over pretrained word
//! embeddings) is retrained on a bounded sliding window of the most recent
//! labels every time a batch arrives. [`simulate_stream`] replays a labeled
//! corpus through the same loop to measure how quickly quality improves.

pub mod cputime;
pub mod embeddings;
pub mod error;
pub mod label;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod simulation;
pub mod text;
pub mod trainer;

pub use embeddings::EmbeddingTable;
pub use error::{Error, Result};
pub use label::{LabelDistribution, RelevanceLabel};
pub use metrics::{
    average_f1, confusion, estimate_f1, f1_score, fit_log, score, AverageMode, ConfusionCounts, PerformanceEstimator,
    ScoreTriple, TrendlineFit,
};
pub use model::{ClassifierModel, HyperparameterOverrides, Hyperparameters, ModelType};
pub use nn::OptimizerKind;
pub use text::{clean, to_matrix, tokenize, vectorize, CleanText, SentenceMatrix, DEFAULT_MAX_LEN};
pub use trainer::{
    evaluate, predict_batch, predict_matrix, simulate_stream, submit_labels, ExampleSource, LabeledExample, Prediction,
    StreamConfig, TrainReport, TrainingWindow, DEFAULT_DELIVERY_SIZE, DEFAULT_WINDOW_CAPACITY,
};
