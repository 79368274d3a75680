//! Shared fixtures for the benchmarks.

use relevance_core::simulation::synthetic_corpus;
use relevance_core::{ClassifierModel, Hyperparameters, LabeledExample, ModelType};

/// Vectorized synthetic examples at the given embedding width.
pub fn examples(n: usize, dim: usize) -> Vec<LabeledExample> {
    let (table, corpus) = synthetic_corpus(n, dim, 200, 17).expect("synthetic corpus");
    corpus.vectorize(&table, relevance_core::DEFAULT_MAX_LEN)
}

pub fn model(model_type: ModelType, dim: usize) -> ClassifierModel {
    let hp = Hyperparameters {
        embedding_dim: dim,
        ..Hyperparameters::defaults_for(model_type)
    };
    ClassifierModel::build(hp).expect("valid hyperparameters")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let ex = examples(20, 8);
        assert_eq!(ex.len(), 20);
        assert_eq!(model(ModelType::Cnn, 8).hyperparameters().embedding_dim, 8);
    }
}
