//! Classifier assembly, prediction and persistence.

mod checkpoint;
pub mod hyperparams;
pub mod network;

use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use hyperparams::{HyperparameterOverrides, Hyperparameters, ModelType};
pub use network::{DropoutMasks, Network};

use crate::error::{Error, Result};
use crate::label::LabelDistribution;
use crate::nn::layers::softmax;
use crate::nn::{OptimizerState, Tensor2};
use crate::text::SentenceMatrix;
use crate::trainer::{LabeledExample, TrainingWindow};

pub(crate) fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Network weights, optimizer state and training history for one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub(crate) hp: Hyperparameters,
    pub(crate) net: Network,
    pub(crate) optimizer: OptimizerState,
    pub(crate) n_trained: u64,
    /// Number of completed `submit_labels` calls; seeds per-submission shuffling.
    pub(crate) submissions: u64,
    pub(crate) window: TrainingWindow,
    pub(crate) created_at: u64,
    pub(crate) updated_at: u64,
}

impl ClassifierModel {
    /// Untrained model with seeded Glorot initialization and an empty window.
    pub fn build(hp: Hyperparameters) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let mut net = Network::build(&hp, &mut rng)?;
        net.round_to_f32();
        let optimizer = OptimizerState::new(hp.optimizer, net.params());
        let now = unix_now();
        Ok(ClassifierModel {
            hp,
            net,
            optimizer,
            n_trained: 0,
            submissions: 0,
            window: TrainingWindow::default(),
            created_at: now,
            updated_at: now,
        })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    /// User-labeled examples consumed so far.
    pub fn n_trained(&self) -> u64 {
        self.n_trained
    }

    pub fn submissions(&self) -> u64 {
        self.submissions
    }

    pub fn window(&self) -> &TrainingWindow {
        &self.window
    }

    pub fn window_mut(&mut self) -> &mut TrainingWindow {
        &mut self.window
    }

    pub fn created_at(&self) -> u64 {
        self.created_at
    }

    pub fn updated_at(&self) -> u64 {
        self.updated_at
    }

    fn check_matrix(&self, m: &SentenceMatrix) -> Result<()> {
        if m.max_len() != self.hp.max_len || m.dim() != self.hp.embedding_dim {
            return Err(Error::Shape(format!(
                "sentence matrix is {}x{}, model expects {}x{}",
                m.max_len(),
                m.dim(),
                self.hp.max_len,
                self.hp.embedding_dim
            )));
        }
        Ok(())
    }

    /// Class distribution for one sentence, with dropout disabled. Matrices
    /// without real rows get the uniform distribution.
    pub fn predict(&self, m: &SentenceMatrix) -> Result<LabelDistribution> {
        self.check_matrix(m)?;
        if m.is_degenerate() {
            return Ok(LabelDistribution::uniform());
        }
        let probs = softmax(&self.net.logits(m)?)?;
        Ok(LabelDistribution([probs[0], probs[1], probs[2]]))
    }

    /// Mean loss and one optimizer step over `batch`.
    pub(crate) fn fit_minibatch<R: Rng + ?Sized>(
        net: &mut Network,
        optimizer: &mut OptimizerState,
        hp: &Hyperparameters,
        batch: &[&LabeledExample],
        rng: &mut R,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let mut total: Option<Vec<Tensor2>> = None;
        let mut loss_sum = 0.0;
        for ex in batch {
            let masks = net.sample_masks(hp, rng)?;
            let (loss, grads) = net.loss_and_grads(&ex.matrix, ex.label, &masks)?;
            loss_sum += loss;
            match total.as_mut() {
                None => total = Some(grads),
                Some(acc) => acc.iter_mut().zip(&grads).for_each(|(a, g)| a.add_assign(g)),
            }
        }
        let mut grads = total.expect("non-empty batch");
        let inv = 1.0 / batch.len() as f64;
        grads.iter_mut().for_each(|g| g.scale(inv));
        optimizer.step(&mut net.params_mut(), &grads, hp.learning_rate)?;
        net.round_to_f32();
        Ok(loss_sum * inv)
    }
}
