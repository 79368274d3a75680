use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::OptimizerKind;
use crate::text::DEFAULT_MAX_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelType {
    #[serde(rename = "CNN", alias = "cnn")]
    Cnn,
    #[serde(rename = "LSTM", alias = "lstm")]
    Lstm,
    #[serde(rename = "RNN", alias = "rnn")]
    Rnn,
}

impl ModelType {
    pub fn is_recurrent(self) -> bool {
        !matches!(self, ModelType::Cnn)
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelType::Cnn => "CNN",
            ModelType::Lstm => "LSTM",
            ModelType::Rnn => "RNN",
        })
    }
}

impl FromStr for ModelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(ModelType::Cnn),
            "lstm" => Ok(ModelType::Lstm),
            "rnn" => Ok(ModelType::Rnn),
            _ => Err(Error::Hyperparameters(format!("unknown model type {s:?}"))),
        }
    }
}

pub const DEFAULT_EMBEDDING_DIM: usize = 300;
pub const DEFAULT_HIDDEN: usize = 300;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub model_type: ModelType,
    pub learning_rate: f64,
    /// Gradient mini-batch size used when iterating over the training window.
    pub batch_size: usize,
    /// Passes over the window per submission.
    pub epochs: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    /// Number of convolution filters.
    pub filter_size: usize,
    pub kernel_size: usize,
    pub optimizer: OptimizerKind,
    pub hidden_size: usize,
    pub max_len: usize,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Hyperparameters {
    /// Tuned CNN: lr 0.0079, batch 10, 1 epoch, 16 filters of width 2, Adam.
    pub fn cnn() -> Self {
        Hyperparameters {
            model_type: ModelType::Cnn,
            learning_rate: 0.0079,
            batch_size: 10,
            epochs: 1,
            dropout: 0.0,
            recurrent_dropout: 0.0,
            filter_size: 16,
            kernel_size: 2,
            optimizer: OptimizerKind::Adam,
            hidden_size: DEFAULT_HIDDEN,
            max_len: DEFAULT_MAX_LEN,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            seed: DEFAULT_SEED,
        }
    }

    /// Tuned LSTM: lr 0.0002, batch 10, 10 epochs, dropout 0.4, recurrent dropout 0.2, Adam.
    pub fn lstm() -> Self {
        Hyperparameters {
            model_type: ModelType::Lstm,
            learning_rate: 0.0002,
            batch_size: 10,
            epochs: 10,
            dropout: 0.4,
            recurrent_dropout: 0.2,
            ..Self::cnn()
        }
    }

    /// Tuned RNN: lr 0.0001, batch 10, 7 epochs, dropout 0, recurrent dropout 0.2, Adam.
    pub fn rnn() -> Self {
        Hyperparameters {
            model_type: ModelType::Rnn,
            learning_rate: 0.0001,
            batch_size: 10,
            epochs: 7,
            dropout: 0.0,
            recurrent_dropout: 0.2,
            ..Self::cnn()
        }
    }

    pub fn defaults_for(model_type: ModelType) -> Self {
        match model_type {
            ModelType::Cnn => Self::cnn(),
            ModelType::Lstm => Self::lstm(),
            ModelType::Rnn => Self::rnn(),
        }
    }

    /// The nine searched configurations, three per architecture.
    pub fn tuned() -> Vec<Self> {
        use OptimizerKind::{Adagrad, Adam};
        let cnn = |lr, batch, epochs, optimizer| Hyperparameters {
            learning_rate: lr,
            batch_size: batch,
            epochs,
            optimizer,
            ..Self::cnn()
        };
        let rec = |model_type, lr, batch, epochs, dropout, recurrent_dropout| Hyperparameters {
            model_type,
            learning_rate: lr,
            batch_size: batch,
            epochs,
            dropout,
            recurrent_dropout,
            optimizer: Adam,
            ..Self::cnn()
        };
        vec![
            cnn(0.0079, 10, 1, Adam),
            cnn(0.01, 50, 2, Adagrad),
            cnn(0.0063, 10, 3, Adam),
            rec(ModelType::Lstm, 0.0002, 10, 10, 0.4, 0.2),
            rec(ModelType::Lstm, 0.0002, 20, 8, 0.2, 0.6),
            rec(ModelType::Lstm, 0.0006, 100, 12, 0.6, 0.6),
            rec(ModelType::Rnn, 0.0001, 10, 7, 0.0, 0.2),
            rec(ModelType::Rnn, 0.0001, 20, 5, 0.0, 0.0),
            rec(ModelType::Rnn, 0.0001, 100, 12, 0.0, 0.2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Hyperparameters(msg));
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return fail(format!("learning rate {} must be finite and non-negative", self.learning_rate));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("max_len", self.max_len),
            ("embedding_dim", self.embedding_dim),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        for (name, v) in [("dropout", self.dropout), ("recurrent_dropout", self.recurrent_dropout)] {
            if !(0.0..1.0).contains(&v) {
                return fail(format!("{name} {v} not in [0, 1)"));
            }
        }
        match self.model_type {
            ModelType::Cnn => {
                if self.filter_size == 0 || self.kernel_size == 0 {
                    return fail("filter_size and kernel_size must be positive".into());
                }
                if self.kernel_size > self.max_len {
                    return fail(format!(
                        "kernel_size {} exceeds max_len {}",
                        self.kernel_size, self.max_len
                    ));
                }
            }
            ModelType::Lstm | ModelType::Rnn => {
                if self.hidden_size == 0 {
                    return fail("hidden_size must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Copy with the fields the architecture ignores reset to defaults, so
    /// two configurations compare equal iff they build the same model.
    pub fn normalized(&self) -> Self {
        let base = Self::cnn();
        let mut hp = self.clone();
        match hp.model_type {
            ModelType::Cnn => {
                hp.recurrent_dropout = 0.0;
                hp.hidden_size = base.hidden_size;
            }
            ModelType::Lstm | ModelType::Rnn => {
                hp.filter_size = base.filter_size;
                hp.kernel_size = base.kernel_size;
            }
        }
        hp
    }
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self::cnn()
    }
}

/// Partial hyperparameters, layered over a model type's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperparameterOverrides {
    pub model_type: Option<ModelType>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub dropout: Option<f64>,
    pub recurrent_dropout: Option<f64>,
    pub filter_size: Option<usize>,
    pub kernel_size: Option<usize>,
    pub optimizer: Option<OptimizerKind>,
    pub hidden_size: Option<usize>,
    pub max_len: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub seed: Option<u64>,
}

impl HyperparameterOverrides {
    /// Fields set in `other` win.
    pub fn merged(&self, other: &Self) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { HyperparameterOverrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            model_type,
            learning_rate,
            batch_size,
            epochs,
            dropout,
            recurrent_dropout,
            filter_size,
            kernel_size,
            optimizer,
            hidden_size,
            max_len,
            embedding_dim,
            seed
        )
    }

    /// Starts from the defaults of `model_type` (or `fallback`) and applies
    /// every field that is set.
    pub fn resolve(&self, fallback: ModelType) -> Hyperparameters {
        let mut hp = Hyperparameters::defaults_for(self.model_type.unwrap_or(fallback));
        macro_rules! apply {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { hp.$f = v; })* };
        }
        apply!(
            learning_rate,
            batch_size,
            epochs,
            dropout,
            recurrent_dropout,
            filter_size,
            kernel_size,
            optimizer,
            hidden_size,
            max_len,
            embedding_dim,
            seed
        );
        hp
    }
}
