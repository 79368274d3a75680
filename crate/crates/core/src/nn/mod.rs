//! Layers, recurrent cells and optimizers with hand-written backward passes.
//!
//! Activations and gradients are `f64`; models round their stored weights to
//! `f32` after every update.

pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod recurrent;
pub mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{
    conv1d_backward, conv1d_forward, cross_entropy, dense_backward, dense_forward, dropout, dropout_mask,
    global_maxpool1d, global_maxpool1d_backward, softmax,
};
pub use optim::{adagrad_step, adam_step, AdamConfig, OptimizerKind, OptimizerState};
pub use recurrent::{LstmCell, RnnCell};
pub use tensor::Tensor2;
