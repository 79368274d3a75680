//! The three classifier architectures.
//!
//! * CNN: valid 1-D convolution → global max-pool over time → dense → softmax.
//!   Padding rows take part in the convolution as zeros.
//! * LSTM / RNN: the cell runs over the first `length` rows only and the
//!   final hidden state feeds a dense → softmax head.

use rand::Rng;

use super::hyperparams::{Hyperparameters, ModelType};
use crate::error::{Error, Result};
use crate::label::RelevanceLabel;
use crate::nn::layers::{
    conv1d_backward, conv1d_forward, cross_entropy, dense_backward, dense_forward, dropout_mask,
    global_maxpool1d, global_maxpool1d_backward, softmax,
};
use crate::nn::recurrent::{LstmCell, RnnCell};
use crate::nn::{grad_check, GradCheckReport, Tensor2};
use crate::text::SentenceMatrix;

pub const N_CLASSES: usize = RelevanceLabel::COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct CnnNet {
    pub kernel: usize,
    /// `n_filters × (kernel·dim)`.
    pub filters: Tensor2,
    pub conv_bias: Tensor2,
    pub dense_w: Tensor2,
    pub dense_b: Tensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentNet<C> {
    pub cell: C,
    pub dense_w: Tensor2,
    pub dense_b: Tensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Cnn(CnnNet),
    Lstm(RecurrentNet<LstmCell>),
    Rnn(RecurrentNet<RnnCell>),
}

/// Per-example dropout masks. `None` disables the corresponding dropout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropoutMasks {
    /// CNN: applied to pooled features. Recurrent: applied to every input row.
    pub input: Option<Vec<f64>>,
    pub recurrent: Option<Vec<f64>>,
}

fn input_tensor(m: &SentenceMatrix) -> Tensor2 {
    let data = m.data().iter().map(|&v| f64::from(v)).collect();
    Tensor2::from_vec(m.max_len(), m.dim(), data).expect("sentence matrix shape")
}

fn real_rows(m: &SentenceMatrix) -> Vec<Vec<f64>> {
    (0..m.length())
        .map(|i| m.row(i).iter().map(|&v| f64::from(v)).collect())
        .collect()
}

fn mul(x: &[f64], mask: Option<&Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    }
}

fn dense_head<R: Rng + ?Sized>(features: usize, rng: &mut R) -> (Tensor2, Tensor2) {
    (
        Tensor2::glorot(N_CLASSES, features, features, N_CLASSES, rng),
        Tensor2::zeros(1, N_CLASSES),
    )
}

/// Shared plumbing for the two recurrent cells.
pub trait Cell: Clone {
    type Trace;
    fn hidden(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn run(&self, steps: &[&[f64]], input: Option<&[f64]>, recurrent: Option<&[f64]>) -> Result<Self::Trace>;
    fn last_hidden(trace: &Self::Trace) -> &[f64];
    fn grads(&self, trace: &Self::Trace, d_last: &[f64]) -> [Tensor2; 3];
    fn tensors(&self) -> [&Tensor2; 3];
    fn tensors_mut(&mut self) -> [&mut Tensor2; 3];
}

impl Cell for LstmCell {
    type Trace = crate::nn::recurrent::LstmTrace;
    fn hidden(&self) -> usize {
        self.hidden_size()
    }
    fn input_dim(&self) -> usize {
        LstmCell::input_dim(self)
    }
    fn run(&self, steps: &[&[f64]], input: Option<&[f64]>, recurrent: Option<&[f64]>) -> Result<Self::Trace> {
        self.forward(steps, input, recurrent)
    }
    fn last_hidden(trace: &Self::Trace) -> &[f64] {
        trace.last_hidden()
    }
    fn grads(&self, trace: &Self::Trace, d_last: &[f64]) -> [Tensor2; 3] {
        let g = self.backward(trace, d_last);
        [g.w_x, g.w_h, g.b]
    }
    fn tensors(&self) -> [&Tensor2; 3] {
        [&self.w_x, &self.w_h, &self.b]
    }
    fn tensors_mut(&mut self) -> [&mut Tensor2; 3] {
        [&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

impl Cell for RnnCell {
    type Trace = crate::nn::recurrent::RnnTrace;
    fn hidden(&self) -> usize {
        self.hidden_size()
    }
    fn input_dim(&self) -> usize {
        RnnCell::input_dim(self)
    }
    fn run(&self, steps: &[&[f64]], input: Option<&[f64]>, recurrent: Option<&[f64]>) -> Result<Self::Trace> {
        self.forward(steps, input, recurrent)
    }
    fn last_hidden(trace: &Self::Trace) -> &[f64] {
        trace.last_hidden()
    }
    fn grads(&self, trace: &Self::Trace, d_last: &[f64]) -> [Tensor2; 3] {
        let g = self.backward(trace, d_last);
        [g.w_x, g.w_h, g.b]
    }
    fn tensors(&self) -> [&Tensor2; 3] {
        [&self.w_x, &self.w_h, &self.b]
    }
    fn tensors_mut(&mut self) -> [&mut Tensor2; 3] {
        [&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

impl CnnNet {
    fn features(&self, m: &SentenceMatrix) -> Result<(Tensor2, Tensor2, Vec<f64>, Vec<usize>)> {
        let input = input_tensor(m);
        let conv = conv1d_forward(&input, &self.filters, self.conv_bias.as_slice())?;
        let (pooled, argmax) = global_maxpool1d(&conv)?;
        Ok((input, conv, pooled, argmax))
    }

    fn loss_and_grads(&self, m: &SentenceMatrix, class: usize, masks: &DropoutMasks) -> Result<(f64, Vec<Tensor2>)> {
        let (input, conv, pooled, argmax) = self.features(m)?;
        let dropped = mul(&pooled, masks.input.as_ref());
        let logits = dense_forward(&dropped, &self.dense_w, self.dense_b.as_slice())?;
        let probs = softmax(&logits)?;
        let (loss, dlogits) = cross_entropy(&probs, class)?;

        let (d_dense_w, d_dense_b, d_feat) = dense_backward(&dropped, &self.dense_w, &dlogits);
        let d_pooled = mul(&d_feat, masks.input.as_ref());
        let d_conv = global_maxpool1d_backward(&d_pooled, &argmax, conv.rows());
        let (d_filters, d_bias) = conv1d_backward(&input, &self.filters, &d_conv);
        Ok((
            loss,
            vec![
                d_filters,
                Tensor2::row_vector(d_bias),
                d_dense_w,
                Tensor2::row_vector(d_dense_b),
            ],
        ))
    }
}

impl CnnNet {
    /// Smallest gap between the largest convolution output of any filter and
    /// the next distinct value. Max-pooling is not differentiable where this
    /// is near zero, so gradient checks skip such inputs. Exact ties come
    /// from identical windows (padding) and move together, so they count as
    /// one value.
    pub fn pool_margin(&self, m: &SentenceMatrix) -> Result<f64> {
        let (_, conv, _, _) = self.features(m)?;
        let mut margin = f64::INFINITY;
        for f in 0..conv.cols() {
            let mut col: Vec<f64> = (0..conv.rows()).map(|t| conv.get(t, f)).collect();
            col.sort_by(|a, b| b.total_cmp(a));
            if let Some(next) = col.iter().find(|&&v| v != col[0]) {
                margin = margin.min(col[0] - next);
            }
        }
        Ok(margin)
    }
}

impl<C: Cell> RecurrentNet<C> {
    fn run(&self, m: &SentenceMatrix, masks: &DropoutMasks) -> Result<C::Trace> {
        let rows = real_rows(m);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        self.cell
            .run(&refs, masks.input.as_deref(), masks.recurrent.as_deref())
    }

    fn loss_and_grads(&self, m: &SentenceMatrix, class: usize, masks: &DropoutMasks) -> Result<(f64, Vec<Tensor2>)> {
        let trace = self.run(m, masks)?;
        let h = C::last_hidden(&trace);
        let logits = dense_forward(h, &self.dense_w, self.dense_b.as_slice())?;
        let probs = softmax(&logits)?;
        let (loss, dlogits) = cross_entropy(&probs, class)?;
        let (d_dense_w, d_dense_b, dh) = dense_backward(h, &self.dense_w, &dlogits);
        let [gx, gh, gb] = self.cell.grads(&trace, &dh);
        Ok((loss, vec![gx, gh, gb, d_dense_w, Tensor2::row_vector(d_dense_b)]))
    }
}

impl Network {
    pub fn build<R: Rng + ?Sized>(hp: &Hyperparameters, rng: &mut R) -> Result<Self> {
        hp.validate()?;
        let dim = hp.embedding_dim;
        Ok(match hp.model_type {
            ModelType::Cnn => {
                let width = hp.kernel_size * dim;
                let filters = Tensor2::glorot(hp.filter_size, width, width, hp.filter_size, rng);
                let (dense_w, dense_b) = dense_head(hp.filter_size, rng);
                Network::Cnn(CnnNet {
                    kernel: hp.kernel_size,
                    filters,
                    conv_bias: Tensor2::zeros(1, hp.filter_size),
                    dense_w,
                    dense_b,
                })
            }
            ModelType::Lstm => {
                let cell = LstmCell::new(dim, hp.hidden_size, rng);
                let (dense_w, dense_b) = dense_head(hp.hidden_size, rng);
                Network::Lstm(RecurrentNet { cell, dense_w, dense_b })
            }
            ModelType::Rnn => {
                let cell = RnnCell::new(dim, hp.hidden_size, rng);
                let (dense_w, dense_b) = dense_head(hp.hidden_size, rng);
                Network::Rnn(RecurrentNet { cell, dense_w, dense_b })
            }
        })
    }

    pub fn model_type(&self) -> ModelType {
        match self {
            Network::Cnn(_) => ModelType::Cnn,
            Network::Lstm(_) => ModelType::Lstm,
            Network::Rnn(_) => ModelType::Rnn,
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Network::Cnn(_) => &["conv.filters", "conv.bias", "dense.weight", "dense.bias"],
            Network::Lstm(_) | Network::Rnn(_) => &["cell.w_x", "cell.w_h", "cell.bias", "dense.weight", "dense.bias"],
        }
    }

    pub fn params(&self) -> Vec<&Tensor2> {
        match self {
            Network::Cnn(n) => vec![&n.filters, &n.conv_bias, &n.dense_w, &n.dense_b],
            Network::Lstm(n) => recurrent_params(n),
            Network::Rnn(n) => recurrent_params(n),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        match self {
            Network::Cnn(n) => vec![&mut n.filters, &mut n.conv_bias, &mut n.dense_w, &mut n.dense_b],
            Network::Lstm(n) => recurrent_params_mut(n),
            Network::Rnn(n) => recurrent_params_mut(n),
        }
    }

    /// Replaces all parameters; shapes must match.
    pub fn set_params(&mut self, values: &[Tensor2]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(Error::Shape(format!("{} tensors for {} parameters", values.len(), params.len())));
        }
        for (p, v) in params.iter_mut().zip(values) {
            if p.shape() != v.shape() {
                return Err(Error::Shape(format!("parameter shape {:?} vs {:?}", p.shape(), v.shape())));
            }
        }
        for (p, v) in params.into_iter().zip(values) {
            *p = v.clone();
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        match self {
            Network::Cnn(n) => n.filters.cols() / n.kernel,
            Network::Lstm(n) => n.cell.input_dim(),
            Network::Rnn(n) => n.cell.input_dim(),
        }
    }

    /// Samples the dropout masks for one training example.
    pub fn sample_masks<R: Rng + ?Sized>(&self, hp: &Hyperparameters, rng: &mut R) -> Result<DropoutMasks> {
        let mut masks = DropoutMasks::default();
        match self {
            Network::Cnn(n) => {
                if hp.dropout > 0.0 {
                    masks.input = Some(dropout_mask(n.filters.rows(), hp.dropout, rng)?);
                }
            }
            Network::Lstm(RecurrentNet { cell, .. }) => fill_recurrent(&mut masks, cell, hp, rng)?,
            Network::Rnn(RecurrentNet { cell, .. }) => fill_recurrent(&mut masks, cell, hp, rng)?,
        }
        Ok(masks)
    }

    fn check_input(&self, m: &SentenceMatrix) -> Result<()> {
        if m.dim() != self.input_dim() {
            return Err(Error::Shape(format!(
                "sentence matrix dim {} does not match model input dim {}",
                m.dim(),
                self.input_dim()
            )));
        }
        if m.is_degenerate() {
            return Err(Error::InvalidArgument("sentence matrix has no real rows".into()));
        }
        Ok(())
    }

    /// Inference-mode logits (no dropout).
    pub fn logits(&self, m: &SentenceMatrix) -> Result<Vec<f64>> {
        self.check_input(m)?;
        match self {
            Network::Cnn(n) => {
                let (_, _, pooled, _) = n.features(m)?;
                dense_forward(&pooled, &n.dense_w, n.dense_b.as_slice())
            }
            Network::Lstm(n) => recurrent_logits(n, m),
            Network::Rnn(n) => recurrent_logits(n, m),
        }
    }

    /// Softmax cross-entropy loss for one example and the gradient of every
    /// parameter, in [`Network::params`] order.
    pub fn loss_and_grads(
        &self,
        m: &SentenceMatrix,
        label: RelevanceLabel,
        masks: &DropoutMasks,
    ) -> Result<(f64, Vec<Tensor2>)> {
        self.check_input(m)?;
        let class = label.index();
        match self {
            Network::Cnn(n) => n.loss_and_grads(m, class, masks),
            Network::Lstm(n) => n.loss_and_grads(m, class, masks),
            Network::Rnn(n) => n.loss_and_grads(m, class, masks),
        }
    }

    /// Central-difference check of [`Network::loss_and_grads`] at the
    /// current parameters, with fixed dropout masks.
    pub fn grad_check(&self, m: &SentenceMatrix, label: RelevanceLabel, masks: &DropoutMasks) -> Result<GradCheckReport> {
        let (_, analytic) = self.loss_and_grads(m, label, masks)?;
        let params: Vec<Tensor2> = self.params().into_iter().cloned().collect();
        let mut probe = self.clone();
        Ok(grad_check(&params, &analytic, |p| {
            probe.set_params(p).expect("perturbed parameters keep their shapes");
            probe.loss_and_grads(m, label, masks).map_or(f64::NAN, |(loss, _)| loss)
        }))
    }

    pub fn round_to_f32(&mut self) {
        for p in self.params_mut() {
            p.round_to_f32();
        }
    }
}

fn recurrent_params<C: Cell>(n: &RecurrentNet<C>) -> Vec<&Tensor2> {
    let mut v: Vec<&Tensor2> = n.cell.tensors().into_iter().collect();
    v.push(&n.dense_w);
    v.push(&n.dense_b);
    v
}

fn recurrent_params_mut<C: Cell>(n: &mut RecurrentNet<C>) -> Vec<&mut Tensor2> {
    let mut v: Vec<&mut Tensor2> = n.cell.tensors_mut().into_iter().collect();
    v.push(&mut n.dense_w);
    v.push(&mut n.dense_b);
    v
}

fn recurrent_logits<C: Cell>(n: &RecurrentNet<C>, m: &SentenceMatrix) -> Result<Vec<f64>> {
    let trace = n.run(m, &DropoutMasks::default())?;
    dense_forward(C::last_hidden(&trace), &n.dense_w, n.dense_b.as_slice())
}

fn fill_recurrent<C: Cell, R: Rng + ?Sized>(
    masks: &mut DropoutMasks,
    cell: &C,
    hp: &Hyperparameters,
    rng: &mut R,
) -> Result<()> {
    if hp.dropout > 0.0 {
        masks.input = Some(dropout_mask(cell.input_dim(), hp.dropout, rng)?);
    }
    if hp.recurrent_dropout > 0.0 {
        masks.recurrent = Some(dropout_mask(cell.hidden(), hp.recurrent_dropout, rng)?);
    }
    Ok(())
}
