//! Feed-forward building blocks and their backward passes.

use rand::Rng;

use super::tensor::{dot, Tensor2};
use crate::error::{Error, Result};

/// Probability floor used by [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Valid, stride-1 1-D convolution over the time axis.
///
/// `input` is `T × dim`; `filters` is `n_filters × (kernel·dim)` with each
/// row laid out kernel-offset major; `bias` has `n_filters` entries. The
/// result is `(T - kernel + 1) × n_filters`.
pub fn conv1d_forward(input: &Tensor2, filters: &Tensor2, bias: &[f64]) -> Result<Tensor2> {
    let (steps, dim) = input.shape();
    let (n_filters, width) = filters.shape();
    if dim == 0 || width % dim != 0 || width == 0 {
        return Err(Error::Shape(format!(
            "filter width {width} is not a positive multiple of input dim {dim}"
        )));
    }
    if bias.len() != n_filters {
        return Err(Error::Shape(format!("bias has {} entries, expected {n_filters}", bias.len())));
    }
    let kernel = width / dim;
    if kernel > steps {
        return Err(Error::Shape(format!("kernel {kernel} exceeds sequence length {steps}")));
    }
    let out_steps = steps - kernel + 1;
    let mut out = Tensor2::zeros(out_steps, n_filters);
    let flat = input.as_slice();
    for t in 0..out_steps {
        // Rows t..t+kernel are contiguous in the row-major input.
        let window = &flat[t * dim..(t + kernel) * dim];
        let row = out.row_mut(t);
        for f in 0..n_filters {
            row[f] = bias[f] + dot(filters.row(f), window);
        }
    }
    Ok(out)
}

/// Parameter gradients of [`conv1d_forward`] given `dout` (same shape as its output).
pub fn conv1d_backward(input: &Tensor2, filters: &Tensor2, dout: &Tensor2) -> (Tensor2, Vec<f64>) {
    let dim = input.cols();
    let (n_filters, width) = filters.shape();
    let kernel = width / dim;
    let mut dfilters = Tensor2::zeros(n_filters, width);
    let mut dbias = vec![0.0; n_filters];
    let flat = input.as_slice();
    for t in 0..dout.rows() {
        let window = &flat[t * dim..(t + kernel) * dim];
        for (f, &g) in dout.row(t).iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            dbias[f] += g;
            for (w, x) in dfilters.row_mut(f).iter_mut().zip(window) {
                *w += g * x;
            }
        }
    }
    (dfilters, dbias)
}

/// Max over the time axis for every column. Returns the maxima and the row
/// each came from; ties resolve to the lowest row.
pub fn global_maxpool1d(input: &Tensor2) -> Result<(Vec<f64>, Vec<usize>)> {
    let (steps, cols) = input.shape();
    if steps == 0 {
        return Err(Error::Shape("max-pooling over an empty sequence".into()));
    }
    let mut max = input.row(0).to_vec();
    let mut argmax = vec![0; cols];
    for t in 1..steps {
        for (c, &v) in input.row(t).iter().enumerate() {
            if v > max[c] {
                max[c] = v;
                argmax[c] = t;
            }
        }
    }
    Ok((max, argmax))
}

/// Routes `dout` back to the recorded argmax rows.
pub fn global_maxpool1d_backward(dout: &[f64], argmax: &[usize], steps: usize) -> Tensor2 {
    let mut grad = Tensor2::zeros(steps, dout.len());
    for (c, (&g, &t)) in dout.iter().zip(argmax).enumerate() {
        grad.set(t, c, g);
    }
    grad
}

/// `W·x + b`.
pub fn dense_forward(x: &[f64], weights: &Tensor2, bias: &[f64]) -> Result<Vec<f64>> {
    if weights.cols() != x.len() || weights.rows() != bias.len() {
        return Err(Error::Shape(format!(
            "dense layer {}x{} with input {} and bias {}",
            weights.rows(),
            weights.cols(),
            x.len(),
            bias.len()
        )));
    }
    let mut y = weights.matvec(x);
    for (yi, bi) in y.iter_mut().zip(bias) {
        *yi += bi;
    }
    Ok(y)
}

/// Returns `(dW, db, dx)` for [`dense_forward`].
pub fn dense_backward(x: &[f64], weights: &Tensor2, dout: &[f64]) -> (Tensor2, Vec<f64>, Vec<f64>) {
    let mut dw = Tensor2::zeros(weights.rows(), weights.cols());
    dw.outer_acc(dout, x);
    let mut dx = vec![0.0; x.len()];
    weights.matvec_t_acc(dout, &mut dx);
    (dw, dout.to_vec(), dx)
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `-ln p[class]` (with `p` floored at [`PROB_FLOOR`]) and the gradient with
/// respect to the logits, `p - onehot(class)`.
pub fn cross_entropy(probs: &[f64], class: usize) -> Result<(f64, Vec<f64>)> {
    if class >= probs.len() {
        return Err(Error::InvalidArgument(format!(
            "class index {class} out of range for {} classes",
            probs.len()
        )));
    }
    let loss = -probs[class].max(PROB_FLOOR).ln();
    let mut grad = probs.to_vec();
    grad[class] -= 1.0;
    Ok((loss, grad))
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
    }
    Ok(())
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// Inverted dropout; identity outside training.
pub fn dropout<R: Rng + ?Sized>(x: &[f64], rate: f64, rng: &mut R, training: bool) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.to_vec());
    }
    let mask = dropout_mask(x.len(), rate, rng)?;
    Ok(x.iter().zip(mask).map(|(v, m)| v * m).collect())
}
