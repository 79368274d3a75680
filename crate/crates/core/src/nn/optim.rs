//! Adam and Adagrad over a list of parameter tensors.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(alias = "adam")]
    Adam,
    #[serde(alias = "adagrad")]
    Adagrad,
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "Adam",
            OptimizerKind::Adagrad => "Adagrad",
        })
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            _ => Err(Error::Hyperparameters(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// Moment accumulators, one tensor per parameter. Adagrad uses only `second`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub t: u64,
    pub first: Vec<Tensor2>,
    pub second: Vec<Tensor2>,
}

impl OptimizerState {
    pub fn new<'a>(kind: OptimizerKind, params: impl IntoIterator<Item = &'a Tensor2>) -> Self {
        let zeros: Vec<Tensor2> = params
            .into_iter()
            .map(|p| Tensor2::zeros(p.rows(), p.cols()))
            .collect();
        let first = match kind {
            OptimizerKind::Adam => zeros.clone(),
            OptimizerKind::Adagrad => Vec::new(),
        };
        OptimizerState {
            kind,
            t: 0,
            first,
            second: zeros,
        }
    }

    /// Dispatches to [`adam_step`] (default betas) or [`adagrad_step`].
    pub fn step(&mut self, params: &mut [&mut Tensor2], grads: &[Tensor2], lr: f64) -> Result<()> {
        match self.kind {
            OptimizerKind::Adam => adam_step(params, grads, self, lr, AdamConfig::default()),
            OptimizerKind::Adagrad => adagrad_step(params, grads, self, lr, ADAGRAD_EPSILON),
        }
    }
}

fn validate(params: &[&mut Tensor2], grads: &[Tensor2], accum: &[Tensor2]) -> Result<()> {
    if params.len() != grads.len() || params.len() != accum.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} accumulators",
            params.len(),
            grads.len(),
            accum.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != accum[i].shape() {
            return Err(Error::Shape(format!(
                "parameter {i}: shape {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
    }
    Ok(())
}

/// Bias-corrected Adam. `state.t` increments once per call.
pub fn adam_step(
    params: &mut [&mut Tensor2],
    grads: &[Tensor2],
    state: &mut OptimizerState,
    lr: f64,
    cfg: AdamConfig,
) -> Result<()> {
    if state.kind != OptimizerKind::Adam {
        return Err(Error::InvalidArgument("Adam step on Adagrad state".into()));
    }
    validate(params, grads, &state.second)?;
    validate(params, grads, &state.first)?;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        let (p, m, v) = (p.as_mut_slice(), m.as_mut_slice(), v.as_mut_slice());
        for (k, &gk) in g.as_slice().iter().enumerate() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

/// Adagrad: accumulate `g²`, then `θ -= lr·g / (√accum + ε)`.
pub fn adagrad_step(
    params: &mut [&mut Tensor2],
    grads: &[Tensor2],
    state: &mut OptimizerState,
    lr: f64,
    epsilon: f64,
) -> Result<()> {
    if state.kind != OptimizerKind::Adagrad {
        return Err(Error::InvalidArgument("Adagrad step on Adam state".into()));
    }
    validate(params, grads, &state.second)?;
    state.t += 1;
    for (p, (g, acc)) in params.iter_mut().zip(grads.iter().zip(state.second.iter_mut())) {
        let (p, acc) = (p.as_mut_slice(), acc.as_mut_slice());
        for (k, &gk) in g.as_slice().iter().enumerate() {
            acc[k] += gk * gk;
            p[k] -= lr * gk / (acc[k].sqrt() + epsilon);
        }
    }
    Ok(())
}
