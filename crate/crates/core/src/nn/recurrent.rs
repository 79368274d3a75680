//! Elman RNN and LSTM cells with masked-sequence forward passes and
//! backpropagation through time.
//!
//! Input dropout and recurrent dropout use one mask per sequence, held fixed
//! across time steps. Recurrent dropout multiplies the previous hidden state
//! before it enters the recurrent weights.

use rand::Rng;

use super::tensor::Tensor2;
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn apply_mask(x: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what}: got {got}, expected {want}")));
    }
    Ok(())
}

/// `h' = tanh(W_x·x + W_h·h + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnCell {
    pub w_x: Tensor2,
    pub w_h: Tensor2,
    pub b: Tensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnGrads {
    pub w_x: Tensor2,
    pub w_h: Tensor2,
    pub b: Tensor2,
}

/// Per-step activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct RnnTrace {
    inputs: Vec<Vec<f64>>,
    prev_hidden: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    rec_mask: Option<Vec<f64>>,
}

impl RnnTrace {
    /// Hidden state after the last step (zeros for an empty sequence).
    pub fn last_hidden(&self) -> &[f64] {
        self.hidden.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl RnnCell {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        RnnCell {
            w_x: Tensor2::glorot(hidden, input_dim, input_dim, hidden, rng),
            w_h: Tensor2::glorot(hidden, hidden, hidden, hidden, rng),
            b: Tensor2::zeros(1, hidden),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden_size();
        check_len("RNN W_x rows", self.w_x.rows(), h)?;
        check_len("RNN W_h cols", self.w_h.cols(), h)?;
        check_len("RNN bias", self.b.len(), h)
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.check()?;
        check_len("RNN input", x.len(), self.input_dim())?;
        check_len("RNN hidden", h.len(), self.hidden_size())?;
        Ok(self.step_unchecked(x, h))
    }

    fn step_unchecked(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut a = self.w_x.matvec(x);
        for ((ai, r), bi) in a.iter_mut().zip(self.w_h.matvec(h)).zip(self.b.as_slice()) {
            *ai = (*ai + r + bi).tanh();
        }
        a
    }

    /// Runs the cell over `steps` from a zero state.
    pub fn forward(&self, steps: &[&[f64]], in_mask: Option<&[f64]>, rec_mask: Option<&[f64]>) -> Result<RnnTrace> {
        self.check()?;
        let hsize = self.hidden_size();
        let mut trace = RnnTrace {
            inputs: Vec::with_capacity(steps.len()),
            prev_hidden: Vec::with_capacity(steps.len()),
            hidden: vec![vec![0.0; hsize]],
            rec_mask: rec_mask.map(<[f64]>::to_vec),
        };
        for x in steps {
            check_len("RNN input", x.len(), self.input_dim())?;
            let xd = apply_mask(x, in_mask);
            let hd = apply_mask(trace.hidden.last().unwrap(), rec_mask);
            let h = self.step_unchecked(&xd, &hd);
            trace.inputs.push(xd);
            trace.prev_hidden.push(hd);
            trace.hidden.push(h);
        }
        Ok(trace)
    }

    /// Backpropagates `d_last` (gradient w.r.t. the final hidden state).
    pub fn backward(&self, trace: &RnnTrace, d_last: &[f64]) -> RnnGrads {
        let hsize = self.hidden_size();
        let mut grads = RnnGrads {
            w_x: Tensor2::zeros(hsize, self.input_dim()),
            w_h: Tensor2::zeros(hsize, hsize),
            b: Tensor2::zeros(1, hsize),
        };
        let mut dh = d_last.to_vec();
        for t in (0..trace.inputs.len()).rev() {
            let h = &trace.hidden[t + 1];
            let da: Vec<f64> = dh.iter().zip(h).map(|(g, hv)| g * (1.0 - hv * hv)).collect();
            grads.w_x.outer_acc(&da, &trace.inputs[t]);
            grads.w_h.outer_acc(&da, &trace.prev_hidden[t]);
            for (b, g) in grads.b.as_mut_slice().iter_mut().zip(&da) {
                *b += g;
            }
            let mut prev = vec![0.0; hsize];
            self.w_h.matvec_t_acc(&da, &mut prev);
            dh = apply_mask(&prev, trace.rec_mask.as_deref());
        }
        grads
    }
}

/// LSTM with stacked gate weights in the order input, forget, candidate,
/// output: `W_x` is `4H × dim`, `W_h` is `4H × H`, `b` has `4H` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_x: Tensor2,
    pub w_h: Tensor2,
    pub b: Tensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub w_x: Tensor2,
    pub w_h: Tensor2,
    pub b: Tensor2,
}

#[derive(Debug, Clone)]
struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<LstmStepCache>,
    h: Vec<f64>,
    c: Vec<f64>,
    rec_mask: Option<Vec<f64>>,
}

impl LstmTrace {
    pub fn last_hidden(&self) -> &[f64] {
        &self.h
    }

    pub fn last_cell(&self) -> &[f64] {
        &self.c
    }
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        LstmCell {
            w_x: Tensor2::glorot(4 * hidden, input_dim, input_dim, 4 * hidden, rng),
            w_h: Tensor2::glorot(4 * hidden, hidden, hidden, 4 * hidden, rng),
            b: Tensor2::zeros(1, 4 * hidden),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden_size();
        check_len("LSTM W_x rows", self.w_x.rows(), 4 * h)?;
        check_len("LSTM W_h rows", self.w_h.rows(), 4 * h)?;
        check_len("LSTM bias", self.b.len(), 4 * h)
    }

    /// One step: returns `(h', c')`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check()?;
        check_len("LSTM input", x.len(), self.input_dim())?;
        check_len("LSTM hidden", h.len(), self.hidden_size())?;
        check_len("LSTM cell", c.len(), self.hidden_size())?;
        let cache = self.step_unchecked(x.to_vec(), h.to_vec(), c);
        let h_new = cache.o.iter().zip(&cache.tanh_c).map(|(o, t)| o * t).collect();
        let c_new = self.cell_from(&cache);
        Ok((h_new, c_new))
    }

    fn cell_from(&self, cache: &LstmStepCache) -> Vec<f64> {
        (0..cache.c_prev.len())
            .map(|k| cache.f[k] * cache.c_prev[k] + cache.i[k] * cache.g[k])
            .collect()
    }

    fn step_unchecked(&self, x: Vec<f64>, h_prev: Vec<f64>, c_prev: &[f64]) -> LstmStepCache {
        let hs = self.hidden_size();
        let mut z = self.w_x.matvec(&x);
        for ((zi, r), bi) in z.iter_mut().zip(self.w_h.matvec(&h_prev)).zip(self.b.as_slice()) {
            *zi += r + bi;
        }
        let i: Vec<f64> = z[..hs].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[hs..2 * hs].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * hs..3 * hs].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hs..].iter().map(|&v| sigmoid(v)).collect();
        let tanh_c = (0..hs).map(|k| (f[k] * c_prev[k] + i[k] * g[k]).tanh()).collect();
        LstmStepCache {
            x,
            h_prev,
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
        }
    }

    pub fn forward(&self, steps: &[&[f64]], in_mask: Option<&[f64]>, rec_mask: Option<&[f64]>) -> Result<LstmTrace> {
        self.check()?;
        let hs = self.hidden_size();
        let mut trace = LstmTrace {
            steps: Vec::with_capacity(steps.len()),
            h: vec![0.0; hs],
            c: vec![0.0; hs],
            rec_mask: rec_mask.map(<[f64]>::to_vec),
        };
        for x in steps {
            check_len("LSTM input", x.len(), self.input_dim())?;
            let xd = apply_mask(x, in_mask);
            let hd = apply_mask(&trace.h, rec_mask);
            let cache = self.step_unchecked(xd, hd, &trace.c);
            trace.c = self.cell_from(&cache);
            trace.h = cache.o.iter().zip(&cache.tanh_c).map(|(o, t)| o * t).collect();
            trace.steps.push(cache);
        }
        Ok(trace)
    }

    pub fn backward(&self, trace: &LstmTrace, d_last: &[f64]) -> LstmGrads {
        let hs = self.hidden_size();
        let mut grads = LstmGrads {
            w_x: Tensor2::zeros(4 * hs, self.input_dim()),
            w_h: Tensor2::zeros(4 * hs, hs),
            b: Tensor2::zeros(1, 4 * hs),
        };
        let mut dh = d_last.to_vec();
        let mut dc = vec![0.0; hs];
        let mut dz = vec![0.0; 4 * hs];
        for s in trace.steps.iter().rev() {
            for k in 0..hs {
                let (i, f, g, o, tc) = (s.i[k], s.f[k], s.g[k], s.o[k], s.tanh_c[k]);
                let d_o = dh[k] * tc;
                let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
                let d_i = dck * g;
                let d_f = dck * s.c_prev[k];
                let d_g = dck * i;
                dz[k] = d_i * i * (1.0 - i);
                dz[hs + k] = d_f * f * (1.0 - f);
                dz[2 * hs + k] = d_g * (1.0 - g * g);
                dz[3 * hs + k] = d_o * o * (1.0 - o);
                dc[k] = dck * f;
            }
            grads.w_x.outer_acc(&dz, &s.x);
            grads.w_h.outer_acc(&dz, &s.h_prev);
            for (b, g) in grads.b.as_mut_slice().iter_mut().zip(&dz) {
                *b += g;
            }
            let mut prev = vec![0.0; hs];
            self.w_h.matvec_t_acc(&dz, &mut prev);
            dh = apply_mask(&prev, trace.rec_mask.as_deref());
        }
        grads
    }
}
