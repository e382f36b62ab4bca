//! Single-layer LSTM with an affine read-out, forward pass and exact
//! backpropagation through time.
//!
//! All parameters live in one flat vector:
//!
//! ```text
//! [ W (4H x (p+H)) | b (4H) | head_w (H) | head_b (1) ]
//! ```
//!
//! Gate rows are ordered input, forget, candidate, output. Each step reads
//! `[x_t ; h_{t-1}]`, starting from zero hidden and cell state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WindowSample;
use crate::error::{Error, Result};
use crate::rng::{stream, Phase};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub input_size: usize,
    pub hidden_size: usize,
    pub params: Vec<f64>,
}

/// Named views into the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub input_size: usize,
    pub hidden_size: usize,
}

impl Layout {
    pub fn cols(&self) -> usize {
        self.input_size + self.hidden_size
    }

    pub fn weights(&self) -> std::ops::Range<usize> {
        0..4 * self.hidden_size * self.cols()
    }

    pub fn bias(&self) -> std::ops::Range<usize> {
        let s = self.weights().end;
        s..s + 4 * self.hidden_size
    }

    pub fn head_weights(&self) -> std::ops::Range<usize> {
        let s = self.bias().end;
        s..s + self.hidden_size
    }

    pub fn head_bias(&self) -> usize {
        self.head_weights().end
    }

    pub fn len(&self) -> usize {
        self.head_bias() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(name, range)` for each parameter tensor.
    pub fn tensors(&self) -> [(&'static str, std::ops::Range<usize>); 4] {
        [
            ("weights", self.weights()),
            ("bias", self.bias()),
            ("head_weights", self.head_weights()),
            ("head_bias", self.head_bias()..self.head_bias() + 1),
        ]
    }
}

/// Activations of one sample, kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    steps: usize,
    /// Per step: `[x_t ; h_{t-1}]`.
    xh: Vec<f64>,
    /// Per step: activated gates `[i, f, g, o]`, each H long.
    gates: Vec<f64>,
    /// Per step: cell state after the step; `c_{-1}` is zero.
    cells: Vec<f64>,
    /// Per step: `tanh(c_t)`.
    cell_tanh: Vec<f64>,
    /// Final hidden state.
    h_last: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmModel {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let layout = Layout {
            input_size,
            hidden_size,
        };
        Self {
            input_size,
            hidden_size,
            params: vec![0.0; layout.len()],
        }
    }

    /// Uniform weights in `+-1/sqrt(H)` with the forget-gate bias set to 1.
    pub fn init(input_size: usize, hidden_size: usize, seed: u64) -> Self {
        let mut model = Self::zeros(input_size, hidden_size);
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut rng = stream(seed, 0, Phase::ModelInit);
        for p in model.params.iter_mut() {
            *p = rng.random_range(-bound..bound);
        }
        let forget = model.layout().bias().start + hidden_size;
        model.params[forget..forget + hidden_size].fill(1.0);
        model
    }

    pub fn layout(&self) -> Layout {
        Layout {
            input_size: self.input_size,
            hidden_size: self.hidden_size,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check(&self, window: &WindowSample) -> Result<()> {
        if window.width != self.input_size || window.inputs.len() != window.steps * window.width {
            return Err(Error::Shape {
                expected: format!("steps x {}", self.input_size),
                actual: format!("{} x {} ({} values)", window.steps, window.width, window.inputs.len()),
            });
        }
        if window.steps == 0 {
            return Err(Error::Shape {
                expected: "at least one step".into(),
                actual: "0 steps".into(),
            });
        }
        Ok(())
    }

    pub fn predict_one(&self, window: &WindowSample) -> Result<f64> {
        self.check(window)?;
        Ok(self.run(window, None))
    }

    /// Prediction plus the activations needed by [`LstmModel::backward`].
    pub fn forward(&self, window: &WindowSample) -> Result<(f64, ForwardCache)> {
        self.check(window)?;
        let mut cache = ForwardCache::default();
        let y = self.run(window, Some(&mut cache));
        Ok((y, cache))
    }

    fn run(&self, window: &WindowSample, mut cache: Option<&mut ForwardCache>) -> f64 {
        let lay = self.layout();
        let (p, hs, cols) = (self.input_size, self.hidden_size, lay.cols());
        let w = &self.params[lay.weights()];
        let b = &self.params[lay.bias()];

        let mut xh = vec![0.0; cols];
        let mut c = vec![0.0; hs];
        let mut z = vec![0.0; 4 * hs];
        if let Some(cache) = cache.as_deref_mut() {
            cache.steps = window.steps;
            cache.xh.reserve(window.steps * cols);
            cache.gates.reserve(window.steps * 4 * hs);
            cache.cells.reserve(window.steps * hs);
            cache.cell_tanh.reserve(window.steps * hs);
        }
        for t in 0..window.steps {
            xh[..p].copy_from_slice(window.row(t));
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &w[r * cols..(r + 1) * cols];
                *zr = b[r] + row.iter().zip(&xh).map(|(a, x)| a * x).sum::<f64>();
            }
            for j in 0..hs {
                z[j] = sigmoid(z[j]);
                z[hs + j] = sigmoid(z[hs + j]);
                z[2 * hs + j] = z[2 * hs + j].tanh();
                z[3 * hs + j] = sigmoid(z[3 * hs + j]);
            }
            if let Some(cache) = cache.as_deref_mut() {
                cache.xh.extend_from_slice(&xh);
            }
            for j in 0..hs {
                c[j] = z[hs + j] * c[j] + z[j] * z[2 * hs + j];
                let tc = c[j].tanh();
                xh[p + j] = z[3 * hs + j] * tc;
                if let Some(cache) = cache.as_deref_mut() {
                    cache.cell_tanh.push(tc);
                }
            }
            if let Some(cache) = cache.as_deref_mut() {
                cache.gates.extend_from_slice(&z);
                cache.cells.extend_from_slice(&c);
            }
        }
        let h = &xh[p..];
        if let Some(cache) = cache {
            cache.h_last = h.to_vec();
        }
        let head = &self.params[lay.head_weights()];
        self.params[lay.head_bias()] + head.iter().zip(h).map(|(a, x)| a * x).sum::<f64>()
    }

    /// Adds `dloss_dy * d(prediction)/d(params)` into `grad`.
    pub fn backward(&self, cache: &ForwardCache, dloss_dy: f64, grad: &mut [f64]) {
        let lay = self.layout();
        let (p, hs, cols) = (self.input_size, self.hidden_size, lay.cols());
        let w = &self.params[lay.weights()];
        let head = &self.params[lay.head_weights()];

        for (g, h) in grad[lay.head_weights()].iter_mut().zip(&cache.h_last) {
            *g += dloss_dy * h;
        }
        grad[lay.head_bias()] += dloss_dy;

        let mut dh: Vec<f64> = head.iter().map(|v| dloss_dy * v).collect();
        let mut dc = vec![0.0; hs];
        let mut dz = vec![0.0; 4 * hs];
        let (w_range, b_range) = (lay.weights(), lay.bias());
        for t in (0..cache.steps).rev() {
            let gates = &cache.gates[t * 4 * hs..(t + 1) * 4 * hs];
            let tc = &cache.cell_tanh[t * hs..(t + 1) * hs];
            let xh = &cache.xh[t * cols..(t + 1) * cols];
            for j in 0..hs {
                let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
                let c_prev = if t > 0 { cache.cells[(t - 1) * hs + j] } else { 0.0 };
                let d_o = dh[j] * tc[j];
                dc[j] += dh[j] * o * (1.0 - tc[j] * tc[j]);
                dz[j] = dc[j] * g * i * (1.0 - i);
                dz[hs + j] = dc[j] * c_prev * f * (1.0 - f);
                dz[2 * hs + j] = dc[j] * i * (1.0 - g * g);
                dz[3 * hs + j] = d_o * o * (1.0 - o);
                dc[j] *= f;
            }
            let (gw, rest) = grad.split_at_mut(w_range.end);
            let gw = &mut gw[w_range.clone()];
            let gb = &mut rest[..b_range.len()];
            dh.iter_mut().for_each(|v| *v = 0.0);
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                let row_g = &mut gw[r * cols..(r + 1) * cols];
                for (gq, x) in row_g.iter_mut().zip(xh) {
                    *gq += d * x;
                }
                let row_w = &w[r * cols + p..(r + 1) * cols];
                for (dhj, wv) in dh.iter_mut().zip(row_w) {
                    *dhj += d * wv;
                }
            }
        }
    }

    /// Mean squared error over `batch` and its exact gradient.
    pub fn loss_and_grad(&self, batch: &[&WindowSample]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        if batch.is_empty() {
            return Ok((0.0, grad));
        }
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for w in batch {
            let (y, cache) = self.forward(w)?;
            let r = y - w.target;
            loss += r * r;
            self.backward(&cache, 2.0 * r / n, &mut grad);
        }
        Ok((loss / n, grad))
    }

    pub fn mse(&self, windows: &[WindowSample]) -> Result<f64> {
        if windows.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for w in windows {
            let r = self.predict_one(w)? - w.target;
            total += r * r;
        }
        Ok(total / windows.len() as f64)
    }
}
