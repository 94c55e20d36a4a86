//! Layers over a shared flat parameter vector.
//!
//! Each layer records the offset of its block inside the model's parameter
//! vector; forward passes read from that vector and backward passes
//! accumulate into a gradient vector with the same layout.

use serde::{Deserialize, Serialize};

use crate::numkit::{gemv_acc, gemv_t_acc, glorot_init, outer_acc, sigmoid, Activation, Rng};

/// Fully connected layer: `y = act(W x + b)`, `W` is `output x input`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseLayer {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    pub offset: usize,
}

impl DenseLayer {
    pub fn new(input: usize, output: usize, activation: Activation, offset: usize) -> Self {
        DenseLayer {
            input,
            output,
            activation,
            offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.output * (self.input + 1)
    }

    pub fn end(&self) -> usize {
        self.offset + self.param_count()
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let w_len = self.output * self.input;
        let block = &p[self.offset..self.end()];
        block.split_at(w_len)
    }

    pub fn init(&self, rng: &mut Rng, p: &mut [f64]) {
        let w = glorot_init(rng, self.output, self.input);
        p[self.offset..self.offset + w.as_slice().len()].copy_from_slice(w.as_slice());
        p[self.offset + w.as_slice().len()..self.end()].fill(0.0);
    }

    pub fn forward(&self, p: &[f64], x: &[f64], y: &mut [f64]) {
        let (w, b) = self.split(p);
        y.copy_from_slice(b);
        gemv_acc(w, x, y);
        if self.activation != Activation::Identity {
            for v in y.iter_mut() {
                *v = self.activation.apply(*v);
            }
        }
    }

    /// Backpropagates `dy` (gradient w.r.t. the layer output `y`). `y` is only
    /// read for non-identity activations and may be empty otherwise.
    pub fn backward(
        &self,
        p: &[f64],
        x: &[f64],
        y: &[f64],
        dy: &[f64],
        grad: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        let da: Vec<f64> = if self.activation == Activation::Identity {
            dy.to_vec()
        } else {
            dy.iter()
                .zip(y)
                .map(|(&d, &yv)| d * self.activation.deriv_from_output(yv))
                .collect()
        };
        let w_len = self.output * self.input;
        let (gw, gb) = grad[self.offset..self.end()].split_at_mut(w_len);
        outer_acc(&da, x, gw);
        for (g, d) in gb.iter_mut().zip(&da) {
            *g += d;
        }
        if let Some(dx) = dx {
            let (w, _) = self.split(p);
            gemv_t_acc(w, &da, dx);
        }
    }
}

/// Elman recurrent layer: `h_t = tanh(W x_t + U h_{t-1} + b)`, `h_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElmanLayer {
    pub input: usize,
    pub hidden: usize,
    pub offset: usize,
}

impl ElmanLayer {
    pub fn new(input: usize, hidden: usize, offset: usize) -> Self {
        ElmanLayer {
            input,
            hidden,
            offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.hidden * (self.input + self.hidden + 1)
    }

    pub fn end(&self) -> usize {
        self.offset + self.param_count()
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (h, i) = (self.hidden, self.input);
        let block = &p[self.offset..self.end()];
        let (w, rest) = block.split_at(h * i);
        let (u, b) = rest.split_at(h * h);
        (w, u, b)
    }

    pub fn init(&self, rng: &mut Rng, p: &mut [f64]) {
        let (h, i) = (self.hidden, self.input);
        let w = glorot_init(rng, h, i);
        let u = glorot_init(rng, h, h);
        let block = &mut p[self.offset..self.end()];
        block[..h * i].copy_from_slice(w.as_slice());
        block[h * i..h * i + h * h].copy_from_slice(u.as_slice());
        block[h * i + h * h..].fill(0.0);
    }

    /// `xs` is `steps x input`, returns hidden states `steps x hidden`.
    pub fn forward(&self, p: &[f64], xs: &[f64]) -> Vec<f64> {
        let (w, u, b) = self.split(p);
        let h = self.hidden;
        let steps = xs.len() / self.input;
        let mut hs = vec![0.0; steps * h];
        for t in 0..steps {
            let (prev, cur) = hs.split_at_mut(t * h);
            let cur = &mut cur[..h];
            cur.copy_from_slice(b);
            gemv_acc(w, &xs[t * self.input..(t + 1) * self.input], cur);
            if t > 0 {
                gemv_acc(u, &prev[(t - 1) * h..], cur);
            }
            for v in cur.iter_mut() {
                *v = v.tanh();
            }
        }
        hs
    }

    /// Full backpropagation through time. `dhs` holds the gradient arriving at
    /// every hidden state from above (`steps x hidden`).
    pub fn backward(
        &self,
        p: &[f64],
        xs: &[f64],
        hs: &[f64],
        dhs: &[f64],
        grad: &mut [f64],
        mut dxs: Option<&mut [f64]>,
    ) {
        let (w, u, _) = self.split(p);
        let (h, i) = (self.hidden, self.input);
        let steps = hs.len() / h;
        let (gw, rest) = grad[self.offset..self.end()].split_at_mut(h * i);
        let (gu, gb) = rest.split_at_mut(h * h);
        let mut carry = vec![0.0; h];
        let mut da = vec![0.0; h];
        for t in (0..steps).rev() {
            let ht = &hs[t * h..(t + 1) * h];
            for k in 0..h {
                da[k] = (dhs[t * h + k] + carry[k]) * (1.0 - ht[k] * ht[k]);
            }
            outer_acc(&da, &xs[t * i..(t + 1) * i], gw);
            for (g, d) in gb.iter_mut().zip(&da) {
                *g += d;
            }
            if let Some(dxs) = dxs.as_deref_mut() {
                gemv_t_acc(w, &da, &mut dxs[t * i..(t + 1) * i]);
            }
            carry.fill(0.0);
            if t > 0 {
                outer_acc(&da, &hs[(t - 1) * h..t * h], gu);
                gemv_t_acc(u, &da, &mut carry);
            }
        }
    }
}

/// How the LSTM cell state combines its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellUpdate {
    /// `C_t = f * C_{t-1} + i * C~_t`
    #[default]
    Standard,
    /// `C_t = sigmoid(f * C_{t-1} + i * C~_t)`
    Squashed,
}

/// Gate order inside an LSTM block and inside each step's gate record.
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CANDIDATE: usize = 3;

/// LSTM layer. For each gate `k` in (input, forget, output, candidate) the
/// block holds `U_k` (`hidden x input`), `W_k` (`hidden x hidden`) and `b_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmLayer {
    pub input: usize,
    pub hidden: usize,
    pub offset: usize,
    pub cell_update: CellUpdate,
}

/// Per-step record of one LSTM sequence pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    /// `steps x 4 x hidden`: post-activation i, f, o, candidate.
    pub gates: Vec<f64>,
    /// `steps x hidden`
    pub cells: Vec<f64>,
    /// `tanh(C_t)`, `steps x hidden`
    pub cells_tanh: Vec<f64>,
    /// `steps x hidden`
    pub hidden: Vec<f64>,
}

impl LstmTrace {
    pub fn steps(&self, hidden: usize) -> usize {
        self.hidden.len() / hidden
    }

    pub fn last_hidden(&self, hidden: usize) -> &[f64] {
        &self.hidden[self.hidden.len() - hidden..]
    }

    pub fn gate(&self, hidden: usize, t: usize, k: usize) -> &[f64] {
        let base = (t * 4 + k) * hidden;
        &self.gates[base..base + hidden]
    }
}

impl LstmLayer {
    pub fn new(input: usize, hidden: usize, offset: usize, cell_update: CellUpdate) -> Self {
        LstmLayer {
            input,
            hidden,
            offset,
            cell_update,
        }
    }

    fn gate_block(&self) -> usize {
        self.hidden * (self.input + self.hidden + 1)
    }

    pub fn param_count(&self) -> usize {
        4 * self.gate_block()
    }

    pub fn end(&self) -> usize {
        self.offset + self.param_count()
    }

    /// `(U_k, W_k, b_k)` slices of gate `k`.
    fn gate<'a>(&self, p: &'a [f64], k: usize) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (h, i) = (self.hidden, self.input);
        let start = self.offset + k * self.gate_block();
        let block = &p[start..start + self.gate_block()];
        let (u, rest) = block.split_at(h * i);
        let (w, b) = rest.split_at(h * h);
        (u, w, b)
    }

    pub fn init(&self, rng: &mut Rng, p: &mut [f64]) {
        let (h, i) = (self.hidden, self.input);
        for k in 0..4 {
            let u = glorot_init(rng, h, i);
            let w = glorot_init(rng, h, h);
            let start = self.offset + k * self.gate_block();
            let block = &mut p[start..start + self.gate_block()];
            block[..h * i].copy_from_slice(u.as_slice());
            block[h * i..h * i + h * h].copy_from_slice(w.as_slice());
            block[h * i + h * h..].fill(0.0);
        }
    }

    /// Runs the layer over `xs` (`steps x input`) from `h_0 = C_0 = 0`.
    pub fn forward(&self, p: &[f64], xs: &[f64]) -> LstmTrace {
        let (h, i) = (self.hidden, self.input);
        let steps = xs.len() / i;
        let mut trace = LstmTrace {
            gates: vec![0.0; steps * 4 * h],
            cells: vec![0.0; steps * h],
            cells_tanh: vec![0.0; steps * h],
            hidden: vec![0.0; steps * h],
        };
        let zeros = vec![0.0; h];
        for t in 0..steps {
            let x = &xs[t * i..(t + 1) * i];
            let h_prev: &[f64] = if t == 0 {
                &zeros
            } else {
                &trace.hidden[(t - 1) * h..t * h]
            };
            let mut pre = vec![0.0; 4 * h];
            for k in 0..4 {
                let (u, w, b) = self.gate(p, k);
                let slot = &mut pre[k * h..(k + 1) * h];
                slot.copy_from_slice(b);
                gemv_acc(u, x, slot);
                if t > 0 {
                    gemv_acc(w, h_prev, slot);
                }
            }
            let g = &mut trace.gates[t * 4 * h..(t + 1) * 4 * h];
            for k in 0..3 * h {
                g[k] = sigmoid(pre[k]);
            }
            for k in 3 * h..4 * h {
                g[k] = pre[k].tanh();
            }
            for k in 0..h {
                let c_prev = if t == 0 {
                    0.0
                } else {
                    trace.cells[(t - 1) * h + k]
                };
                let mut c = g[GATE_FORGET * h + k] * c_prev
                    + g[GATE_INPUT * h + k] * g[GATE_CANDIDATE * h + k];
                if self.cell_update == CellUpdate::Squashed {
                    c = sigmoid(c);
                }
                let tc = c.tanh();
                trace.cells[t * h + k] = c;
                trace.cells_tanh[t * h + k] = tc;
                trace.hidden[t * h + k] = g[GATE_OUTPUT * h + k] * tc;
            }
        }
        trace
    }

    /// Full backpropagation through time. `dhs` is the gradient arriving at
    /// every hidden state from above (`steps x hidden`).
    pub fn backward(
        &self,
        p: &[f64],
        xs: &[f64],
        trace: &LstmTrace,
        dhs: &[f64],
        grad: &mut [f64],
        mut dxs: Option<&mut [f64]>,
    ) {
        let (h, i) = (self.hidden, self.input);
        let steps = trace.steps(h);
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        let zeros = vec![0.0; h];
        for t in (0..steps).rev() {
            let g = &trace.gates[t * 4 * h..(t + 1) * 4 * h];
            let c_prev: &[f64] = if t == 0 {
                &zeros
            } else {
                &trace.cells[(t - 1) * h..t * h]
            };
            for k in 0..h {
                let ig = g[GATE_INPUT * h + k];
                let fg = g[GATE_FORGET * h + k];
                let og = g[GATE_OUTPUT * h + k];
                let cg = g[GATE_CANDIDATE * h + k];
                let c = trace.cells[t * h + k];
                let tc = trace.cells_tanh[t * h + k];
                let dh = dhs[t * h + k] + dh_next[k];
                let d_o = dh * tc;
                let mut dc = dh * og * (1.0 - tc * tc) + dc_next[k];
                if self.cell_update == CellUpdate::Squashed {
                    dc *= c * (1.0 - c);
                }
                let di = dc * cg;
                let df = dc * c_prev[k];
                let dg = dc * ig;
                dc_next[k] = dc * fg;
                da[GATE_INPUT * h + k] = di * ig * (1.0 - ig);
                da[GATE_FORGET * h + k] = df * fg * (1.0 - fg);
                da[GATE_OUTPUT * h + k] = d_o * og * (1.0 - og);
                da[GATE_CANDIDATE * h + k] = dg * (1.0 - cg * cg);
            }
            let x = &xs[t * i..(t + 1) * i];
            dh_next.fill(0.0);
            for k in 0..4 {
                let (u, w, _) = self.gate(p, k);
                let dak = &da[k * h..(k + 1) * h];
                let start = self.offset + k * self.gate_block();
                let block = &mut grad[start..start + self.gate_block()];
                let (gu, rest) = block.split_at_mut(h * i);
                let (gw, gb) = rest.split_at_mut(h * h);
                outer_acc(dak, x, gu);
                for (gv, d) in gb.iter_mut().zip(dak) {
                    *gv += d;
                }
                if t > 0 {
                    outer_acc(dak, &trace.hidden[(t - 1) * h..t * h], gw);
                    gemv_t_acc(w, dak, &mut dh_next);
                }
                if let Some(dxs) = dxs.as_deref_mut() {
                    gemv_t_acc(u, dak, &mut dxs[t * i..(t + 1) * i]);
                }
            }
        }
    }
}

/// Single-channel 1-D convolution, stride 1, valid padding, ReLU.
/// Weights are `filters x kernel`, output is `filters x (length - kernel + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conv1dLayer {
    pub length: usize,
    pub kernel: usize,
    pub filters: usize,
    pub offset: usize,
}

impl Conv1dLayer {
    pub fn new(length: usize, kernel: usize, filters: usize, offset: usize) -> Self {
        Conv1dLayer {
            length,
            kernel,
            filters,
            offset,
        }
    }

    pub fn out_len(&self) -> usize {
        self.length + 1 - self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.filters * (self.kernel + 1)
    }

    pub fn end(&self) -> usize {
        self.offset + self.param_count()
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        p[self.offset..self.end()].split_at(self.filters * self.kernel)
    }

    pub fn init(&self, rng: &mut Rng, p: &mut [f64]) {
        let w = glorot_init(rng, self.filters, self.kernel);
        let n = w.as_slice().len();
        p[self.offset..self.offset + n].copy_from_slice(w.as_slice());
        p[self.offset + n..self.end()].fill(0.0);
    }

    pub fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let (w, b) = self.split(p);
        let len = self.out_len();
        let mut out = vec![0.0; self.filters * len];
        for f in 0..self.filters {
            let wf = &w[f * self.kernel..(f + 1) * self.kernel];
            for pos in 0..len {
                let mut acc = b[f];
                for (wk, xk) in wf.iter().zip(&x[pos..pos + self.kernel]) {
                    acc += wk * xk;
                }
                out[f * len + pos] = acc.max(0.0);
            }
        }
        out
    }

    pub fn backward(&self, x: &[f64], out: &[f64], dout: &[f64], grad: &mut [f64]) {
        let len = self.out_len();
        let (gw, gb) = grad[self.offset..self.end()].split_at_mut(self.filters * self.kernel);
        for f in 0..self.filters {
            for pos in 0..len {
                let idx = f * len + pos;
                if out[idx] <= 0.0 || dout[idx] == 0.0 {
                    continue;
                }
                let d = dout[idx];
                gb[f] += d;
                for k in 0..self.kernel {
                    gw[f * self.kernel + k] += d * x[pos + k];
                }
            }
        }
    }
}

/// Non-overlapping max pooling per channel; a trailing partial window is dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPool1d {
    pub channels: usize,
    pub length: usize,
    pub width: usize,
}

impl MaxPool1d {
    pub fn out_len(&self) -> usize {
        self.length / self.width
    }

    /// Returns pooled values and, for each, the flat index of the winning input.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let out_len = self.out_len();
        let mut pooled = Vec::with_capacity(self.channels * out_len);
        let mut argmax = Vec::with_capacity(self.channels * out_len);
        for c in 0..self.channels {
            for j in 0..out_len {
                let start = c * self.length + j * self.width;
                let mut best = start;
                for idx in start + 1..start + self.width {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                pooled.push(x[best]);
                argmax.push(best);
            }
        }
        (pooled, argmax)
    }

    pub fn backward(&self, argmax: &[usize], dpooled: &[f64], dx: &mut [f64]) {
        for (&idx, &d) in argmax.iter().zip(dpooled) {
            dx[idx] += d;
        }
    }
}
