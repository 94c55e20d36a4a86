//! The seven predictor configurations, each with an exact forward and
//! backward pass over a flat parameter vector.

mod checkpoint;
pub mod layers;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
pub use layers::{
    CellUpdate, Conv1dLayer, DenseLayer, ElmanLayer, LstmLayer, LstmTrace, MaxPool1d,
};

use crate::error::{Error, Result};
use crate::numkit::{Activation, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FnnAdam,
    FnnSgd,
    Lstm,
    BdLstm,
    EdLstm,
    Rnn,
    Cnn,
}

impl ModelKind {
    /// Column order of the result tables.
    pub const ALL: [ModelKind; 7] = [
        ModelKind::FnnAdam,
        ModelKind::FnnSgd,
        ModelKind::Lstm,
        ModelKind::BdLstm,
        ModelKind::EdLstm,
        ModelKind::Rnn,
        ModelKind::Cnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::FnnAdam => "fnn_adam",
            ModelKind::FnnSgd => "fnn_sgd",
            ModelKind::Lstm => "lstm",
            ModelKind::BdLstm => "bd_lstm",
            ModelKind::EdLstm => "ed_lstm",
            ModelKind::Rnn => "rnn",
            ModelKind::Cnn => "cnn",
        }
    }

    /// Display label used in table headers.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::FnnAdam => "FNN-Adam",
            ModelKind::FnnSgd => "FNN-SGD",
            ModelKind::Lstm => "LSTM",
            ModelKind::BdLstm => "BD-LSTM",
            ModelKind::EdLstm => "ED-LSTM",
            ModelKind::Rnn => "RNN",
            ModelKind::Cnn => "CNN",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(
            self,
            ModelKind::Lstm | ModelKind::BdLstm | ModelKind::EdLstm | ModelKind::Rnn
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Width of every hidden layer / recurrent state.
    pub hidden: usize,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    #[serde(default)]
    pub cell_update: CellUpdate,
    /// Activation of the FNN hidden layer and the CNN dense layer.
    #[serde(default = "default_hidden_activation")]
    pub hidden_activation: Activation,
}

fn default_hidden_activation() -> Activation {
    Activation::Relu
}

impl ModelSpec {
    /// The fixed topology for `kind`: 10-wide hidden layers and recurrent
    /// states; 64 filters, kernel 3 and pool 2 for the CNN.
    pub fn new(kind: ModelKind, input_dim: usize, output_dim: usize) -> Self {
        ModelSpec {
            kind,
            input_dim,
            output_dim,
            hidden: 10,
            filters: 64,
            kernel: 3,
            pool: 2,
            cell_update: CellUpdate::Standard,
            hidden_activation: Activation::Relu,
        }
    }

    pub fn with_cell_update(mut self, cell_update: CellUpdate) -> Self {
        self.cell_update = cell_update;
        self
    }

    pub fn with_hidden_activation(mut self, activation: Activation) -> Self {
        self.hidden_activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(format!(
                "{}: input, output and hidden widths must be >= 1",
                self.kind
            )));
        }
        if self.kind == ModelKind::Cnn {
            if self.filters == 0 || self.kernel == 0 || self.pool == 0 {
                return Err(Error::InvalidArgument(
                    "cnn: filters, kernel, pool must be >= 1".into(),
                ));
            }
            if self.input_dim < self.kernel || (self.input_dim + 1 - self.kernel) < self.pool {
                return Err(Error::InvalidArgument(format!(
                    "cnn: input width {} too small for kernel {} and pool {}",
                    self.input_dim, self.kernel, self.pool
                )));
            }
        }
        Ok(())
    }
}

/// Layer layout of one architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    Fnn {
        hidden: DenseLayer,
        out: DenseLayer,
    },
    Rnn {
        first: ElmanLayer,
        second: ElmanLayer,
        out: DenseLayer,
    },
    Lstm {
        lstm: LstmLayer,
        out: DenseLayer,
    },
    BdLstm {
        forward: LstmLayer,
        backward: LstmLayer,
        out: DenseLayer,
    },
    EdLstm {
        encoder: LstmLayer,
        decoder: LstmLayer,
        /// Shared per-step map from a decoder state to one horizon value.
        step_out: DenseLayer,
    },
    Cnn {
        conv: Conv1dLayer,
        pool: MaxPool1d,
        dense: DenseLayer,
        out: DenseLayer,
    },
}

impl Architecture {
    fn layout(spec: &ModelSpec) -> (Architecture, usize) {
        let (d, h, o) = (spec.input_dim, spec.hidden, spec.output_dim);
        let cu = spec.cell_update;
        match spec.kind {
            ModelKind::FnnAdam | ModelKind::FnnSgd => {
                let hidden = DenseLayer::new(d, h, spec.hidden_activation, 0);
                let out = DenseLayer::new(h, o, Activation::Identity, hidden.end());
                let end = out.end();
                (Architecture::Fnn { hidden, out }, end)
            }
            ModelKind::Rnn => {
                let first = ElmanLayer::new(1, h, 0);
                let second = ElmanLayer::new(h, h, first.end());
                let out = DenseLayer::new(h, o, Activation::Identity, second.end());
                let end = out.end();
                (Architecture::Rnn { first, second, out }, end)
            }
            ModelKind::Lstm => {
                let lstm = LstmLayer::new(1, h, 0, cu);
                let out = DenseLayer::new(h, o, Activation::Identity, lstm.end());
                let end = out.end();
                (Architecture::Lstm { lstm, out }, end)
            }
            ModelKind::BdLstm => {
                let forward = LstmLayer::new(1, h, 0, cu);
                let backward = LstmLayer::new(1, h, forward.end(), cu);
                let out = DenseLayer::new(2 * h, o, Activation::Identity, backward.end());
                let end = out.end();
                (
                    Architecture::BdLstm {
                        forward,
                        backward,
                        out,
                    },
                    end,
                )
            }
            ModelKind::EdLstm => {
                let encoder = LstmLayer::new(1, h, 0, cu);
                let decoder = LstmLayer::new(h, h, encoder.end(), cu);
                let step_out = DenseLayer::new(h, 1, Activation::Identity, decoder.end());
                let end = step_out.end();
                (
                    Architecture::EdLstm {
                        encoder,
                        decoder,
                        step_out,
                    },
                    end,
                )
            }
            ModelKind::Cnn => {
                let conv = Conv1dLayer::new(d, spec.kernel, spec.filters, 0);
                let pool = MaxPool1d {
                    channels: spec.filters,
                    length: conv.out_len(),
                    width: spec.pool,
                };
                let flat = spec.filters * pool.out_len();
                let dense = DenseLayer::new(flat, h, spec.hidden_activation, conv.end());
                let out = DenseLayer::new(h, o, Activation::Identity, dense.end());
                let end = out.end();
                (
                    Architecture::Cnn {
                        conv,
                        pool,
                        dense,
                        out,
                    },
                    end,
                )
            }
        }
    }

    /// Named parameter ranges in layout order.
    pub fn param_ranges(&self) -> Vec<(&'static str, Range<usize>)> {
        match self {
            Architecture::Fnn { hidden, out } => vec![
                ("hidden", hidden.offset..hidden.end()),
                ("output", out.offset..out.end()),
            ],
            Architecture::Rnn { first, second, out } => vec![
                ("rnn1", first.offset..first.end()),
                ("rnn2", second.offset..second.end()),
                ("output", out.offset..out.end()),
            ],
            Architecture::Lstm { lstm, out } => vec![
                ("lstm", lstm.offset..lstm.end()),
                ("output", out.offset..out.end()),
            ],
            Architecture::BdLstm {
                forward,
                backward,
                out,
            } => vec![
                ("lstm_forward", forward.offset..forward.end()),
                ("lstm_backward", backward.offset..backward.end()),
                ("output", out.offset..out.end()),
            ],
            Architecture::EdLstm {
                encoder,
                decoder,
                step_out,
            } => vec![
                ("encoder", encoder.offset..encoder.end()),
                ("decoder", decoder.offset..decoder.end()),
                ("step_output", step_out.offset..step_out.end()),
            ],
            Architecture::Cnn {
                conv, dense, out, ..
            } => vec![
                ("conv", conv.offset..conv.end()),
                ("dense", dense.offset..dense.end()),
                ("output", out.offset..out.end()),
            ],
        }
    }
}

/// Per-sample intermediates retained for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    Fnn {
        hidden: Vec<f64>,
    },
    Rnn {
        first: Vec<f64>,
        second: Vec<f64>,
    },
    Lstm(LstmTrace),
    BdLstm {
        forward: LstmTrace,
        backward: LstmTrace,
    },
    EdLstm {
        encoder: LstmTrace,
        decoder: LstmTrace,
    },
    Cnn {
        conv: Vec<f64>,
        argmax: Vec<usize>,
        pooled: Vec<f64>,
        dense: Vec<f64>,
    },
}

/// Intermediates of one batched forward call.
#[derive(Debug, Clone)]
pub struct Cache {
    kind: ModelKind,
    param_len: usize,
    inputs: Matrix,
    traces: Vec<Trace>,
}

impl Cache {
    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn batch(&self) -> usize {
        self.traces.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    arch: Architecture,
    params: Vec<f64>,
}

/// Builds `spec` with Glorot-uniform weights and zero biases drawn from `rng`.
pub fn build(spec: &ModelSpec, rng: &mut Rng) -> Result<Model> {
    let mut model = Model::zeroed(spec)?;
    let p = &mut model.params;
    match &model.arch {
        Architecture::Fnn { hidden, out } => {
            hidden.init(rng, p);
            out.init(rng, p);
        }
        Architecture::Rnn { first, second, out } => {
            first.init(rng, p);
            second.init(rng, p);
            out.init(rng, p);
        }
        Architecture::Lstm { lstm, out } => {
            lstm.init(rng, p);
            out.init(rng, p);
        }
        Architecture::BdLstm {
            forward,
            backward,
            out,
        } => {
            forward.init(rng, p);
            backward.init(rng, p);
            out.init(rng, p);
        }
        Architecture::EdLstm {
            encoder,
            decoder,
            step_out,
        } => {
            encoder.init(rng, p);
            decoder.init(rng, p);
            step_out.init(rng, p);
        }
        Architecture::Cnn {
            conv, dense, out, ..
        } => {
            conv.init(rng, p);
            dense.init(rng, p);
            out.init(rng, p);
        }
    }
    Ok(model)
}

fn check_finite(values: &[f64], layer: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteActivation { layer })
    }
}

fn check_lstm(trace: &LstmTrace, layer: &'static str) -> Result<()> {
    check_finite(&trace.hidden, layer)?;
    check_finite(&trace.cells, layer)
}

impl Model {
    /// All parameters zero.
    pub fn zeroed(spec: &ModelSpec) -> Result<Model> {
        spec.validate()?;
        let (arch, len) = Architecture::layout(spec);
        Ok(Model {
            spec: *spec,
            arch,
            params: vec![0.0; len],
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn load_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "{} expects {} parameters, got {}",
                self.spec.kind,
                self.params.len(),
                flat.len()
            )));
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    fn check_width(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.spec.input_dim {
            return Err(Error::dim(
                "forward",
                format!(
                    "{} expects input width {}, got {}",
                    self.spec.kind,
                    self.spec.input_dim,
                    inputs.cols()
                ),
            ));
        }
        Ok(())
    }

    /// Forward pass over a batch; returns `batch x H` predictions and the cache.
    pub fn forward(&self, inputs: &Matrix) -> Result<(Matrix, Cache)> {
        self.check_width(inputs)?;
        let h_out = self.spec.output_dim;
        let mut preds = Matrix::zeros(inputs.rows(), h_out);
        let mut traces = Vec::with_capacity(inputs.rows());
        for (r, x) in inputs.iter_rows().enumerate() {
            let trace = self.forward_sample(x, preds.row_mut(r))?;
            traces.push(trace);
        }
        Ok((
            preds,
            Cache {
                kind: self.spec.kind,
                param_len: self.params.len(),
                inputs: inputs.clone(),
                traces,
            },
        ))
    }

    /// Forward pass without retaining intermediates.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_width(inputs)?;
        let mut preds = Matrix::zeros(inputs.rows(), self.spec.output_dim);
        for (r, x) in inputs.iter_rows().enumerate() {
            self.forward_sample(x, preds.row_mut(r))?;
        }
        Ok(preds)
    }

    fn forward_sample(&self, x: &[f64], y: &mut [f64]) -> Result<Trace> {
        let p = &self.params;
        let hd = self.spec.hidden;
        let trace = match &self.arch {
            Architecture::Fnn { hidden, out } => {
                let mut hv = vec![0.0; hidden.output];
                hidden.forward(p, x, &mut hv);
                check_finite(&hv, "hidden")?;
                out.forward(p, &hv, y);
                Trace::Fnn { hidden: hv }
            }
            Architecture::Rnn { first, second, out } => {
                let h1 = first.forward(p, x);
                check_finite(&h1, "rnn1")?;
                let h2 = second.forward(p, &h1);
                check_finite(&h2, "rnn2")?;
                out.forward(p, &h2[h2.len() - hd..], y);
                Trace::Rnn {
                    first: h1,
                    second: h2,
                }
            }
            Architecture::Lstm { lstm, out } => {
                let t = lstm.forward(p, x);
                check_lstm(&t, "lstm")?;
                out.forward(p, t.last_hidden(hd), y);
                Trace::Lstm(t)
            }
            Architecture::BdLstm {
                forward,
                backward,
                out,
            } => {
                let tf = forward.forward(p, x);
                check_lstm(&tf, "lstm_forward")?;
                let rev: Vec<f64> = x.iter().rev().copied().collect();
                let tb = backward.forward(p, &rev);
                check_lstm(&tb, "lstm_backward")?;
                let mut merged = Vec::with_capacity(2 * hd);
                merged.extend_from_slice(tf.last_hidden(hd));
                merged.extend_from_slice(tb.last_hidden(hd));
                out.forward(p, &merged, y);
                Trace::BdLstm {
                    forward: tf,
                    backward: tb,
                }
            }
            Architecture::EdLstm {
                encoder,
                decoder,
                step_out,
            } => {
                let te = encoder.forward(p, x);
                check_lstm(&te, "encoder")?;
                let latent = te.last_hidden(hd);
                let repeated: Vec<f64> = latent
                    .iter()
                    .copied()
                    .cycle()
                    .take(hd * self.spec.output_dim)
                    .collect();
                let td = decoder.forward(p, &repeated);
                check_lstm(&td, "decoder")?;
                for (step, yv) in y.iter_mut().enumerate() {
                    step_out.forward(
                        p,
                        &td.hidden[step * hd..(step + 1) * hd],
                        std::slice::from_mut(yv),
                    );
                }
                Trace::EdLstm {
                    encoder: te,
                    decoder: td,
                }
            }
            Architecture::Cnn {
                conv,
                pool,
                dense,
                out,
            } => {
                let c = conv.forward(p, x);
                check_finite(&c, "conv")?;
                let (pooled, argmax) = pool.forward(&c);
                let mut dv = vec![0.0; dense.output];
                dense.forward(p, &pooled, &mut dv);
                check_finite(&dv, "dense")?;
                out.forward(p, &dv, y);
                Trace::Cnn {
                    conv: c,
                    argmax,
                    pooled,
                    dense: dv,
                }
            }
        };
        check_finite(y, "output")?;
        Ok(trace)
    }

    /// Gradient of `sum(loss_grad ⊙ predictions)` with respect to every
    /// parameter, in parameter-vector layout.
    pub fn backward(&self, cache: &Cache, loss_grad: &Matrix) -> Result<Vec<f64>> {
        if cache.kind != self.spec.kind || cache.param_len != self.params.len() {
            return Err(Error::CacheMismatch(format!(
                "cache from {} with {} parameters, model is {} with {}",
                cache.kind,
                cache.param_len,
                self.spec.kind,
                self.params.len()
            )));
        }
        if loss_grad.shape() != (cache.batch(), self.spec.output_dim) {
            return Err(Error::dim(
                "backward",
                format!(
                    "loss gradient is {}x{}, expected {}x{}",
                    loss_grad.rows(),
                    loss_grad.cols(),
                    cache.batch(),
                    self.spec.output_dim
                ),
            ));
        }
        let mut grad = vec![0.0; self.params.len()];
        for (r, trace) in cache.traces.iter().enumerate() {
            self.backward_sample(cache.inputs.row(r), trace, loss_grad.row(r), &mut grad)?;
        }
        Ok(grad)
    }

    fn backward_sample(
        &self,
        x: &[f64],
        trace: &Trace,
        dy: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        let p = &self.params;
        let hd = self.spec.hidden;
        let mismatch = || Error::CacheMismatch("trace does not match architecture".into());
        match (&self.arch, trace) {
            (Architecture::Fnn { hidden, out }, Trace::Fnn { hidden: hv }) => {
                let mut dh = vec![0.0; hidden.output];
                out.backward(p, hv, &[], dy, grad, Some(&mut dh));
                hidden.backward(p, x, hv, &dh, grad, None);
            }
            (
                Architecture::Rnn { first, second, out },
                Trace::Rnn {
                    first: h1,
                    second: h2,
                },
            ) => {
                let steps = h2.len() / hd;
                let mut dh2 = vec![0.0; h2.len()];
                out.backward(
                    p,
                    &h2[h2.len() - hd..],
                    &[],
                    dy,
                    grad,
                    Some(&mut dh2[(steps - 1) * hd..]),
                );
                let mut dh1 = vec![0.0; h1.len()];
                second.backward(p, h1, h2, &dh2, grad, Some(&mut dh1));
                first.backward(p, x, h1, &dh1, grad, None);
            }
            (Architecture::Lstm { lstm, out }, Trace::Lstm(t)) => {
                let mut dhs = vec![0.0; t.hidden.len()];
                let last = dhs.len() - hd;
                out.backward(p, t.last_hidden(hd), &[], dy, grad, Some(&mut dhs[last..]));
                lstm.backward(p, x, t, &dhs, grad, None);
            }
            (
                Architecture::BdLstm {
                    forward,
                    backward,
                    out,
                },
                Trace::BdLstm {
                    forward: tf,
                    backward: tb,
                },
            ) => {
                let mut merged = Vec::with_capacity(2 * hd);
                merged.extend_from_slice(tf.last_hidden(hd));
                merged.extend_from_slice(tb.last_hidden(hd));
                let mut dmerged = vec![0.0; 2 * hd];
                out.backward(p, &merged, &[], dy, grad, Some(&mut dmerged));
                let mut dhf = vec![0.0; tf.hidden.len()];
                let last = dhf.len() - hd;
                dhf[last..].copy_from_slice(&dmerged[..hd]);
                forward.backward(p, x, tf, &dhf, grad, None);
                let rev: Vec<f64> = x.iter().rev().copied().collect();
                let mut dhb = vec![0.0; tb.hidden.len()];
                dhb[last..].copy_from_slice(&dmerged[hd..]);
                backward.backward(p, &rev, tb, &dhb, grad, None);
            }
            (
                Architecture::EdLstm {
                    encoder,
                    decoder,
                    step_out,
                },
                Trace::EdLstm {
                    encoder: te,
                    decoder: td,
                },
            ) => {
                let mut ddec = vec![0.0; td.hidden.len()];
                for (step, &d) in dy.iter().enumerate() {
                    let hs = &td.hidden[step * hd..(step + 1) * hd];
                    step_out.backward(
                        p,
                        hs,
                        &[],
                        &[d],
                        grad,
                        Some(&mut ddec[step * hd..(step + 1) * hd]),
                    );
                }
                let latent = te.last_hidden(hd);
                let repeated: Vec<f64> = latent
                    .iter()
                    .copied()
                    .cycle()
                    .take(td.hidden.len())
                    .collect();
                let mut drep = vec![0.0; repeated.len()];
                decoder.backward(p, &repeated, td, &ddec, grad, Some(&mut drep));
                let mut denc = vec![0.0; te.hidden.len()];
                let last = denc.len() - hd;
                for chunk in drep.chunks_exact(hd) {
                    for (d, c) in denc[last..].iter_mut().zip(chunk) {
                        *d += c;
                    }
                }
                encoder.backward(p, x, te, &denc, grad, None);
            }
            (
                Architecture::Cnn {
                    conv,
                    pool,
                    dense,
                    out,
                },
                Trace::Cnn {
                    conv: c,
                    argmax,
                    pooled,
                    dense: dv,
                },
            ) => {
                let mut ddense = vec![0.0; dense.output];
                out.backward(p, dv, &[], dy, grad, Some(&mut ddense));
                let mut dpooled = vec![0.0; pooled.len()];
                dense.backward(p, pooled, dv, &ddense, grad, Some(&mut dpooled));
                let mut dconv = vec![0.0; c.len()];
                pool.backward(argmax, &dpooled, &mut dconv);
                conv.backward(x, c, &dconv, grad);
            }
            _ => return Err(mismatch()),
        }
        Ok(())
    }
}
