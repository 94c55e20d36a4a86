//! Loss, optimizers and the mini-batch training loop.

use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind};
use crate::numkit::{Matrix, Rng};

/// Mean squared error over every cell and its gradient `2 (pred - target) / (rows * cols)`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(
            "mse_loss",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    let n = pred.as_slice().len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.as_slice().len());
    for (p, t) in pred.as_slice().iter().zip(target.as_slice()) {
        let e = p - t;
        loss += e * e;
        grad.push(2.0 * e / n);
    }
    Ok((loss / n, Matrix::from_vec(pred.rows(), pred.cols(), grad)?))
}

pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) {
    debug_assert_eq!(params.len(), grads.len());
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(len: usize, alpha: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One Adam update. `t` is incremented before bias correction.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powf(self.t as f64);
        let bc2 = 1.0 - self.beta2.powf(self.t as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.alpha * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) {
    state.step(params, grads);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub shuffle_seed: u64,
    /// Global-norm bound applied to each batch gradient when set.
    pub gradient_clip: Option<f64>,
}

impl TrainConfig {
    /// Defaults for a model kind: SGD at 0.01 for `fnn_sgd`, Adam at 0.001 otherwise.
    pub fn for_kind(kind: ModelKind, max_epochs: usize, shuffle_seed: u64) -> Self {
        let (optimizer, learning_rate) = match kind {
            ModelKind::FnnSgd => (OptimizerKind::Sgd, 0.01),
            _ => (OptimizerKind::Adam, 0.001),
        };
        TrainConfig {
            max_epochs,
            batch_size: 32,
            learning_rate,
            optimizer,
            shuffle_seed,
            gradient_clip: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "max_epochs and batch_size must be >= 1".into(),
            ));
        }
        if let Some(c) = self.gradient_clip {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "gradient clip must be > 0, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Scales `grads` in place so their Euclidean norm is at most `bound`; returns the original norm.
pub fn clip_global_norm(grads: &mut [f64], bound: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > bound {
        let s = bound / norm;
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    norm
}

enum Optimizer {
    Sgd { lr: f64 },
    Adam(AdamState),
}

impl Optimizer {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        match self {
            Optimizer::Sgd { lr } => sgd_step(params, grads, *lr),
            Optimizer::Adam(state) => state.step(params, grads),
        }
    }
}

/// Sample order of `epoch`: a permutation of `0..n` drawn from the shuffle seed.
pub fn epoch_order(n: usize, shuffle_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    Rng::stream(shuffle_seed, epoch as u64).shuffle(&mut order);
    order
}

/// Trains `model` in place for exactly `max_epochs` epochs.
///
/// Returns the per-epoch training loss: the sample-weighted mean of each
/// batch's loss, measured before that batch's update.
pub fn train(
    model: &mut Model,
    train_set: &EmbeddedDataset,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let n = train_set.len();
    let mut optimizer = match config.optimizer {
        OptimizerKind::Sgd => Optimizer::Sgd {
            lr: config.learning_rate,
        },
        OptimizerKind::Adam => {
            Optimizer::Adam(AdamState::new(model.param_count(), config.learning_rate))
        }
    };
    let mut history = Vec::with_capacity(config.max_epochs);
    for epoch in 0..config.max_epochs {
        let order = epoch_order(n, config.shuffle_seed, epoch);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let x = train_set.inputs.select_rows(idx);
            let y = train_set.targets.select_rows(idx);
            let non_finite = || Error::NonFiniteTraining { epoch, batch };
            let (pred, cache) = match model.forward(&x) {
                Ok(v) => v,
                Err(Error::NonFiniteActivation { .. }) => return Err(non_finite()),
                Err(e) => return Err(e),
            };
            let (loss, dloss) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(non_finite());
            }
            let mut grads = model.backward(&cache, &dloss)?;
            if let Some(bound) = config.gradient_clip {
                clip_global_norm(&mut grads, bound);
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(non_finite());
            }
            optimizer.step(model.parameters_mut(), &grads);
            epoch_loss += loss * idx.len() as f64;
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}

/// Predictions for every row of `dataset`.
pub fn predict(model: &Model, dataset: &EmbeddedDataset) -> Result<Matrix> {
    model.predict(&dataset.inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build, ModelSpec};
    use crate::numkit::Activation;

    fn linear_problem(seed: u64, n: usize) -> EmbeddedDataset {
        let mut rng = Rng::new(seed);
        let a: Vec<f64> = (0..50).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let c: Vec<f64> = (0..10).map(|_| rng.uniform(-0.2, 0.2)).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
            for h in 0..10 {
                ys.push(c[h] + (0..5).map(|d| a[h * 5 + d] * x[d]).sum::<f64>());
            }
            xs.extend(x);
        }
        EmbeddedDataset {
            inputs: Matrix::from_vec(n, 5, xs).unwrap(),
            targets: Matrix::from_vec(n, 10, ys).unwrap(),
            dim: 5,
            lag: 1,
            horizon: 10,
            first_row: 0,
        }
    }

    fn linear_fnn(seed: u64) -> Model {
        let spec =
            ModelSpec::new(ModelKind::FnnAdam, 5, 10).with_hidden_activation(Activation::Identity);
        build(&spec, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn mse_examples() {
        let p = Matrix::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (l, g) = mse_loss(&p, &p).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));

        let t = p.map(|v| v - 1.5);
        assert!((mse_loss(&p, &t).unwrap().0 - 2.25).abs() < 1e-12);

        let p = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        let t = Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        let (l, g) = mse_loss(&p, &t).unwrap();
        assert_eq!(l, 12.5);
        assert_eq!(g.as_slice(), &[-3.0, -4.0]);

        assert!(mse_loss(&p, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn sgd_examples() {
        let mut p = vec![1.0, -2.0];
        sgd_step(&mut p, &[0.0, 0.0], 0.1);
        assert_eq!(p, vec![1.0, -2.0]);
        let mut p = vec![1.0];
        sgd_step(&mut p, &[2.0], 0.1);
        assert!((p[0] - 0.8).abs() < 1e-15);
        let mut p = vec![1.0];
        sgd_step(&mut p, &[2.0], 0.0);
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn adam_zero_gradient_fixed_point() {
        let mut s = AdamState::new(3, 0.001);
        let mut p = vec![0.5, -1.0, 2.0];
        adam_step(&mut s, &mut p, &[0.0; 3]);
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut s = AdamState::new(1, 0.001);
        let mut p = vec![0.0];
        adam_step(&mut s, &mut p, &[1.0]);
        // m_hat = 1, v_hat = 1 at t = 1
        let expected = 0.001 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] + expected).abs() < 1e-18);
        assert!((p[0] + 0.000_999_999_990).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_scale_invariant() {
        let mut s = AdamState::new(1, 0.001);
        let mut p = vec![0.0];
        adam_step(&mut s, &mut p, &[1000.0]);
        assert!((p[0].abs() - 0.001).abs() < 1e-6);
        let mut s = AdamState::new(1, 0.001);
        let mut q = vec![0.0];
        adam_step(&mut s, &mut q, &[-0.003]);
        assert!((q[0] - 0.001).abs() < 1e-6);
    }

    #[test]
    fn adam_bias_correction_second_step() {
        // hand evaluation of two steps with g = 1 then g = 3
        let mut s = AdamState::new(1, 0.1);
        let mut p = vec![0.0];
        s.step(&mut p, &[1.0]);
        s.step(&mut p, &[3.0]);
        let m2: f64 = 0.9 * 0.1 + 0.1 * 3.0;
        let v2: f64 = 0.999 * 0.001 + 0.001 * 9.0;
        let step2 = 0.1 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.998_001)).sqrt() + 1e-8);
        let step1 = 0.1 / (1.0 + 1e-8);
        assert!((p[0] + step1 + step2).abs() < 1e-12);
    }

    #[test]
    fn clip_bounds_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut g = vec![0.3, 0.4];
        clip_global_norm(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
    }

    #[test]
    fn epoch_order_is_a_permutation() {
        for epoch in 0..5 {
            let mut o = epoch_order(37, 11, epoch);
            o.sort_unstable();
            assert_eq!(o, (0..37).collect::<Vec<_>>());
        }
        assert_ne!(epoch_order(37, 11, 0), epoch_order(37, 11, 1));
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let data = linear_problem(1, 40);
        let mut m = linear_fnn(2);
        let before = m.clone();
        let cfg = TrainConfig {
            max_epochs: 1,
            batch_size: 40,
            learning_rate: 0.0,
            optimizer: OptimizerKind::Sgd,
            shuffle_seed: 0,
            gradient_clip: None,
        };
        let hist = train(&mut m, &data, &cfg).unwrap();
        assert_eq!(m, before);
        let initial = mse_loss(&before.predict(&data.inputs).unwrap(), &data.targets)
            .unwrap()
            .0;
        assert_eq!(hist.len(), 1);
        assert!((hist[0] - initial).abs() < 1e-15);
    }

    #[test]
    fn full_batch_gradient_descent_is_monotone() {
        let data = linear_problem(3, 64);
        let mut m = linear_fnn(4);
        let cfg = TrainConfig {
            max_epochs: 300,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Sgd,
            shuffle_seed: 5,
            gradient_clip: None,
        };
        let hist = train(&mut m, &data, &cfg).unwrap();
        assert!(hist.windows(2).all(|w| w[1] <= w[0]), "loss increased");
        assert!(hist[299] < hist[0]);
    }

    #[test]
    fn linear_problem_is_solved() {
        let data = linear_problem(6, 64);
        let mut m = linear_fnn(7);
        let cfg = TrainConfig {
            max_epochs: 1000,
            batch_size: 64,
            learning_rate: 0.01,
            optimizer: OptimizerKind::Adam,
            shuffle_seed: 8,
            gradient_clip: None,
        };
        let hist = train(&mut m, &data, &cfg).unwrap();
        let final_loss = mse_loss(&m.predict(&data.inputs).unwrap(), &data.targets)
            .unwrap()
            .0;
        assert!(
            final_loss < 1e-6,
            "final loss {final_loss}, last epoch {}",
            hist[999]
        );
    }

    #[test]
    fn training_is_deterministic() {
        let data = linear_problem(9, 50);
        let run = || {
            let mut m = build(&ModelSpec::new(ModelKind::Lstm, 5, 10), &mut Rng::new(10)).unwrap();
            let cfg = TrainConfig::for_kind(ModelKind::Lstm, 3, 12);
            let h = train(&mut m, &data, &cfg).unwrap();
            (m, h)
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(ha, hb);
        assert!(a
            .parameters()
            .iter()
            .zip(b.parameters())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn clipped_training_keeps_parameters_finite() {
        let data = linear_problem(13, 40);
        let mut m = build(&ModelSpec::new(ModelKind::Rnn, 5, 10), &mut Rng::new(14)).unwrap();
        let n = m.param_count();
        let cfg = TrainConfig {
            max_epochs: 5,
            batch_size: 8,
            learning_rate: 0.05,
            optimizer: OptimizerKind::Adam,
            shuffle_seed: 1,
            gradient_clip: Some(5.0),
        };
        train(&mut m, &data, &cfg).unwrap();
        assert_eq!(m.param_count(), n);
        assert!(m.parameters().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn divergent_training_reports_epoch_and_batch() {
        let data = linear_problem(15, 16);
        let mut m = linear_fnn(16);
        let cfg = TrainConfig {
            max_epochs: 50,
            batch_size: 8,
            learning_rate: 1e6,
            optimizer: OptimizerKind::Sgd,
            shuffle_seed: 1,
            gradient_clip: None,
        };
        match train(&mut m, &data, &cfg) {
            Err(Error::NonFiniteTraining { epoch, batch }) => assert!(epoch < 50 && batch < 2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn predict_matches_training_forward_with_same_partition() {
        let data = linear_problem(17, 30);
        let mut m = build(&ModelSpec::new(ModelKind::Cnn, 5, 10), &mut Rng::new(18)).unwrap();
        let cfg = TrainConfig::for_kind(ModelKind::Cnn, 2, 3);
        train(&mut m, &data, &cfg).unwrap();
        let whole = predict(&m, &data).unwrap();
        assert_eq!(whole.shape(), (30, 10));
        for chunk in epoch_order(30, 3, 1).chunks(32) {
            let (part, _) = m.forward(&data.inputs.select_rows(chunk)).unwrap();
            for (r, &i) in chunk.iter().enumerate() {
                assert_eq!(part.row(r), whole.row(i));
            }
        }
        let zero = Model::zeroed(m.spec()).unwrap();
        assert!(predict(&zero, &data)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_config_and_empty_data() {
        let data = linear_problem(19, 4);
        let mut m = linear_fnn(20);
        let mut cfg = TrainConfig::for_kind(ModelKind::FnnSgd, 1, 0);
        cfg.batch_size = 0;
        assert!(train(&mut m, &data, &cfg).is_err());
        let cfg = TrainConfig::for_kind(ModelKind::FnnSgd, 1, 0);
        let empty = EmbeddedDataset {
            inputs: Matrix::zeros(0, 5),
            targets: Matrix::zeros(0, 10),
            ..data
        };
        assert!(train(&mut m, &empty, &cfg).is_err());
    }
}
