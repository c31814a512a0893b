use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError, ModelNormalizer, TrainingSample};
use crate::netcore::{AdamConfig, AdamState, Forward, Matrix, Mode, Network};

/// Hidden widths of the dense layers: the first keeps the input width, then
/// 80, 50 and 20 units, before the bare output layer.
pub const DEFAULT_HIDDEN: [usize; 4] = [0, 80, 50, 20];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of samples held out for model selection.
    pub test_fraction: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Widths of every dense layer but the last. A zero entry means "network input width".
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            test_fraction: 0.2,
            seed: 0,
            adam: AdamConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub best_test_loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Held-out MSE of the freshly initialized network.
    pub initial_test_loss: f64,
    /// Mean minibatch MSE per epoch.
    pub train_loss: Vec<f64>,
    /// Held-out MSE after each epoch, infer mode.
    pub test_loss: Vec<f64>,
    /// Zero-based index into `test_loss` of the kept snapshot.
    pub best_epoch: usize,
}

/// A trained forward model with its normalization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub network: Network,
    pub normalizer: ModelNormalizer,
    pub meta: TrainingMeta,
}

/// Seeded shuffle of `0..n`; the first `floor(n * test_fraction)` indices are the test set.
/// Both halves are returned sorted.
pub fn split_indices(n: usize, test_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    // guard against 0.2 * n landing a hair under an integer
    let n_test = ((n as f64) * test_fraction + 1e-9).floor() as usize;
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

fn stack(samples: &[TrainingSample], idx: &[usize], norm: &ModelNormalizer) -> (Matrix, Matrix) {
    let x: Vec<Vec<f64>> = idx.iter().map(|&i| norm.input.apply(&samples[i].network_input())).collect();
    let y: Vec<Vec<f64>> = idx.iter().map(|&i| norm.output.apply(&samples[i].states)).collect();
    (Matrix::from_rows(&x).expect("uniform rows"), Matrix::from_rows(&y).expect("uniform rows"))
}

/// Mean squared error and its gradient with respect to `pred`.
fn mse(pred: &Matrix, target: &Matrix) -> (f64, Matrix) {
    let n = pred.as_slice().len() as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, p), t) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(target.as_slice()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    (loss / n, grad)
}

fn eval_loss(net: &Network, x: &Matrix, y: &Matrix) -> Result<f64, ModelError> {
    let out = net.infer(x)?.output;
    Ok(mse(&out, y).0)
}

/// Splits into minibatches; a trailing batch of one row is merged into its predecessor
/// because train-mode batchnorm needs two rows.
fn minibatches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut batches: Vec<&[usize]> = order.chunks(size.max(2)).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        batches.pop();
        let start = order.len() - size.max(2) - 1;
        let last = batches.len() - 1;
        batches[last] = &order[start..];
    }
    batches
}

/// Trains a forward model with minibatch Adam on normalized MSE, keeping the
/// parameters from the epoch with the lowest held-out loss.
pub fn train(
    samples: &[TrainingSample],
    config: &ModelConfig,
    tc: &TrainConfig,
) -> Result<(TrainedModel, TrainReport), ModelError> {
    config.validate()?;
    if samples.len() < 10 {
        return Err(ModelError::TooFewSamples {
            need: 10,
            got: samples.len(),
        });
    }
    for s in samples {
        check_len("initial state", config.init_dim, s.init.len())?;
        check_len("input sequence", config.horizon * config.input_dim, s.inputs.len())?;
        check_len("state sequence", config.net_out_dim(), s.states.len())?;
    }
    if !(tc.test_fraction > 0.0 && tc.test_fraction < 1.0) {
        return Err(ModelError::Config(format!("test_fraction {} not in (0, 1)", tc.test_fraction)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let (train_idx, test_idx) = split_indices(samples.len(), tc.test_fraction, &mut rng);
    if train_idx.len() < 2 || test_idx.is_empty() {
        return Err(ModelError::TooFewSamples {
            need: 10,
            got: samples.len(),
        });
    }
    let train_set: Vec<TrainingSample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let normalizer = ModelNormalizer::fit(&train_set)?;
    let (x_test, y_test) = stack(samples, &test_idx, &normalizer);

    let hidden: Vec<usize> = tc
        .hidden
        .iter()
        .map(|&h| if h == 0 { config.net_in_dim() } else { h })
        .collect();
    let mut net = Network::ddc(config.net_in_dim(), &hidden, config.net_out_dim(), rng.next_u64())?;
    let mut adam = AdamState::new(&net.params(), tc.adam);

    let initial_test_loss = eval_loss(&net, &x_test, &y_test)?;
    let mut best = (f64::INFINITY, 0usize, net.clone());
    let mut train_loss = Vec::with_capacity(tc.epochs);
    let mut test_loss = Vec::with_capacity(tc.epochs);
    let mut order = train_idx.clone();

    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let batches = minibatches(&order, tc.batch_size);
        for batch in &batches {
            let (x, y) = stack(samples, batch, &normalizer);
            let fwd = net.forward(&x, Mode::Train)?;
            let (loss, grad) = mse(&fwd.output, &y);
            let grads = net.backward_params(&fwd, &grad)?;
            adam.step(&mut net.params_mut(), &grads.as_slices())?;
            epoch_loss += loss;
        }
        train_loss.push(epoch_loss / batches.len() as f64);
        let tl = eval_loss(&net, &x_test, &y_test)?;
        test_loss.push(tl);
        if tl < best.0 {
            best = (tl, epoch, net.clone());
        }
    }

    let (best_loss, best_epoch, network) = if tc.epochs == 0 {
        (initial_test_loss, 0, net)
    } else {
        best
    };
    let model = TrainedModel {
        config: config.clone(),
        network,
        normalizer,
        meta: TrainingMeta {
            epochs: tc.epochs,
            best_test_loss: best_loss,
            seed: tc.seed,
        },
    };
    let report = TrainReport {
        train_indices: train_idx,
        test_indices: test_idx,
        initial_test_loss,
        train_loss,
        test_loss,
        best_epoch,
    };
    Ok((model, report))
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::Dimension { what, expected, found })
    }
}

/// Physical-unit predictions for a batch of input sequences sharing one initial state,
/// plus the trace needed to differentiate them.
#[derive(Debug, Clone)]
pub struct BatchPrediction {
    /// One row of `horizon * state_dim` predicted states per candidate.
    pub states: Matrix,
    forward: Forward,
}

impl TrainedModel {
    /// Predicts the state sequence for one initial state and input sequence.
    pub fn predict(&self, init: &[f64], inputs: &[f64]) -> Result<Vec<f64>, ModelError> {
        let u = Matrix::from_vec(1, inputs.len(), inputs.to_vec()).expect("single row");
        Ok(self.predict_batch(init, &u)?.states.into_vec())
    }

    /// Predicts every row of `inputs` from the same initial state, in infer mode.
    pub fn predict_batch(&self, init: &[f64], inputs: &Matrix) -> Result<BatchPrediction, ModelError> {
        check_len("initial state", self.config.init_dim, init.len())?;
        check_len("input sequence", self.config.horizon * self.config.input_dim, inputs.cols())?;
        let mut x = Matrix::zeros(inputs.rows(), self.config.net_in_dim());
        let mut raw = Vec::with_capacity(self.config.net_in_dim());
        for (r, u) in inputs.iter_rows().enumerate() {
            raw.clear();
            raw.extend_from_slice(init);
            raw.extend_from_slice(u);
            x.row_mut(r).copy_from_slice(&self.normalizer.input.apply(&raw));
        }
        let forward = self.network.infer(&x)?;
        let mut states = Matrix::zeros(inputs.rows(), self.config.net_out_dim());
        for (r, z) in forward.output.iter_rows().enumerate() {
            states.row_mut(r).copy_from_slice(&self.normalizer.output.invert(z));
        }
        Ok(BatchPrediction { states, forward })
    }

    /// Maps gradients with respect to the physical predicted states onto gradients with
    /// respect to the physical input sequences, through both normalizers.
    pub fn input_gradient(&self, pred: &BatchPrediction, state_grad: &Matrix) -> Result<Matrix, ModelError> {
        if state_grad.rows() != pred.states.rows() || state_grad.cols() != pred.states.cols() {
            return Err(ModelError::Dimension {
                what: "state gradient",
                expected: pred.states.cols(),
                found: state_grad.cols(),
            });
        }
        let out_std = self.normalizer.output.std();
        let mut gz = state_grad.clone();
        for r in 0..gz.rows() {
            for (g, s) in gz.row_mut(r).iter_mut().zip(out_std) {
                *g *= s;
            }
        }
        let dx = self.network.backward_input(&pred.forward, &gz)?;
        let skip = self.config.init_dim;
        let in_std = &self.normalizer.input.std()[skip..];
        let mut du = Matrix::zeros(dx.rows(), dx.cols() - skip);
        for r in 0..dx.rows() {
            for ((d, g), s) in du.row_mut(r).iter_mut().zip(&dx.row(r)[skip..]).zip(in_std) {
                *d = g / s;
            }
        }
        Ok(du)
    }
}
