use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{sigmoid, BatchNormLayer, DenseLayer};
use super::matrix::Matrix;
use super::NetError;

/// One element of the layer stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    BatchNorm(BatchNormLayer),
    Sigmoid { dim: usize },
}

impl Layer {
    fn in_dim(&self) -> usize {
        match self {
            Layer::Dense(d) => d.in_dim(),
            Layer::BatchNorm(bn) => bn.dim(),
            Layer::Sigmoid { dim } => *dim,
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            Layer::Dense(d) => d.out_dim(),
            Layer::BatchNorm(bn) => bn.dim(),
            Layer::Sigmoid { dim } => *dim,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Sigmoid { .. } => "sigmoid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batchnorm; running statistics are updated.
    Train,
    /// Running statistics only; nothing is mutated.
    Infer,
}

#[derive(Debug, Clone)]
enum LayerTrace {
    Dense { input: Matrix },
    BatchNorm { xhat: Matrix, inv_std: Vec<f64> },
    Sigmoid { output: Matrix },
}

/// Intermediates recorded by a forward pass, consumed by the backward passes.
#[derive(Debug, Clone)]
pub struct Trace {
    mode: Mode,
    batch: usize,
    layers: Vec<LayerTrace>,
}

impl Trace {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub output: Matrix,
    pub trace: Trace,
}

/// Parameter gradients, one tensor per parameter array in [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn as_slices(&self) -> Vec<&[f64]> {
        self.tensors.iter().map(Vec::as_slice).collect()
    }
}

/// Feedforward layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    in_dim: usize,
    out_dim: usize,
}

impl Network {
    /// Validates that consecutive layers agree on their widths.
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetError> {
        let first = layers
            .first()
            .ok_or_else(|| NetError::InvalidTopology("empty layer stack".into()))?;
        let in_dim = first.in_dim();
        if in_dim == 0 {
            return Err(NetError::InvalidTopology("zero-width input".into()));
        }
        let mut width = in_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(NetError::DimensionMismatch {
                    layer: i,
                    kind: layer.kind(),
                    expected: width,
                    found: layer.in_dim(),
                });
            }
            width = layer.out_dim();
        }
        Ok(Self {
            layers,
            in_dim,
            out_dim: width,
        })
    }

    /// Builds the forward-model topology: for every width in `hidden`, a dense layer
    /// followed by batchnorm and sigmoid, then a final bare dense layer to `out_dim`.
    pub fn ddc(in_dim: usize, hidden: &[usize], out_dim: usize, seed: u64) -> Result<Self, NetError> {
        if hidden.contains(&0) || out_dim == 0 || in_dim == 0 {
            return Err(NetError::InvalidTopology("layer widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len() * 3 + 1);
        let mut width = in_dim;
        for &h in hidden {
            layers.push(Layer::Dense(DenseLayer::new_uniform(width, h, &mut rng)));
            layers.push(Layer::BatchNorm(BatchNormLayer::new(h)));
            layers.push(Layer::Sigmoid { dim: h });
            width = h;
        }
        layers.push(Layer::Dense(DenseLayer::new_uniform(width, out_dim, &mut rng)));
        Self::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Output widths of the dense layers, in order.
    pub fn dense_widths(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some(d.out_dim()),
                _ => None,
            })
            .collect()
    }

    /// Checks the forward-model shape: every dense layer but the last is followed by
    /// exactly batchnorm then sigmoid, and the last dense layer ends the stack.
    pub fn is_ddc_topology(&self) -> bool {
        let n = self.layers.len();
        if n == 0 || n % 3 != 1 {
            return false;
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let ok = match (i % 3, layer) {
                (0, Layer::Dense(_)) => true,
                (1, Layer::BatchNorm(_)) => i != n - 1,
                (2, Layer::Sigmoid { .. }) => i != n - 1,
                _ => false,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Forward pass in either mode.
    ///
    /// Train mode needs at least two rows and folds the batch statistics into the
    /// batchnorm running statistics.
    pub fn forward(&mut self, batch: &Matrix, mode: Mode) -> Result<Forward, NetError> {
        match mode {
            Mode::Infer => self.infer(batch),
            Mode::Train => {
                self.check_input(batch)?;
                if batch.rows() < 2 {
                    return Err(NetError::BatchTooSmall { rows: batch.rows() });
                }
                let mut stats = Vec::new();
                let fwd = self.run(batch, Mode::Train, Some(&mut stats))?;
                for (idx, mean, var) in stats {
                    if let Layer::BatchNorm(bn) = &mut self.layers[idx] {
                        bn.update_running(&mean, &var, batch.rows());
                    }
                }
                Ok(fwd)
            }
        }
    }

    /// Train-mode forward that leaves the running statistics untouched.
    ///
    /// Used by gradient checks, which need repeated evaluations of the same function.
    pub fn forward_train_frozen(&self, batch: &Matrix) -> Result<Forward, NetError> {
        self.check_input(batch)?;
        if batch.rows() < 2 {
            return Err(NetError::BatchTooSmall { rows: batch.rows() });
        }
        self.run(batch, Mode::Train, None)
    }

    /// Infer-mode forward. Pure.
    pub fn infer(&self, batch: &Matrix) -> Result<Forward, NetError> {
        self.check_input(batch)?;
        self.run(batch, Mode::Infer, None)
    }

    fn check_input(&self, batch: &Matrix) -> Result<(), NetError> {
        if batch.cols() != self.in_dim {
            return Err(NetError::DimensionMismatch {
                layer: 0,
                kind: self.layers[0].kind(),
                expected: self.in_dim,
                found: batch.cols(),
            });
        }
        if batch.rows() == 0 {
            return Err(NetError::BatchTooSmall { rows: 0 });
        }
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    fn run(
        &self,
        batch: &Matrix,
        mode: Mode,
        mut stats: Option<&mut Vec<(usize, Vec<f64>, Vec<f64>)>>,
    ) -> Result<Forward, NetError> {
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let y = match layer {
                Layer::Dense(d) => {
                    let y = d.forward(&x);
                    traces.push(LayerTrace::Dense { input: x });
                    y
                }
                Layer::BatchNorm(bn) => match mode {
                    Mode::Train => {
                        let (y, xhat, inv_std, mean, var) = bn.forward_batch_stats(&x);
                        if let Some(s) = stats.as_deref_mut() {
                            s.push((i, mean, var));
                        }
                        traces.push(LayerTrace::BatchNorm { xhat, inv_std });
                        y
                    }
                    Mode::Infer => {
                        let (y, xhat, inv_std) = bn.forward_running(&x);
                        traces.push(LayerTrace::BatchNorm { xhat, inv_std });
                        y
                    }
                },
                Layer::Sigmoid { .. } => {
                    let mut y = x;
                    y.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
                    traces.push(LayerTrace::Sigmoid { output: y.clone() });
                    y
                }
            };
            if !y.is_finite() {
                return Err(NetError::NonFinite { layer: i });
            }
            x = y;
        }
        Ok(Forward {
            output: x,
            trace: Trace {
                mode,
                batch: batch.rows(),
                layers: traces,
            },
        })
    }

    fn check_trace(&self, trace: &Trace, output_grad: &Matrix) -> Result<(), NetError> {
        if trace.layers.len() != self.layers.len() {
            return Err(NetError::TraceMismatch(format!(
                "trace has {} layers, network has {}",
                trace.layers.len(),
                self.layers.len()
            )));
        }
        if output_grad.rows() != trace.batch || output_grad.cols() != self.out_dim {
            return Err(NetError::TraceMismatch(format!(
                "output gradient is {}x{}, expected {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                trace.batch,
                self.out_dim
            )));
        }
        Ok(())
    }

    fn backward(&self, trace: &Trace, output_grad: &Matrix, want_params: bool) -> Result<(Option<Gradients>, Matrix), NetError> {
        self.check_trace(trace, output_grad)?;
        let mut per_layer: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        let mut g = output_grad.clone();
        for (i, (layer, lt)) in self.layers.iter().zip(&trace.layers).enumerate().rev() {
            g = match (layer, lt) {
                (Layer::Dense(d), LayerTrace::Dense { input }) => {
                    if want_params {
                        let (dw, db) = d.backward_params(input, &g);
                        per_layer[i] = vec![dw, db];
                    }
                    d.backward_input(&g)
                }
                (Layer::BatchNorm(bn), LayerTrace::BatchNorm { xhat, inv_std }) => {
                    if want_params {
                        let (dgamma, dbeta) = bn.backward_params(xhat, &g);
                        per_layer[i] = vec![dgamma, dbeta];
                    }
                    match trace.mode {
                        Mode::Train => bn.backward_input_batch(xhat, inv_std, &g),
                        Mode::Infer => bn.backward_input_running(inv_std, &g),
                    }
                }
                (Layer::Sigmoid { .. }, LayerTrace::Sigmoid { output }) => {
                    let mut dx = g;
                    for (d, &s) in dx.as_mut_slice().iter_mut().zip(output.as_slice()) {
                        *d *= s * (1.0 - s);
                    }
                    dx
                }
                _ => {
                    return Err(NetError::TraceMismatch(format!("layer {i} kind differs from trace")));
                }
            };
        }
        let grads = want_params.then(|| Gradients {
            tensors: per_layer.into_iter().flatten().collect(),
        });
        Ok((grads, g))
    }

    /// Gradients of every dense and batchnorm parameter. Requires a train-mode trace.
    pub fn backward_params(&self, fwd: &Forward, output_grad: &Matrix) -> Result<Gradients, NetError> {
        if fwd.trace.mode != Mode::Train {
            return Err(NetError::NotTrainTrace);
        }
        let (grads, _) = self.backward(&fwd.trace, output_grad, true)?;
        Ok(grads.expect("requested"))
    }

    /// Both parameter and input gradients from a single sweep.
    pub fn backward_all(&self, fwd: &Forward, output_grad: &Matrix) -> Result<(Gradients, Matrix), NetError> {
        if fwd.trace.mode != Mode::Train {
            return Err(NetError::NotTrainTrace);
        }
        let (grads, dx) = self.backward(&fwd.trace, output_grad, true)?;
        Ok((grads.expect("requested"), dx))
    }

    /// Gradient with respect to the input rows. Infer-mode traces treat the running
    /// statistics as constants.
    pub fn backward_input(&self, fwd: &Forward, output_grad: &Matrix) -> Result<Matrix, NetError> {
        let (_, dx) = self.backward(&fwd.trace, output_grad, false)?;
        Ok(dx)
    }

    /// Trainable parameter arrays in gradient order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(d.weights.as_slice());
                    out.push(d.bias.as_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_slice());
                    out.push(bn.beta.as_slice());
                }
                Layer::Sigmoid { .. } => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(d.weights.as_mut_slice());
                    out.push(d.bias.as_mut_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_mut_slice());
                    out.push(bn.beta.as_mut_slice());
                }
                Layer::Sigmoid { .. } => {}
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
