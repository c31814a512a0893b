//! Receding-horizon control by gradient descent on the input sequence through a
//! trained forward model.
//!
//! Each tick: warm-start from the previous optimized sequence (shifted by one step,
//! last entry repeated), explore a batch of noise-perturbed copies with large
//! normalized-gradient steps, refine the best with small steps, and apply the first
//! element of the lowest-loss sequence seen. The first tick, with no previous
//! sequence, starts from constant sequences at random levels instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::model::{InitState, ModelError, TrainedModel};
use crate::netcore::Matrix;

/// Gradient norms below this leave the sequence unchanged.
pub const MIN_GRAD_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Independent uniform draw for every element.
    PerElement,
    /// One uniform offset shared by the whole sequence.
    PerSequence,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Weight of the adjacent-difference smoothness term.
    pub alpha: f64,
    /// Stage-1 step length, deg.
    pub beta1_step: f64,
    /// Stage-2 step length, deg.
    pub beta2_step: f64,
    pub n_batch: usize,
    pub n1: usize,
    pub n2: usize,
    /// Half-width of the stage-1 perturbation, deg.
    pub delta_u_batch: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub noise: NoiseMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            alpha: 30.0,
            beta1_step: 3.0,
            beta2_step: 0.5,
            n_batch: 10,
            n1: 10,
            n2: 20,
            delta_u_batch: 5.0,
            u_min: 0.0,
            u_max: 50.0,
            noise: NoiseMode::PerSequence,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let checks = [
            (self.beta2_step < self.beta1_step, "beta2_step must be below beta1_step"),
            (self.beta2_step > 0.0, "step sizes must be positive"),
            (self.u_min < self.u_max, "u_min must be below u_max"),
            (self.n_batch > 0 && self.n1 > 0 && self.n2 > 0, "iteration counts must be positive"),
            (self.alpha >= 0.0, "alpha must be non-negative"),
            (self.delta_u_batch >= 0.0, "delta_u_batch must be non-negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ControlError::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("invalid controller config: {0}")]
    Config(String),
    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("gradient has a non-finite entry")]
    NonFiniteGradient,
    #[error("no previous sequence to warm-start from")]
    NoPrevious,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), ControlError> {
    if expected == found {
        Ok(())
    } else {
        Err(ControlError::Length { what, expected, found })
    }
}

/// Shifts a flattened `N × input_dim` sequence one step earlier and repeats the last step.
pub fn warm_start(prev: &[f64], input_dim: usize) -> Result<Vec<f64>, ControlError> {
    if prev.is_empty() {
        return Err(ControlError::NoPrevious);
    }
    if input_dim == 0 || !prev.len().is_multiple_of(input_dim) {
        return Err(ControlError::Length {
            what: "previous sequence",
            expected: input_dim,
            found: prev.len(),
        });
    }
    let mut out = prev[input_dim..].to_vec();
    out.extend_from_slice(&prev[prev.len() - input_dim..]);
    Ok(out)
}

/// `n_batch` constant sequences, each at a level drawn uniformly from `[u_min, u_max]`.
pub fn cold_start_batch<R: Rng + ?Sized>(config: &ControllerConfig, len: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..config.n_batch)
        .map(|_| vec![rng.random_range(config.u_min..=config.u_max); len])
        .collect()
}

/// Mean squared difference between consecutive steps, over `(N - 1) × input_dim` gaps.
pub fn adjacent_error(u: &[f64], input_dim: usize) -> f64 {
    let gaps = u.len().saturating_sub(input_dim);
    if gaps == 0 {
        return 0.0;
    }
    (0..gaps).map(|i| (u[i + input_dim] - u[i]).powi(2)).sum::<f64>() / gaps as f64
}

/// `MSE(s_pred, s_target) + alpha · AdjacentError(u)`.
pub fn control_loss(s_pred: &[f64], s_target: &[f64], u: &[f64], alpha: f64, input_dim: usize) -> Result<f64, ControlError> {
    Ok(control_loss_grad(s_pred, s_target, u, alpha, input_dim)?.0)
}

/// Loss plus its gradients with respect to the predicted states and, through the
/// smoothness term only, to the inputs.
pub fn control_loss_grad(
    s_pred: &[f64],
    s_target: &[f64],
    u: &[f64],
    alpha: f64,
    input_dim: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>), ControlError> {
    check_len("target sequence", s_pred.len(), s_target.len())?;
    if s_pred.is_empty() {
        return Err(ControlError::Length {
            what: "predicted sequence",
            expected: 1,
            found: 0,
        });
    }
    let n = s_pred.len() as f64;
    let mut mse = 0.0;
    let ds: Vec<f64> = s_pred
        .iter()
        .zip(s_target)
        .map(|(p, t)| {
            let d = p - t;
            mse += d * d;
            2.0 * d / n
        })
        .collect();
    mse /= n;

    let mut du = vec![0.0; u.len()];
    let gaps = u.len().saturating_sub(input_dim);
    let mut adj = 0.0;
    if gaps > 0 {
        let m = gaps as f64;
        for i in 0..gaps {
            let d = u[i + input_dim] - u[i];
            adj += d * d;
            let g = alpha * 2.0 * d / m;
            du[i + input_dim] += g;
            du[i] -= g;
        }
        adj /= m;
    }
    Ok((mse + alpha * adj, ds, du))
}

/// `clamp(u - beta · g / |g|, u_min, u_max)`, or `u` unchanged when `|g|` is negligible.
pub fn gradient_step(u: &[f64], grad: &[f64], beta: f64, u_min: f64, u_max: f64) -> Result<Vec<f64>, ControlError> {
    check_len("gradient", u.len(), grad.len())?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(ControlError::NonFiniteGradient);
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm < MIN_GRAD_NORM {
        return Ok(u.to_vec());
    }
    Ok(u.iter()
        .zip(grad)
        .map(|(x, g)| (x - beta * g / norm).clamp(u_min, u_max))
        .collect())
}

/// Per-tick record of the optimization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// True when the tick started from random constant sequences.
    pub cold_start: bool,
    pub stage1_candidates: usize,
    /// `[round][candidate]` losses evaluated before each stage-1 step.
    pub stage1_losses: Vec<Vec<f64>>,
    /// Losses of the candidates after their last stage-1 step.
    pub stage1_final_losses: Vec<f64>,
    /// Candidate carried into stage 2.
    pub winner: usize,
    /// Losses evaluated before each stage-2 step.
    pub stage2_losses: Vec<f64>,
    /// Loss after the last stage-2 step.
    pub stage2_final_loss: f64,
    /// The unperturbed, clamped warm start (warm ticks only).
    pub warm_start: Option<Vec<f64>>,
    /// Its loss.
    pub warm_start_loss: Option<f64>,
    /// Forward passes followed by a backward pass.
    pub gradient_evaluations: usize,
    /// Forward passes used only to score a sequence.
    pub loss_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    /// Lowest-loss sequence evaluated during the tick.
    pub sequence: Vec<f64>,
    pub loss: f64,
    pub diagnostics: Diagnostics,
}

struct Scored {
    losses: Vec<f64>,
    grads: Option<Matrix>,
}

/// Best-so-far tracker; strict improvement only, so earlier candidates win ties.
struct Best {
    loss: f64,
    sequence: Vec<f64>,
}

impl Best {
    fn offer(&mut self, losses: &[f64], seqs: &[Vec<f64>]) {
        for (l, s) in losses.iter().zip(seqs) {
            if *l < self.loss {
                self.loss = *l;
                self.sequence.clone_from(s);
            }
        }
    }
}

fn score(
    model: &TrainedModel,
    init: &[f64],
    target: &[f64],
    seqs: &[Vec<f64>],
    alpha: f64,
    with_grad: bool,
) -> Result<Scored, ControlError> {
    let input_dim = model.config.input_dim;
    let u = Matrix::from_rows(seqs).expect("equal-length candidates");
    let pred = model.predict_batch(init, &u)?;
    let mut losses = Vec::with_capacity(seqs.len());
    let mut ds = Matrix::zeros(seqs.len(), pred.states.cols());
    let mut du_adj = Matrix::zeros(seqs.len(), u.cols());
    for (r, seq) in seqs.iter().enumerate() {
        let (loss, g_s, g_u) = control_loss_grad(pred.states.row(r), target, seq, alpha, input_dim)?;
        losses.push(loss);
        ds.row_mut(r).copy_from_slice(&g_s);
        du_adj.row_mut(r).copy_from_slice(&g_u);
    }
    let grads = if with_grad {
        let mut du = model.input_gradient(&pred, &ds)?;
        for (d, a) in du.as_mut_slice().iter_mut().zip(du_adj.as_slice()) {
            *d += a;
        }
        Some(du)
    } else {
        None
    };
    Ok(Scored { losses, grads })
}

/// Gradient of `control_loss(predict(u), target, u)` with respect to `u`, in physical units.
pub fn sequence_gradient(
    model: &TrainedModel,
    init: &[f64],
    target: &[f64],
    u: &[f64],
    alpha: f64,
) -> Result<(f64, Vec<f64>), ControlError> {
    let s = score(model, init, target, &[u.to_vec()], alpha, true)?;
    Ok((s.losses[0], s.grads.expect("requested").into_vec()))
}

/// Controller state carried between ticks.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub prev: Option<Vec<f64>>,
    pub rng: ChaCha8Rng,
}

impl ControllerState {
    pub fn new(seed: u64) -> Self {
        Self {
            prev: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Runs the two-stage optimization for one tick and returns the best sequence seen.
pub fn optimize(
    model: &TrainedModel,
    init: &[f64],
    target: &[f64],
    state: &mut ControllerState,
    config: &ControllerConfig,
) -> Result<Optimized, ControlError> {
    config.validate()?;
    let mc = &model.config;
    let len = mc.horizon * mc.input_dim;
    check_len("initial state", mc.init_dim, init.len())?;
    check_len("target sequence", mc.net_out_dim(), target.len())?;
    let clamp = |v: f64| v.clamp(config.u_min, config.u_max);

    let mut diag = Diagnostics::default();
    let mut candidates: Vec<Vec<f64>> = match &state.prev {
        Some(prev) => {
            check_len("previous sequence", len, prev.len())?;
            let base: Vec<f64> = warm_start(prev, mc.input_dim)?.into_iter().map(clamp).collect();
            let mut c = Vec::with_capacity(config.n_batch + 1);
            diag.warm_start = Some(base.clone());
            c.push(base.clone());
            for _ in 0..config.n_batch {
                let noisy: Vec<f64> = match config.noise {
                    NoiseMode::PerElement => base
                        .iter()
                        .map(|&u| clamp(u + state.rng.random_range(-config.delta_u_batch..=config.delta_u_batch)))
                        .collect(),
                    NoiseMode::PerSequence => {
                        let off = state.rng.random_range(-config.delta_u_batch..=config.delta_u_batch);
                        base.iter().map(|&u| clamp(u + off)).collect()
                    }
                };
                c.push(noisy);
            }
            c
        }
        None => {
            diag.cold_start = true;
            cold_start_batch(config, len, &mut state.rng)
        }
    };
    diag.stage1_candidates = candidates.len();

    let mut best = Best {
        loss: f64::INFINITY,
        sequence: candidates[0].clone(),
    };

    for _ in 0..config.n1 {
        let scored = score(model, init, target, &candidates, config.alpha, true)?;
        diag.gradient_evaluations += candidates.len();
        if diag.stage1_losses.is_empty() && !diag.cold_start {
            diag.warm_start_loss = Some(scored.losses[0]);
        }
        best.offer(&scored.losses, &candidates);
        let grads = scored.grads.expect("requested");
        for (r, c) in candidates.iter_mut().enumerate() {
            *c = gradient_step(c, grads.row(r), config.beta1_step, config.u_min, config.u_max)?;
        }
        diag.stage1_losses.push(scored.losses);
    }
    let after = score(model, init, target, &candidates, config.alpha, false)?;
    diag.loss_evaluations += candidates.len();
    best.offer(&after.losses, &candidates);
    diag.winner = argmin(&after.losses);
    diag.stage1_final_losses = after.losses;

    let mut seq = vec![candidates.swap_remove(diag.winner)];
    for _ in 0..config.n2 {
        let scored = score(model, init, target, &seq, config.alpha, true)?;
        diag.gradient_evaluations += 1;
        best.offer(&scored.losses, &seq);
        let grads = scored.grads.expect("requested");
        seq[0] = gradient_step(&seq[0], grads.row(0), config.beta2_step, config.u_min, config.u_max)?;
        diag.stage2_losses.push(scored.losses[0]);
    }
    let last = score(model, init, target, &seq, config.alpha, false)?;
    diag.loss_evaluations += 1;
    best.offer(&last.losses, &seq);
    diag.stage2_final_loss = last.losses[0];

    Ok(Optimized {
        sequence: best.sequence,
        loss: best.loss,
        diagnostics: diag,
    })
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

/// Outcome of one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// Pedal command to send now, deg.
    pub command: f64,
    pub optimized: Optimized,
}

/// The learned-model controller: configuration plus the state it carries between ticks.
#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    state: ControllerState,
}

impl Controller {
    pub fn new(config: ControllerConfig, seed: u64) -> Result<Self, ControlError> {
        config.validate()?;
        Ok(Self {
            config,
            state: ControllerState::new(seed),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    /// Tracks a constant target velocity over the whole horizon.
    pub fn control_step(&mut self, model: &TrainedModel, obs: &InitState, target_velocity: f64) -> Result<ControlOutput, ControlError> {
        let target = vec![target_velocity; model.config.net_out_dim()];
        self.control_step_with_target(model, obs, &target)
    }

    /// One tick against an arbitrary target state sequence.
    pub fn control_step_with_target(
        &mut self,
        model: &TrainedModel,
        obs: &InitState,
        target: &[f64],
    ) -> Result<ControlOutput, ControlError> {
        let init = obs.to_vec();
        let optimized = optimize(model, &init, target, &mut self.state, &self.config)?;
        let command = optimized.sequence[0];
        self.state.prev = Some(optimized.sequence.clone());
        Ok(ControlOutput { command, optimized })
    }
}
