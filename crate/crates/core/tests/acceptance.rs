//! Acceptance suite. Runs without the libtest harness so each criterion prints
//! exactly one PASS/FAIL line; exits nonzero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ddcnet::controller::{Controller, ControllerConfig};
use ddcnet::harness::{self, Config, ControllerKind, RunLog, Summary};
use ddcnet::model::{self, InitState, TrainedModel};
use ddcnet::netcore::{Layer, Matrix, Mode, Network};
use ddcnet::plant::Plant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

// ---------------------------------------------------------------- criterion 1

const FD_STEP: f64 = 1e-4;
const FD_REL: f64 = 1e-4;
const FD_ABS: f64 = 1e-8;
/// Parameter entries checked per pedal network; inputs are always checked in full.
const PEDAL_PARAM_BUDGET: usize = 600;

fn fd_close(a: f64, b: f64) -> bool {
    let d = (a - b).abs();
    d <= FD_ABS || d <= FD_REL * a.abs().max(b.abs())
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

fn jitter(net: &mut Network, rng: &mut ChaCha8Rng) {
    for p in net.params_mut() {
        for v in p.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    let x = rand_matrix(rng, 8, net.in_dim(), 1.5);
    net.forward(&x, Mode::Train).unwrap();
}

/// Input entries of `net` against central differences in both modes, and parameter
/// entries in train mode: all of them, or about `param_budget` spread over every tensor.
fn gradcheck(net: &Network, rng: &mut ChaCha8Rng, batch: usize, param_budget: Option<usize>) -> Result<usize, String> {
    let x = rand_matrix(rng, batch, net.in_dim(), 1.0);
    let w = rand_matrix(rng, batch, net.out_dim(), 1.0);
    let mut checked = 0;

    let fwd = net.forward_train_frozen(&x).unwrap();
    let grads = net.backward_params(&fwd, &w).unwrap();
    let total: usize = grads.tensors.iter().map(Vec::len).sum();
    let mut probe = net.clone();
    for (t, g) in grads.tensors.iter().enumerate() {
        let picks: Vec<usize> = match param_budget {
            Some(b) if b < total => {
                let k = (g.len() * b).div_ceil(total).clamp(1, g.len());
                rand::seq::index::sample(rng, g.len(), k).into_vec()
            }
            _ => (0..g.len()).collect(),
        };
        for k in picks {
            let orig = probe.params()[t][k];
            probe.params_mut()[t][k] = orig + FD_STEP;
            let lp = dot(&probe.forward_train_frozen(&x).unwrap().output, &w);
            probe.params_mut()[t][k] = orig - FD_STEP;
            let lm = dot(&probe.forward_train_frozen(&x).unwrap().output, &w);
            probe.params_mut()[t][k] = orig;
            let fd = (lp - lm) / (2.0 * FD_STEP);
            if !fd_close(g[k], fd) {
                return Err(format!("param tensor {t}[{k}]: {} vs {fd}", g[k]));
            }
            checked += 1;
        }
    }

    for mode in [Mode::Train, Mode::Infer] {
        let eval = |x: &Matrix| match mode {
            Mode::Train => dot(&net.forward_train_frozen(x).unwrap().output, &w),
            Mode::Infer => dot(&net.infer(x).unwrap().output, &w),
        };
        let fwd = match mode {
            Mode::Train => net.forward_train_frozen(&x).unwrap(),
            Mode::Infer => net.infer(&x).unwrap(),
        };
        let dx = net.backward_input(&fwd, &w).unwrap();
        for k in 0..x.as_slice().len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.as_mut_slice()[k] += FD_STEP;
            m.as_mut_slice()[k] -= FD_STEP;
            let fd = (eval(&p) - eval(&m)) / (2.0 * FD_STEP);
            if !fd_close(dx.as_slice()[k], fd) {
                return Err(format!("input {k} ({mode:?}): {} vs {fd}", dx.as_slice()[k]));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let in_dim = rng.random_range(1..=5);
        let hidden: Vec<usize> = (0..rng.random_range(0..=3)).map(|_| rng.random_range(1..=5)).collect();
        let out_dim = rng.random_range(1..=5);
        let mut net = Network::ddc(in_dim, &hidden, out_dim, seed).unwrap();
        jitter(&mut net, &mut rng);
        match gradcheck(&net, &mut rng, 3, None) {
            Ok(n) => checked += n,
            Err(e) => return Outcome::new(false, format!("small net {seed}: {e}")),
        }
    }
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let mut net = Network::ddc(34, &[34, 80, 50, 20], 30, 500 + seed).unwrap();
        jitter(&mut net, &mut rng);
        match gradcheck(&net, &mut rng, 8, Some(PEDAL_PARAM_BUDGET)) {
            Ok(n) => checked += n,
            Err(e) => return Outcome::new(false, format!("pedal net {seed}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        secs < 30.0,
        format!("100 networks, {checked} gradient entries within rel 1e-4 (pedal nets: {PEDAL_PARAM_BUDGET} sampled parameters each, all inputs), {secs:.1} s"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2(m: &TrainedModel) -> Outcome {
    let net = &m.network;
    let layers = net.layers();
    let dense: Vec<(usize, usize)> = layers
        .iter()
        .filter_map(|l| match l {
            Layer::Dense(d) => Some((d.in_dim(), d.out_dim())),
            _ => None,
        })
        .collect();
    let mut structural = layers.len() == 3 * dense.len() - 2;
    for (i, chunk) in layers.chunks(3).enumerate() {
        let tail_ok = if i + 1 < dense.len() {
            chunk.len() == 3
                && matches!(chunk[0], Layer::Dense(_))
                && matches!(chunk[1], Layer::BatchNorm(_))
                && matches!(chunk[2], Layer::Sigmoid { .. })
        } else {
            chunk.len() == 1 && matches!(chunk[0], Layer::Dense(_))
        };
        structural &= tail_ok;
    }
    let io = net.in_dim() == 34 && net.out_dim() == 30 && dense.first().map(|d| d.0) == Some(34);
    let out = m.predict(&[0.0; 4], &[10.0; 30]).map(|p| p.len() == 30).unwrap_or(false);
    Outcome::new(
        dense.len() == 5 && structural && io && out,
        format!("{} dense layers {:?}, {} layers total", dense.len(), dense, layers.len()),
    )
}

// ---------------------------------------------------------------- pipeline

struct Pipeline {
    model: TrainedModel,
    summaries: Vec<Summary>,
    proposed_step_ms: Vec<f64>,
    seconds: f64,
    rows: usize,
}

const CONTROLLERS: [ControllerKind; 3] = [ControllerKind::Pid1, ControllerKind::Pid2, ControllerKind::Proposed];
const TARGETS: [f64; 2] = [5.0, 10.0];

fn pipeline(dir: &Path) -> Result<Pipeline, String> {
    let start = Instant::now();
    let mut cfg = Config::default();
    cfg.experiment.out_dir = dir.to_path_buf();
    let traj = harness::collect_data(&cfg).map_err(|e| e.to_string())?;
    traj.save_csv(&cfg.trajectory_path()).map_err(|e| e.to_string())?;
    let (m, _) = harness::train_model(&cfg, &traj).map_err(|e| e.to_string())?;
    model::save(&m, &cfg.model_path()).map_err(|e| e.to_string())?;
    let mut summaries = Vec::new();
    let mut proposed_step_ms = Vec::new();
    for target in TARGETS {
        for kind in CONTROLLERS {
            let mut c = cfg.clone();
            c.experiment.controller = kind;
            c.experiment.target_kmh = target;
            summaries.push(harness::run_and_write(&c).map_err(|e| e.to_string())?);
            if kind == ControllerKind::Proposed {
                let t = std::fs::read_to_string(harness::timing_path(&c.log_path())).map_err(|e| e.to_string())?;
                proposed_step_ms.extend(t.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()));
            }
        }
    }
    let model = model::load(&cfg.model_path()).map_err(|e| e.to_string())?;
    Ok(Pipeline {
        model,
        summaries,
        proposed_step_ms,
        seconds: start.elapsed().as_secs_f64(),
        rows: traj.len(),
    })
}

fn headline(p: &Pipeline, kind: ControllerKind, target: f64) -> Option<f64> {
    p.summaries
        .iter()
        .find(|s| s.controller == kind.name() && s.target_kmh == target)
        .and_then(|s| s.headline().1)
}

fn fmt_t(t: Option<f64>) -> String {
    t.map_or("never".into(), |x| format!("{x:.1}"))
}

fn criterion_3(p: &Pipeline) -> Outcome {
    let mut ok = p.rows == 300 && p.seconds < 300.0;
    let mut parts = Vec::new();
    for target in TARGETS {
        let [t1, t2, tp] = CONTROLLERS.map(|k| headline(p, k, target).unwrap_or(f64::INFINITY));
        ok &= tp < t2 && t2 < t1;
        let a = harness::headline_percent(target);
        parts.push(format!(
            "{target} km/h T_conv({a}%): proposed {} < pid2 {} < pid1 {}",
            fmt_t(headline(p, ControllerKind::Proposed, target)),
            fmt_t(headline(p, ControllerKind::Pid2, target)),
            fmt_t(headline(p, ControllerKind::Pid1, target))
        ));
    }
    Outcome::new(ok, format!("{}; {} rows; {:.1} s", parts.join("; "), p.rows, p.seconds))
}

// ---------------------------------------------------------------- criterion 4

/// RMS of the open-loop error a perfect model would still make: accumulated
/// velocity noise through the linear drag, averaged over the horizon.
fn noise_floor(cfg: &Config) -> f64 {
    let phi = 1.0 - cfg.plant.drag * cfg.model.period;
    let n = cfg.model.horizon;
    let mut var_k = 0.0;
    let mut acc = 0.0;
    for k in 0..n {
        var_k += cfg.plant.sigma_v.powi(2) * phi.powi(2 * k as i32);
        acc += var_k;
    }
    (acc / n as f64).sqrt()
}

fn criterion_4(m: &TrainedModel) -> Outcome {
    let mut cfg = Config::default();
    let floor = noise_floor(&cfg);
    cfg.experiment.seed += 1000;
    let fresh = harness::collect_data(&cfg).unwrap();
    let windows = model::window_trajectory(&fresh, cfg.model.horizon).unwrap();
    let (mut se, mut n) = (0.0, 0usize);
    for w in &windows {
        let p = m.predict(&w.init, &w.inputs).unwrap();
        se += p.iter().zip(&w.states).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        n += p.len();
    }
    let rmse = (se / n as f64).sqrt();
    Outcome::new(
        floor < 1.0 && rmse < 1.0,
        format!("open-loop RMSE {rmse:.3} km/h over {} held-out windows (noise floor {floor:.3})", windows.len()),
    )
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5(m: &TrainedModel) -> Outcome {
    let cfg = Config::default();
    let dt = cfg.model.period;
    let mut plant = Plant::reset(cfg.plant.clone(), 77).unwrap();
    let mut ctl = Controller::new(ControllerConfig::default(), 78).unwrap();
    let (mut held, mut held_prev) = (0.0, 0.0);
    let mut bad = Vec::new();
    let mut warm = 0;
    for tick in 0..1000 {
        let target = if (tick / 250) % 2 == 0 { 5.0 } else { 10.0 };
        let o = plant.observe();
        let init = InitState {
            velocity: o.v,
            acceleration: o.a,
            pedal_angle: held,
            pedal_rate: (held - held_prev) / dt,
        };
        let out = match ctl.control_step(m, &init, target) {
            Ok(o) => o,
            Err(e) => return Outcome::new(false, format!("tick {tick}: {e}")),
        };
        let d = &out.optimized.diagnostics;
        if !(0.0..=50.0).contains(&out.command) {
            bad.push(format!("tick {tick}: command {}", out.command));
        }
        if d.stage1_losses.len() != 10 || d.stage2_losses.len() != 20 {
            bad.push(format!("tick {tick}: rounds {}/{}", d.stage1_losses.len(), d.stage2_losses.len()));
        }
        if let Some(ws) = d.warm_start_loss {
            warm += 1;
            if d.stage1_candidates != 11 || d.gradient_evaluations != 130 {
                bad.push(format!("tick {tick}: {} candidates", d.stage1_candidates));
            }
            if out.optimized.loss > ws {
                bad.push(format!("tick {tick}: loss {} above warm start {ws}", out.optimized.loss));
            }
        }
        plant.step(out.command, dt).unwrap();
        held_prev = held;
        held = out.command;
    }
    Outcome::new(
        bad.is_empty() && warm == 999,
        if bad.is_empty() {
            format!("1000 ticks ({warm} warm): best-so-far held, commands in [0, 50], 11 candidates, 10/20 rounds")
        } else {
            format!("{} violations, first: {}", bad.len(), bad[0])
        },
    )
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6(p: &Pipeline) -> Outcome {
    let n = p.proposed_step_ms.len();
    let mean = p.proposed_step_ms.iter().sum::<f64>() / n.max(1) as f64;
    let max = p.proposed_step_ms.iter().copied().fold(0.0, f64::max);
    Outcome::new(
        n == 600 && mean < 200.0,
        format!("mean {mean:.2} ms, max {max:.2} ms per tick over {n} proposed ticks"),
    )
}

// ---------------------------------------------------------------- criterion 7

fn brute_force_t_conv(t: &[f64], v: &[f64], target: f64, a: f64) -> Option<f64> {
    let tol = a / 100.0 * target.abs();
    (0..t.len()).find(|&s| v[s..].iter().all(|x| (x - target).abs() <= tol)).map(|s| t[s])
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut never = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=120);
        let target: f64 = if rng.random_bool(0.5) { 5.0 } else { rng.random_range(0.5..15.0) };
        let a = if rng.random_bool(0.5) { 20.0 } else { 10.0 };
        let t: Vec<f64> = (0..n).map(|k| harness::tick_time(k, 0.2)).collect();
        let mut x = rng.random_range(0.0..2.0 * target);
        let v: Vec<f64> = (0..n)
            .map(|_| {
                x += (target - x) * rng.random_range(0.0..0.3) + rng.random_range(-0.1..0.1) * target;
                x
            })
            .collect();
        let fast = harness::t_conv(&t, &v, target, a).unwrap();
        let slow = brute_force_t_conv(&t, &v, target, a);
        if fast != slow {
            return Outcome::new(false, format!("case {case}: {fast:?} vs brute force {slow:?}"));
        }
        never += usize::from(fast.is_none());
    }
    Outcome::new(true, format!("1000 series agree exactly ({never} never converge)"))
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8(a: &Path, b: &Path, second: &Result<Pipeline, String>) -> Outcome {
    if let Err(e) = second {
        return Outcome::new(false, format!("second pipeline failed: {e}"));
    }
    let mut files: Vec<String> = vec!["trajectory.csv".into(), "model.ddcn".into()];
    for target in TARGETS {
        for kind in CONTROLLERS {
            files.push(format!("run_{kind}_{target}kmh.csv"));
        }
    }
    for f in &files {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => return Outcome::new(false, format!("{f} differs between repeated runs")),
        }
    }
    Outcome::new(true, format!("{} files byte-identical across two runs", files.len()))
}

// ---------------------------------------------------------------- criterion 9

fn total_variation(u: &[f64]) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

fn criterion_9(m: &TrainedModel) -> Outcome {
    let tv = |alpha: f64| {
        let mut cfg = Config::default();
        cfg.experiment.controller = ControllerKind::Proposed;
        cfg.controller.alpha = alpha;
        let log: RunLog = harness::run_experiment(&cfg, Some(m)).unwrap();
        total_variation(&log.commands())
    };
    let (smooth, rough) = (tv(30.0), tv(0.0));
    Outcome::new(
        smooth < rough,
        format!("command total variation {smooth:.1} deg with alpha 30 vs {rough:.1} deg with alpha 0"),
    )
}

fn main() -> ExitCode {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let first = pipeline(dir_a.path());
    let second = pipeline(dir_b.path());

    let mut results: Vec<(u8, &str, Outcome)> = vec![(1, "gradient correctness", criterion_1())];
    match &first {
        Ok(p) => {
            results.push((2, "shape and architecture", criterion_2(&p.model)));
            results.push((3, "pipeline ordering", criterion_3(p)));
            results.push((4, "model quality", criterion_4(&p.model)));
            results.push((5, "optimizer contract", criterion_5(&p.model)));
            results.push((6, "real-time budget", criterion_6(p)));
        }
        Err(e) => {
            for (id, name) in [(2, "shape and architecture"), (3, "pipeline ordering"), (4, "model quality"), (5, "optimizer contract"), (6, "real-time budget")] {
                results.push((id, name, Outcome::new(false, format!("pipeline failed: {e}"))));
            }
        }
    }
    results.push((7, "t_conv oracle", criterion_7()));
    results.push((8, "determinism", criterion_8(dir_a.path(), dir_b.path(), &second)));
    match &first {
        Ok(p) => results.push((9, "smoothness term", criterion_9(&p.model))),
        Err(e) => results.push((9, "smoothness term", Outcome::new(false, format!("pipeline failed: {e}")))),
    }

    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id} [{name}]: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
