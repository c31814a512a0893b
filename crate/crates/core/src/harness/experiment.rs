use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Config, ControllerKind};
use super::metrics::{headline_percent, t_conv};
use super::HarnessError;
use crate::baselines::{Pid1, Pid2, RandomPolicy};
use crate::controller::Controller;
use crate::model::{self, InitState, Trajectory, TrajectoryRow, TrainReport, TrainedModel};
use crate::plant::Plant;

pub const LOG_HEADER: &str = "time_s,u_cmd_deg,theta_deg,v_kmh,v_target_kmh,loss";
pub const TIMING_HEADER: &str = "time_s,step_compute_ms";

/// One control tick: the state observed at `time_s` and the command issued then.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub time_s: f64,
    pub u_cmd_deg: f64,
    pub theta_deg: f64,
    pub v_kmh: f64,
    pub v_target_kmh: f64,
    /// Optimized loss, proposed controller only.
    pub loss: Option<f64>,
}

/// Closed-loop log. Compute times are kept apart from the rows so the main CSV is
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    pub step_ms: Vec<f64>,
}

impl RunLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{LOG_HEADER}")?;
        for r in &self.rows {
            write!(w, "{:.3},{},{},{},{},", r.time_s, r.u_cmd_deg, r.theta_deg, r.v_kmh, r.v_target_kmh)?;
            match r.loss {
                Some(l) => writeln!(w, "{l}")?,
                None => writeln!(w)?,
            }
        }
        Ok(())
    }

    pub fn write_timing<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TIMING_HEADER}")?;
        for (r, ms) in self.rows.iter().zip(&self.step_ms) {
            writeln!(w, "{:.3},{ms:.4}", r.time_s)?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, HarnessError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = reader.headers().map_err(|e| HarnessError::Log(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>().join(",") != LOG_HEADER {
            return Err(HarnessError::Log(format!("expected header {LOG_HEADER}")));
        }
        let mut rows = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| HarnessError::Log(format!("row {}: {e}", k + 1)))?;
            let num = |i: usize| -> Result<f64, HarnessError> {
                let v: f64 = rec[i]
                    .trim()
                    .parse()
                    .map_err(|_| HarnessError::Log(format!("row {}: column {} is not a number", k + 1, i + 1)))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(HarnessError::Log(format!("row {}: column {} is not finite", k + 1, i + 1)))
                }
            };
            let loss = if rec[5].trim().is_empty() { None } else { Some(num(5)?) };
            rows.push(LogRow {
                time_s: num(0)?,
                u_cmd_deg: num(1)?,
                theta_deg: num(2)?,
                v_kmh: num(3)?,
                v_target_kmh: num(4)?,
                loss,
            });
        }
        Ok(Self { rows, step_ms: Vec::new() })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let f = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time_s).collect()
    }

    pub fn velocities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.v_kmh).collect()
    }

    pub fn commands(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.u_cmd_deg).collect()
    }
}

/// Per-run figures of merit. `None` convergence times mean the run never settled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub controller: String,
    pub target_kmh: f64,
    pub duration_s: f64,
    pub t_conv_20_s: Option<f64>,
    pub t_conv_10_s: Option<f64>,
    pub final_error_kmh: f64,
    pub mean_step_ms: f64,
    pub max_step_ms: f64,
}

impl Summary {
    pub fn from_log(controller: ControllerKind, target_kmh: f64, duration_s: f64, log: &RunLog) -> Result<Self, HarnessError> {
        let (t, v) = (log.times(), log.velocities());
        let last = *v.last().ok_or_else(|| HarnessError::Log("empty run".into()))?;
        let n = log.step_ms.len().max(1) as f64;
        Ok(Self {
            controller: controller.name().to_string(),
            target_kmh,
            duration_s,
            t_conv_20_s: t_conv(&t, &v, target_kmh, 20.0)?,
            t_conv_10_s: t_conv(&t, &v, target_kmh, 10.0)?,
            final_error_kmh: (last - target_kmh).abs(),
            mean_step_ms: log.step_ms.iter().sum::<f64>() / n,
            max_step_ms: log.step_ms.iter().cloned().fold(0.0, f64::max),
        })
    }

    /// Headline band and convergence time for this target.
    pub fn headline(&self) -> (f64, Option<f64>) {
        let a = headline_percent(self.target_kmh);
        (a, if a == 10.0 { self.t_conv_10_s } else { self.t_conv_20_s })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Summary(format!("{}: {e}", path.display())))
    }
}

/// Drives the random policy on a fresh plant and records the trajectory.
///
/// Row 0 is the plant at rest; row `k` carries the command issued at tick `k - 1`
/// and the velocity it produced.
pub fn collect_data(cfg: &Config) -> Result<Trajectory, HarnessError> {
    let dt = cfg.model.period;
    let steps = cfg.steps(cfg.collect.duration_s);
    let seed = cfg.seed_collect();
    let mut plant = Plant::reset(cfg.plant.clone(), seed)?;
    let mut policy = RandomPolicy::seeded(cfg.random.clone(), cfg.controller.u_min, cfg.controller.u_max, seed ^ 0x5eed);
    let mut rows = Vec::with_capacity(steps);
    rows.push(TrajectoryRow {
        time_s: 0.0,
        u_deg: 0.0,
        v_kmh: 0.0,
    });
    for k in 1..steps {
        let v = plant.observe().v;
        let u = policy.step(v, cfg.collect.target_at(k, steps));
        let obs = plant.step(u, dt)?;
        rows.push(TrajectoryRow {
            time_s: tick_time(k, dt),
            u_deg: u,
            v_kmh: obs.v,
        });
    }
    Ok(Trajectory::new(dt, rows)?)
}

pub fn train_model(cfg: &Config, traj: &Trajectory) -> Result<(TrainedModel, TrainReport), HarnessError> {
    traj.check_bounds(cfg.model.u_min, cfg.model.u_max)?;
    let samples = model::window_trajectory(traj, cfg.model.horizon)?;
    Ok(model::train(&samples, &cfg.model, &cfg.train.to_train_config(cfg.seed_train()))?)
}

enum Active<'m> {
    Pid1(Pid1),
    Pid2(Pid2),
    Random(RandomPolicy),
    Proposed(Box<Controller>, &'m TrainedModel),
}

/// Closed loop at the control period: observe, compute, command, step the plant.
pub fn run_experiment(cfg: &Config, model: Option<&TrainedModel>) -> Result<RunLog, HarnessError> {
    let e = &cfg.experiment;
    let dt = cfg.model.period;
    let (lo, hi) = (cfg.controller.u_min, cfg.controller.u_max);
    let mut active = match e.controller {
        ControllerKind::Pid1 => Active::Pid1(Pid1::new(cfg.pid1.clone(), dt, lo, hi)),
        ControllerKind::Pid2 => Active::Pid2(Pid2::new(cfg.pid2.clone(), dt, lo, hi)),
        ControllerKind::Random => Active::Random(RandomPolicy::seeded(cfg.random.clone(), lo, hi, cfg.seed_controller())),
        ControllerKind::Proposed => {
            let m = model.ok_or(HarnessError::MissingModel)?;
            if m.config.period != dt {
                return Err(HarnessError::Config(format!(
                    "model period {} differs from control period {dt}",
                    m.config.period
                )));
            }
            Active::Proposed(Box::new(Controller::new(cfg.controller.clone(), cfg.seed_controller())?), m)
        }
    };

    let steps = cfg.steps(e.duration_s);
    let mut plant = Plant::reset(cfg.plant.clone(), cfg.seed_plant())?;
    let mut log = RunLog {
        rows: Vec::with_capacity(steps),
        step_ms: Vec::with_capacity(steps),
    };
    // pedal state seen by the model is the held command, as in the training data
    let (mut held, mut held_prev) = (0.0, 0.0);
    for k in 0..steps {
        let obs = plant.observe();
        let start = Instant::now();
        let (u, loss) = match &mut active {
            Active::Pid1(c) => (c.step(obs.v, e.target_kmh), None),
            Active::Pid2(c) => (c.step(obs.v, e.target_kmh), None),
            Active::Random(c) => (c.step(obs.v, e.target_kmh), None),
            Active::Proposed(c, m) => {
                let init = InitState {
                    velocity: obs.v,
                    acceleration: obs.a,
                    pedal_angle: held,
                    pedal_rate: if k == 0 { 0.0 } else { (held - held_prev) / dt },
                };
                let out = c.control_step(m, &init, e.target_kmh)?;
                (out.command, Some(out.optimized.loss))
            }
        };
        log.step_ms.push(start.elapsed().as_secs_f64() * 1e3);
        log.rows.push(LogRow {
            time_s: tick_time(k, dt),
            u_cmd_deg: u,
            theta_deg: obs.theta,
            v_kmh: obs.v,
            v_target_kmh: e.target_kmh,
            loss,
        });
        plant.step(u, dt)?;
        held_prev = held;
        held = u;
    }
    Ok(log)
}

/// Runs the configured experiment and writes the log, its timing sidecar and the summary.
pub fn run_and_write(cfg: &Config) -> Result<Summary, HarnessError> {
    let model = match cfg.experiment.controller {
        ControllerKind::Proposed => {
            let path = cfg.model_path();
            if !path.exists() {
                return Err(HarnessError::ModelFile(path.display().to_string()));
            }
            Some(model::load(&path)?)
        }
        _ => None,
    };
    let log = run_experiment(cfg, model.as_ref())?;
    let summary = Summary::from_log(cfg.experiment.controller, cfg.experiment.target_kmh, cfg.experiment.duration_s, &log)?;
    let path = cfg.log_path();
    write_file(&path, |w| log.write_csv(w))?;
    write_file(&timing_path(&path), |w| log.write_timing(w))?;
    write_file(&cfg.summary_path(), |w| w.write_all(summary.to_json().as_bytes()))?;
    Ok(summary)
}

/// Tick time rounded to the millisecond resolution the CSV files carry.
pub fn tick_time(k: usize, dt: f64) -> f64 {
    (k as f64 * dt * 1e3).round() / 1e3
}

/// `<log>.timing.csv` next to the log.
pub fn timing_path(log: &Path) -> std::path::PathBuf {
    log.with_extension("timing.csv")
}

pub(crate) fn write_file<F>(path: &Path, body: F) -> Result<(), HarnessError>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}
