use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ddcnet::harness::{self, Config, ControllerKind, HarnessError, Summary};
use ddcnet::model::{self, Trajectory};

const ENV_HELP: &str = "Environment:\n  DDCNET_SEED     overrides [experiment] seed\n  DDCNET_OUT_DIR  overrides [experiment] out_dir\nCommand-line flags take precedence over both.";

#[derive(Parser)]
#[command(name = "ddcnet", version, about = "Learned-dynamics pedal control: collect, train, run, plot, compare", after_help = ENV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Drive the random policy on the simulated plant and save the trajectory CSV.
    Collect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        duration_s: Option<f64>,
        /// Single collection target, replacing the configured schedule.
        #[arg(long)]
        target_kmh: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the forward model on a trajectory CSV.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run a closed-loop tracking experiment and write its log and summary.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        target_kmh: Option<f64>,
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Render a run log as a two-panel SVG.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate run summaries of one target and check the controller ranking.
    Compare {
        /// Summary JSON files written by `run`.
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        /// Exit nonzero when the ranking is violated.
        #[arg(long)]
        strict: bool,
    },
    /// Re-derive the PID gains on the configured plant and print them as TOML.
    Tune {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<Config, HarnessError> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply_env()?;
    if let Some(s) = common.seed {
        cfg.experiment.seed = s;
    }
    if let Some(d) = &common.out_dir {
        cfg.experiment.out_dir = d.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Collect {
            common,
            duration_s,
            target_kmh,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = duration_s {
                cfg.collect.duration_s = d;
            }
            if let Some(t) = target_kmh {
                cfg.collect.targets_kmh = vec![t];
            }
            if let Some(p) = out {
                cfg.experiment.trajectory_path = Some(p);
            }
            cfg.validate()?;
            let traj = harness::collect_data(&cfg)?;
            let path = cfg.trajectory_path();
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
                    path: dir.display().to_string(),
                    msg: e.to_string(),
                })?;
            }
            traj.save_csv(&path)?;
            println!("wrote {} rows to {}", traj.len(), path.display());
        }
        Command::Train {
            common,
            trajectory,
            model: model_path,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(p) = trajectory {
                cfg.experiment.trajectory_path = Some(p);
            }
            if let Some(p) = model_path {
                cfg.experiment.model_path = Some(p);
            }
            let traj = Trajectory::load_csv(&cfg.trajectory_path())?;
            let (m, report) = harness::train_model(&cfg, &traj)?;
            let path = cfg.model_path();
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
                    path: dir.display().to_string(),
                    msg: e.to_string(),
                })?;
            }
            model::save(&m, &path)?;
            println!(
                "trained {} epochs: test loss {:.5} -> {:.5} (best epoch {}), wrote {}",
                report.test_loss.len(),
                report.initial_test_loss,
                m.meta.best_test_loss,
                report.best_epoch + 1,
                path.display()
            );
        }
        Command::Run {
            common,
            controller,
            target_kmh,
            duration_s,
            model: model_path,
            log,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(c) = controller {
                cfg.experiment.controller = c.parse::<ControllerKind>()?;
            }
            if let Some(t) = target_kmh {
                cfg.experiment.target_kmh = t;
            }
            if let Some(d) = duration_s {
                cfg.experiment.duration_s = d;
            }
            if let Some(p) = model_path {
                cfg.experiment.model_path = Some(p);
            }
            if let Some(p) = log {
                cfg.experiment.log_path = Some(p);
            }
            cfg.validate()?;
            let summary = harness::run_and_write(&cfg)?;
            println!("{}", summary.to_json());
        }
        Command::Plot { log, out } => {
            let out = out.unwrap_or_else(|| log.with_extension("svg"));
            harness::emit_plot(&log, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Compare { summaries, strict } => {
            let loaded = summaries.iter().map(|p| Summary::load(p)).collect::<Result<Vec<_>, _>>()?;
            let cmp = harness::compare(&loaded)?;
            print!("{}", cmp.table);
            if strict && !cmp.violations.is_empty() {
                return Err(HarnessError::Compare(format!("{} ordering violation(s)", cmp.violations.len())));
            }
        }
        Command::Tune { common } => {
            let cfg = load_config(&common)?;
            let (p, dt, lo, hi) = (&cfg.plant, cfg.model.period, cfg.controller.u_min, cfg.controller.u_max);
            let g1 = harness::tune_pid1(p, dt, lo, hi);
            let g2 = harness::tune_pid2(p, dt, lo, hi, cfg.pid2.t_delay);
            println!("[pid1]\nkp = {}\nki = {}\nkd = {}\n", g1.kp, g1.ki, g1.kd);
            println!("[pid2]\nkp = {}\nkd = {}\nt_delay = {}", g2.kp, g2.kd, g2.t_delay);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} msg={:?}", e.kind(), msg);
            ExitCode::FAILURE
        }
    }
}
