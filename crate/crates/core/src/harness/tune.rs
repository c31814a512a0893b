//! Reproducible PID tuning on the noise-free plant.
//!
//! Procedure, on a step from rest to the tuning target:
//! 1. proportional only: raise `kp` in steps of 0.25 until the peak overshoots 20 %;
//! 2. PID1 only: raise `ki` in steps of 0.05 until the mean error over the last 10 s
//!    is under 2 % of the target;
//! 3. pick `kd` in `[0, 5]` (step 0.1) minimizing the integrated absolute error.
//!
//! PID2 integrates its output, so it skips step 2; `t_delay` stays at its configured value.

use crate::baselines::{Pid1, Pid1Gains, Pid2, Pid2Gains};
use crate::plant::{Plant, PlantParams};

pub const TUNE_TARGET_KMH: f64 = 5.0;
const TUNE_STEPS: usize = 300;
const KP_STEP: f64 = 0.25;
const KP_MAX: f64 = 200.0;
const KI_STEP: f64 = 0.05;
const KI_MAX: f64 = 50.0;
const KD_GRID: usize = 50;
const KD_STEP: f64 = 0.1;
const OVERSHOOT: f64 = 1.2;
const SETTLE_TOL: f64 = 0.02;
const TAIL: usize = 50;

/// Noise-free closed-loop velocity trace for a step to `target`.
pub fn step_response(params: &PlantParams, period: f64, mut ctl: impl FnMut(f64) -> f64) -> Vec<f64> {
    let quiet = PlantParams {
        sigma_v: 0.0,
        ..params.clone()
    };
    let mut plant = Plant::reset(quiet, 0).expect("validated plant");
    (0..TUNE_STEPS)
        .map(|_| {
            let v = plant.observe().v;
            plant.step(ctl(v), period).expect("controller output is clamped");
            v
        })
        .collect()
}

fn peak(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn tail_error(v: &[f64], target: f64) -> f64 {
    let tail = &v[v.len() - TAIL..];
    (tail.iter().sum::<f64>() / TAIL as f64 - target).abs()
}

fn iae(v: &[f64], target: f64, period: f64) -> f64 {
    v.iter().map(|x| (x - target).abs()).sum::<f64>() * period
}

fn first_kp(mut overshoots: impl FnMut(f64) -> bool) -> f64 {
    let mut kp = KP_STEP;
    while kp < KP_MAX && !overshoots(kp) {
        kp += KP_STEP;
    }
    kp
}

fn best_kd(mut cost: impl FnMut(f64) -> f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=KD_GRID {
        let kd = i as f64 * KD_STEP;
        let c = cost(kd);
        if c < best.0 {
            best = (c, kd);
        }
    }
    best.1
}

pub fn tune_pid1(params: &PlantParams, period: f64, u_min: f64, u_max: f64) -> Pid1Gains {
    let t = TUNE_TARGET_KMH;
    let run = |g: Pid1Gains| {
        let mut c = Pid1::new(g, period, u_min, u_max);
        step_response(params, period, move |v| c.step(v, t))
    };
    let kp = first_kp(|kp| peak(&run(Pid1Gains { kp, ki: 0.0, kd: 0.0 })) >= OVERSHOOT * t);
    let mut ki = KI_STEP;
    while ki < KI_MAX && tail_error(&run(Pid1Gains { kp, ki, kd: 0.0 }), t) > SETTLE_TOL * t {
        ki += KI_STEP;
    }
    let kd = best_kd(|kd| iae(&run(Pid1Gains { kp, ki, kd }), t, period));
    Pid1Gains { kp, ki, kd }
}

pub fn tune_pid2(params: &PlantParams, period: f64, u_min: f64, u_max: f64, t_delay: f64) -> Pid2Gains {
    let t = TUNE_TARGET_KMH;
    let run = |g: Pid2Gains| {
        let mut c = Pid2::new(g, period, u_min, u_max);
        step_response(params, period, move |v| c.step(v, t))
    };
    let kp = first_kp(|kp| peak(&run(Pid2Gains { kp, kd: 0.0, t_delay })) >= OVERSHOOT * t);
    let kd = best_kd(|kd| iae(&run(Pid2Gains { kp, kd, t_delay }), t, period));
    Pid2Gains { kp, kd, t_delay }
}
