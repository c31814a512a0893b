//! Simulated pedal actuator and vehicle on free rollers.
//!
//! Commanded pedal angle → command delay → first-order actuator lag → deadzone
//! throttle → longitudinal velocity with linear drag and rolling resistance, stepped
//! with explicit Euler at the control period.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// Actuator time constant, s.
    pub tau_act: f64,
    /// Pedal travel with no throttle response, deg.
    pub theta_dead: f64,
    /// Full pedal travel, deg.
    pub theta_max: f64,
    /// Acceleration at full throttle, km/h per s.
    pub drive_gain: f64,
    /// Linear drag, 1/s.
    pub drag: f64,
    /// Rolling resistance, km/h per s.
    pub rolling: f64,
    /// Standard deviation of the per-step velocity disturbance, km/h.
    pub sigma_v: f64,
    /// Command delay in whole control steps.
    pub delay_steps: usize,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            tau_act: 0.8,
            theta_dead: 5.0,
            theta_max: 50.0,
            drive_gain: 6.3,
            drag: 0.5,
            rolling: 0.3,
            sigma_v: 0.05,
            delay_steps: 2,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let finite = [
            self.tau_act,
            self.theta_dead,
            self.theta_max,
            self.drive_gain,
            self.drag,
            self.rolling,
            self.sigma_v,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(PlantError::Params("all parameters must be finite".into()));
        }
        if self.tau_act <= 0.0 {
            return Err(PlantError::Params(format!("tau_act = {} must be > 0", self.tau_act)));
        }
        if !(0.0 <= self.theta_dead && self.theta_dead < self.theta_max) {
            return Err(PlantError::Params(format!(
                "need 0 <= theta_dead ({}) < theta_max ({})",
                self.theta_dead, self.theta_max
            )));
        }
        if self.drive_gain < 0.0 || self.drag < 0.0 || self.rolling < 0.0 || self.sigma_v < 0.0 {
            return Err(PlantError::Params("gain, drag, rolling resistance and noise must be >= 0".into()));
        }
        Ok(())
    }

    /// Velocity the plant settles at under a constant pedal angle, ignoring noise.
    pub fn steady_state_velocity(&self, theta: f64) -> f64 {
        let p = self.throttle(theta);
        if self.drag == 0.0 {
            return if self.drive_gain * p > self.rolling { f64::INFINITY } else { 0.0 };
        }
        ((self.drive_gain * p - self.rolling) / self.drag).max(0.0)
    }

    pub fn throttle(&self, theta: f64) -> f64 {
        ((theta - self.theta_dead) / (self.theta_max - self.theta_dead)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// km/h
    pub v: f64,
    /// km/h per s, backward difference over the last step
    pub a: f64,
    /// actual pedal angle, deg
    pub theta: f64,
    /// deg/s, backward difference over the last step
    pub theta_rate: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum PlantError {
    #[error("invalid plant parameters: {0}")]
    Params(String),
    #[error("pedal command {u} deg outside [0, {max}]")]
    CommandOutOfBounds { u: f64, max: f64 },
    #[error("step must be positive and finite, got {0}")]
    Step(f64),
}

#[derive(Debug, Clone)]
pub struct Plant {
    params: PlantParams,
    v: f64,
    theta: f64,
    queue: VecDeque<f64>,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    last: Observation,
}

impl Plant {
    /// At rest with the pedal released and the delay line filled with zeros.
    pub fn reset(params: PlantParams, seed: u64) -> Result<Self, PlantError> {
        params.validate()?;
        let noise = (params.sigma_v > 0.0).then(|| Normal::new(0.0, params.sigma_v).expect("validated sigma"));
        Ok(Self {
            queue: std::iter::repeat_n(0.0, params.delay_steps).collect(),
            params,
            v: 0.0,
            theta: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise,
            last: Observation {
                v: 0.0,
                a: 0.0,
                theta: 0.0,
                theta_rate: 0.0,
            },
        })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn observe(&self) -> Observation {
        self.last
    }

    /// Advances the plant by `dt` under pedal command `u_cmd`.
    pub fn step(&mut self, u_cmd: f64, dt: f64) -> Result<Observation, PlantError> {
        if !(u_cmd >= 0.0 && u_cmd <= self.params.theta_max) {
            return Err(PlantError::CommandOutOfBounds {
                u: u_cmd,
                max: self.params.theta_max,
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PlantError::Step(dt));
        }
        self.queue.push_back(u_cmd);
        let target = self.queue.pop_front().expect("queue holds at least the new command");

        let p = &self.params;
        let (v0, theta0) = (self.v, self.theta);
        let decay = (-dt / p.tau_act).exp();
        self.theta = (target + (theta0 - target) * decay).clamp(0.0, p.theta_max);
        let throttle = p.throttle(self.theta);
        let noise = match &self.noise {
            Some(n) => n.sample(&mut self.rng),
            None => 0.0,
        };
        self.v = (v0 + (p.drive_gain * throttle - p.drag * v0 - p.rolling) * dt + noise).max(0.0);

        self.last = Observation {
            v: self.v,
            a: (self.v - v0) / dt,
            theta: self.theta,
            theta_rate: (self.theta - theta0) / dt,
        };
        Ok(self.last)
    }
}
