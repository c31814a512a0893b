//! Comparison controllers: a velocity PID, a PID on estimated acceleration error,
//! and the random-walk policy used to collect training data.
//!
//! All three emit pedal angles in `[u_min, u_max]` and are stepped once per
//! control period.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pid1Gains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for Pid1Gains {
    // Output of `harness::tune_pid1` on the default plant.
    fn default() -> Self {
        Self {
            kp: 33.5,
            ki: 2.15,
            kd: 5.0,
        }
    }
}

/// `u = kp·e + ki·∫e dt + kd·de/dt` with `e = v_target - v`.
#[derive(Debug, Clone)]
pub struct Pid1 {
    gains: Pid1Gains,
    period: f64,
    u_min: f64,
    u_max: f64,
    integral: f64,
    prev_error: Option<f64>,
}

impl Pid1 {
    pub fn new(gains: Pid1Gains, period: f64, u_min: f64, u_max: f64) -> Self {
        Self {
            gains,
            period,
            u_min,
            u_max,
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn step(&mut self, v: f64, v_target: f64) -> f64 {
        let e = v_target - v;
        let de = self.prev_error.map_or(0.0, |p| (e - p) / self.period);
        self.prev_error = Some(e);
        let candidate = self.integral + e * self.period;
        let raw = self.gains.kp * e + self.gains.ki * candidate + self.gains.kd * de;
        // integrate only while the output is inside its bounds
        if raw >= self.u_min && raw <= self.u_max {
            self.integral = candidate;
        }
        let u = self.gains.kp * e + self.gains.ki * self.integral + self.gains.kd * de;
        u.clamp(self.u_min, self.u_max)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pid2Gains {
    pub kp: f64,
    pub kd: f64,
    /// Time allowed to close the velocity error, s.
    pub t_delay: f64,
}

impl Default for Pid2Gains {
    // Output of `harness::tune_pid2` on the default plant.
    fn default() -> Self {
        Self {
            kp: 2.25,
            kd: 1.6,
            t_delay: 1.0,
        }
    }
}

/// Integrates a PD law on the error between a target acceleration, derived from the
/// velocity error and `t_delay`, and the measured acceleration.
#[derive(Debug, Clone)]
pub struct Pid2 {
    gains: Pid2Gains,
    period: f64,
    u_min: f64,
    u_max: f64,
    u: f64,
    prev_v: Option<f64>,
    prev_ea: Option<f64>,
}

/// Intermediate quantities of one PID2 update, for inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pid2Terms {
    pub a_target: f64,
    pub a: f64,
    pub e_a: f64,
    pub u: f64,
}

impl Pid2 {
    pub fn new(gains: Pid2Gains, period: f64, u_min: f64, u_max: f64) -> Self {
        Self {
            gains,
            period,
            u_min,
            u_max,
            u: u_min.max(0.0).min(u_max),
            prev_v: None,
            prev_ea: None,
        }
    }

    pub fn step(&mut self, v: f64, v_target: f64) -> f64 {
        self.step_terms(v, v_target).u
    }

    pub fn step_terms(&mut self, v: f64, v_target: f64) -> Pid2Terms {
        let a_target = (v_target - v) / self.gains.t_delay;
        let a = self.prev_v.map_or(0.0, |p| (v - p) / self.period);
        let e_a = a_target - a;
        let de_a = self.prev_ea.map_or(0.0, |p| (e_a - p) / self.period);
        self.prev_v = Some(v);
        self.prev_ea = Some(e_a);
        self.u = (self.u + (self.gains.kp * e_a + self.gains.kd * de_a) * self.period).clamp(self.u_min, self.u_max);
        Pid2Terms { a_target, a, e_a, u: self.u }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomParams {
    /// Lower end of the increment range, deg.
    pub increment_min: f64,
    /// Upper end of the increment range, deg.
    pub increment_max: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            increment_min: -1.0,
            increment_max: 2.0,
        }
    }
}

/// Source of pedal increments for [`RandomPolicy`].
pub trait IncrementSource {
    /// A draw from `[lo, hi)`.
    fn draw(&mut self, lo: f64, hi: f64) -> f64;
}

impl IncrementSource for ChaCha8Rng {
    fn draw(&mut self, lo: f64, hi: f64) -> f64 {
        self.random_range(lo..hi)
    }
}

/// Random walk on the pedal: step up when below the target, down when above.
#[derive(Debug, Clone)]
pub struct RandomPolicy<S = ChaCha8Rng> {
    params: RandomParams,
    u_min: f64,
    u_max: f64,
    u: f64,
    source: S,
}

impl RandomPolicy<ChaCha8Rng> {
    pub fn seeded(params: RandomParams, u_min: f64, u_max: f64, seed: u64) -> Self {
        Self::with_source(params, u_min, u_max, ChaCha8Rng::seed_from_u64(seed))
    }
}

impl<S: IncrementSource> RandomPolicy<S> {
    pub fn with_source(params: RandomParams, u_min: f64, u_max: f64, source: S) -> Self {
        Self {
            params,
            u_min,
            u_max,
            u: u_min.max(0.0).min(u_max),
            source,
        }
    }

    pub fn set_u(&mut self, u: f64) {
        self.u = u.clamp(self.u_min, self.u_max);
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn step(&mut self, v: f64, v_target: f64) -> f64 {
        let inc = self.source.draw(self.params.increment_min, self.params.increment_max);
        let next = if v <= v_target { self.u + inc } else { self.u - inc };
        self.u = next.clamp(self.u_min, self.u_max);
        self.u
    }
}
