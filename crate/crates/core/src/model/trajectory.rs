use std::io::{Read, Write};
use std::path::Path;

use super::{InitState, ModelError};

pub const TRAJECTORY_HEADER: &str = "time_s,u_deg,v_kmh";

/// Relative tolerance on the spacing between consecutive timestamps.
const PERIOD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub time_s: f64,
    /// Pedal command in effect at `time_s`, deg.
    pub u_deg: f64,
    pub v_kmh: f64,
}

/// Fixed-period log of pedal commands and velocities.
///
/// Acceleration and pedal rate are derived on demand with backward differences;
/// both are zero on the first row.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    period: f64,
    rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn new(period: f64, rows: Vec<TrajectoryRow>) -> Result<Self, ModelError> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(ModelError::Trajectory(format!("period {period} must be positive")));
        }
        for (k, r) in rows.iter().enumerate() {
            if !(r.time_s.is_finite() && r.u_deg.is_finite() && r.v_kmh.is_finite()) {
                return Err(ModelError::Trajectory(format!("row {k} has a non-finite value")));
            }
        }
        for (k, pair) in rows.windows(2).enumerate() {
            let dt = pair[1].time_s - pair[0].time_s;
            if (dt - period).abs() > PERIOD_TOL * period.max(1.0) {
                return Err(ModelError::Trajectory(format!(
                    "rows {k}..{} are {dt} s apart, expected {period} s",
                    k + 1
                )));
            }
        }
        Ok(Self { period, rows })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn rows(&self) -> &[TrajectoryRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn acceleration(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            (self.rows[k].v_kmh - self.rows[k - 1].v_kmh) / self.period
        }
    }

    pub fn u_rate(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            (self.rows[k].u_deg - self.rows[k - 1].u_deg) / self.period
        }
    }

    pub fn init_state(&self, k: usize) -> InitState {
        InitState {
            velocity: self.rows[k].v_kmh,
            acceleration: self.acceleration(k),
            pedal_angle: self.rows[k].u_deg,
            pedal_rate: self.u_rate(k),
        }
    }

    pub fn check_bounds(&self, u_min: f64, u_max: f64) -> Result<(), ModelError> {
        match self.rows.iter().position(|r| r.u_deg < u_min || r.u_deg > u_max) {
            Some(k) => Err(ModelError::Trajectory(format!(
                "row {k}: u = {} outside [{u_min}, {u_max}]",
                self.rows[k].u_deg
            ))),
            None => Ok(()),
        }
    }

    /// Writes `time_s,u_deg,v_kmh` rows. Times use millisecond resolution; values
    /// use the shortest representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{:.3},{},{}", r.time_s, r.u_deg, r.v_kmh)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), ModelError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Parses a trajectory CSV. The period is taken from the first two timestamps.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, ModelError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let header = reader.headers().map_err(|e| ModelError::Csv(e.to_string()))?;
        let found: Vec<&str> = header.iter().collect();
        if found.join(",") != TRAJECTORY_HEADER {
            return Err(ModelError::Csv(format!(
                "expected header `{TRAJECTORY_HEADER}`, found `{}`",
                found.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| ModelError::Csv(e.to_string()))?;
            let field = |i: usize| -> Result<f64, ModelError> {
                rec.get(i)
                    .ok_or_else(|| ModelError::Csv(format!("row {k}: missing column {i}")))?
                    .parse::<f64>()
                    .map_err(|e| ModelError::Csv(format!("row {k}: {e}")))
            };
            rows.push(TrajectoryRow {
                time_s: field(0)?,
                u_deg: field(1)?,
                v_kmh: field(2)?,
            });
        }
        if rows.len() < 2 {
            return Err(ModelError::Trajectory(format!("need at least 2 rows, got {}", rows.len())));
        }
        let period = rows[1].time_s - rows[0].time_s;
        Self::new(period, rows)
    }

    pub fn load_csv(path: &Path) -> Result<Self, ModelError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
