use super::{ModelError, Trajectory};

/// One supervised example: the state at row `t`, the pedal commands of rows
/// `t+1..=t+N`, and the velocities of the same rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub init: Vec<f64>,
    pub inputs: Vec<f64>,
    pub states: Vec<f64>,
}

impl TrainingSample {
    /// `[init, inputs]`, the network's input row.
    pub fn network_input(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.init.len() + self.inputs.len());
        x.extend_from_slice(&self.init);
        x.extend_from_slice(&self.inputs);
        x
    }
}

/// Slices a trajectory into `len - horizon` overlapping windows.
pub fn window_trajectory(traj: &Trajectory, horizon: usize) -> Result<Vec<TrainingSample>, ModelError> {
    let rows = traj.rows();
    if horizon == 0 || rows.len() <= horizon {
        return Err(ModelError::TooShort {
            rows: rows.len(),
            horizon,
        });
    }
    Ok((0..rows.len() - horizon)
        .map(|t| {
            let ahead = &rows[t + 1..=t + horizon];
            TrainingSample {
                init: traj.init_state(t).to_vec(),
                inputs: ahead.iter().map(|r| r.u_deg).collect(),
                states: ahead.iter().map(|r| r.v_kmh).collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrajectoryRow;
    use proptest::prelude::*;

    fn traj(n: usize, f: impl Fn(usize) -> (f64, f64)) -> Trajectory {
        let rows = (0..n)
            .map(|k| {
                let (u, v) = f(k);
                TrajectoryRow {
                    time_s: k as f64 * 0.2,
                    u_deg: u,
                    v_kmh: v,
                }
            })
            .collect();
        Trajectory::new(0.2, rows).unwrap()
    }

    #[test]
    fn full_log_gives_270_windows() {
        assert_eq!(window_trajectory(&traj(300, |k| (k as f64 % 50.0, 1.0)), 30).unwrap().len(), 270);
    }

    #[test]
    fn minimal_log_gives_one_window() {
        let t = traj(31, |k| (k as f64, 10.0 * k as f64));
        let w = window_trajectory(&t, 30).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].inputs[0], 1.0);
        assert_eq!(w[0].inputs[29], 30.0);
        assert_eq!(w[0].states[29], 300.0);
        assert_eq!(w[0].network_input().len(), 34);
    }

    #[test]
    fn constant_log_gives_identical_windows() {
        let w = window_trajectory(&traj(40, |_| (10.0, 5.0)), 30).unwrap();
        assert!(w.iter().all(|s| s == &w[0]));
        assert_eq!(w[0].init, vec![5.0, 0.0, 10.0, 0.0]);
    }

    #[test]
    fn init_uses_row_t_and_backward_differences() {
        let t = traj(35, |k| ((k * k) as f64, 2.0 * k as f64));
        let w = window_trajectory(&t, 30).unwrap();
        // row 3: v = 6, a = (6 - 4) / 0.2, u = 9, u_rate = (9 - 4) / 0.2
        let init = &w[3].init;
        assert_eq!(init[0], 6.0);
        assert!((init[1] - 10.0).abs() < 1e-12);
        assert_eq!(init[2], 9.0);
        assert!((init[3] - 25.0).abs() < 1e-12);
        assert_eq!(w[3].inputs[0], 16.0);
    }

    #[test]
    fn short_log_is_rejected() {
        let err = window_trajectory(&traj(30, |_| (0.0, 0.0)), 30).unwrap_err();
        assert!(err.to_string().contains("trajectory shorter than horizon"));
    }

    proptest! {
        #[test]
        fn window_count_is_len_minus_horizon(len in 2usize..200, horizon in 1usize..60) {
            prop_assume!(len > horizon);
            let t = traj(len, |k| (k as f64, k as f64));
            prop_assert_eq!(window_trajectory(&t, horizon).unwrap().len(), len - horizon);
        }
    }
}
