use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for Adam, shaped like the parameter arrays they track.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new<S: AsRef<[f64]>>(params: &[S], config: AdamConfig) -> Self {
        let shapes = params.iter().map(|p| vec![0.0; p.as_ref().len()]);
        Self {
            config,
            m: shapes.clone().collect(),
            v: shapes.collect(),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One bias-corrected Adam update of `params` in place.
    ///
    /// Shapes are checked before anything is written.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<(), NetError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NetError::ShapeMismatch(format!(
                "expected {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, ((p, g), m)) in params.iter().zip(grads).zip(&self.m).enumerate() {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(NetError::ShapeMismatch(format!(
                    "tensor {k}: state {} params {} grads {}",
                    m.len(),
                    p.len(),
                    g.len()
                )));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut w = vec![1.0, -2.0, 3.0];
        let mut adam = AdamState::new(&[w.clone()], AdamConfig::default());
        for _ in 0..5 {
            adam.step(&mut [&mut w], &[&[0.0, 0.0, 0.0]]).unwrap();
        }
        assert_eq!(w, vec![1.0, -2.0, 3.0]);
        assert!(adam.first_moments()[0].iter().all(|&m| m == 0.0));
        assert!(adam.second_moments()[0].iter().all(|&v| v == 0.0));
        assert_eq!(adam.steps(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let mut w = vec![0.0, 0.0, 0.0];
        let cfg = AdamConfig::default();
        let mut adam = AdamState::new(&[w.clone()], cfg);
        adam.step(&mut [&mut w], &[&[3.0, -0.25, 1e-3]]).unwrap();
        for (wi, s) in w.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((wi - s * cfg.learning_rate).abs() < 1e-8, "{wi}");
        }
    }

    #[test]
    fn shape_mismatch_is_rejected_without_writing() {
        let mut w = vec![1.0, 2.0];
        let mut adam = AdamState::new(&[w.clone()], AdamConfig::default());
        assert!(matches!(adam.step(&mut [&mut w], &[&[1.0]]), Err(NetError::ShapeMismatch(_))));
        assert_eq!(w, vec![1.0, 2.0]);
        assert_eq!(adam.steps(), 0);
    }

    /// Scalar Adam written out longhand, independent of the tensor loop above.
    fn scalar_adam_on_square(w0: f64, lr: f64, steps: usize) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
        let mut trace = vec![w];
        for t in 1..=steps {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            w -= lr * mh / (vh.sqrt() + eps);
            trace.push(w);
        }
        trace
    }

    #[test]
    fn quadratic_descent_matches_scalar_oracle() {
        let oracle = scalar_adam_on_square(1.0, 0.1, 100);
        let mut w = vec![1.0];
        let mut adam = AdamState::new(&[w.clone()], AdamConfig { learning_rate: 0.1, ..Default::default() });
        let mut trace = vec![w[0]];
        for _ in 0..100 {
            let g = [2.0 * w[0]];
            adam.step(&mut [&mut w], &[&g]).unwrap();
            trace.push(w[0]);
        }
        for (a, b) in trace.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert!(trace[100].abs() < 0.1);
        // |w| shrinks monotonically until momentum carries it past zero (step 12)
        assert!(trace[..12].windows(2).all(|p| p[1].abs() < p[0].abs()));
        assert!(trace[12] < 0.0);
        // frozen from the oracle
        assert!((trace[100] - 0.002936675681102549).abs() < 1e-12);
    }
}
