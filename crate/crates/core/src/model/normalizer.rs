use super::{ModelError, TrainingSample};

/// Standard deviations below this are treated as zero variance.
const MIN_STD: f64 = 1e-12;

/// Per-feature z-score transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Normalizer {
    /// Population mean and standard deviation per column. Zero-variance columns get σ = 1.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ModelError> {
        if rows.len() < 2 {
            return Err(ModelError::TooFewSamples {
                need: 2,
                got: rows.len(),
            });
        }
        let dim = rows[0].as_ref().len();
        if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != dim) {
            return Err(ModelError::Dimension {
                what: "normalizer row",
                expected: dim,
                found: bad.as_ref().len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// Returns `None` if lengths differ or any σ is not strictly positive and finite.
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Option<Self> {
        let ok = mean.len() == std.len() && std.iter().all(|&s| s > 0.0 && s.is_finite());
        ok.then_some(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

/// Input and output transforms for the forward model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelNormalizer {
    pub input: Normalizer,
    pub output: Normalizer,
}

impl ModelNormalizer {
    pub fn fit(samples: &[TrainingSample]) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::TooFewSamples { need: 2, got: 0 });
        }
        let inputs: Vec<Vec<f64>> = samples.iter().map(TrainingSample::network_input).collect();
        let outputs: Vec<&[f64]> = samples.iter().map(|s| s.states.as_slice()).collect();
        Ok(Self {
            input: Normalizer::fit(&inputs)?,
            output: Normalizer::fit(&outputs)?,
        })
    }
}
