//! `.ddcn` model files.
//!
//! Line-oriented text. A header block carries the format version, problem
//! dimensions, bounds, and training metadata; then the two normalizers; then the
//! layer stack with per-layer shape declarations and row-major parameters. Floats are
//! written with 17 significant digits so every `f64` survives the round trip.
//!
//! ```text
//! DDCN 1
//! horizon 30
//! ...
//! hidden 34 80 50 20
//! input_mean <34 values>
//! ...
//! layers 13
//! dense 34 34
//! weights <1156 values>
//! bias <34 values>
//! batchnorm 34 <epsilon> <momentum>
//! ...
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{ModelConfig, ModelError, ModelNormalizer, Normalizer, TrainedModel, TrainingMeta};
use crate::netcore::{BatchNormLayer, DenseLayer, Layer, Network};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "DDCN";

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_values(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

pub fn to_string(model: &TrainedModel) -> String {
    let c = &model.config;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(s, "horizon {}", c.horizon);
    let _ = writeln!(s, "state_dim {}", c.state_dim);
    let _ = writeln!(s, "init_dim {}", c.init_dim);
    let _ = writeln!(s, "input_dim {}", c.input_dim);
    let _ = writeln!(s, "period {}", fmt_f64(c.period));
    let _ = writeln!(s, "u_min {}", fmt_f64(c.u_min));
    let _ = writeln!(s, "u_max {}", fmt_f64(c.u_max));
    let _ = writeln!(s, "seed {}", model.meta.seed);
    let _ = writeln!(s, "epochs {}", model.meta.epochs);
    let _ = writeln!(s, "best_test_loss {}", fmt_f64(model.meta.best_test_loss));
    let widths = model.network.dense_widths();
    let hidden: Vec<String> = widths[..widths.len() - 1].iter().map(|w| w.to_string()).collect();
    let _ = writeln!(s, "hidden {}", hidden.join(" "));
    push_values(&mut s, "input_mean", model.normalizer.input.mean());
    push_values(&mut s, "input_std", model.normalizer.input.std());
    push_values(&mut s, "output_mean", model.normalizer.output.mean());
    push_values(&mut s, "output_std", model.normalizer.output.std());
    let _ = writeln!(s, "layers {}", model.network.layers().len());
    for layer in model.network.layers() {
        match layer {
            Layer::Dense(d) => {
                let _ = writeln!(s, "dense {} {}", d.in_dim(), d.out_dim());
                push_values(&mut s, "weights", d.weights());
                push_values(&mut s, "bias", d.bias());
            }
            Layer::BatchNorm(bn) => {
                let _ = writeln!(s, "batchnorm {} {} {}", bn.dim(), fmt_f64(bn.epsilon()), fmt_f64(bn.momentum()));
                push_values(&mut s, "gamma", bn.gamma());
                push_values(&mut s, "beta", bn.beta());
                push_values(&mut s, "running_mean", bn.running_mean());
                push_values(&mut s, "running_var", bn.running_var());
            }
            Layer::Sigmoid { dim } => {
                let _ = writeln!(s, "sigmoid {dim}");
            }
        }
    }
    s.push_str("end\n");
    s
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, to_string(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TrainedModel, ModelError> {
    from_str(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next line split into its keyword and the remaining tokens.
    fn next_line(&mut self) -> Result<(usize, &'a str, Vec<&'a str>), ModelError> {
        match self.iter.next() {
            Some((i, line)) => {
                self.last = i + 1;
                let mut tokens = line.split_ascii_whitespace();
                let key = tokens.next().unwrap_or("");
                Ok((i + 1, key, tokens.collect()))
            }
            None => Err(ModelError::Truncated { line: self.last + 1 }),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), ModelError> {
        let (line, k, rest) = self.next_line()?;
        if k != key {
            return Err(ModelError::Parse {
                line,
                msg: format!("expected `{key}`, found `{k}`"),
            });
        }
        Ok((line, rest))
    }

    fn usize_field(&mut self, key: &str) -> Result<usize, ModelError> {
        let (line, rest) = self.keyed(key)?;
        single(line, &rest).and_then(|t| parse_usize(line, t))
    }

    fn f64_field(&mut self, key: &str) -> Result<f64, ModelError> {
        let (line, rest) = self.keyed(key)?;
        single(line, &rest).and_then(|t| parse_f64(line, t))
    }

    fn values(&mut self, key: &str, len: usize) -> Result<Vec<f64>, ModelError> {
        let (line, rest) = self.keyed(key)?;
        if rest.len() != len {
            return Err(ModelError::Consistency(format!(
                "line {line}: `{key}` has {} values, expected {len}",
                rest.len()
            )));
        }
        rest.iter().map(|t| parse_f64(line, t)).collect()
    }
}

fn single<'a>(line: usize, rest: &[&'a str]) -> Result<&'a str, ModelError> {
    match rest {
        [t] => Ok(t),
        _ => Err(ModelError::Parse {
            line,
            msg: format!("expected one value, found {}", rest.len()),
        }),
    }
}

fn parse_usize(line: usize, t: &str) -> Result<usize, ModelError> {
    t.parse().map_err(|e| ModelError::Parse {
        line,
        msg: format!("`{t}`: {e}"),
    })
}

fn parse_f64(line: usize, t: &str) -> Result<f64, ModelError> {
    let v: f64 = t.parse().map_err(|e| ModelError::Parse {
        line,
        msg: format!("`{t}`: {e}"),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NonFinite { line })
    }
}

pub fn from_str(text: &str) -> Result<TrainedModel, ModelError> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        last: 0,
    };
    let (_, magic, rest) = lines.next_line()?;
    if magic != MAGIC || rest != [FORMAT_VERSION.to_string().as_str()] {
        return Err(ModelError::Version(format!("{magic} {}", rest.join(" "))));
    }
    let config = ModelConfig {
        horizon: lines.usize_field("horizon")?,
        state_dim: lines.usize_field("state_dim")?,
        init_dim: lines.usize_field("init_dim")?,
        input_dim: lines.usize_field("input_dim")?,
        period: lines.f64_field("period")?,
        u_min: lines.f64_field("u_min")?,
        u_max: lines.f64_field("u_max")?,
    };
    config.validate()?;
    let seed: u64 = {
        let (line, rest) = lines.keyed("seed")?;
        let t = single(line, &rest)?;
        t.parse().map_err(|e| ModelError::Parse {
            line,
            msg: format!("`{t}`: {e}"),
        })?
    };
    let epochs = lines.usize_field("epochs")?;
    let best_test_loss = lines.f64_field("best_test_loss")?;
    let hidden: Vec<usize> = {
        let (line, rest) = lines.keyed("hidden")?;
        rest.iter().map(|t| parse_usize(line, t)).collect::<Result<_, _>>()?
    };

    let n_in = config.net_in_dim();
    let n_out = config.net_out_dim();
    let input = Normalizer::from_parts(lines.values("input_mean", n_in)?, lines.values("input_std", n_in)?)
        .ok_or_else(|| ModelError::Consistency("input_std must be positive".into()))?;
    let output = Normalizer::from_parts(lines.values("output_mean", n_out)?, lines.values("output_std", n_out)?)
        .ok_or_else(|| ModelError::Consistency("output_std must be positive".into()))?;

    let n_layers = lines.usize_field("layers")?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let (line, kind, rest) = lines.next_line()?;
        let layer = match kind {
            "dense" => {
                let [i, o] = rest[..] else {
                    return Err(ModelError::Parse {
                        line,
                        msg: "dense needs in and out widths".into(),
                    });
                };
                let (i, o) = (parse_usize(line, i)?, parse_usize(line, o)?);
                let w = lines.values("weights", i * o)?;
                let b = lines.values("bias", o)?;
                Layer::Dense(DenseLayer::from_parts(i, o, w, b).expect("lengths checked"))
            }
            "batchnorm" => {
                let [d, eps, mom] = rest[..] else {
                    return Err(ModelError::Parse {
                        line,
                        msg: "batchnorm needs width, epsilon, momentum".into(),
                    });
                };
                let d = parse_usize(line, d)?;
                let (eps, mom) = (parse_f64(line, eps)?, parse_f64(line, mom)?);
                let gamma = lines.values("gamma", d)?;
                let beta = lines.values("beta", d)?;
                let rm = lines.values("running_mean", d)?;
                let rv = lines.values("running_var", d)?;
                Layer::BatchNorm(
                    BatchNormLayer::from_parts(gamma, beta, rm, rv, eps, mom)
                        .ok_or_else(|| ModelError::Consistency(format!("line {line}: invalid batchnorm constants")))?,
                )
            }
            "sigmoid" => Layer::Sigmoid {
                dim: parse_usize(line, single(line, &rest)?)?,
            },
            other => {
                return Err(ModelError::Parse {
                    line,
                    msg: format!("unknown layer kind `{other}`"),
                })
            }
        };
        layers.push(layer);
    }
    lines.keyed("end")?;

    let network = Network::new(layers).map_err(|e| ModelError::Consistency(e.to_string()))?;
    let widths = network.dense_widths();
    if widths[..widths.len() - 1] != hidden[..] {
        return Err(ModelError::Consistency(format!(
            "declared hidden widths {hidden:?} disagree with stored layers {:?}",
            &widths[..widths.len() - 1]
        )));
    }
    if network.in_dim() != n_in || network.out_dim() != n_out {
        return Err(ModelError::Consistency(format!(
            "network maps {} -> {}, config needs {n_in} -> {n_out}",
            network.in_dim(),
            network.out_dim()
        )));
    }
    if !network.is_ddc_topology() {
        return Err(ModelError::Consistency("layer stack is not dense/batchnorm/sigmoid blocks".into()));
    }

    Ok(TrainedModel {
        config,
        network,
        normalizer: ModelNormalizer { input, output },
        meta: TrainingMeta {
            epochs,
            best_test_loss,
            seed,
        },
    })
}
