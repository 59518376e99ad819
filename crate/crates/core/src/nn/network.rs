//! Layer stacks described as data, parameter layout and initialisation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AdamState, Float, Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Flatten,
    Linear {
        in_features: usize,
        out_features: usize,
    },
}

/// A shared encoder over `[T, C]` input whose flattened output is joined
/// with a metadata vector and fed to `num_heads` identical heads, each
/// ending in one output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_frames: usize,
    pub input_channels: usize,
    pub metadata_len: usize,
    pub encoder: Vec<LayerSpec>,
    pub head: Vec<LayerSpec>,
    pub num_heads: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
}

fn walk_shapes(layers: &[LayerSpec], mut shape: Vec<usize>, what: &str) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let bad = |msg: String| Error::Shape(format!("{what} layer {i}: {msg}"));
        shape = match *layer {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                if shape.len() != 2 || shape[1] != in_channels {
                    return Err(bad(format!("conv expects [T, {in_channels}], got {shape:?}")));
                }
                if kernel == 0 || stride == 0 || out_channels == 0 || shape[0] < kernel {
                    return Err(bad(format!(
                        "conv kernel {kernel} stride {stride} on length {}",
                        shape[0]
                    )));
                }
                vec![(shape[0] - kernel) / stride + 1, out_channels]
            }
            LayerSpec::Relu => shape,
            LayerSpec::Flatten => vec![shape.iter().product()],
            LayerSpec::Linear {
                in_features,
                out_features,
            } => {
                if shape != [in_features] || out_features == 0 {
                    return Err(bad(format!("linear expects [{in_features}], got {shape:?}")));
                }
                vec![out_features]
            }
        };
        out.push(shape.clone());
    }
    Ok(out)
}

impl Architecture {
    /// Per-layer output shapes of the encoder (without batch axis).
    pub fn encoder_shapes(&self) -> Result<Vec<Vec<usize>>> {
        walk_shapes(
            &self.encoder,
            vec![self.input_frames, self.input_channels],
            "encoder",
        )
    }

    /// Length of the flattened encoder output.
    pub fn embedding_len(&self) -> Result<usize> {
        let shapes = self.encoder_shapes()?;
        match shapes.last() {
            Some(s) if s.len() == 1 => Ok(s[0]),
            _ => Err(Error::Shape("encoder must end flat".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 {
            return Err(Error::Shape("need at least one head".into()));
        }
        let e = self.embedding_len()?;
        let shapes = walk_shapes(&self.head, vec![e + self.metadata_len], "head")?;
        if shapes.last().map(|s| s.as_slice()) != Some(&[1][..]) {
            return Err(Error::Shape("each head must end in a single output".into()));
        }
        Ok(())
    }

    /// Parameter names, shapes and fan-in in storage order.
    pub fn param_specs(&self) -> Result<Vec<ParamSpec>> {
        self.validate()?;
        let mut specs = Vec::new();
        let mut push = |prefix: String, layer: &LayerSpec| match *layer {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                let fan_in = in_channels * kernel;
                specs.push(ParamSpec {
                    name: format!("{prefix}.weight"),
                    shape: vec![out_channels, in_channels, kernel],
                    fan_in,
                });
                specs.push(ParamSpec {
                    name: format!("{prefix}.bias"),
                    shape: vec![out_channels],
                    fan_in,
                });
            }
            LayerSpec::Linear {
                in_features,
                out_features,
            } => {
                specs.push(ParamSpec {
                    name: format!("{prefix}.weight"),
                    shape: vec![out_features, in_features],
                    fan_in: in_features,
                });
                specs.push(ParamSpec {
                    name: format!("{prefix}.bias"),
                    shape: vec![out_features],
                    fan_in: in_features,
                });
            }
            LayerSpec::Relu | LayerSpec::Flatten => {}
        };
        for (i, l) in self.encoder.iter().enumerate() {
            push(format!("encoder.{i}"), l);
        }
        for h in 0..self.num_heads {
            for (i, l) in self.head.iter().enumerate() {
                push(format!("head.{h}.{i}"), l);
            }
        }
        Ok(specs)
    }

    pub fn num_params(&self) -> Result<usize> {
        Ok(self
            .param_specs()?
            .iter()
            .map(|s| s.shape.iter().product::<usize>())
            .sum())
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialisation.
    pub fn init_params(&self, seed: u64) -> Result<Vec<Tensor<f32>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.param_specs()?
            .into_iter()
            .map(|s| {
                let bound = (1.0 / s.fan_in as f64).sqrt();
                let n = s.shape.iter().product();
                let data = (0..n)
                    .map(|_| rng.random_range(-bound..bound) as f32)
                    .collect();
                Tensor::new(s.shape, data)
            })
            .collect()
    }

    /// Records the forward pass on `g`. `input` is `[B, T, C]`, `metadata`
    /// is `[B, M]`; the result is `[B, num_heads]`.
    pub fn forward<S: Float>(&self, g: &mut Graph<S>, params: &[Var], input: Var, metadata: Var) -> Result<Var> {
        let mut p = params.iter().copied();
        let mut next = || p.next().ok_or_else(|| Error::Shape("too few parameters".into()));
        let x_shape = g.value(input).shape().to_vec();
        if x_shape.len() != 3 || x_shape[1] != self.input_frames || x_shape[2] != self.input_channels {
            return Err(Error::Shape(format!(
                "model input must be [B, {}, {}], got {x_shape:?}",
                self.input_frames, self.input_channels
            )));
        }
        let m_shape = g.value(metadata).shape().to_vec();
        if m_shape != [x_shape[0], self.metadata_len] {
            return Err(Error::Shape(format!(
                "metadata must be [{}, {}], got {m_shape:?}",
                x_shape[0], self.metadata_len
            )));
        }
        let mut x = input;
        for layer in &self.encoder {
            x = match *layer {
                LayerSpec::Conv1d { stride, .. } => {
                    let (k, b) = (next()?, next()?);
                    g.conv1d(x, k, b, stride)?
                }
                LayerSpec::Relu => g.relu(x)?,
                LayerSpec::Flatten => g.flatten(x)?,
                LayerSpec::Linear { .. } => {
                    let (w, b) = (next()?, next()?);
                    g.linear(x, w, b)?
                }
            };
        }
        let joined = g.concat(&[x, metadata])?;
        let mut outs = Vec::with_capacity(self.num_heads);
        for _ in 0..self.num_heads {
            let mut h = joined;
            for layer in &self.head {
                h = match *layer {
                    LayerSpec::Linear { .. } => {
                        let (w, b) = (next()?, next()?);
                        g.linear(h, w, b)?
                    }
                    LayerSpec::Relu => g.relu(h)?,
                    LayerSpec::Flatten => g.flatten(h)?,
                    LayerSpec::Conv1d { .. } => {
                        return Err(Error::Shape("heads cannot contain convolutions".into()))
                    }
                };
            }
            outs.push(h);
        }
        if p.next().is_some() {
            return Err(Error::Shape("too many parameters".into()));
        }
        g.concat(&outs)
    }
}

/// Trainable state: architecture, parameters and optimiser moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub arch: Architecture,
    pub seed: u64,
    pub params: Vec<Tensor<f32>>,
    pub adam: AdamState<f32>,
}

impl ModelState {
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let params = arch.init_params(seed)?;
        let adam = AdamState::zeros_like(&params);
        Ok(ModelState {
            arch,
            seed,
            params,
            adam,
        })
    }

    /// Forward pass without gradients. `input` is `[B, T, C]` flattened,
    /// `metadata` is `[B, M]` flattened.
    pub fn predict(&self, batch: usize, input: &[f32], metadata: &[f32]) -> Result<Vec<f32>> {
        let mut g = Graph::new();
        let params: Vec<Var> = self.params.iter().map(|p| g.constant(p.clone())).collect();
        let x = g.constant(Tensor::new(
            vec![batch, self.arch.input_frames, self.arch.input_channels],
            input.to_vec(),
        )?);
        let m = g.constant(Tensor::new(vec![batch, self.arch.metadata_len], metadata.to_vec())?);
        let y = self.arch.forward(&mut g, &params, x, m)?;
        Ok(g.value(y).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Architecture {
        Architecture {
            input_frames: 20,
            input_channels: 4,
            metadata_len: 2,
            encoder: vec![
                LayerSpec::Conv1d {
                    in_channels: 4,
                    out_channels: 3,
                    kernel: 5,
                    stride: 2,
                },
                LayerSpec::Relu,
                LayerSpec::Conv1d {
                    in_channels: 3,
                    out_channels: 2,
                    kernel: 3,
                    stride: 1,
                },
                LayerSpec::Relu,
                LayerSpec::Flatten,
            ],
            head: vec![
                LayerSpec::Linear {
                    in_features: 14,
                    out_features: 5,
                },
                LayerSpec::Relu,
                LayerSpec::Linear {
                    in_features: 5,
                    out_features: 1,
                },
            ],
            num_heads: 3,
        }
    }

    #[test]
    fn shapes_and_param_count() {
        let a = small();
        let shapes = a.encoder_shapes().unwrap();
        assert_eq!(shapes[0], vec![8, 3]);
        assert_eq!(shapes[2], vec![6, 2]);
        assert_eq!(a.embedding_len().unwrap(), 12);
        let conv = 3 * 4 * 5 + 3 + 2 * 3 * 3 + 2;
        let head = 14 * 5 + 5 + 5 + 1;
        assert_eq!(a.num_params().unwrap(), conv + 3 * head);
    }

    #[test]
    fn inconsistent_layers_are_rejected() {
        let mut a = small();
        a.head[0] = LayerSpec::Linear {
            in_features: 13,
            out_features: 5,
        };
        assert!(matches!(a.validate(), Err(Error::Shape(_))));
        let mut a = small();
        a.input_frames = 4;
        assert!(a.validate().is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = small();
        let p1 = a.init_params(7).unwrap();
        assert_eq!(p1, a.init_params(7).unwrap());
        assert_ne!(p1, a.init_params(8).unwrap());
        for (p, s) in p1.iter().zip(a.param_specs().unwrap()) {
            let bound = (1.0 / s.fan_in as f32).sqrt();
            assert!(p.data().iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn zero_weights_output_final_biases() {
        let a = small();
        let mut st = ModelState::init(a.clone(), 1).unwrap();
        let specs = a.param_specs().unwrap();
        for (p, s) in st.params.iter_mut().zip(&specs) {
            let last_bias = s.name.ends_with(".2.bias");
            for v in p.data_mut() {
                *v = 0.0;
            }
            if last_bias {
                let h: f32 = s.name.split('.').nth(1).unwrap().parse().unwrap();
                p.data_mut()[0] = h + 0.5;
            }
        }
        let x = vec![0.3; 2 * 20 * 4];
        let out = st.predict(2, &x, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.5, 1.5, 2.5, 0.5, 1.5, 2.5]);
    }

    #[test]
    fn forward_rejects_wrong_input_shape() {
        let st = ModelState::init(small(), 1).unwrap();
        assert!(matches!(
            st.predict(1, &[0.0; 19 * 4], &[0.0; 2]),
            Err(Error::Shape(_))
        ));
    }
}
