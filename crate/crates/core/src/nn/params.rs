use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{BatchNormParams, LayerKind, LayerSpec, Real};
use crate::scnn::NetworkSpec;

/// What a learnable array is; only `Weight` receives L2 decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
    Gamma,
    Beta,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T> {
    None,
    Conv { weights: Vec<T>, bias: Vec<T> },
    BatchNorm(BatchNormParams<T>),
    Dense { weights: Vec<T>, bias: Vec<T> },
}

impl<T: Real> LayerParams<T> {
    /// Learnable arrays in a fixed order (weights before bias, gamma before beta).
    pub fn learnable(&self) -> Vec<(&[T], ParamRole)> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv { weights, bias } | LayerParams::Dense { weights, bias } => {
                vec![(weights, ParamRole::Weight), (bias, ParamRole::Bias)]
            }
            LayerParams::BatchNorm(bn) => vec![(&bn.gamma, ParamRole::Gamma), (&bn.beta, ParamRole::Beta)],
        }
    }

    pub fn learnable_mut(&mut self) -> Vec<(&mut [T], ParamRole)> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv { weights, bias } | LayerParams::Dense { weights, bias } => {
                vec![(weights, ParamRole::Weight), (bias, ParamRole::Bias)]
            }
            LayerParams::BatchNorm(bn) => vec![
                (&mut bn.gamma, ParamRole::Gamma),
                (&mut bn.beta, ParamRole::Beta),
            ],
        }
    }

    pub fn learnable_count(&self) -> usize {
        self.learnable().iter().map(|(a, _)| a.len()).sum()
    }

    fn zeros_like(&self) -> Vec<Vec<T>> {
        self.learnable()
            .iter()
            .map(|(a, _)| vec![T::zero(); a.len()])
            .collect()
    }
}

/// Learnable parameters of a network plus the SGDM velocity for each array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T = f32> {
    pub layers: Vec<LayerParams<T>>,
    /// `velocity[layer][k]` matches `layers[layer].learnable()[k]`.
    pub velocity: Vec<Vec<Vec<T>>>,
}

impl<T: Real> ParamStore<T> {
    pub fn from_layers(layers: Vec<LayerParams<T>>) -> Self {
        let velocity = layers.iter().map(LayerParams::zeros_like).collect();
        ParamStore { layers, velocity }
    }

    pub fn reset_velocity(&mut self) {
        self.velocity = self.layers.iter().map(LayerParams::zeros_like).collect();
    }

    pub fn learnable_count(&self) -> usize {
        self.layers.iter().map(LayerParams::learnable_count).sum()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let c = |v: &Vec<T>| -> Vec<U> { v.iter().map(|x| U::of(x.to_f64().unwrap_or(f64::NAN))).collect() };
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                LayerParams::None => LayerParams::None,
                LayerParams::Conv { weights, bias } => LayerParams::Conv {
                    weights: c(weights),
                    bias: c(bias),
                },
                LayerParams::Dense { weights, bias } => LayerParams::Dense {
                    weights: c(weights),
                    bias: c(bias),
                },
                LayerParams::BatchNorm(bn) => LayerParams::BatchNorm(BatchNormParams {
                    gamma: c(&bn.gamma),
                    beta: c(&bn.beta),
                    running_mean: c(&bn.running_mean),
                    running_var: c(&bn.running_var),
                }),
            })
            .collect();
        ParamStore::from_layers(layers)
    }
}

/// Gradients laid out like [`ParamStore::velocity`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub layers: Vec<Vec<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &ParamStore<T>) -> Self {
        Gradients {
            layers: params.layers.iter().map(LayerParams::zeros_like).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flatten().flatten()
    }
}

/// Standard deviation of the classifier's initial weights.
pub const HEAD_INIT_STD: f64 = 0.01;

/// How a layer's weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightInit {
    /// N(0, 2/fan_in).
    He,
    /// N(0, std^2) regardless of fan-in.
    Normal(f64),
}

/// He scaling everywhere except the classifier, which starts near zero so
/// the untrained network predicts close to uniformly.
pub fn weight_init(spec: &NetworkSpec, index: usize) -> WeightInit {
    if index == spec.head_index() {
        WeightInit::Normal(HEAD_INIT_STD)
    } else {
        WeightInit::He
    }
}

/// Fresh parameters for one layer given its input shape `(h, w, c)`.
///
/// Biases and beta start at 0, gamma at 1, running variance at 1.
pub fn init_layer<T: Real>(
    layer: &LayerSpec,
    input: (usize, usize, usize),
    init: WeightInit,
    rng: &mut ChaCha8Rng,
) -> Result<LayerParams<T>> {
    let (h, w, c) = input;
    let mut gaussian = |fan_in: usize, len: usize| -> Result<Vec<T>> {
        let std = match init {
            WeightInit::He => (2.0 / fan_in as f64).sqrt(),
            WeightInit::Normal(std) => std,
        };
        let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
        Ok((0..len).map(|_| T::of(normal.sample(rng))).collect())
    };
    Ok(match layer.kind {
        LayerKind::Conv {
            kernel: (kh, kw),
            out_channels,
            ..
        } => LayerParams::Conv {
            weights: gaussian(kh * kw * c, kh * kw * c * out_channels)?,
            bias: vec![T::zero(); out_channels],
        },
        LayerKind::FullyConnected { out_units } => {
            let fan_in = h * w * c;
            LayerParams::Dense {
                weights: gaussian(fan_in, fan_in * out_units)?,
                bias: vec![T::zero(); out_units],
            }
        }
        LayerKind::BatchNorm => LayerParams::BatchNorm(BatchNormParams::new(c)),
        LayerKind::Relu | LayerKind::MaxPool { .. } | LayerKind::SoftmaxXent => LayerParams::None,
    })
}

/// Seeded parameter initialization for a whole network; same seed, same bits.
pub fn init_params<T: Real>(spec: &NetworkSpec, seed: u64) -> Result<ParamStore<T>> {
    let shapes = spec.input_shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layers
        .iter()
        .zip(shapes)
        .enumerate()
        .map(|(i, (layer, input))| init_layer(layer, input, weight_init(spec, i), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParamStore::from_layers(layers))
}
