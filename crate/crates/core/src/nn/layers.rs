use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One stage of a sequential network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    /// Stride-1 convolution with a square kernel and symmetric zero padding.
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize, padding: usize },
    Relu,
    /// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
    MaxPool2,
    Flatten,
    Dense { in_features: usize, out_features: usize },
}

impl LayerSpec {
    /// The shape-preserving 3×3, padding-1 convolution used by the default model.
    pub const fn conv3x3(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::Conv2d { in_channels, out_channels, kernel: 3, padding: 1 }
    }

    pub const fn dense(in_features: usize, out_features: usize) -> Self {
        LayerSpec::Dense { in_features, out_features }
    }

    /// Conv2d and Dense carry weights; everything else is parameter-free.
    pub fn is_learned(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool2 => "maxpool2",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
        }
    }

    /// `(weight shape, bias shape)` for learned layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
                Some((vec![out_channels, in_channels, kernel, kernel], vec![out_channels]))
            }
            LayerSpec::Dense { in_features, out_features } => {
                Some((vec![out_features, in_features], vec![out_features]))
            }
            _ => None,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
            LayerSpec::Dense { in_features, .. } => in_features,
            _ => 0,
        }
    }

    /// Output shape for a batched input shape, or a description of the mismatch.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, padding } => {
                let [n, c, h, w] = four(input)?;
                if c != in_channels {
                    return Err(format!("conv2d expects {in_channels} input channels, got {c}"));
                }
                if kernel == 0 || h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return Err(format!("conv2d kernel {kernel} does not fit input {h}×{w}"));
                }
                Ok(vec![n, out_channels, h + 2 * padding - kernel + 1, w + 2 * padding - kernel + 1])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool2 => {
                let [n, c, h, w] = four(input)?;
                if h < 2 || w < 2 {
                    return Err(format!("maxpool2 needs at least 2×2 input, got {h}×{w}"));
                }
                Ok(vec![n, c, h / 2, w / 2])
            }
            LayerSpec::Flatten => {
                if input.len() < 2 {
                    return Err(format!("flatten needs a batched input, got shape {input:?}"));
                }
                Ok(vec![input[0], input[1..].iter().product()])
            }
            LayerSpec::Dense { in_features, out_features } => {
                if input.len() != 2 {
                    return Err(format!("dense expects [N, features], got shape {input:?}"));
                }
                if input[1] != in_features {
                    return Err(format!("dense expects {in_features} features, got {}", input[1]));
                }
                Ok(vec![input[0], out_features])
            }
        }
    }
}

fn four(shape: &[usize]) -> std::result::Result<[usize; 4], String> {
    <[usize; 4]>::try_from(shape).map_err(|_| format!("expected [N, C, H, W], got shape {shape:?}"))
}

/// Propagates a batched input shape through a chain, naming the first offending layer.
pub fn chain_output_shape(specs: &[LayerSpec], input: &[usize]) -> Result<Vec<usize>> {
    let mut shape = input.to_vec();
    for (i, spec) in specs.iter().enumerate() {
        shape = spec.output_shape(&shape).map_err(|m| Error::layer(i, m))?;
    }
    Ok(shape)
}

/// Weight and bias of one learned layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Learned tensors of a network, aligned index-for-index with its [`LayerSpec`] chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub layers: Vec<Option<LayerParams<T>>>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(specs: &[LayerSpec]) -> Self {
        let layers = specs
            .iter()
            .map(|s| {
                s.param_shapes().map(|(w, b)| LayerParams { weight: Tensor::zeros(w), bias: Tensor::zeros(b) })
            })
            .collect();
        Self { layers }
    }

    /// Kaiming-style uniform weights in `±√(6/fan_in)` and zero biases,
    /// drawn layer by layer in chain order.
    pub fn kaiming_uniform<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Self {
        let mut params = Self::zeros(specs);
        for (spec, slot) in specs.iter().zip(params.layers.iter_mut()) {
            if let Some(p) = slot {
                let bound = (6.0 / spec.fan_in() as f64).sqrt();
                for w in p.weight.data_mut() {
                    *w = T::lit(rng.random_range(-bound..bound));
                }
            }
        }
        params
    }

    /// Checks that every learned layer has tensors of the right shapes.
    pub fn check_congruent(&self, specs: &[LayerSpec]) -> Result<()> {
        if self.layers.len() != specs.len() {
            return Err(Error::Config(format!(
                "parameter set has {} layers, chain has {}",
                self.layers.len(),
                specs.len()
            )));
        }
        for (i, (spec, slot)) in specs.iter().zip(&self.layers).enumerate() {
            match (spec.param_shapes(), slot) {
                (None, None) => {}
                (Some((w, b)), Some(p)) if p.weight.shape() == w.as_slice() && p.bias.shape() == b.as_slice() => {}
                (Some((w, b)), Some(p)) => {
                    return Err(Error::layer(
                        i,
                        format!(
                            "{} parameters have shapes {:?}/{:?}, expected {w:?}/{b:?}",
                            spec.name(),
                            p.weight.shape(),
                            p.bias.shape()
                        ),
                    ))
                }
                (Some(_), None) => return Err(Error::layer(i, format!("{} is missing parameters", spec.name()))),
                (None, Some(_)) => return Err(Error::layer(i, format!("{} takes no parameters", spec.name()))),
            }
        }
        Ok(())
    }

    /// `(name, tensor)` pairs in chain order: `layer{i}.weight`, `layer{i}.bias`.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, slot) in self.layers.iter().enumerate() {
            if let Some(p) = slot {
                out.push((format!("layer{i}.weight"), &p.weight));
                out.push((format!("layer{i}.bias"), &p.bias));
            }
        }
        out
    }

    pub fn learned_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.is_some()).count()
    }

    pub fn scalar_count(&self) -> usize {
        self.layers.iter().flatten().map(|p| p.weight.len() + p.bias.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            layers: self
                .layers
                .iter()
                .map(|l| l.as_ref().map(|p| LayerParams { weight: p.weight.cast(), bias: p.bias.cast() }))
                .collect(),
        }
    }

    /// Flat mutable views over every learned scalar, weights before biases per layer.
    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers.iter_mut().flatten().flat_map(|p| [&mut p.weight, &mut p.bias])
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flatten().flat_map(|p| [&p.weight, &p.bias])
    }
}
