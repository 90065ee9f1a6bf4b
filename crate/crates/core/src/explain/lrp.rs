use crate::error::{Error, Result};
use crate::explain::{as_batch, ExplainerKind, RelevanceMap, Target};
use crate::model::Network;
use crate::nn::autodiff::{conv_input_grad, dense_input_grad, pool_route};
use crate::nn::{forward_pass, LayerCache, LayerSpec, Params};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrpConfig {
    /// Stabilizer added to each denominator with the sign of the pre-activation.
    pub epsilon: f64,
    pub target: Target,
}

impl Default for LrpConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6, target: Target::Predicted }
    }
}

/// Epsilon-rule relevance of every input element for one output unit.
///
/// `batch` must hold a single sample. Relevance starts as the target score
/// itself; dense and convolution layers redistribute it in proportion to
/// `aⱼwⱼₖ / (zₖ + ε·sign(zₖ))`, where `zₖ` includes the bias, so bias shares
/// are absorbed. ReLU passes relevance through and max pooling hands it to
/// the recorded winner.
pub fn lrp_relevance<T: Scalar>(
    params: &Params<T>,
    specs: &[LayerSpec],
    batch: &Tensor<T>,
    target: usize,
    epsilon: f64,
) -> Result<Tensor<T>> {
    if batch.shape().first() != Some(&1) {
        return Err(Error::Input(format!("LRP explains one sample at a time, got batch shape {:?}", batch.shape())));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Config(format!("LRP epsilon must be non-negative, got {epsilon}")));
    }
    let (out, tape) = forward_pass(params, specs, batch)?;
    if out.ndim() != 2 || target >= out.shape()[1] {
        return Err(Error::Input(format!("target {target} not available in output of shape {:?}", out.shape())));
    }
    let eps = T::lit(epsilon);
    let mut relevance = Tensor::zeros(out.shape().to_vec());
    relevance.data_mut()[target] = out.data()[target];

    for i in (0..tape.len()).rev() {
        let rec = tape.record(i);
        relevance = match (*rec.spec, rec.cache) {
            (LayerSpec::Conv2d { kernel, padding, .. }, _) => {
                let p = params.layers[i].as_ref().expect("congruent");
                let s = stabilized_ratio(&relevance, rec.output, eps);
                let c = conv_input_grad(rec.input.shape(), &p.weight, kernel, padding, &s);
                hadamard(rec.input, &c)
            }
            (LayerSpec::Dense { .. }, _) => {
                let p = params.layers[i].as_ref().expect("congruent");
                let s = stabilized_ratio(&relevance, rec.output, eps);
                let c = dense_input_grad(rec.input.shape(), &p.weight, &s);
                hadamard(rec.input, &c)
            }
            (LayerSpec::Relu, _) => relevance,
            (LayerSpec::MaxPool2, LayerCache::PoolArgmax(arg)) => pool_route(rec.input.shape(), arg, &relevance),
            (LayerSpec::Flatten, _) => relevance.reshape(rec.input.shape().to_vec())?,
            (spec, _) => return Err(Error::layer(i, format!("LRP cannot propagate through {}", spec.name()))),
        };
    }
    Ok(relevance)
}

/// `R / (z + ε·sign z)` with `sign 0 = +1`; a zero denominator carries no relevance.
fn stabilized_ratio<T: Scalar>(relevance: &Tensor<T>, z: &Tensor<T>, eps: T) -> Tensor<T> {
    let data = relevance
        .data()
        .iter()
        .zip(z.data())
        .map(|(&r, &zk)| {
            let denom = if zk >= T::zero() { zk + eps } else { zk - eps };
            if denom == T::zero() {
                T::zero()
            } else {
                r / denom
            }
        })
        .collect();
    Tensor::new(z.shape().to_vec(), data).expect("same shape")
}

fn hadamard<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

/// Pixel-level LRP map for one `[C, H, W]` image, summed over channels.
pub fn lrp_explain<T: Scalar>(net: &Network<'_, T>, image: &Tensor<T>, config: &LrpConfig) -> Result<RelevanceMap<T>> {
    let batch = as_batch(net, image)?;
    let target = config.target.resolve(net, image)?;
    let rel = lrp_relevance(net.params, &net.config.layers, &batch, target, config.epsilon)?;
    let [c, h, w] = net.config.input;
    let mut values = Tensor::zeros(vec![h, w]);
    for ch in 0..c {
        for (dst, &src) in values.data_mut().iter_mut().zip(&rel.data()[ch * h * w..(ch + 1) * h * w]) {
            *dst += src;
        }
    }
    Ok(RelevanceMap { values, explainer: ExplainerKind::Lrp, target, source: String::new() })
}
