use crate::error::{Error, Result};
use crate::nn::autodiff::ParamGrads;
use crate::nn::layers::Params;
use crate::scalar::Scalar;

/// Plain stochastic gradient descent: `θ ← θ − lr·g`, elementwise.
pub fn sgd_step<T: Scalar>(params: &mut Params<T>, grads: &ParamGrads<T>, lr: T) -> Result<()> {
    if params.layers.len() != grads.layers.len() {
        return Err(Error::Input("gradient set does not match parameter set".into()));
    }
    for (i, (p, g)) in params.layers.iter_mut().zip(&grads.layers).enumerate() {
        match (p, g) {
            (Some(p), Some(g)) => {
                for (dst, src) in [(&mut p.weight, &g.weight), (&mut p.bias, &g.bias)] {
                    if dst.shape() != src.shape() {
                        return Err(Error::Input(format!("layer {i}: gradient shape mismatch")));
                    }
                    for (w, &d) in dst.data_mut().iter_mut().zip(src.data()) {
                        *w -= lr * d;
                    }
                }
            }
            (None, None) => {}
            // A learned layer without a gradient is left untouched.
            (Some(_), None) => {}
            (None, Some(_)) => return Err(Error::Input(format!("layer {i}: gradient for a parameter-free layer"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{LayerParams, LayerSpec};
    use crate::tensor::Tensor;

    fn one_weight(w: f32, g: f32) -> (Params<f32>, ParamGrads<f32>) {
        let specs = [LayerSpec::dense(1, 1)];
        let mut p = Params::zeros(&specs);
        p.layers[0].as_mut().unwrap().weight.data_mut()[0] = w;
        let grads = ParamGrads {
            layers: vec![Some(LayerParams {
                weight: Tensor::full(vec![1, 1], g),
                bias: Tensor::zeros(vec![1]),
            })],
        };
        (p, grads)
    }

    #[test]
    fn closed_form_step() {
        let (mut p, g) = one_weight(1.0, 2.0);
        sgd_step(&mut p, &g, 0.1).unwrap();
        assert!((p.layers[0].as_ref().unwrap().weight.data()[0] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn zero_rate_or_zero_gradient_is_bit_identical() {
        let (mut p, g) = one_weight(0.123_456_7, 2.0);
        let before = p.clone();
        sgd_step(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);
        let (mut p, g) = one_weight(0.123_456_7, 0.0);
        sgd_step(&mut p, &g, 0.5).unwrap();
        assert_eq!(p, before);
    }
}
