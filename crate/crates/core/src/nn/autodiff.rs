//! Forward evaluation with a recorded tape, and reverse-mode gradients over it.

use crate::error::{Error, Result};
use crate::nn::layers::{LayerParams, LayerSpec, Params};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-layer data the backward pass needs beyond the activations.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerCache {
    None,
    /// The layer input is the pre-activation; kept in the activation list.
    Relu,
    /// Flat input offset of the winner for every pooled output element.
    PoolArgmax(Vec<usize>),
}

/// Everything recorded while evaluating a chain forward.
#[derive(Clone, Debug)]
pub struct ForwardTape<T> {
    specs: Vec<LayerSpec>,
    /// `activations[i]` is the input of layer `i`; the last entry is the output.
    activations: Vec<Tensor<T>>,
    caches: Vec<LayerCache>,
}

/// Borrowed view of one layer's recorded input, output and cache.
#[derive(Clone, Copy, Debug)]
pub struct LayerRecord<'a, T> {
    pub spec: &'a LayerSpec,
    pub input: &'a Tensor<T>,
    pub output: &'a Tensor<T>,
    pub cache: &'a LayerCache,
}

impl<T: Scalar> ForwardTape<T> {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn record(&self, layer: usize) -> LayerRecord<'_, T> {
        LayerRecord {
            spec: &self.specs[layer],
            input: &self.activations[layer],
            output: &self.activations[layer + 1],
            cache: &self.caches[layer],
        }
    }

    pub fn input(&self) -> &Tensor<T> {
        &self.activations[0]
    }

    pub fn output(&self) -> &Tensor<T> {
        self.activations.last().expect("tape holds at least the input")
    }
}

/// Gradients of a scalar loss with respect to every learned tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads<T> {
    pub layers: Vec<Option<LayerParams<T>>>,
}

impl<T: Scalar> ParamGrads<T> {
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flatten().flat_map(|p| [&p.weight, &p.bias])
    }

    pub fn max_abs(&self) -> T {
        self.tensors().flat_map(|t| t.data().iter()).fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Runs the chain on a batch and records the tape.
///
/// Returns the final activation (raw class scores for a classifier chain).
pub fn forward_pass<T: Scalar>(
    params: &Params<T>,
    specs: &[LayerSpec],
    batch: &Tensor<T>,
) -> Result<(Tensor<T>, ForwardTape<T>)> {
    params.check_congruent(specs)?;
    let mut activations = Vec::with_capacity(specs.len() + 1);
    let mut caches = Vec::with_capacity(specs.len());
    activations.push(batch.clone());
    for (i, spec) in specs.iter().enumerate() {
        let x = activations.last().expect("nonempty");
        let out_shape = spec.output_shape(x.shape()).map_err(|m| Error::layer(i, m))?;
        let (y, cache) = match *spec {
            LayerSpec::Conv2d { kernel, padding, .. } => {
                let p = params.layers[i].as_ref().expect("congruent");
                (conv_forward(x, p, kernel, padding, &out_shape), LayerCache::None)
            }
            LayerSpec::Relu => (x.map(|v| if v > T::zero() { v } else { T::zero() }), LayerCache::Relu),
            LayerSpec::MaxPool2 => {
                let (y, arg) = pool_forward(x, &out_shape);
                (y, LayerCache::PoolArgmax(arg))
            }
            LayerSpec::Flatten => (x.clone().reshape(out_shape)?, LayerCache::None),
            LayerSpec::Dense { .. } => {
                let p = params.layers[i].as_ref().expect("congruent");
                (dense_forward(x, p, &out_shape), LayerCache::None)
            }
        };
        activations.push(y);
        caches.push(cache);
    }
    let tape = ForwardTape { specs: specs.to_vec(), activations, caches };
    Ok((tape.output().clone(), tape))
}

/// Reverse pass: gradients of the loss with respect to every learned tensor.
pub fn backward_pass<T: Scalar>(
    tape: &ForwardTape<T>,
    params: &Params<T>,
    loss_grad: &Tensor<T>,
) -> Result<ParamGrads<T>> {
    backward_impl(tape, params, loss_grad, false).map(|(g, _)| g)
}

/// Reverse pass that also returns the gradient with respect to the network input.
pub fn backward_pass_with_input<T: Scalar>(
    tape: &ForwardTape<T>,
    params: &Params<T>,
    loss_grad: &Tensor<T>,
) -> Result<(ParamGrads<T>, Tensor<T>)> {
    backward_impl(tape, params, loss_grad, true).map(|(g, x)| (g, x.expect("input gradient requested")))
}

fn backward_impl<T: Scalar>(
    tape: &ForwardTape<T>,
    params: &Params<T>,
    loss_grad: &Tensor<T>,
    want_input: bool,
) -> Result<(ParamGrads<T>, Option<Tensor<T>>)> {
    params
        .check_congruent(&tape.specs)
        .map_err(|e| Error::Internal(format!("tape does not match parameters: {e}")))?;
    if loss_grad.shape() != tape.output().shape() {
        return Err(Error::Internal(format!(
            "upstream gradient shape {:?} differs from tape output {:?}",
            loss_grad.shape(),
            tape.output().shape()
        )));
    }
    let mut grads = ParamGrads { layers: vec![None; tape.len()] };
    let mut g = loss_grad.clone();
    for i in (0..tape.len()).rev() {
        let rec = tape.record(i);
        let need_dx = want_input || i > 0;
        g = match (*rec.spec, rec.cache) {
            (LayerSpec::Conv2d { kernel, padding, .. }, _) => {
                let p = params.layers[i].as_ref().expect("congruent");
                let (lp, dx) = conv_backward(rec.input, p, kernel, padding, &g, need_dx);
                grads.layers[i] = Some(lp);
                match dx {
                    Some(dx) => dx,
                    None => break,
                }
            }
            (LayerSpec::Relu, _) => relu_backward(rec.input, &g),
            (LayerSpec::MaxPool2, LayerCache::PoolArgmax(arg)) => pool_route(rec.input.shape(), arg, &g),
            (LayerSpec::MaxPool2, _) => return Err(Error::Internal(format!("layer {i}: pool cache missing"))),
            (LayerSpec::Flatten, _) => g.reshape(rec.input.shape().to_vec())?,
            (LayerSpec::Dense { .. }, _) => {
                let p = params.layers[i].as_ref().expect("congruent");
                let (lp, dx) = dense_backward(rec.input, p, &g, need_dx);
                grads.layers[i] = Some(lp);
                match dx {
                    Some(dx) => dx,
                    None => break,
                }
            }
        };
    }
    let input_grad = if want_input { Some(g) } else { None };
    Ok((grads, input_grad))
}

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new(input: &[usize], k: usize, pad: usize) -> Self {
        let (c, h, w) = (input[1], input[2], input[3]);
        Self { c, h, w, k, pad, oh: h + 2 * pad - k + 1, ow: w + 2 * pad - k + 1 }
    }

    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn pixels(&self) -> usize {
        self.oh * self.ow
    }

    /// Output columns `[lo, hi)` whose input column `ox + kj - pad` is in range.
    fn valid_cols(&self, kj: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kj);
        let hi = (self.w + self.pad).saturating_sub(kj).min(self.ow);
        (lo, hi.max(lo))
    }
}

/// Unfolds one `[C,H,W]` sample into `[C·k·k, oh·ow]` patch columns.
fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, col: &mut [T]) {
    let p = g.pixels();
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut col[row * p..(row + 1) * p];
                let (lo, hi) = g.valid_cols(kj);
                for oy in 0..g.oh {
                    let out = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    let iy = oy + ki;
                    if iy < g.pad || iy - g.pad >= g.h {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &plane[(iy - g.pad) * g.w..(iy - g.pad + 1) * g.w];
                    out[..lo].fill(T::zero());
                    out[hi..].fill(T::zero());
                    if hi > lo {
                        out[lo..hi].copy_from_slice(&src[lo + kj - g.pad..hi + kj - g.pad]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch columns back, accumulating into `dx`.
fn col2im<T: Scalar>(col: &[T], g: &ConvGeom, dx: &mut [T]) {
    let p = g.pixels();
    for c in 0..g.c {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &col[row * p..(row + 1) * p];
                let (lo, hi) = g.valid_cols(kj);
                if hi <= lo {
                    continue;
                }
                for oy in 0..g.oh {
                    let iy = oy + ki;
                    if iy < g.pad || iy - g.pad >= g.h {
                        continue;
                    }
                    let dst = &mut plane[(iy - g.pad) * g.w..(iy - g.pad + 1) * g.w];
                    let s = &src[oy * g.ow..(oy + 1) * g.ow];
                    for (d, &v) in dst[lo + kj - g.pad..hi + kj - g.pad].iter_mut().zip(&s[lo..hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
}

fn conv_forward<T: Scalar>(x: &Tensor<T>, p: &LayerParams<T>, k: usize, pad: usize, out_shape: &[usize]) -> Tensor<T> {
    let g = ConvGeom::new(x.shape(), k, pad);
    let n = x.shape()[0];
    let o = out_shape[1];
    let (r, px) = (g.rows(), g.pixels());
    let mut out = Tensor::zeros(out_shape.to_vec());
    let mut col = vec![T::zero(); r * px];
    let in_stride = g.c * g.h * g.w;
    for s in 0..n {
        im2col(&x.data()[s * in_stride..(s + 1) * in_stride], &g, &mut col);
        let dst = &mut out.data_mut()[s * o * px..(s + 1) * o * px];
        for (oc, chunk) in dst.chunks_mut(px).enumerate() {
            chunk.fill(p.bias.data()[oc]);
        }
        T::gemm(o, r, px, p.weight.data(), (r, 1), &col, (px, 1), true, dst, (px, 1));
    }
    out
}

fn conv_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &LayerParams<T>,
    k: usize,
    pad: usize,
    gout: &Tensor<T>,
    need_dx: bool,
) -> (LayerParams<T>, Option<Tensor<T>>) {
    let g = ConvGeom::new(x.shape(), k, pad);
    let n = x.shape()[0];
    let o = gout.shape()[1];
    let (r, px) = (g.rows(), g.pixels());
    let mut dw = Tensor::zeros(p.weight.shape().to_vec());
    let mut db = Tensor::zeros(p.bias.shape().to_vec());
    let mut dx = need_dx.then(|| Tensor::zeros(x.shape().to_vec()));
    let mut col = vec![T::zero(); r * px];
    let in_stride = g.c * g.h * g.w;
    for s in 0..n {
        let go = &gout.data()[s * o * px..(s + 1) * o * px];
        im2col(&x.data()[s * in_stride..(s + 1) * in_stride], &g, &mut col);
        // dW[o, r] += Σ_p gout[o, p] · col[r, p]
        T::gemm(o, px, r, go, (px, 1), &col, (1, px), true, dw.data_mut(), (r, 1));
        for (b, chunk) in db.data_mut().iter_mut().zip(go.chunks(px)) {
            *b += chunk.iter().copied().sum::<T>();
        }
        if let Some(dx) = dx.as_mut() {
            // dcol[r, p] = Σ_o W[o, r] · gout[o, p]
            T::gemm(r, o, px, p.weight.data(), (1, r), go, (px, 1), false, &mut col, (px, 1));
            col2im(&col, &g, &mut dx.data_mut()[s * in_stride..(s + 1) * in_stride]);
        }
    }
    (LayerParams { weight: dw, bias: db }, dx)
}

/// Gradient of a convolution with respect to its input only.
pub(crate) fn conv_input_grad<T: Scalar>(
    input_shape: &[usize],
    weight: &Tensor<T>,
    k: usize,
    pad: usize,
    gout: &Tensor<T>,
) -> Tensor<T> {
    let g = ConvGeom::new(input_shape, k, pad);
    let n = input_shape[0];
    let o = gout.shape()[1];
    let (r, px) = (g.rows(), g.pixels());
    let mut dx = Tensor::zeros(input_shape.to_vec());
    let mut col = vec![T::zero(); r * px];
    let in_stride = g.c * g.h * g.w;
    for s in 0..n {
        let go = &gout.data()[s * o * px..(s + 1) * o * px];
        T::gemm(r, o, px, weight.data(), (1, r), go, (px, 1), false, &mut col, (px, 1));
        col2im(&col, &g, &mut dx.data_mut()[s * in_stride..(s + 1) * in_stride]);
    }
    dx
}

fn dense_forward<T: Scalar>(x: &Tensor<T>, p: &LayerParams<T>, out_shape: &[usize]) -> Tensor<T> {
    let (n, f) = (x.shape()[0], x.shape()[1]);
    let o = out_shape[1];
    let mut out = Tensor::zeros(out_shape.to_vec());
    for row in out.data_mut().chunks_mut(o) {
        row.copy_from_slice(p.bias.data());
    }
    // out[n, o] += Σ_f x[n, f] · W[o, f]
    T::gemm(n, f, o, x.data(), (f, 1), p.weight.data(), (1, f), true, out.data_mut(), (o, 1));
    out
}

fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &LayerParams<T>,
    gout: &Tensor<T>,
    need_dx: bool,
) -> (LayerParams<T>, Option<Tensor<T>>) {
    let (n, f) = (x.shape()[0], x.shape()[1]);
    let o = gout.shape()[1];
    let mut dw = Tensor::zeros(p.weight.shape().to_vec());
    T::gemm(o, n, f, gout.data(), (1, o), x.data(), (f, 1), false, dw.data_mut(), (f, 1));
    let mut db = Tensor::zeros(p.bias.shape().to_vec());
    for row in gout.data().chunks(o) {
        for (b, &v) in db.data_mut().iter_mut().zip(row) {
            *b += v;
        }
    }
    let dx = need_dx.then(|| dense_input_grad(x.shape(), &p.weight, gout));
    (LayerParams { weight: dw, bias: db }, dx)
}

/// Gradient of a dense layer with respect to its input only.
pub(crate) fn dense_input_grad<T: Scalar>(input_shape: &[usize], weight: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let (n, f) = (input_shape[0], input_shape[1]);
    let o = gout.shape()[1];
    let mut dx = Tensor::zeros(input_shape.to_vec());
    T::gemm(n, o, f, gout.data(), (o, 1), weight.data(), (f, 1), false, dx.data_mut(), (f, 1));
    dx
}

fn relu_backward<T: Scalar>(pre: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    let data = pre.data().iter().zip(g.data()).map(|(&x, &gv)| if x > T::zero() { gv } else { T::zero() }).collect();
    Tensor::new(pre.shape().to_vec(), data).expect("same shape")
}

fn pool_forward<T: Scalar>(x: &Tensor<T>, out_shape: &[usize]) -> (Tensor<T>, Vec<usize>) {
    let (h, w) = (x.shape()[2], x.shape()[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let planes = out_shape[0] * out_shape[1];
    let mut out = Tensor::zeros(out_shape.to_vec());
    let mut arg = Vec::with_capacity(out.len());
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..planes {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let mut best = top;
                // row-major scan, strict comparison: first maximum wins
                for cand in [top + 1, top + w, top + w + 1] {
                    if src[cand] > src[best] {
                        best = cand;
                    }
                }
                dst[(plane * oh + oy) * ow + ox] = src[best];
                arg.push(best);
            }
        }
    }
    (out, arg)
}

/// Sends each upstream element to its recorded argmax input position.
pub(crate) fn pool_route<T: Scalar>(input_shape: &[usize], argmax: &[usize], g: &Tensor<T>) -> Tensor<T> {
    let mut dx = Tensor::zeros(input_shape.to_vec());
    let d = dx.data_mut();
    for (&idx, &v) in argmax.iter().zip(g.data()) {
        d[idx] += v;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(spec: LayerSpec, weight: Vec<f64>, bias: Vec<f64>) -> (Vec<LayerSpec>, Params<f64>) {
        let specs = vec![spec];
        let mut params = Params::zeros(&specs);
        let p = params.layers[0].as_mut().unwrap();
        p.weight.data_mut().copy_from_slice(&weight);
        p.bias.data_mut().copy_from_slice(&bias);
        (specs, params)
    }

    #[test]
    fn dense_identity_passes_input_through() {
        let (specs, params) = single(LayerSpec::dense(2, 2), vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]);
        let x = Tensor::from_f64(vec![1, 2], &[3.0, -1.0]).unwrap();
        let (y, _) = forward_pass(&params, &specs, &x).unwrap();
        assert_eq!(y.data(), &[3.0, -1.0]);
    }

    #[test]
    fn conv_2x2_ones_no_padding() {
        let spec = LayerSpec::Conv2d { in_channels: 1, out_channels: 1, kernel: 2, padding: 0 };
        let (specs, params) = single(spec, vec![1.0; 4], vec![0.0]);
        let x = Tensor::from_f64(vec![1, 1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]).unwrap();
        let (y, _) = forward_pass(&params, &specs, &x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[12.0, 16.0, 24.0, 28.0]);
    }

    /// Direct nested-loop convolution with zero padding.
    fn conv_oracle(x: &[f64], c: usize, h: usize, w: usize, wt: &[f64], o: usize, k: usize, pad: usize) -> Vec<f64> {
        let (oh, ow) = (h + 2 * pad - k + 1, w + 2 * pad - k + 1);
        let mut out = vec![0.0; o * oh * ow];
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ki in 0..k {
                            for kj in 0..k {
                                let iy = oy as isize + ki as isize - pad as isize;
                                let ix = ox as isize + kj as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += x[(ic * h + iy as usize) * w + ix as usize]
                                        * wt[((oc * c + ic) * k + ki) * k + kj];
                                }
                            }
                        }
                    }
                    out[(oc * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn padded_conv_matches_nested_loops() {
        let (c, h, w, o) = (2, 5, 4, 3);
        let spec = LayerSpec::conv3x3(c, o);
        let wt: Vec<f64> = (0..o * c * 9).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect();
        let (specs, params) = single(spec, wt.clone(), vec![0.0; o]);
        let xs: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = Tensor::from_f64(vec![1, c, h, w], &xs).unwrap();
        let (y, _) = forward_pass(&params, &specs, &x).unwrap();
        for (a, b) in y.data().iter().zip(conv_oracle(&xs, c, h, w, &wt, o, 3, 1)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_kernel_gives_zero_output() {
        let (specs, params) = single(LayerSpec::conv3x3(1, 2), vec![0.0; 18], vec![0.0; 2]);
        let x = Tensor::from_fn(vec![2, 1, 4, 4], |i| i as f64 - 7.0);
        let (y, _) = forward_pass(&params, &specs, &x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_zeroes_negatives_and_blocks_gradient() {
        let specs = vec![LayerSpec::Relu];
        let params = Params::<f64>::zeros(&specs);
        let x = Tensor::from_f64(vec![1, 3], &[-1.0, -2.0, -0.5]).unwrap();
        let (y, tape) = forward_pass(&params, &specs, &x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert_eq!(tape.record(0).input.data(), &[-1.0, -2.0, -0.5]);
        let (_, dx) = backward_pass_with_input(&tape, &params, &Tensor::full(vec![1, 3], 1.0)).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_gradient_at_zero_is_zero() {
        let specs = vec![LayerSpec::Relu];
        let params = Params::<f64>::zeros(&specs);
        let x = Tensor::from_f64(vec![1, 2], &[0.0, 1.0]).unwrap();
        let (_, tape) = forward_pass(&params, &specs, &x).unwrap();
        let (_, dx) = backward_pass_with_input(&tape, &params, &Tensor::full(vec![1, 2], 1.0)).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0]);
    }

    #[test]
    fn pool_ties_pick_first_in_scan_order() {
        let specs = vec![LayerSpec::MaxPool2];
        let params = Params::<f64>::zeros(&specs);
        let x = Tensor::from_f64(vec![1, 1, 2, 2], &[5.0, 5.0, 5.0, 5.0]).unwrap();
        let (_, tape) = forward_pass(&params, &specs, &x).unwrap();
        assert_eq!(tape.record(0).cache, &LayerCache::PoolArgmax(vec![0]));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let specs = vec![LayerSpec::conv3x3(1, 2), LayerSpec::Relu, LayerSpec::Flatten, LayerSpec::dense(32, 2)];
        let mut params = Params::<f64>::zeros(&specs);
        for (i, t) in params.tensors_mut().enumerate() {
            for (j, v) in t.data_mut().iter_mut().enumerate() {
                *v = ((i * 31 + j * 17) % 13) as f64 / 6.0 - 1.0;
            }
        }
        let x = Tensor::from_fn(vec![2, 1, 4, 4], |i| (i as f64).cos());
        let (_, tape) = forward_pass(&params, &specs, &x).unwrap();
        let grads = backward_pass(&tape, &params, &Tensor::zeros(vec![2, 2])).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn mismatched_params_are_rejected() {
        let specs = vec![LayerSpec::dense(3, 2)];
        let params = Params::<f64>::zeros(&[LayerSpec::dense(4, 2)]);
        let x = Tensor::zeros(vec![1, 3]);
        assert!(matches!(forward_pass(&params, &specs, &x), Err(Error::Layer { layer: 0, .. })));
    }
}
