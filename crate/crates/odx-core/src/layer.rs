//! The fixed layer vocabulary and its forward/backward kernels.
//!
//! Layers operate on flat row-major activation buffers. Spatial layers carry
//! their expected (channels, height, width) input shape; shape compatibility
//! across a stack is validated once at model-construction time, so the hot
//! kernels only debug-assert.
//!
//! `conv_transpose` is defined as the adjoint of `conv` with the same stride
//! and padding: its forward pass scatters through the kernel exactly where a
//! convolution would gather, which makes the conv/conv_transpose gradient
//! pair self-consistent and testable via the inner-product identity.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// y = W x + b with W of shape (out, in).
    Dense { weight: Tensor, bias: Tensor },
    /// Zero-padded strided convolution; weight (out_c, in_c, kh, kw).
    Conv {
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
        in_shape: [usize; 3],
    },
    /// Adjoint of `Conv`; weight (in_c, out_c, kh, kw).
    ConvTranspose {
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
        in_shape: [usize; 3],
    },
    /// Per-channel affine normalization with frozen running statistics.
    BatchnormInference {
        scale: Tensor,
        shift: Tensor,
        mean: Tensor,
        variance: Tensor,
        epsilon: f64,
        channels: usize,
    },
    Relu,
    Tanh,
    Sigmoid,
    /// Reinterprets the buffer under a new shape of identical element count.
    Reshape { shape: Vec<usize> },
    /// Nearest-neighbour upsampling by an integer factor.
    UpsampleNearest { factor: usize, in_shape: [usize; 3] },
    /// Appends a one-hot class encoding to the input vector.
    ConcatOnehot { class_count: usize },
}

/// Gradients with respect to one layer's parameters; `None` for layers
/// without parameters.
#[derive(Debug, Clone)]
pub enum LayerGrads {
    None,
    Dense { d_weight: Tensor, d_bias: Tensor },
    Conv { d_weight: Tensor, d_bias: Tensor },
    ConvTranspose { d_weight: Tensor, d_bias: Tensor },
    Batchnorm { d_scale: Tensor, d_shift: Tensor },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::ConvTranspose { .. } => "conv_transpose",
            LayerSpec::BatchnormInference { .. } => "batchnorm_inference",
            LayerSpec::Relu => "relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Reshape { .. } => "reshape",
            LayerSpec::UpsampleNearest { .. } => "upsample_nearest",
            LayerSpec::ConcatOnehot { .. } => "concat_onehot",
        }
    }

    /// Validates the layer's own parameters (shapes, positivity).
    pub fn validate(&self) -> Result<()> {
        match self {
            LayerSpec::Dense { weight, bias } => {
                if weight.shape().len() != 2 {
                    return Err(Error::dimension(format!(
                        "dense weight must be rank 2, got {:?}",
                        weight.shape()
                    )));
                }
                if bias.shape() != [weight.shape()[0]] {
                    return Err(Error::dimension(format!(
                        "dense bias {:?} does not match weight rows {}",
                        bias.shape(),
                        weight.shape()[0]
                    )));
                }
                Ok(())
            }
            LayerSpec::Conv {
                weight,
                bias,
                stride,
                in_shape,
                ..
            } => {
                if weight.shape().len() != 4 {
                    return Err(Error::dimension("conv weight must be rank 4".to_string()));
                }
                if weight.shape()[1] != in_shape[0] {
                    return Err(Error::dimension(format!(
                        "conv weight expects {} input channels, layer declares {}",
                        weight.shape()[1],
                        in_shape[0]
                    )));
                }
                if bias.shape() != [weight.shape()[0]] {
                    return Err(Error::dimension("conv bias/weight mismatch".to_string()));
                }
                if *stride == 0 {
                    return Err(Error::parameter("conv stride must be >= 1".to_string()));
                }
                Ok(())
            }
            LayerSpec::ConvTranspose {
                weight,
                bias,
                stride,
                in_shape,
                ..
            } => {
                if weight.shape().len() != 4 {
                    return Err(Error::dimension(
                        "conv_transpose weight must be rank 4".to_string(),
                    ));
                }
                if weight.shape()[0] != in_shape[0] {
                    return Err(Error::dimension(format!(
                        "conv_transpose weight expects {} input channels, layer declares {}",
                        weight.shape()[0],
                        in_shape[0]
                    )));
                }
                if bias.shape() != [weight.shape()[1]] {
                    return Err(Error::dimension(
                        "conv_transpose bias/weight mismatch".to_string(),
                    ));
                }
                if *stride == 0 {
                    return Err(Error::parameter(
                        "conv_transpose stride must be >= 1".to_string(),
                    ));
                }
                Ok(())
            }
            LayerSpec::BatchnormInference {
                scale,
                shift,
                mean,
                variance,
                epsilon,
                channels,
            } => {
                let c = *channels;
                for (name, t) in [
                    ("scale", scale),
                    ("shift", shift),
                    ("mean", mean),
                    ("variance", variance),
                ] {
                    if t.shape() != [c] {
                        return Err(Error::dimension(format!(
                            "batchnorm {name} must have shape [{c}], got {:?}",
                            t.shape()
                        )));
                    }
                }
                if variance.data().iter().any(|&v| v <= 0.0) {
                    return Err(Error::parameter(
                        "batchnorm variance entries must be strictly positive".to_string(),
                    ));
                }
                if *epsilon <= 0.0 {
                    return Err(Error::parameter(
                        "batchnorm epsilon must be positive".to_string(),
                    ));
                }
                Ok(())
            }
            LayerSpec::Reshape { shape } => {
                if shape.is_empty() || shape.iter().any(|&e| e == 0) {
                    return Err(Error::dimension(
                        "reshape target must be a non-empty positive shape".to_string(),
                    ));
                }
                Ok(())
            }
            LayerSpec::UpsampleNearest { factor, .. } => {
                if *factor == 0 {
                    return Err(Error::parameter(
                        "upsample factor must be >= 1".to_string(),
                    ));
                }
                Ok(())
            }
            LayerSpec::ConcatOnehot { class_count } => {
                if *class_count == 0 {
                    return Err(Error::parameter(
                        "concat_onehot class count must be >= 1".to_string(),
                    ));
                }
                Ok(())
            }
            LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Sigmoid => Ok(()),
        }
    }

    /// Output length for a given input length; errors on incompatibility.
    pub fn out_len(&self, in_len: usize) -> Result<usize> {
        match self {
            LayerSpec::Dense { weight, .. } => {
                if weight.shape()[1] != in_len {
                    return Err(Error::dimension(format!(
                        "dense expects input width {}, got {in_len}",
                        weight.shape()[1]
                    )));
                }
                Ok(weight.shape()[0])
            }
            LayerSpec::Conv {
                weight,
                stride,
                padding,
                in_shape,
                ..
            } => {
                check_spatial_len(in_shape, in_len, "conv")?;
                let (oh, ow) = conv_out_hw(in_shape, weight.shape(), *stride, *padding)?;
                Ok(weight.shape()[0] * oh * ow)
            }
            LayerSpec::ConvTranspose {
                weight,
                stride,
                padding,
                in_shape,
                ..
            } => {
                check_spatial_len(in_shape, in_len, "conv_transpose")?;
                let (oh, ow) = convt_out_hw(in_shape, weight.shape(), *stride, *padding)?;
                Ok(weight.shape()[1] * oh * ow)
            }
            LayerSpec::BatchnormInference { channels, .. } => {
                if in_len % *channels != 0 {
                    return Err(Error::dimension(format!(
                        "batchnorm over {channels} channels cannot split input of length {in_len}"
                    )));
                }
                Ok(in_len)
            }
            LayerSpec::Reshape { shape } => {
                let n: usize = shape.iter().product();
                if n != in_len {
                    return Err(Error::dimension(format!(
                        "reshape to {shape:?} ({n} elements) from input of length {in_len}"
                    )));
                }
                Ok(in_len)
            }
            LayerSpec::UpsampleNearest { factor, in_shape } => {
                check_spatial_len(in_shape, in_len, "upsample_nearest")?;
                Ok(in_shape[0] * (in_shape[1] * factor) * (in_shape[2] * factor))
            }
            LayerSpec::ConcatOnehot { class_count } => Ok(in_len + class_count),
            LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Sigmoid => Ok(in_len),
        }
    }

    /// Forward evaluation. `class` is consumed only by `concat_onehot`.
    pub fn forward(&self, input: &[f64], class: Option<usize>) -> Vec<f64> {
        match self {
            LayerSpec::Dense { weight, bias } => {
                let (out_w, in_w) = (weight.shape()[0], weight.shape()[1]);
                debug_assert_eq!(input.len(), in_w);
                let w = weight.data();
                let mut out = bias.data().to_vec();
                for (o, out_v) in out.iter_mut().enumerate() {
                    let row = &w[o * in_w..(o + 1) * in_w];
                    let mut acc = 0.0;
                    for (wi, xi) in row.iter().zip(input) {
                        acc += wi * xi;
                    }
                    *out_v += acc;
                }
                debug_assert_eq!(out.len(), out_w);
                out
            }
            LayerSpec::Conv {
                weight,
                bias,
                stride,
                padding,
                in_shape,
            } => conv_forward(input, weight, bias, *stride, *padding, in_shape),
            LayerSpec::ConvTranspose {
                weight,
                bias,
                stride,
                padding,
                in_shape,
            } => convt_forward(input, weight, bias, *stride, *padding, in_shape),
            LayerSpec::BatchnormInference {
                scale,
                shift,
                mean,
                variance,
                epsilon,
                channels,
            } => {
                let per = input.len() / channels;
                let mut out = Vec::with_capacity(input.len());
                for c in 0..*channels {
                    let inv = 1.0 / (variance.data()[c] + epsilon).sqrt();
                    let (g, b, m) = (scale.data()[c], shift.data()[c], mean.data()[c]);
                    for &x in &input[c * per..(c + 1) * per] {
                        out.push(g * (x - m) * inv + b);
                    }
                }
                out
            }
            LayerSpec::Relu => input.iter().map(|&x| x.max(0.0)).collect(),
            LayerSpec::Tanh => input.iter().map(|&x| x.tanh()).collect(),
            LayerSpec::Sigmoid => input.iter().map(|&x| sigmoid(x)).collect(),
            LayerSpec::Reshape { .. } => input.to_vec(),
            LayerSpec::UpsampleNearest { factor, in_shape } => {
                let [c, h, w] = *in_shape;
                let f = *factor;
                let (oh, ow) = (h * f, w * f);
                let mut out = vec![0.0; c * oh * ow];
                for ch in 0..c {
                    for i in 0..oh {
                        for j in 0..ow {
                            out[(ch * oh + i) * ow + j] = input[(ch * h + i / f) * w + j / f];
                        }
                    }
                }
                out
            }
            LayerSpec::ConcatOnehot { class_count } => {
                let y = class.expect("concat_onehot requires a class index");
                debug_assert!(y < *class_count);
                let mut out = input.to_vec();
                out.extend(std::iter::repeat(0.0).take(*class_count));
                out[input.len() + y] = 1.0;
                out
            }
        }
    }

    /// Backward pass: given the layer input and the gradient at its output,
    /// returns the gradient at its input plus parameter gradients.
    pub fn backward(&self, input: &[f64], class: Option<usize>, d_out: &[f64]) -> (Vec<f64>, LayerGrads) {
        match self {
            LayerSpec::Dense { weight, .. } => {
                let (out_w, in_w) = (weight.shape()[0], weight.shape()[1]);
                debug_assert_eq!(d_out.len(), out_w);
                let w = weight.data();
                let mut d_in = vec![0.0; in_w];
                let mut d_weight = vec![0.0; out_w * in_w];
                for o in 0..out_w {
                    let g = d_out[o];
                    let row = &w[o * in_w..(o + 1) * in_w];
                    let d_row = &mut d_weight[o * in_w..(o + 1) * in_w];
                    for i in 0..in_w {
                        d_in[i] += row[i] * g;
                        d_row[i] = g * input[i];
                    }
                }
                (
                    d_in,
                    LayerGrads::Dense {
                        d_weight: Tensor::new(vec![out_w, in_w], d_weight)
                            .expect("gradient buffer matches weight shape"),
                        d_bias: Tensor::from_flat(d_out.to_vec()).expect("finite gradients"),
                    },
                )
            }
            LayerSpec::Conv {
                weight,
                stride,
                padding,
                in_shape,
                ..
            } => conv_backward(input, weight, *stride, *padding, in_shape, d_out),
            LayerSpec::ConvTranspose {
                weight,
                stride,
                padding,
                in_shape,
                ..
            } => convt_backward(input, weight, *stride, *padding, in_shape, d_out),
            LayerSpec::BatchnormInference {
                scale,
                mean,
                variance,
                epsilon,
                channels,
                ..
            } => {
                let per = input.len() / channels;
                let mut d_in = vec![0.0; input.len()];
                let mut d_scale = vec![0.0; *channels];
                let mut d_shift = vec![0.0; *channels];
                for c in 0..*channels {
                    let inv = 1.0 / (variance.data()[c] + epsilon).sqrt();
                    let g = scale.data()[c];
                    let m = mean.data()[c];
                    for k in c * per..(c + 1) * per {
                        d_in[k] = d_out[k] * g * inv;
                        d_scale[c] += d_out[k] * (input[k] - m) * inv;
                        d_shift[c] += d_out[k];
                    }
                }
                (
                    d_in,
                    LayerGrads::Batchnorm {
                        d_scale: Tensor::from_flat(d_scale).expect("finite gradients"),
                        d_shift: Tensor::from_flat(d_shift).expect("finite gradients"),
                    },
                )
            }
            LayerSpec::Relu => (
                input
                    .iter()
                    .zip(d_out)
                    .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                    .collect(),
                LayerGrads::None,
            ),
            LayerSpec::Tanh => (
                input
                    .iter()
                    .zip(d_out)
                    .map(|(&x, &g)| {
                        let t = x.tanh();
                        g * (1.0 - t * t)
                    })
                    .collect(),
                LayerGrads::None,
            ),
            LayerSpec::Sigmoid => (
                input
                    .iter()
                    .zip(d_out)
                    .map(|(&x, &g)| {
                        let s = sigmoid(x);
                        g * s * (1.0 - s)
                    })
                    .collect(),
                LayerGrads::None,
            ),
            LayerSpec::Reshape { .. } => (d_out.to_vec(), LayerGrads::None),
            LayerSpec::UpsampleNearest { factor, in_shape } => {
                let [c, h, w] = *in_shape;
                let f = *factor;
                let (oh, ow) = (h * f, w * f);
                let mut d_in = vec![0.0; c * h * w];
                for ch in 0..c {
                    for i in 0..oh {
                        for j in 0..ow {
                            d_in[(ch * h + i / f) * w + j / f] += d_out[(ch * oh + i) * ow + j];
                        }
                    }
                }
                (d_in, LayerGrads::None)
            }
            LayerSpec::ConcatOnehot { .. } => {
                let _ = class;
                // the one-hot channel receives no gradient
                (d_out[..input.len()].to_vec(), LayerGrads::None)
            }
        }
    }

    /// Views over this layer's parameter tensors, in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            LayerSpec::Dense { weight, bias } => vec![("weight", weight), ("bias", bias)],
            LayerSpec::Conv { weight, bias, .. } => vec![("weight", weight), ("bias", bias)],
            LayerSpec::ConvTranspose { weight, bias, .. } => {
                vec![("weight", weight), ("bias", bias)]
            }
            LayerSpec::BatchnormInference {
                scale,
                shift,
                mean,
                variance,
                ..
            } => vec![
                ("scale", scale),
                ("shift", shift),
                ("mean", mean),
                ("variance", variance),
            ],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            LayerSpec::Dense { weight, bias } => vec![("weight", weight), ("bias", bias)],
            LayerSpec::Conv { weight, bias, .. } => vec![("weight", weight), ("bias", bias)],
            LayerSpec::ConvTranspose { weight, bias, .. } => {
                vec![("weight", weight), ("bias", bias)]
            }
            LayerSpec::BatchnormInference {
                scale,
                shift,
                mean,
                variance,
                ..
            } => vec![
                ("scale", scale),
                ("shift", shift),
                ("mean", mean),
                ("variance", variance),
            ],
            _ => Vec::new(),
        }
    }

    /// Trainable parameter tensors (excludes batchnorm running statistics).
    pub fn trainable_params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            LayerSpec::Dense { weight, bias } => vec![weight, bias],
            LayerSpec::Conv { weight, bias, .. } => vec![weight, bias],
            LayerSpec::ConvTranspose { weight, bias, .. } => vec![weight, bias],
            LayerSpec::BatchnormInference { scale, shift, .. } => vec![scale, shift],
            _ => Vec::new(),
        }
    }
}

impl LayerGrads {
    /// Gradient tensors in the same order as [`LayerSpec::trainable_params_mut`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        match self {
            LayerGrads::None => Vec::new(),
            LayerGrads::Dense { d_weight, d_bias }
            | LayerGrads::Conv { d_weight, d_bias }
            | LayerGrads::ConvTranspose { d_weight, d_bias } => vec![d_weight, d_bias],
            LayerGrads::Batchnorm { d_scale, d_shift } => vec![d_scale, d_shift],
        }
    }

    /// Accumulates `other` into `self` elementwise.
    pub fn accumulate(&mut self, other: &LayerGrads) {
        fn add(into: &mut Tensor, from: &Tensor) {
            for (a, b) in into.data_mut().iter_mut().zip(from.data()) {
                *a += b;
            }
        }
        match (self, other) {
            (LayerGrads::None, LayerGrads::None) => {}
            (
                LayerGrads::Dense { d_weight, d_bias },
                LayerGrads::Dense {
                    d_weight: w,
                    d_bias: b,
                },
            )
            | (
                LayerGrads::Conv { d_weight, d_bias },
                LayerGrads::Conv {
                    d_weight: w,
                    d_bias: b,
                },
            )
            | (
                LayerGrads::ConvTranspose { d_weight, d_bias },
                LayerGrads::ConvTranspose {
                    d_weight: w,
                    d_bias: b,
                },
            ) => {
                add(d_weight, w);
                add(d_bias, b);
            }
            (
                LayerGrads::Batchnorm { d_scale, d_shift },
                LayerGrads::Batchnorm {
                    d_scale: s,
                    d_shift: h,
                },
            ) => {
                add(d_scale, s);
                add(d_shift, h);
            }
            _ => panic!("accumulating gradients of mismatched layer kinds"),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_spatial_len(in_shape: &[usize; 3], in_len: usize, kind: &str) -> Result<()> {
    let expect = in_shape[0] * in_shape[1] * in_shape[2];
    if expect != in_len {
        return Err(Error::dimension(format!(
            "{kind} declares input shape {in_shape:?} ({expect} elements), got {in_len}"
        )));
    }
    Ok(())
}

fn conv_out_hw(
    in_shape: &[usize; 3],
    w_shape: &[usize],
    stride: usize,
    padding: usize,
) -> Result<(usize, usize)> {
    let (h, w) = (in_shape[1], in_shape[2]);
    let (kh, kw) = (w_shape[2], w_shape[3]);
    let span_h = h + 2 * padding;
    let span_w = w + 2 * padding;
    if span_h < kh || span_w < kw {
        return Err(Error::dimension(format!(
            "conv kernel {kh}x{kw} larger than padded input {span_h}x{span_w}"
        )));
    }
    if (span_h - kh) % stride != 0 || (span_w - kw) % stride != 0 {
        return Err(Error::dimension(format!(
            "conv geometry not divisible by stride {stride} (input {h}x{w}, kernel {kh}x{kw}, padding {padding})"
        )));
    }
    Ok(((span_h - kh) / stride + 1, (span_w - kw) / stride + 1))
}

fn convt_out_hw(
    in_shape: &[usize; 3],
    w_shape: &[usize],
    stride: usize,
    padding: usize,
) -> Result<(usize, usize)> {
    let (h, w) = (in_shape[1], in_shape[2]);
    let (kh, kw) = (w_shape[2], w_shape[3]);
    let oh = (h - 1) * stride + kh;
    let ow = (w - 1) * stride + kw;
    if oh < 2 * padding + 1 || ow < 2 * padding + 1 {
        return Err(Error::dimension(format!(
            "conv_transpose output would be empty (input {h}x{w}, kernel {kh}x{kw}, stride {stride}, padding {padding})"
        )));
    }
    Ok((oh - 2 * padding, ow - 2 * padding))
}

fn conv_forward(
    input: &[f64],
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    in_shape: &[usize; 3],
) -> Vec<f64> {
    let [ic, h, w] = *in_shape;
    let ws = weight.shape();
    let (oc, kh, kw) = (ws[0], ws[2], ws[3]);
    let (oh, ow) = conv_out_hw(in_shape, ws, stride, padding).expect("validated at build");
    let wd = weight.data();
    let mut out = vec![0.0; oc * oh * ow];
    for o in 0..oc {
        let b = bias.data()[o];
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = b;
                for c in 0..ic {
                    for u in 0..kh {
                        let y = (i * stride + u) as isize - padding as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for v in 0..kw {
                            let x = (j * stride + v) as isize - padding as isize;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            acc += input[(c * h + y as usize) * w + x as usize]
                                * wd[((o * ic + c) * kh + u) * kw + v];
                        }
                    }
                }
                out[(o * oh + i) * ow + j] = acc;
            }
        }
    }
    out
}

fn conv_backward(
    input: &[f64],
    weight: &Tensor,
    stride: usize,
    padding: usize,
    in_shape: &[usize; 3],
    d_out: &[f64],
) -> (Vec<f64>, LayerGrads) {
    let [ic, h, w] = *in_shape;
    let ws = weight.shape();
    let (oc, kh, kw) = (ws[0], ws[2], ws[3]);
    let (oh, ow) = conv_out_hw(in_shape, ws, stride, padding).expect("validated at build");
    let wd = weight.data();

    let mut d_in = vec![0.0; ic * h * w];
    let mut d_weight = vec![0.0; wd.len()];
    let mut d_bias = vec![0.0; oc];

    for o in 0..oc {
        for i in 0..oh {
            for j in 0..ow {
                let g = d_out[(o * oh + i) * ow + j];
                d_bias[o] += g;
                for c in 0..ic {
                    for u in 0..kh {
                        let y = (i * stride + u) as isize - padding as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for v in 0..kw {
                            let x = (j * stride + v) as isize - padding as isize;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            let iidx = (c * h + y as usize) * w + x as usize;
                            let widx = ((o * ic + c) * kh + u) * kw + v;
                            d_in[iidx] += g * wd[widx];
                            d_weight[widx] += g * input[iidx];
                        }
                    }
                }
            }
        }
    }

    (
        d_in,
        LayerGrads::Conv {
            d_weight: Tensor::new(ws.to_vec(), d_weight).expect("finite gradients"),
            d_bias: Tensor::from_flat(d_bias).expect("finite gradients"),
        },
    )
}

fn convt_forward(
    input: &[f64],
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    in_shape: &[usize; 3],
) -> Vec<f64> {
    let [ic, h, w] = *in_shape;
    let ws = weight.shape();
    let (oc, kh, kw) = (ws[1], ws[2], ws[3]);
    let (oh, ow) = convt_out_hw(in_shape, ws, stride, padding).expect("validated at build");
    let wd = weight.data();

    let mut out = vec![0.0; oc * oh * ow];
    for (o, &b) in bias.data().iter().enumerate() {
        let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        for v in plane.iter_mut() {
            *v = b;
        }
    }
    for c in 0..ic {
        for i in 0..h {
            for j in 0..w {
                let x = input[(c * h + i) * w + j];
                for o in 0..oc {
                    for u in 0..kh {
                        let y = (i * stride + u) as isize - padding as isize;
                        if y < 0 || y >= oh as isize {
                            continue;
                        }
                        for v in 0..kw {
                            let xx = (j * stride + v) as isize - padding as isize;
                            if xx < 0 || xx >= ow as isize {
                                continue;
                            }
                            out[(o * oh + y as usize) * ow + xx as usize]
                                += x * wd[((c * oc + o) * kh + u) * kw + v];
                        }
                    }
                }
            }
        }
    }
    out
}

fn convt_backward(
    input: &[f64],
    weight: &Tensor,
    stride: usize,
    padding: usize,
    in_shape: &[usize; 3],
    d_out: &[f64],
) -> (Vec<f64>, LayerGrads) {
    let [ic, h, w] = *in_shape;
    let ws = weight.shape();
    let (oc, kh, kw) = (ws[1], ws[2], ws[3]);
    let (oh, ow) = convt_out_hw(in_shape, ws, stride, padding).expect("validated at build");
    let wd = weight.data();

    let mut d_in = vec![0.0; ic * h * w];
    let mut d_weight = vec![0.0; wd.len()];
    let mut d_bias = vec![0.0; oc];

    for o in 0..oc {
        for p in &d_out[o * oh * ow..(o + 1) * oh * ow] {
            d_bias[o] += p;
        }
    }
    for c in 0..ic {
        for i in 0..h {
            for j in 0..w {
                let iidx = (c * h + i) * w + j;
                let x = input[iidx];
                let mut acc = 0.0;
                for o in 0..oc {
                    for u in 0..kh {
                        let y = (i * stride + u) as isize - padding as isize;
                        if y < 0 || y >= oh as isize {
                            continue;
                        }
                        for v in 0..kw {
                            let xx = (j * stride + v) as isize - padding as isize;
                            if xx < 0 || xx >= ow as isize {
                                continue;
                            }
                            let g = d_out[(o * oh + y as usize) * ow + xx as usize];
                            let widx = ((c * oc + o) * kh + u) * kw + v;
                            acc += g * wd[widx];
                            d_weight[widx] += g * x;
                        }
                    }
                }
                d_in[iidx] = acc;
            }
        }
    }

    (
        d_in,
        LayerGrads::ConvTranspose {
            d_weight: Tensor::new(ws.to_vec(), d_weight).expect("finite gradients"),
            d_bias: Tensor::from_flat(d_bias).expect("finite gradients"),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn dense_forward_and_backward() {
        let layer = LayerSpec::Dense {
            weight: t(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            bias: t(vec![2], vec![0.5, -0.5]),
        };
        let out = layer.forward(&[1.0, 0.0, -1.0], None);
        assert_eq!(out, vec![1.0 - 3.0 + 0.5, 4.0 - 6.0 - 0.5]);

        // pure linear layer: d_in = W^T d_out exactly
        let (d_in, grads) = layer.backward(&[1.0, 0.0, -1.0], None, &[1.0, -1.0]);
        assert_eq!(d_in, vec![1.0 - 4.0, 2.0 - 5.0, 3.0 - 6.0]);
        match grads {
            LayerGrads::Dense { d_weight, d_bias } => {
                assert_eq!(d_weight.data(), &[1.0, 0.0, -1.0, -1.0, 0.0, 1.0]);
                assert_eq!(d_bias.data(), &[1.0, -1.0]);
            }
            _ => panic!("dense grads expected"),
        }
    }

    #[test]
    fn dense_weight_grad_matches_squared_error_closed_form() {
        // One dense row, one sample, L = (yhat - y)^2.
        let layer = LayerSpec::Dense {
            weight: t(vec![1, 3], vec![0.2, -0.1, 0.4]),
            bias: t(vec![1], vec![0.0]),
        };
        let input = [0.3, 0.7, -0.2];
        let target = 1.0;
        let yhat = layer.forward(&input, None)[0];
        // dL/dyhat = 2 (yhat - y)
        let (_, grads) = layer.backward(&input, None, &[2.0 * (yhat - target)]);
        match grads {
            LayerGrads::Dense { d_weight, .. } => {
                for (g, x) in d_weight.data().iter().zip(input) {
                    assert!((g - 2.0 * (yhat - target) * x).abs() < 1e-15);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_weight_grads() {
        let layer = LayerSpec::Dense {
            weight: t(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]),
            bias: t(vec![2], vec![0.1, 0.2]),
        };
        let (d_in, grads) = layer.backward(&[0.5, -0.5], None, &[0.0, 0.0]);
        assert!(d_in.iter().all(|&v| v == 0.0));
        for g in grads.tensors() {
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
    }

    /// <conv(x), y> == <x, conv_transpose(y)> when both use the same kernel,
    /// which is exactly the adjoint definition.
    #[test]
    fn conv_transpose_is_the_adjoint_of_conv() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
        for &(stride, padding, k) in &[(1usize, 0usize, 3usize), (1, 1, 3), (2, 1, 4), (2, 0, 4)] {
            let (ic, oc, kh, kw) = (2usize, 3usize, k, k);
            let (h, w) = (6usize, 6usize);
            let weight_fwd: Vec<f64> = (0..oc * ic * kh * kw).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let conv = LayerSpec::Conv {
                weight: t(vec![oc, ic, kh, kw], weight_fwd.clone()),
                bias: Tensor::zeros(vec![oc]),
                stride,
                padding,
                in_shape: [ic, h, w],
            };
            let (oh, ow) = conv_out_hw(&[ic, h, w], &[oc, ic, kh, kw], stride, padding).unwrap();

            // The adjoint reuses the conv buffer verbatim: transpose input
            // channels are the conv's output channels and vice versa, so the
            // (oc, ic, kh, kw) layout reads as (in_c, out_c, kh, kw) here.
            let convt = LayerSpec::ConvTranspose {
                weight: t(vec![oc, ic, kh, kw], weight_fwd.clone()),
                bias: Tensor::zeros(vec![ic]),
                stride,
                padding,
                in_shape: [oc, oh, ow],
            };
            // conv_transpose of the conv output shape must return to (ic,h,w)
            assert_eq!(convt.out_len(oc * oh * ow).unwrap(), ic * h * w);

            let x: Vec<f64> = (0..ic * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..oc * oh * ow).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cx = conv.forward(&x, None);
            let cty = convt.forward(&y, None);
            let lhs: f64 = cx.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&cty).map(|(a, b)| a * b).sum();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "adjoint identity failed at stride {stride} padding {padding}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn upsample_nearest_shapes_and_values() {
        let layer = LayerSpec::UpsampleNearest {
            factor: 2,
            in_shape: [1, 2, 2],
        };
        let out = layer.forward(&[1.0, 2.0, 3.0, 4.0], None);
        assert_eq!(
            out,
            vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0]
        );
        let (d_in, _) = layer.backward(&[1.0, 2.0, 3.0, 4.0], None, &vec![1.0; 16]);
        assert_eq!(d_in, vec![4.0; 4]);
    }

    #[test]
    fn concat_onehot_appends_and_blocks_gradient() {
        let layer = LayerSpec::ConcatOnehot { class_count: 3 };
        let out = layer.forward(&[0.5, -0.5], Some(1));
        assert_eq!(out, vec![0.5, -0.5, 0.0, 1.0, 0.0]);
        let (d_in, _) = layer.backward(&[0.5, -0.5], Some(1), &[1.0, 2.0, 9.0, 9.0, 9.0]);
        assert_eq!(d_in, vec![1.0, 2.0]);
    }

    #[test]
    fn batchnorm_rejects_nonpositive_variance() {
        let layer = LayerSpec::BatchnormInference {
            scale: Tensor::filled(vec![2], 1.0),
            shift: Tensor::zeros(vec![2]),
            mean: Tensor::zeros(vec![2]),
            variance: Tensor::new(vec![2], vec![1.0, 0.0]).unwrap(),
            epsilon: 1e-5,
            channels: 2,
        };
        assert!(layer.validate().is_err());
    }

    #[test]
    fn conv_geometry_must_divide_stride() {
        let layer = LayerSpec::Conv {
            weight: Tensor::zeros(vec![1, 1, 3, 3]),
            bias: Tensor::zeros(vec![1]),
            stride: 2,
            padding: 0,
            in_shape: [1, 6, 6],
        };
        // (6 - 3) % 2 != 0
        assert!(layer.out_len(36).is_err());
    }
}
