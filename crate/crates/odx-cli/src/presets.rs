//! Generator architecture presets and the JSON architecture-file format for
//! `model init-random`.
//!
//! An architecture file describes the layer chain without weights:
//!
//! ```json
//! {
//!   "output_shape": [3, 8, 8],
//!   "layers": [
//!     {"kind": "dense", "out": 48},
//!     {"kind": "relu"},
//!     {"kind": "reshape", "shape": [12, 2, 2]},
//!     {"kind": "conv_transpose", "out_channels": 8, "kernel": 4, "stride": 2, "padding": 1},
//!     {"kind": "relu"},
//!     {"kind": "conv_transpose", "out_channels": 3, "kernel": 4, "stride": 2, "padding": 1},
//!     {"kind": "tanh"}
//!   ]
//! }
//! ```
//!
//! `init-random` materializes weights with seeded Xavier-uniform draws
//! (rounded to the container's f32 grid) and zero biases; batchnorm starts
//! as the identity normalization.

use odx_core::layer::LayerSpec;
use odx_core::model::GeneratorModel;
use odx_core::prior::PriorKind;
use odx_core::tensor::Tensor;
use odx_core::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct ArchFile {
    pub output_shape: [usize; 3],
    pub layers: Vec<ArchLayer>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArchLayer {
    Dense {
        out: usize,
    },
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    ConvTranspose {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    BatchnormInference,
    Relu,
    Tanh,
    Sigmoid,
    Reshape {
        shape: Vec<usize>,
    },
    UpsampleNearest {
        factor: usize,
    },
}

pub fn preset(name: &str) -> Result<ArchFile> {
    let json = match name {
        "mlp8" => {
            r#"{"output_shape":[3,8,8],"layers":[
                {"kind":"dense","out":48},{"kind":"relu"},
                {"kind":"dense","out":96},{"kind":"relu"},
                {"kind":"dense","out":192},{"kind":"tanh"}]}"#
        }
        "conv8" => {
            r#"{"output_shape":[3,8,8],"layers":[
                {"kind":"dense","out":48},{"kind":"relu"},
                {"kind":"reshape","shape":[12,2,2]},
                {"kind":"conv_transpose","out_channels":8,"kernel":4,"stride":2,"padding":1},
                {"kind":"relu"},
                {"kind":"conv_transpose","out_channels":3,"kernel":4,"stride":2,"padding":1},
                {"kind":"tanh"}]}"#
        }
        "conv16" => {
            r#"{"output_shape":[3,16,16],"layers":[
                {"kind":"dense","out":96},{"kind":"relu"},
                {"kind":"reshape","shape":[24,2,2]},
                {"kind":"conv_transpose","out_channels":16,"kernel":4,"stride":2,"padding":1},
                {"kind":"batchnorm_inference"},{"kind":"relu"},
                {"kind":"upsample_nearest","factor":2},
                {"kind":"conv","out_channels":8,"kernel":3,"stride":1,"padding":1},
                {"kind":"relu"},
                {"kind":"conv_transpose","out_channels":3,"kernel":4,"stride":2,"padding":1},
                {"kind":"tanh"}]}"#
        }
        other => {
            return Err(Error::parameter(format!(
                "unknown preset {other:?} (expected mlp8, conv8 or conv16) and no such file exists"
            )))
        }
    };
    serde_json::from_str(json).map_err(|e| Error::numeric(format!("builtin preset broken: {e}")))
}

/// Resolves `--arch`: a preset name, or a path to an architecture file.
pub fn load_arch(spec: &str) -> Result<ArchFile> {
    let path = std::path::Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        return serde_json::from_str(&text).map_err(|e| {
            Error::format(0, format!("{}: invalid architecture file: {e}", path.display()))
        });
    }
    preset(spec)
}

/// Tracks the activation shape while materializing layers.
enum Shape {
    Flat(usize),
    Spatial([usize; 3]),
}

impl Shape {
    fn len(&self) -> usize {
        match self {
            Shape::Flat(n) => *n,
            Shape::Spatial([c, h, w]) => c * h * w,
        }
    }

    fn spatial(&self) -> Result<[usize; 3]> {
        match self {
            Shape::Spatial(s) => Ok(*s),
            Shape::Flat(n) => Err(Error::dimension(format!(
                "spatial layer needs a (channels, height, width) input; got a flat width of {n} (insert a reshape)"
            ))),
        }
    }
}

fn xavier(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| (rng.gen_range(-limit..limit) as f32) as f64)
        .collect();
    Tensor::new(shape, data).expect("finite init")
}

/// Builds a seeded random generator from an architecture description.
pub fn build_generator(
    arch: &ArchFile,
    latent_dim: usize,
    prior: PriorKind,
    class_count: Option<usize>,
    seed: u64,
) -> Result<GeneratorModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers: Vec<LayerSpec> = Vec::new();
    let mut shape = Shape::Flat(latent_dim + class_count.unwrap_or(0));
    if let Some(classes) = class_count {
        layers.push(LayerSpec::ConcatOnehot {
            class_count: classes,
        });
    }

    for layer in &arch.layers {
        let spec = match layer {
            ArchLayer::Dense { out } => {
                let in_w = shape.len();
                let spec = LayerSpec::Dense {
                    weight: xavier(&mut rng, vec![*out, in_w], in_w, *out),
                    bias: Tensor::zeros(vec![*out]),
                };
                shape = Shape::Flat(*out);
                spec
            }
            ArchLayer::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let [c, h, w] = shape.spatial()?;
                let spec = LayerSpec::Conv {
                    weight: xavier(
                        &mut rng,
                        vec![*out_channels, c, *kernel, *kernel],
                        c * kernel * kernel,
                        out_channels * kernel * kernel,
                    ),
                    bias: Tensor::zeros(vec![*out_channels]),
                    stride: *stride,
                    padding: *padding,
                    in_shape: [c, h, w],
                };
                let oh = (h + 2 * padding).checked_sub(*kernel).ok_or_else(|| {
                    Error::dimension("conv kernel larger than padded input".to_string())
                })? / stride
                    + 1;
                let ow = (w + 2 * padding - kernel) / stride + 1;
                shape = Shape::Spatial([*out_channels, oh, ow]);
                spec
            }
            ArchLayer::ConvTranspose {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let [c, h, w] = shape.spatial()?;
                let spec = LayerSpec::ConvTranspose {
                    weight: xavier(
                        &mut rng,
                        vec![c, *out_channels, *kernel, *kernel],
                        c * kernel * kernel,
                        out_channels * kernel * kernel,
                    ),
                    bias: Tensor::zeros(vec![*out_channels]),
                    stride: *stride,
                    padding: *padding,
                    in_shape: [c, h, w],
                };
                let oh = (h - 1) * stride + kernel - 2 * padding;
                let ow = (w - 1) * stride + kernel - 2 * padding;
                shape = Shape::Spatial([*out_channels, oh, ow]);
                spec
            }
            ArchLayer::BatchnormInference => {
                let [c, h, w] = shape.spatial()?;
                shape = Shape::Spatial([c, h, w]);
                LayerSpec::BatchnormInference {
                    scale: Tensor::filled(vec![c], 1.0),
                    shift: Tensor::zeros(vec![c]),
                    mean: Tensor::zeros(vec![c]),
                    variance: Tensor::filled(vec![c], 1.0),
                    epsilon: 1e-5,
                    channels: c,
                }
            }
            ArchLayer::Relu => LayerSpec::Relu,
            ArchLayer::Tanh => LayerSpec::Tanh,
            ArchLayer::Sigmoid => LayerSpec::Sigmoid,
            ArchLayer::Reshape { shape: target } => {
                if target.len() == 3 {
                    shape = Shape::Spatial([target[0], target[1], target[2]]);
                } else {
                    shape = Shape::Flat(target.iter().product());
                }
                LayerSpec::Reshape {
                    shape: target.clone(),
                }
            }
            ArchLayer::UpsampleNearest { factor } => {
                let [c, h, w] = shape.spatial()?;
                let spec = LayerSpec::UpsampleNearest {
                    factor: *factor,
                    in_shape: [c, h, w],
                };
                shape = Shape::Spatial([c, h * factor, w * factor]);
                spec
            }
        };
        layers.push(spec);
    }

    GeneratorModel::new(
        layers,
        latent_dim,
        prior,
        class_count,
        (
            arch.output_shape[0],
            arch.output_shape[1],
            arch.output_shape[2],
        ),
    )
}
