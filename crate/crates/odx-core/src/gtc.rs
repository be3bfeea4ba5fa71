//! The GTC weight container.
//!
//! Layout:
//!   bytes 0..8    magic `GTCv0001`
//!   bytes 8..12   u32 little-endian manifest length L
//!   bytes 12..12+L  UTF-8 JSON manifest
//!   remainder     concatenated raw little-endian IEEE-754 f32, row-major
//!
//! The manifest describes the model structure (kind, layer list with
//! hyperparameters, latent_dim, prior name, class_count, output_shape) and a
//! tensor table of {name, shape, dtype, offset, byte_length} entries with
//! offsets relative to the payload start. Readers reject overlapping or
//! out-of-bounds tensor entries. Weights are stored at f32 and widened to
//! f64 on load; models built by this crate keep their parameters on the f32
//! grid, so a save/load round trip reproduces forward outputs bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::LayerSpec;
use crate::model::{DiscriminatorModel, GeneratorModel};
use crate::prior::PriorKind;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"GTCv0001";

/// A model as stored in a container.
#[derive(Debug, Clone)]
pub enum Model {
    Generator(GeneratorModel),
    Discriminator(DiscriminatorModel),
}

impl Model {
    pub fn as_generator(&self) -> Result<&GeneratorModel> {
        match self {
            Model::Generator(g) => Ok(g),
            Model::Discriminator(_) => Err(Error::configuration(
                "expected a generator model, found a discriminator".to_string(),
            )),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    latent_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_shape: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    layers: Vec<LayerManifest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_head: Option<LayerManifest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_head: Option<LayerManifest>,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerManifest {
    Dense,
    Conv {
        stride: usize,
        padding: usize,
        in_shape: [usize; 3],
    },
    ConvTranspose {
        stride: usize,
        padding: usize,
        in_shape: [usize; 3],
    },
    BatchnormInference {
        epsilon: f64,
        channels: usize,
    },
    Relu,
    Tanh,
    Sigmoid,
    Reshape {
        shape: Vec<usize>,
    },
    UpsampleNearest {
        factor: usize,
        in_shape: [usize; 3],
    },
    ConcatOnehot {
        class_count: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
    byte_length: u64,
}

struct PayloadWriter {
    entries: Vec<TensorEntry>,
    bytes: Vec<u8>,
}

impl PayloadWriter {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
            bytes: Vec::new(),
        }
    }

    fn push(&mut self, name: String, tensor: &Tensor) {
        let offset = self.bytes.len() as u64;
        for &v in tensor.data() {
            self.bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        self.entries.push(TensorEntry {
            name,
            shape: tensor.shape().to_vec(),
            dtype: "f32".to_string(),
            offset,
            byte_length: (tensor.len() * 4) as u64,
        });
    }
}

fn layer_manifest(layer: &LayerSpec) -> LayerManifest {
    match layer {
        LayerSpec::Dense { .. } => LayerManifest::Dense,
        LayerSpec::Conv {
            stride,
            padding,
            in_shape,
            ..
        } => LayerManifest::Conv {
            stride: *stride,
            padding: *padding,
            in_shape: *in_shape,
        },
        LayerSpec::ConvTranspose {
            stride,
            padding,
            in_shape,
            ..
        } => LayerManifest::ConvTranspose {
            stride: *stride,
            padding: *padding,
            in_shape: *in_shape,
        },
        LayerSpec::BatchnormInference {
            epsilon, channels, ..
        } => LayerManifest::BatchnormInference {
            epsilon: *epsilon,
            channels: *channels,
        },
        LayerSpec::Relu => LayerManifest::Relu,
        LayerSpec::Tanh => LayerManifest::Tanh,
        LayerSpec::Sigmoid => LayerManifest::Sigmoid,
        LayerSpec::Reshape { shape } => LayerManifest::Reshape {
            shape: shape.clone(),
        },
        LayerSpec::UpsampleNearest { factor, in_shape } => LayerManifest::UpsampleNearest {
            factor: *factor,
            in_shape: *in_shape,
        },
        LayerSpec::ConcatOnehot { class_count } => LayerManifest::ConcatOnehot {
            class_count: *class_count,
        },
    }
}

fn push_layer_params(writer: &mut PayloadWriter, prefix: &str, layer: &LayerSpec) {
    for (slot, tensor) in layer.params() {
        writer.push(format!("{prefix}.{slot}"), tensor);
    }
}

/// Serializes a model into container bytes.
pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let mut writer = PayloadWriter::new();
    let manifest = match model {
        Model::Generator(g) => {
            for (idx, layer) in g.layers().iter().enumerate() {
                push_layer_params(&mut writer, &format!("layers.{idx}"), layer);
            }
            Manifest {
                kind: "generator".to_string(),
                latent_dim: Some(g.latent_dim()),
                prior: Some(g.prior().name().to_string()),
                class_count: g.class_count(),
                output_shape: Some([
                    g.output_shape().0,
                    g.output_shape().1,
                    g.output_shape().2,
                ]),
                input_len: None,
                dataset: g.dataset().map(|s| s.to_string()),
                layers: g.layers().iter().map(layer_manifest).collect(),
                source_head: None,
                class_head: None,
                tensors: Vec::new(),
            }
        }
        Model::Discriminator(d) => {
            for (idx, layer) in d.trunk_layers().iter().enumerate() {
                push_layer_params(&mut writer, &format!("layers.{idx}"), layer);
            }
            push_layer_params(&mut writer, "source_head", d.source_head());
            if let Some(head) = d.class_head() {
                push_layer_params(&mut writer, "class_head", head);
            }
            Manifest {
                kind: "discriminator".to_string(),
                latent_dim: None,
                prior: None,
                class_count: d.class_count(),
                output_shape: None,
                input_len: Some(d.input_len()),
                dataset: None,
                layers: d.trunk_layers().iter().map(layer_manifest).collect(),
                source_head: Some(layer_manifest(d.source_head())),
                class_head: d.class_head().map(layer_manifest),
                tensors: Vec::new(),
            }
        }
    };

    let manifest = Manifest {
        tensors: writer.entries.clone(),
        ..manifest
    };
    let manifest_json = serde_json::to_vec(&manifest).expect("manifest serializes");

    let mut out = Vec::with_capacity(12 + manifest_json.len() + writer.bytes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_json);
    out.extend_from_slice(&writer.bytes);
    out
}

/// Writes the container atomically (temp file + rename).
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = model_to_bytes(model);
    let tmp = path.with_extension("gtc.partial");
    let mut file =
        fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    file.write_all(&bytes)
        .and_then(|_| file.sync_all())
        .map_err(|e| Error::io(tmp.display().to_string(), e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

struct PayloadReader<'a> {
    payload: &'a [u8],
    entries: &'a [TensorEntry],
    payload_start: u64,
    cursor: usize,
}

impl<'a> PayloadReader<'a> {
    fn take(&mut self, want_name: &str) -> Result<Tensor> {
        let entry = self.entries.get(self.cursor).ok_or_else(|| {
            Error::format(
                self.payload_start,
                format!("manifest is missing tensor entry {want_name:?}"),
            )
        })?;
        self.cursor += 1;
        if entry.name != want_name {
            return Err(Error::format(
                self.payload_start,
                format!(
                    "tensor entry order mismatch: expected {want_name:?}, found {:?}",
                    entry.name
                ),
            ));
        }
        if entry.dtype != "f32" {
            return Err(Error::format(
                self.payload_start + entry.offset,
                format!("tensor {want_name:?} has unsupported dtype {:?}", entry.dtype),
            ));
        }
        let count: usize = entry.shape.iter().product();
        if entry.byte_length != (count * 4) as u64 {
            return Err(Error::format(
                self.payload_start + entry.offset,
                format!(
                    "tensor {want_name:?} shape {:?} needs {} bytes, entry declares {}",
                    entry.shape,
                    count * 4,
                    entry.byte_length
                ),
            ));
        }
        let start = entry.offset as usize;
        let end = start + entry.byte_length as usize;
        if end > self.payload.len() {
            return Err(Error::format(
                self.payload_start + entry.offset,
                format!(
                    "tensor {want_name:?} extends to payload byte {end}, payload has {}",
                    self.payload.len()
                ),
            ));
        }
        let mut data = Vec::with_capacity(count);
        for chunk in self.payload[start..end].chunks_exact(4) {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
            data.push(v);
        }
        Tensor::new(entry.shape.clone(), data)
            .map_err(|e| Error::format(self.payload_start + entry.offset, e.to_string()))
    }
}

fn rebuild_layer(
    manifest: &LayerManifest,
    prefix: &str,
    reader: &mut PayloadReader<'_>,
) -> Result<LayerSpec> {
    Ok(match manifest {
        LayerManifest::Dense => LayerSpec::Dense {
            weight: reader.take(&format!("{prefix}.weight"))?,
            bias: reader.take(&format!("{prefix}.bias"))?,
        },
        LayerManifest::Conv {
            stride,
            padding,
            in_shape,
        } => LayerSpec::Conv {
            weight: reader.take(&format!("{prefix}.weight"))?,
            bias: reader.take(&format!("{prefix}.bias"))?,
            stride: *stride,
            padding: *padding,
            in_shape: *in_shape,
        },
        LayerManifest::ConvTranspose {
            stride,
            padding,
            in_shape,
        } => LayerSpec::ConvTranspose {
            weight: reader.take(&format!("{prefix}.weight"))?,
            bias: reader.take(&format!("{prefix}.bias"))?,
            stride: *stride,
            padding: *padding,
            in_shape: *in_shape,
        },
        LayerManifest::BatchnormInference { epsilon, channels } => {
            LayerSpec::BatchnormInference {
                scale: reader.take(&format!("{prefix}.scale"))?,
                shift: reader.take(&format!("{prefix}.shift"))?,
                mean: reader.take(&format!("{prefix}.mean"))?,
                variance: reader.take(&format!("{prefix}.variance"))?,
                epsilon: *epsilon,
                channels: *channels,
            }
        }
        LayerManifest::Relu => LayerSpec::Relu,
        LayerManifest::Tanh => LayerSpec::Tanh,
        LayerManifest::Sigmoid => LayerSpec::Sigmoid,
        LayerManifest::Reshape { shape } => LayerSpec::Reshape {
            shape: shape.clone(),
        },
        LayerManifest::UpsampleNearest { factor, in_shape } => LayerSpec::UpsampleNearest {
            factor: *factor,
            in_shape: *in_shape,
        },
        LayerManifest::ConcatOnehot { class_count } => LayerSpec::ConcatOnehot {
            class_count: *class_count,
        },
    })
}

/// Parses a container from bytes.
pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 12 {
        return Err(Error::format(0, "file shorter than the 12-byte header"));
    }
    if &bytes[0..8] != MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected {:?}", &bytes[0..8], MAGIC),
        ));
    }
    let manifest_len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let manifest_end = 12usize
        .checked_add(manifest_len)
        .ok_or_else(|| Error::format(8, "manifest length overflows"))?;
    if manifest_end > bytes.len() {
        return Err(Error::format(
            8,
            format!(
                "manifest declares {manifest_len} bytes but only {} remain",
                bytes.len() - 12
            ),
        ));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[12..manifest_end])
        .map_err(|e| Error::format(12, format!("manifest is not valid JSON: {e}")))?;
    let payload = &bytes[manifest_end..];
    let payload_start = manifest_end as u64;

    // entries must be non-overlapping and in-bounds
    let mut sorted: Vec<&TensorEntry> = manifest.tensors.iter().collect();
    sorted.sort_by_key(|e| e.offset);
    let mut prev_end = 0u64;
    for entry in sorted {
        if entry.offset < prev_end {
            return Err(Error::format(
                payload_start + entry.offset,
                format!("tensor {:?} overlaps the previous entry", entry.name),
            ));
        }
        let end = entry.offset.checked_add(entry.byte_length).ok_or_else(|| {
            Error::format(payload_start + entry.offset, "tensor extent overflows")
        })?;
        if end > payload.len() as u64 {
            return Err(Error::format(
                payload_start + entry.offset,
                format!(
                    "tensor {:?} runs past the payload ({} > {})",
                    entry.name,
                    end,
                    payload.len()
                ),
            ));
        }
        prev_end = end;
    }

    let mut reader = PayloadReader {
        payload,
        entries: &manifest.tensors,
        payload_start,
        cursor: 0,
    };

    match manifest.kind.as_str() {
        "generator" => {
            let latent_dim = manifest
                .latent_dim
                .ok_or_else(|| Error::format(12, "generator manifest lacks latent_dim"))?;
            let prior_name = manifest
                .prior
                .as_deref()
                .ok_or_else(|| Error::format(12, "generator manifest lacks prior"))?;
            let prior =
                PriorKind::parse(prior_name).map_err(|e| Error::format(12, e.to_string()))?;
            let output_shape = manifest
                .output_shape
                .ok_or_else(|| Error::format(12, "generator manifest lacks output_shape"))?;
            let mut layers = Vec::with_capacity(manifest.layers.len());
            for (idx, lm) in manifest.layers.iter().enumerate() {
                layers.push(rebuild_layer(lm, &format!("layers.{idx}"), &mut reader)?);
            }
            let mut model = GeneratorModel::new(
                layers,
                latent_dim,
                prior,
                manifest.class_count,
                (output_shape[0], output_shape[1], output_shape[2]),
            )
            .map_err(|e| Error::format(12, format!("manifest describes an invalid model: {e}")))?;
            if let Some(name) = manifest.dataset {
                model = model.with_dataset(name);
            }
            Ok(Model::Generator(model))
        }
        "discriminator" => {
            let input_len = manifest
                .input_len
                .ok_or_else(|| Error::format(12, "discriminator manifest lacks input_len"))?;
            let mut layers = Vec::with_capacity(manifest.layers.len());
            for (idx, lm) in manifest.layers.iter().enumerate() {
                layers.push(rebuild_layer(lm, &format!("layers.{idx}"), &mut reader)?);
            }
            let source_manifest = manifest
                .source_head
                .as_ref()
                .ok_or_else(|| Error::format(12, "discriminator manifest lacks source_head"))?;
            let source_head = rebuild_layer(source_manifest, "source_head", &mut reader)?;
            let class_head = manifest
                .class_head
                .as_ref()
                .map(|lm| rebuild_layer(lm, "class_head", &mut reader))
                .transpose()?;
            let model = DiscriminatorModel::new(layers, source_head, class_head, input_len)
                .map_err(|e| {
                    Error::format(12, format!("manifest describes an invalid model: {e}"))
                })?;
            Ok(Model::Discriminator(model))
        }
        other => Err(Error::format(
            12,
            format!("unknown model kind {other:?}"),
        )),
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    model_from_bytes(&bytes)
}

/// Loads a container that must hold a generator.
pub fn load_generator(path: impl AsRef<Path>) -> Result<GeneratorModel> {
    match load_model(&path)? {
        Model::Generator(g) => Ok(g),
        Model::Discriminator(_) => Err(Error::configuration(format!(
            "{} holds a discriminator, expected a generator",
            path.as_ref().display()
        ))),
    }
}
